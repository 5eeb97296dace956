use cardioxnet::layers::softmax;
use cardioxnet::model::{build_model, Model, ModelConfig};
use cardioxnet::signal::{AudioClip, Dataset};
use cardioxnet::training::report::{
    fold_rows, read_confusion, read_folds, read_history, read_metrics, read_summary, summary_rows, write_confusion,
    write_folds, write_history, write_metrics, write_summary,
};
use cardioxnet::training::{
    adam_step, cross_validate_with, evaluate, sparse_ce_grad, sparse_ce_loss, split_dataset, stratified_kfold, train,
    AdamState, MetricsReport, TrainConfig, TrainError,
};
use cardioxnet::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn names(k: usize) -> Vec<String> {
    (0..k).map(|c| format!("c{c}")).collect()
}

/// Random clips for the tiny preset; class `c` gets a DC offset so the task is learnable.
fn tiny_data(per_class: usize, seed: u64) -> Dataset {
    let cfg = ModelConfig::tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = names(cfg.class_count);
    let mut clips = Vec::new();
    for (c, name) in classes.iter().enumerate() {
        for i in 0..per_class {
            let x: Vec<f64> = (0..cfg.input_len)
                .map(|_| rng.random_range(-0.3..0.3) + 0.15 * c as f64)
                .collect();
            let mut clip = AudioClip::new(x, cfg.sample_rate);
            clip.label = Some(name.clone());
            clip.source_id = format!("{name}_{i}");
            clips.push(clip);
        }
    }
    Dataset::from_clips(clips, &classes).unwrap()
}

/// Row-wise softmax of a `[B × K]` logit matrix.
fn softmax_rows(z: &Tensor) -> Tensor {
    let rows: Vec<Tensor> = z.unstack().iter().map(|r| softmax(r).unwrap()).collect();
    Tensor::stack(&rows).unwrap()
}

fn random_probs(rng: &mut ChaCha8Rng, b: usize, k: usize) -> Tensor {
    softmax_rows(&Tensor::uniform(&[b, k], 3.0, rng))
}

// ---- loss ----

#[test]
fn uniform_loss_is_ln_k() {
    for k in 2..12 {
        let p = Tensor::full(&[4, k], 1.0 / k as f64);
        let l = sparse_ce_loss(&p, &[0, 1, k - 1, 1]).unwrap();
        assert!((l - (k as f64).ln()).abs() < 1e-12);
    }
    assert!((sparse_ce_loss(&Tensor::full(&[1, 5], 0.2), &[3]).unwrap() - 1.6094).abs() < 1e-4);
}

#[test]
fn perfect_predictions_hit_clamp_floor() {
    let p = Tensor::new(vec![3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
    assert!(sparse_ce_loss(&p, &[0, 1, 2]).unwrap() <= 1e-11);
    // a zero probability on the true class is clamped, not infinite
    let l = sparse_ce_loss(&p, &[1, 1, 2]).unwrap();
    assert!((l - 12.0 * 10f64.ln() / 3.0).abs() < 1e-9);
}

#[test]
fn loss_matches_hand_computation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (b, k) = (rng.random_range(1..9), rng.random_range(2..7));
        let p = random_probs(&mut rng, b, k);
        let y: Vec<usize> = (0..b).map(|_| rng.random_range(0..k)).collect();
        let mut hand = 0.0;
        for i in 0..b {
            hand -= p.data()[i * k + y[i]].ln();
        }
        hand /= b as f64;
        assert!((sparse_ce_loss(&p, &y).unwrap() - hand).abs() < 1e-12);
    }
}

#[test]
fn out_of_range_label_rejected() {
    let p = Tensor::full(&[2, 3], 1.0 / 3.0);
    assert!(matches!(
        sparse_ce_loss(&p, &[0, 3]),
        Err(TrainError::Label { index: 1, label: 3, classes: 3 })
    ));
    assert!(sparse_ce_grad(&p, &[5, 0]).is_err());
}

#[test]
fn softmax_ce_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let (b, k) = (rng.random_range(1..6), rng.random_range(2..7));
        let z = Tensor::uniform(&[b, k], 2.0, &mut rng);
        let y: Vec<usize> = (0..b).map(|_| rng.random_range(0..k)).collect();
        let f = |z: &Tensor| sparse_ce_loss(&softmax_rows(z), &y).unwrap();
        let g = sparse_ce_grad(&softmax_rows(&z), &y).unwrap();
        let h = 1e-5;
        for j in 0..z.len() {
            let mut up = z.clone();
            up.data_mut()[j] += h;
            let mut down = z.clone();
            down.data_mut()[j] -= h;
            let fd = (f(&up) - f(&down)) / (2.0 * h);
            assert!((fd - g.data()[j]).abs() < 1e-6, "{fd} vs {}", g.data()[j]);
        }
    }
}

proptest! {
    #[test]
    fn loss_non_negative(seed in 0u64..10_000, b in 1usize..6, k in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_probs(&mut rng, b, k);
        let y: Vec<usize> = (0..b).map(|_| rng.random_range(0..k)).collect();
        prop_assert!(sparse_ce_loss(&p, &y).unwrap() >= 0.0);
    }
}

// ---- Adam ----

fn adam_cfg(lr: f64) -> TrainConfig {
    TrainConfig {
        learning_rate: lr,
        ..TrainConfig::default()
    }
}

#[test]
fn three_step_adam_matches_scalar_recurrence() {
    let cfg = adam_cfg(0.01);
    let grads = [0.3, -1.2, 0.05];
    let mut p = Tensor::from_vec(vec![0.7]);
    let mut state = AdamState::new([&p]);
    let (mut x, mut m, mut v) = (0.7f64, 0.0f64, 0.0f64);
    for (t, &g) in grads.iter().enumerate() {
        adam_step(vec![&mut p], &["w".into()], &[Tensor::from_vec(vec![g])], &mut state, &cfg).unwrap();
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        let mh = m / (1.0 - 0.9f64.powi(t as i32 + 1));
        let vh = v / (1.0 - 0.999f64.powi(t as i32 + 1));
        x -= 0.01 * mh / (vh.sqrt() + 1e-7);
        assert!((p.data()[0] - x).abs() < 1e-12);
    }
    assert_eq!(state.step, 3);
}

#[test]
fn first_step_is_lr_times_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let lr = 1e-3;
    let g: Vec<f64> = (0..200)
        .map(|_| rng.random_range(0.01..5.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let mut p = Tensor::zeros(&[200]);
    let mut state = AdamState::new([&p]);
    adam_step(vec![&mut p], &["w".into()], &[Tensor::from_vec(g.clone())], &mut state, &adam_cfg(lr)).unwrap();
    for (d, g) in p.data().iter().zip(&g) {
        assert!(d.abs() >= 0.999 * lr && d.abs() <= lr);
        assert_eq!(d.signum(), -g.signum());
    }
}

#[test]
fn zero_gradient_leaves_params() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut p = Tensor::uniform(&[3, 4], 1.0, &mut rng);
    let before = p.clone();
    let mut state = AdamState::new([&p]);
    for _ in 0..10 {
        adam_step(vec![&mut p], &["w".into()], &[Tensor::zeros(&[3, 4])], &mut state, &adam_cfg(0.1)).unwrap();
    }
    assert_eq!(p, before);
}

#[test]
fn non_finite_gradient_names_parameter() {
    let mut a = Tensor::zeros(&[2]);
    let mut b = Tensor::zeros(&[2]);
    let mut state = AdamState::new([&a, &b]);
    let mut bad = Tensor::zeros(&[2]);
    bad.data_mut()[1] = f64::NAN;
    let err = adam_step(
        vec![&mut a, &mut b],
        &["ffe.0.weight".into(), "head.bias".into()],
        &[Tensor::from_vec(vec![1.0, 1.0]), bad],
        &mut state,
        &adam_cfg(0.1),
    )
    .unwrap_err();
    assert!(matches!(&err, TrainError::NonFiniteGradient(n) if n == "head.bias"));
    assert_eq!(a, Tensor::zeros(&[2]));
    assert_eq!(state.step, 0);
}

// ---- splits ----

#[test]
fn split_200_per_class() {
    let labels: Vec<usize> = (0..1000).map(|i| i % 5).collect();
    let s = split_dataset(&labels, 5, (0.7, 0.1, 0.2), 4).unwrap();
    for c in 0..5 {
        let n = |v: &[usize]| v.iter().filter(|&&i| labels[i] == c).count();
        assert_eq!((n(&s.train), n(&s.val), n(&s.test)), (140, 20, 40));
    }
    assert_eq!(s, split_dataset(&labels, 5, (0.7, 0.1, 0.2), 4).unwrap());
    assert_ne!(s, split_dataset(&labels, 5, (0.7, 0.1, 0.2), 5).unwrap());
}

#[test]
fn split_rejects_small_classes() {
    let labels = vec![0, 0, 0, 1, 1];
    assert!(matches!(
        split_dataset(&labels, 2, (0.7, 0.1, 0.2), 0),
        Err(TrainError::Stratify { class: 1, count: 2, needed: 3 })
    ));
    assert!(split_dataset(&[0, 0, 0], 1, (0.5, 0.1, 0.2), 0).is_err());
}

#[test]
fn kfold_thousand_clips_ten_folds() {
    let labels: Vec<usize> = (0..1000).map(|i| i / 200).collect();
    let plan = stratified_kfold(&labels, 5, 10, 0).unwrap();
    assert_eq!(plan.k(), 10);
    for (f, fold) in plan.folds.iter().enumerate() {
        assert_eq!(fold.len(), 100);
        assert_eq!(plan.histograms[f], vec![20; 5]);
    }
}

#[test]
fn kfold_leave_one_out_and_errors() {
    let plan = stratified_kfold(&[0; 7], 1, 7, 3).unwrap();
    assert!(plan.folds.iter().all(|f| f.len() == 1));
    assert!(matches!(
        stratified_kfold(&[0, 0, 0, 1, 1], 2, 3, 0),
        Err(TrainError::Stratify { class: 1, count: 2, needed: 3 })
    ));
    assert!(stratified_kfold(&[0, 0], 1, 3, 0).is_err());
    assert!(stratified_kfold(&[0, 0], 1, 1, 0).is_err());
}

proptest! {
    #[test]
    fn split_partitions(counts in prop::collection::vec(3usize..40, 1..6), seed in any::<u64>()) {
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| vec![c; n]).collect();
        let s = split_dataset(&labels, counts.len(), (0.7, 0.1, 0.2), seed).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
    }

    #[test]
    fn kfold_partitions_and_balances(
        counts in prop::collection::vec(0usize..30, 1..6),
        k in 2usize..8,
        seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| vec![c; n]).collect();
        let ok = k <= labels.len() && counts.iter().all(|&n| n == 0 || n >= k);
        let res = stratified_kfold(&labels, counts.len(), k, seed);
        prop_assert_eq!(res.is_ok(), ok);
        if let Ok(plan) = res {
            let mut all: Vec<usize> = plan.folds.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for c in 0..counts.len() {
                let per: Vec<usize> = plan.folds.iter()
                    .map(|f| f.iter().filter(|&&i| labels[i] == c).count())
                    .collect();
                prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
                for f in 0..k {
                    prop_assert_eq!(plan.histograms[f][c], per[f]);
                }
            }
            prop_assert_eq!(&plan, &stratified_kfold(&labels, counts.len(), k, seed).unwrap());
        }
    }
}

// ---- metrics ----

#[test]
fn hand_example_all_point_nine() {
    let m = cardioxnet::training::ClassMetrics::from_counts(9, 1, 9, 1);
    for v in [m.precision, m.recall, m.f1, m.accuracy] {
        assert!((v - 0.9).abs() < 1e-15);
    }
}

#[test]
fn perfect_predictions_report() {
    let truth = vec![0, 1, 2, 2, 1, 0, 0];
    let r = MetricsReport::from_predictions(&truth, &truth, names(3)).unwrap();
    assert_eq!(r.confusion, vec![vec![3, 0, 0], vec![0, 2, 0], vec![0, 0, 2]]);
    for v in [r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1, r.macro_accuracy] {
        assert_eq!(v, 1.0);
    }
}

#[test]
fn undefined_precision_flagged() {
    let r = MetricsReport::from_predictions(&[0, 1, 1], &[1, 1, 1], names(2)).unwrap();
    assert!(r.per_class[0].precision_undefined);
    assert_eq!(r.per_class[0].precision, 0.0);
    assert!(!r.per_class[0].recall_undefined);
    assert!(MetricsReport::from_predictions(&[], &[], names(2)).is_err());
}

#[test]
fn random_reports_satisfy_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..1000 {
        let k = rng.random_range(2..7);
        let n = rng.random_range(1..60);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let r = MetricsReport::from_predictions(&truth, &pred, names(k)).unwrap();
        assert!((r.micro_precision() - r.accuracy).abs() < 1e-12);
        assert!((r.micro_recall() - r.accuracy).abs() < 1e-12);
        assert_eq!(r.total(), n);
        let trace: usize = (0..k).map(|c| r.confusion[c][c]).sum();
        assert_eq!(r.accuracy, trace as f64 / n as f64);
        assert_eq!(r.per_class.iter().map(|m| m.tp).sum::<usize>(), trace);
        for c in 0..k {
            assert_eq!(r.confusion[c].iter().sum::<usize>(), truth.iter().filter(|&&t| t == c).count());
            let m = &r.per_class[c];
            assert_eq!(m.tp + m.fp + m.tn + m.fn_, n);
        }
    }
}

#[test]
fn three_class_report_matches_independent_tally() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let truth: Vec<usize> = (0..300).map(|_| rng.random_range(0..3)).collect();
    let pred: Vec<usize> = (0..300).map(|_| rng.random_range(0..3)).collect();
    let r = MetricsReport::from_predictions(&truth, &pred, names(3)).unwrap();
    for c in 0..3 {
        let (mut tp, mut fp, mut tn, mut fn_) = (0.0, 0.0, 0.0, 0.0);
        for (&t, &p) in truth.iter().zip(&pred) {
            match (t == c, p == c) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (false, false) => tn += 1.0,
                (true, false) => fn_ += 1.0,
            }
        }
        let m = &r.per_class[c];
        assert_eq!((m.tp, m.fp, m.tn, m.fn_), (tp as usize, fp as usize, tn as usize, fn_ as usize));
        assert!((m.precision - tp / (tp + fp)).abs() < 1e-15);
        assert!((m.recall - tp / (tp + fn_)).abs() < 1e-15);
        assert!((m.f1 - 2.0 * tp / (2.0 * tp + fp + fn_)).abs() < 1e-15);
        assert!((m.accuracy - (tp + tn) / 300.0).abs() < 1e-15);
    }
    let correct = truth.iter().zip(&pred).filter(|(t, p)| t == p).count();
    assert_eq!(r.accuracy, correct as f64 / 300.0);
}

// ---- training loop ----

fn quick_cfg(lr: f64, epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: lr,
        epochs,
        batch_size: 8,
        patience: epochs,
        seed: 11,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_learning_rate_gives_constant_history() {
    let data = tiny_data(4, 0);
    let model = build_model(&ModelConfig::tiny(), 1).unwrap();
    let cfg = TrainConfig {
        freeze_batchnorm: true,
        ..quick_cfg(0.0, 5)
    };
    let (trained, h) = train(model.clone(), &data, &data, &cfg).unwrap();
    assert_eq!(h.records.len(), 5);
    for r in &h.records {
        assert!((r.train_loss - h.records[0].train_loss).abs() < 1e-9);
        assert!((r.val_loss.unwrap() - h.records[0].val_loss.unwrap()).abs() < 1e-9);
    }
    assert_eq!(trained, model);
}

#[test]
fn training_is_bit_deterministic() {
    let data = tiny_data(4, 1);
    let run = || {
        let model = build_model(&ModelConfig::tiny(), 2).unwrap();
        train(model, &data, &Dataset::from_clips(vec![], &names(3)).unwrap(), &quick_cfg(1e-2, 4)).unwrap()
    };
    let (m1, h1) = run();
    let (m2, h2) = run();
    assert_eq!(h1, h2);
    assert_eq!(m1, m2);
    assert!(h1.records.iter().all(|r| r.val_loss.is_none()));
}

#[test]
fn tiny_model_learns_offsets() {
    let data = tiny_data(6, 2);
    let model = build_model(&ModelConfig::tiny(), 3).unwrap();
    let (trained, h) = train(model, &data, &data, &quick_cfg(1e-2, 60)).unwrap();
    let first = h.records[0].train_loss;
    let best = h.records[h.best_epoch - 1].train_loss;
    assert!(best < first, "{first} -> {best}");
    let report = evaluate(&trained, &data).unwrap();
    assert_eq!(Some(report.accuracy), h.records[h.best_epoch - 1].val_accuracy);
}

#[test]
fn early_stopping_respects_patience() {
    let data = tiny_data(3, 3);
    let model = build_model(&ModelConfig::tiny(), 4).unwrap();
    let cfg = TrainConfig {
        patience: 2,
        freeze_batchnorm: true,
        ..quick_cfg(0.0, 50)
    };
    let (_, h) = train(model, &data, &data, &cfg).unwrap();
    assert!(h.stopped_early);
    assert_eq!(h.best_epoch, 1);
    assert_eq!(h.records.len(), 3);
}

#[test]
fn training_errors() {
    let data = tiny_data(2, 4);
    let model = build_model(&ModelConfig::tiny(), 0).unwrap();
    let empty = Dataset::from_clips(vec![], &names(3)).unwrap();
    assert!(matches!(
        train(model.clone(), &empty, &empty, &quick_cfg(1e-3, 1)),
        Err(TrainError::Empty(_))
    ));
    let two = Dataset::from_clips(
        data.clips.iter().filter(|c| c.label.as_deref() < Some("c2")).cloned().collect(),
        &names(2),
    )
    .unwrap();
    assert!(matches!(
        train(model.clone(), &two, &empty, &quick_cfg(1e-3, 1)),
        Err(TrainError::ClassMismatch { model: 3, data: 2 })
    ));
    assert!(matches!(evaluate(&model, &two), Err(TrainError::ClassMismatch { .. })));
    let bad = TrainConfig {
        batch_size: 0,
        ..quick_cfg(1e-3, 1)
    };
    assert!(matches!(train(model, &data, &empty, &bad), Err(TrainError::Config(_))));
}

/// Zero head weights plus a dominant bias force class `c` for every input.
fn constant_model(c: usize) -> Model {
    let mut m = build_model(&ModelConfig::tiny(), 0).unwrap();
    let head = m.head_mut();
    head.weights = Tensor::zeros(head.weights.shape());
    head.bias.data_mut()[c] = 10.0;
    m
}

#[test]
fn constant_predictor_cross_validation() {
    // 6/12/18 samples per class: prior of class 2 is 1/2 in every fold
    let cfg = ModelConfig::tiny();
    let mut clips = Vec::new();
    for c in 0..3 {
        for i in 0..6 * (c + 1) {
            let mut clip = AudioClip::new(vec![0.01 * i as f64; cfg.input_len], cfg.sample_rate);
            clip.label = Some(format!("c{c}"));
            clips.push(clip);
        }
    }
    let data = Dataset::from_clips(clips, &names(3)).unwrap();
    let cv = cross_validate_with(&data, 3, 9, |_, tr, va| {
        assert!(!tr.is_empty() && !va.is_empty());
        Ok((constant_model(2), None))
    })
    .unwrap();
    assert_eq!(cv.folds.len(), 3);
    for f in &cv.folds {
        let prior = f.report.confusion[2].iter().sum::<usize>() as f64 / f.report.total() as f64;
        assert_eq!(f.report.accuracy, prior);
        assert!((prior - 0.5).abs() < 1e-12);
        assert!(f.report.per_class[0].precision_undefined);
    }
    assert_eq!(cv.accuracy.std, 0.0);
}

// ---- CSV ----

#[test]
fn csv_round_trips() {
    let data = tiny_data(3, 5);
    let model = build_model(&ModelConfig::tiny(), 6).unwrap();
    let (m, h) = train(model, &data, &data, &quick_cfg(3e-3, 3)).unwrap();

    let mut buf = Vec::new();
    write_history(&mut buf, &h.records).unwrap();
    assert_eq!(read_history(&buf[..]).unwrap(), h.records);

    let report = evaluate(&m, &data).unwrap();
    let mut buf = Vec::new();
    write_confusion(&mut buf, &report).unwrap();
    assert_eq!(read_confusion(&buf[..]).unwrap(), report);

    let mut buf = Vec::new();
    write_metrics(&mut buf, &report).unwrap();
    let back = read_metrics(&buf[..]).unwrap();
    assert_eq!(back.iter().map(|(_, m)| m.clone()).collect::<Vec<_>>(), report.per_class);
    assert_eq!(back.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(), report.class_names);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cv = cross_validate_with(&tiny_data(6, 6), 2, 0, |_, _, _| Ok((constant_model(rng.random_range(0..3)), None)))
        .unwrap();
    let rows = fold_rows(&cv);
    let mut buf = Vec::new();
    write_folds(&mut buf, &rows).unwrap();
    assert_eq!(read_folds(&buf[..]).unwrap(), rows);
    let rows = summary_rows(&cv);
    let mut buf = Vec::new();
    write_summary(&mut buf, &rows).unwrap();
    assert_eq!(read_summary(&buf[..]).unwrap(), rows);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn history_csv_lossless(vals in prop::collection::vec((any::<f64>(), 0.0f64..=1.0, prop::option::of(any::<f64>())), 1..20)) {
        let records: Vec<_> = vals
            .iter()
            .enumerate()
            .filter(|(_, (l, _, v))| l.is_finite() && v.is_none_or(|x| x.is_finite()))
            .map(|(i, &(l, a, v))| cardioxnet::training::EpochRecord {
                epoch: i + 1,
                train_loss: l,
                train_accuracy: a,
                val_loss: v,
                val_accuracy: v.map(|_| a),
            })
            .collect();
        let mut buf = Vec::new();
        write_history(&mut buf, &records).unwrap();
        prop_assert_eq!(read_history(&buf[..]).unwrap(), records);
    }
}
