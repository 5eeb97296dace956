use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cardioxnet::model::{build_model, count_params, load_model, save_model, ModelConfig, Precision};
use cardioxnet::signal::{load_dataset, Preprocessor};
use cardioxnet::training::report::{read_confusion, read_folds, read_history, read_metrics, read_summary};
use tempfile::TempDir;

const TRAINED_ACCURACY: f64 = 0.95;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cardioxnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let o = cli(args);
    assert!(
        o.status.success(),
        "{args:?} failed with {:?}: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    cli(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, per_class: usize, seed: u64) {
    ok(&["synth", "--out", s(dir), "--per-class", &per_class.to_string(), "--seed", &seed.to_string()]);
}

fn wav_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for class in fs::read_dir(dir).unwrap() {
        for f in fs::read_dir(class.unwrap().path()).unwrap() {
            out.push(f.unwrap().path());
        }
    }
    out.sort();
    out
}

#[test]
fn synth_writes_fifty_deterministic_files() {
    let t = TempDir::new().unwrap();
    let (a, b, c) = (t.path().join("a"), t.path().join("b"), t.path().join("c"));
    synth(&a, 10, 5);
    synth(&b, 10, 5);
    synth(&c, 10, 6);
    let fa = wav_files(&a);
    assert_eq!(fa.len(), 50);
    for class in ["AS", "MR", "MS", "MVP", "N"] {
        assert!(a.join(class).join(format!("{class}_9.wav")).is_file());
    }
    for f in &fa {
        let rel = f.strip_prefix(&a).unwrap();
        assert_eq!(fs::read(f).unwrap(), fs::read(b.join(rel)).unwrap(), "{rel:?}");
    }
    let rel = fa[0].strip_prefix(&a).unwrap();
    assert_ne!(fs::read(&fa[0]).unwrap(), fs::read(c.join(rel)).unwrap());
}

#[test]
fn synthetic_files_reingest_as_balanced_dataset() {
    let t = TempDir::new().unwrap();
    synth(t.path(), 10, 2);
    let d = load_dataset(t.path(), None, &Preprocessor::default()).unwrap();
    assert_eq!(d.class_names, ["AS", "MR", "MS", "MVP", "N"]);
    assert_eq!(d.counts(), vec![10; 5]);
    assert_eq!(d.skipped, 0);
    assert!(d.clips.iter().all(|c| c.samples.len() == 2250));
}

#[test]
fn train_predict_eval_bench_end_to_end() {
    let t = TempDir::new().unwrap();
    let data = t.path().join("data");
    let fresh = t.path().join("fresh");
    synth(&data, 20, 3);
    synth(&fresh, 1, 99);
    let cfg = t.path().join("run.cfg");
    fs::write(&cfg, "# desk run\npreset = small\nlearning_rate = 0.001\nepochs = 2\npatience = 40\n").unwrap();
    let model = t.path().join("m.cxn");
    // the flag overrides epochs=2 from the file
    let out = ok(&["train", "--config", s(&cfg), "--data", s(&data), "--epochs", "40", "--seed", "1", "--out", s(&model)]);
    assert!(out.contains("for 40 epochs") || out.contains("stopped early"), "{out}");

    let history = read_history(fs::File::open(t.path().join("m.history.csv")).unwrap()).unwrap();
    assert!(history.len() > 2);

    let out = ok(&["predict", "--model", s(&model), "--wav", s(&fresh.join("N/N_0.wav"))]);
    let mut lines = out.lines();
    let first: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(first[..2], ["predicted", "N"], "{out}");
    assert!(first[2].parse::<f64>().unwrap() > 0.5, "{out}");
    let probs: Vec<f64> = lines.map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(probs.len(), 5);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-5);

    let eval_dir = t.path().join("eval");
    let out = ok(&["eval", "--model", s(&model), "--data", s(&data), "--out", s(&eval_dir)]);
    let confusion = read_confusion(fs::File::open(eval_dir.join("confusion.csv")).unwrap()).unwrap();
    assert!(confusion.accuracy >= TRAINED_ACCURACY, "{out}");
    assert_eq!(confusion.total(), 100);
    assert_eq!(read_metrics(fs::File::open(eval_dir.join("metrics.csv")).unwrap()).unwrap().len(), 5);

    let out = ok(&["bench", "--model", s(&model), "--repeats", "3"]);
    let field = |name: &str| -> String {
        out.lines()
            .find_map(|l| l.strip_prefix(name))
            .unwrap_or_else(|| panic!("{name} missing in {out}"))
            .split_whitespace()
            .next()
            .unwrap()
            .to_string()
    };
    let loaded = load_model(&model).unwrap();
    assert_eq!(field("params ").parse::<u64>().unwrap(), count_params(&loaded));
    assert_eq!(field("model_bytes ").parse::<u64>().unwrap(), fs::metadata(&model).unwrap().len());
    assert!(field("latency_ms ").parse::<f64>().unwrap() > 0.0);
}

#[test]
fn training_is_deterministic() {
    let t = TempDir::new().unwrap();
    let data = t.path().join("data");
    synth(&data, 4, 8);
    let run = |name: &str| {
        let m = t.path().join(name);
        ok(&["train", "--data", s(&data), "--preset", "small", "--epochs", "2", "--learning-rate", "0.001", "--seed", "4", "--out", s(&m)]);
        (fs::read(&m).unwrap(), fs::read(m.with_extension("history.csv")).unwrap())
    };
    assert_eq!(run("a.cxn"), run("b.cxn"));
}

#[test]
fn cross_validation_writes_fold_and_summary_csv() {
    let t = TempDir::new().unwrap();
    let data = t.path().join("data");
    synth(&data, 8, 1);
    let out_dir = t.path().join("cv");
    let out = ok(&[
        "cv", "--data", s(&data), "--preset", "small", "--folds", "2", "--epochs", "1", "--learning-rate", "0.001", "--out",
        s(&out_dir),
    ]);
    let folds = read_folds(fs::File::open(out_dir.join("folds.csv")).unwrap()).unwrap();
    assert_eq!(folds.iter().map(|f| f.0).collect::<Vec<_>>(), [0, 1]);
    let summary = read_summary(fs::File::open(out_dir.join("summary.csv")).unwrap()).unwrap();
    assert_eq!(summary[0].0, "accuracy");
    let mean = (folds[0].1 + folds[1].1) / 2.0;
    assert!((summary[0].1.mean - mean).abs() < 1e-12, "{out}");
}

fn binary_model(dir: &Path) -> PathBuf {
    let mut cfg = ModelConfig::small();
    cfg.class_count = 2;
    cfg.class_names = vec!["abnormal".into(), "normal".into()];
    let path = dir.join("binary.cxn");
    save_model(&build_model(&cfg, 0).unwrap(), &path, Precision::F64).unwrap();
    path
}

#[test]
fn class_count_mismatch_exits_four() {
    let t = TempDir::new().unwrap();
    let data = t.path().join("data");
    synth(&data, 1, 0);
    let m = binary_model(t.path());
    let wav = data.join("N/N_0.wav");
    assert_eq!(code(&["predict", "--model", s(&m), "--wav", s(&wav), "--classes", "5"]), 4);
    assert_eq!(code(&["predict", "--model", s(&m), "--wav", s(&wav), "--classes", "2"]), 0);
    assert_eq!(code(&["eval", "--model", s(&m), "--data", s(&data), "--out", s(t.path())]), 4);
}

#[test]
fn documented_exit_codes() {
    let t = TempDir::new().unwrap();
    let data = t.path().join("data");
    synth(&data, 1, 0);
    let m = binary_model(t.path());
    let missing = t.path().join("missing");
    let wav = data.join("N/N_0.wav");

    assert_eq!(code(&["train", "--no-such-flag"]), 1);
    assert_eq!(code(&["bench", "--model", s(&m), "--repeats", "1"]), 1);
    let bad_cfg = t.path().join("bad.cfg");
    fs::write(&bad_cfg, "learnin_rate = 0.1\n").unwrap();
    assert_eq!(code(&["train", "--config", s(&bad_cfg), "--data", s(&data), "--out", s(&missing)]), 1);
    assert_eq!(code(&["train", "--data", s(&data), "--set", "batch_size=0", "--out", s(&missing)]), 1);

    assert_eq!(code(&["predict", "--model", s(&missing), "--wav", s(&wav)]), 2);
    assert_eq!(code(&["train", "--data", s(&missing), "--out", s(&t.path().join("x"))]), 2);

    let corrupt = t.path().join("corrupt.cxn");
    let mut bytes = fs::read(&m).unwrap();
    bytes[0] ^= 0xff;
    fs::write(&corrupt, bytes).unwrap();
    assert_eq!(code(&["predict", "--model", s(&corrupt), "--wav", s(&wav)]), 3);
    let not_wav = t.path().join("noise.wav");
    fs::write(&not_wav, b"definitely not audio").unwrap();
    assert_eq!(code(&["predict", "--model", s(&m), "--wav", s(&not_wav)]), 3);

    assert_eq!(code(&["--help"]), 0);
}
