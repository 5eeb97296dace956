//! Stratified hold-out splits and k-fold plans.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainError;

fn by_class(labels: &[usize], classes: usize, seed: u64) -> Result<Vec<Vec<usize>>, TrainError> {
    let mut groups = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(TrainError::Label {
                index: i,
                label: l,
                classes,
            });
        }
        groups[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for g in groups.iter_mut() {
        g.shuffle(&mut rng);
    }
    Ok(groups)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per class, `floor(n·val)` and `floor(n·test)` samples go to validation and
/// test; the remainder trains. Index lists are sorted.
pub fn split_dataset(
    labels: &[usize],
    classes: usize,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<Split, TrainError> {
    let (tr, va, te) = fractions;
    if [tr, va, te].iter().any(|f| !(0.0..=1.0).contains(f)) || ((tr + va + te) - 1.0).abs() > 1e-9 {
        return Err(TrainError::Config(format!("split fractions {fractions:?} must sum to 1")));
    }
    if labels.is_empty() {
        return Err(TrainError::Empty("dataset"));
    }
    let groups = by_class(labels, classes, seed)?;
    let mut s = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (class, g) in groups.iter().enumerate() {
        if g.len() < 3 {
            return Err(TrainError::Stratify {
                class,
                count: g.len(),
                needed: 3,
            });
        }
        let n = g.len() as f64;
        let nv = (n * va + 1e-9).floor() as usize;
        let nt = (n * te + 1e-9).floor() as usize;
        s.val.extend_from_slice(&g[..nv]);
        s.test.extend_from_slice(&g[nv..nv + nt]);
        s.train.extend_from_slice(&g[nv + nt..]);
    }
    s.train.sort_unstable();
    s.val.sort_unstable();
    s.test.sort_unstable();
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    /// Sorted sample indices per fold.
    pub folds: Vec<Vec<usize>>,
    /// `histograms[f][c]`: samples of class `c` in fold `f`.
    pub histograms: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Every index outside fold `f`, sorted.
    pub fn complement(&self, f: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != f)
            .flat_map(|(_, x)| x.iter().copied())
            .collect();
        v.sort_unstable();
        v
    }
}

/// Shuffled class members are dealt round-robin, continuing the deal across
/// classes so fold sizes also differ by at most one.
pub fn stratified_kfold(labels: &[usize], classes: usize, k: usize, seed: u64) -> Result<FoldPlan, TrainError> {
    if k < 2 {
        return Err(TrainError::Config(format!("k = {k}; need at least 2 folds")));
    }
    if k > labels.len() {
        return Err(TrainError::Config(format!("k = {k} exceeds {} samples", labels.len())));
    }
    let groups = by_class(labels, classes, seed)?;
    let mut folds = vec![Vec::new(); k];
    let mut histograms = vec![vec![0; classes]; k];
    let mut next = 0;
    for (class, g) in groups.iter().enumerate() {
        if !g.is_empty() && g.len() < k {
            return Err(TrainError::Stratify {
                class,
                count: g.len(),
                needed: k,
            });
        }
        for &i in g {
            folds[next % k].push(i);
            histograms[next % k][class] += 1;
            next += 1;
        }
    }
    for f in folds.iter_mut() {
        f.sort_unstable();
    }
    Ok(FoldPlan { folds, histograms })
}
