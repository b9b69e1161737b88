//! ROC AUC, F1, stratified splits and negative downsampling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Area under the ROC curve via the Mann-Whitney rank statistic.
///
/// Tied scores receive their mid-rank, so a tied positive/negative pair
/// counts one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Metric("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric(
            "AUC needs at least one positive and one negative".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // sum of (1-based) mid-ranks of the positives
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i]).count();
        rank_sum += mid_rank * pos_in_group as f64;
        start = end;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * n))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// A score at or above `threshold` is predicted positive.
    pub fn at(scores: &[f64], labels: &[bool], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (&s, &y) in scores.iter().zip(labels) {
            match (s >= threshold, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn f1(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::Metric(
            "F1 needs a nonempty, aligned score set".into(),
        ));
    }
    Ok(Confusion::at(scores, labels, threshold).f1())
}

/// Emitted as JSON by training and evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub f1: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub threshold: f64,
}

impl MetricsReport {
    pub fn compute(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Self> {
        let n_pos = labels.iter().filter(|&&l| l).count();
        Ok(MetricsReport {
            auc: auc(scores, labels)?,
            f1: f1(scores, labels, threshold)?,
            n_pos,
            n_neg: labels.len() - n_pos,
            threshold,
        })
    }
}

/// Indices of a three-way split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles each class with `seed`, interleaves the classes in proportion
/// and cuts the merged order by `fractions` (train, val, test). Set sizes are
/// rounded from the total; the test share absorbs the remainder.
pub fn split(labels: &[bool], fractions: (f64, f64, f64), seed: u64) -> Result<Split> {
    let (a, b, c) = fractions;
    if [a, b, c].iter().any(|f| !(0.0..=1.0).contains(f)) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions {fractions:?} must be in [0, 1] and sum to 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(labels.len());
    for (rank_class, class) in [true, false].into_iter().enumerate() {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n = idx.len() as f64;
        for (r, &i) in idx.iter().enumerate() {
            keyed.push(((r as f64 + 0.5) / n, rank_class, i));
        }
    }
    keyed.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let total = labels.len() as f64;
    let n_train = ((a * total).round() as usize).min(labels.len());
    let n_val = ((b * total).round() as usize).min(labels.len() - n_train);
    let pick = |range: std::ops::Range<usize>| {
        let mut v: Vec<usize> = keyed[range].iter().map(|k| k.2).collect();
        v.sort_unstable();
        v
    };
    Ok(Split {
        train: pick(0..n_train),
        val: pick(n_train..n_train + n_val),
        test: pick(n_train + n_val..labels.len()),
    })
}

/// Keeps every positive and a uniform sample of negatives so that the kept
/// set has `target_total` items. Returns kept indices in ascending order.
pub fn rebalance(labels: &[bool], target_total: usize, seed: u64) -> Result<Vec<usize>> {
    let positives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut negatives: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if target_total > labels.len() || positives.len() > target_total {
        return Err(Error::Config(format!(
            "cannot rebalance {} items ({} positive) to {target_total}",
            labels.len(),
            positives.len()
        )));
    }
    let n_neg = target_total - positives.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    negatives.shuffle(&mut rng);
    let mut kept: Vec<usize> = positives
        .into_iter()
        .chain(negatives.into_iter().take(n_neg))
        .collect();
    kept.sort_unstable();
    Ok(kept)
}
