//! Scores and statistics: AUC, chronological cross-validation, the
//! square-loss decomposition, the group homogeneity test, ERP peak features,
//! signed r² and character accuracy.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::decoder::{train_supervised, CovarianceMode, LinearClassifier};
use crate::error::{check_dim, LlpError, Result};
use crate::signal::Epoch;
use crate::types::{dot, FeatureVector, Label};

/// Number of datasets the homogeneity threshold is corrected for.
pub const HOMOGENEITY_TESTS_PER_CLASS: usize = 13;

/// Mann-Whitney AUC: wins count 1, ties 0.5, over all target/non-target pairs.
pub fn auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    check_dim(scores.len(), labels.len())?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_pos = labels.iter().filter(|l| l.is_target()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(LlpError::InsufficientData("AUC needs both classes".into()));
    }
    // Sum of midranks of the targets.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * idx[i..=j].iter().filter(|&&k| labels[k].is_target()).count() as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Mean held-out AUC over `k` contiguous folds.
///
/// `trainer` receives the training indices. Folds whose test part holds a
/// single class, or whose training fails for lack of data, are skipped.
pub fn chronological_cv<F>(features: &[FeatureVector], labels: &[Label], k: usize, mut trainer: F) -> Result<f64>
where
    F: FnMut(&[usize]) -> Result<LinearClassifier>,
{
    check_dim(features.len(), labels.len())?;
    if k < 2 {
        return Err(LlpError::InvalidArgument(format!("cross-validation needs k ≥ 2, got {k}")));
    }
    let n = features.len();
    if n < k {
        return Err(LlpError::InsufficientData(format!("{n} samples for {k} folds")));
    }
    let mut aucs = Vec::with_capacity(k);
    for f in 0..k {
        let (lo, hi) = (f * n / k, (f + 1) * n / k);
        let train: Vec<usize> = (0..lo).chain(hi..n).collect();
        let test_labels = &labels[lo..hi];
        if test_labels.iter().all(|l| *l == test_labels[0]) {
            log::warn!("fold {f} holds a single class; skipped");
            continue;
        }
        let c = match trainer(&train) {
            Ok(c) => c,
            Err(LlpError::InsufficientData(msg)) => {
                log::warn!("fold {f} skipped: {msg}");
                continue;
            }
            Err(e) => return Err(e),
        };
        let scores = features[lo..hi].iter().map(|x| c.score(x)).collect::<Result<Vec<_>>>()?;
        aucs.push(auc(&scores, test_labels)?);
    }
    if aucs.is_empty() {
        return Err(LlpError::InsufficientData("every fold was skipped".into()));
    }
    Ok(aucs.iter().sum::<f64>() / aucs.len() as f64)
}

/// Chronological CV of the shrinkage-LDA baseline.
pub fn supervised_cv(features: &[FeatureVector], labels: &[Label], k: usize) -> Result<f64> {
    chronological_cv(features, labels, k, |train| {
        let xs: Vec<FeatureVector> = train.iter().map(|&i| features[i].clone()).collect();
        let ys: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
        train_supervised(&xs, &ys, CovarianceMode::ClassAverage)
    })
}

/// Square loss computed directly and through the class-mean form.
pub fn square_loss_identity(w: &[f64], features: &[Vec<f64>], labels: &[Label]) -> Result<(f64, f64)> {
    check_dim(features.len(), labels.len())?;
    let d = w.len();
    let mut direct = 0.0;
    let mut quad = 0.0;
    // N₊ µ̂₊ − N₋ µ̂₋ = Σ yᵢ xᵢ
    let mut signed_sum = vec![0.0; d];
    for (x, y) in features.iter().zip(labels) {
        check_dim(d, x.len())?;
        let f = dot(w, x);
        direct += (f - y.sign()).powi(2);
        quad += f * f + 1.0;
        for (s, v) in signed_sum.iter_mut().zip(x) {
            *s += y.sign() * v;
        }
    }
    Ok((direct, quad - 2.0 * dot(w, &signed_sum)))
}

/// Result of one homogeneity test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityEntry {
    /// Class and dataset this test belongs to.
    pub name: String,
    pub t: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub df: f64,
    /// Squared distances (to own group average, to other group average).
    pub pairs: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityReport {
    pub alpha: f64,
    /// `alpha / 13`.
    pub threshold: f64,
    pub entries: Vec<HomogeneityEntry>,
}

impl HomogeneityReport {
    pub fn new(alpha: f64, entries: Vec<HomogeneityEntry>) -> Self {
        Self { alpha, threshold: alpha / HOMOGENEITY_TESTS_PER_CLASS as f64, entries }
    }

    pub fn significant(&self) -> Vec<&HomogeneityEntry> {
        self.entries.iter().filter(|e| e.p < self.threshold).collect()
    }
}

fn mean_of(xs: &[&[f64]]) -> Vec<f64> {
    let mut m = vec![0.0; xs[0].len()];
    for x in xs {
        for (a, v) in m.iter_mut().zip(x.iter()) {
            *a += v;
        }
    }
    m.iter_mut().for_each(|a| *a /= xs.len() as f64);
    m
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Leave-one-out distances of every epoch in `own` to both group averages.
fn loo_pairs(own: &[&[f64]], other_mean: &[f64]) -> Vec<(f64, f64)> {
    let n = own.len() as f64;
    let total: Vec<f64> = mean_of(own).iter().map(|m| m * n).collect();
    own.iter()
        .map(|x| {
            let loo: Vec<f64> = total.iter().zip(x.iter()).map(|(t, v)| (t - v) / (n - 1.0)).collect();
            (sq_dist(x, &loo), sq_dist(x, other_mean))
        })
        .collect()
}

/// Paired two-sided t-test on `a − b`.
pub fn paired_t_test(pairs: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let n = pairs.len();
    if n < 2 {
        return Err(LlpError::InsufficientData(format!("paired t-test needs ≥ 2 pairs, got {n}")));
    }
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let df = nf - 1.0;
    if var == 0.0 {
        let p = if mean == 0.0 { 1.0 } else { 0.0 };
        return Ok((if mean == 0.0 { 0.0 } else { mean.signum() * f64::INFINITY }, p, df));
    }
    let t = mean / (var / nf).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| LlpError::InvalidArgument(e.to_string()))?;
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok((t, p, df))
}

/// Tests whether epochs of one class look the same in both groups.
///
/// Each group-1 epoch is left out of the group-1 average and its squared
/// distances to both averages are compared by a paired t-test. With
/// `symmetric`, group-2 epochs are treated the same way and pooled in.
pub fn bootstrap_homogeneity(
    name: &str,
    group1: &[&[f64]],
    group2: &[&[f64]],
    symmetric: bool,
) -> Result<HomogeneityEntry> {
    if group1.len() < 2 || group2.len() < 2 {
        return Err(LlpError::InsufficientData("each group needs ≥ 2 epochs of the class".into()));
    }
    let d = group1[0].len();
    for x in group1.iter().chain(group2) {
        check_dim(d, x.len())?;
    }
    let mut pairs = loo_pairs(group1, &mean_of(group2));
    if symmetric {
        pairs.extend(loo_pairs(group2, &mean_of(group1)));
    }
    let (t, p, df) = paired_t_test(&pairs)?;
    Ok(HomogeneityEntry { name: name.to_string(), t, p, df, pairs })
}

/// Homogeneity test on epochs, using all channels within `window_ms`.
pub fn bootstrap_homogeneity_epochs(
    name: &str,
    group1: &[Epoch],
    group2: &[Epoch],
    window_ms: [f64; 2],
    symmetric: bool,
) -> Result<HomogeneityEntry> {
    let flat =
        |es: &[Epoch]| -> Vec<Vec<f64>> { es.iter().map(|e| e.flatten_window(window_ms[0], window_ms[1])).collect() };
    let (a, b) = (flat(group1), flat(group2));
    let ra: Vec<&[f64]> = a.iter().map(|x| &x[..]).collect();
    let rb: Vec<&[f64]> = b.iter().map(|x| &x[..]).collect();
    bootstrap_homogeneity(name, &ra, &rb, symmetric)
}

/// N150 and P300 amplitude and latency of a class-average epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFeatures {
    pub n150_amp: f64,
    pub n150_lat_ms: f64,
    pub p300_amp: f64,
    pub p300_lat_ms: f64,
}

/// Minimum of O1 over [100, 200] ms and maximum of Cz over [250, 500] ms.
/// Ties resolve to the earliest sample.
pub fn peak_features(avg: &Epoch) -> Result<PeakFeatures> {
    let extreme = |ch: &str, lo: f64, hi: f64, sign: f64| -> Result<(f64, f64)> {
        let c = avg.channel_index(ch).ok_or_else(|| LlpError::InvalidArgument(format!("channel {ch} missing")))?;
        let idx = avg.indices_in(lo, hi);
        let mut best: Option<usize> = None;
        for j in idx {
            if best.is_none_or(|b| sign * avg.samples[c][j] > sign * avg.samples[c][b]) {
                best = Some(j);
            }
        }
        let j = best.ok_or_else(|| LlpError::InvalidArgument(format!("no samples in [{lo}, {hi}] ms")))?;
        Ok((avg.samples[c][j], avg.time_ms(j)))
    };
    let (n150_amp, n150_lat_ms) = extreme("O1", 100.0, 200.0, -1.0)?;
    let (p300_amp, p300_lat_ms) = extreme("Cz", 250.0, 500.0, 1.0)?;
    Ok(PeakFeatures { n150_amp, n150_lat_ms, p300_amp, p300_lat_ms })
}

/// Per-feature `sign(r)·r²` of the point-biserial correlation with the label.
pub fn signed_r2(features: &[FeatureVector], labels: &[Label]) -> Result<Vec<f64>> {
    check_dim(features.len(), labels.len())?;
    let n_pos = labels.iter().filter(|l| l.is_target()).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(LlpError::InsufficientData("signed r² needs both classes".into()));
    }
    let d = features[0].dim();
    let n = features.len() as f64;
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let my = y.iter().sum::<f64>() / n;
    (0..d)
        .map(|i| {
            let mut mx = 0.0;
            for f in features {
                check_dim(d, f.dim())?;
                mx += f[i];
            }
            mx /= n;
            let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
            for (f, yk) in features.iter().zip(&y) {
                let (a, b) = (f[i] - mx, yk - my);
                sxy += a * b;
                sxx += a * a;
                syy += b * b;
            }
            if sxx == 0.0 {
                return Ok(0.0);
            }
            let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
            Ok(r.signum() * r * r)
        })
        .collect()
}

/// Characters spelled before the decoder has settled.
pub const RAMP_UP_CHARACTERS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub overall: f64,
    /// Accuracy without the first seven characters; `None` if nothing remains.
    pub post_ramp: Option<f64>,
}

pub fn character_accuracy(decisions: &[usize], truth: &[usize]) -> Result<Accuracy> {
    check_dim(truth.len(), decisions.len())?;
    if truth.is_empty() {
        return Err(LlpError::InsufficientData("no characters".into()));
    }
    let frac = |a: &[usize], b: &[usize]| a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64;
    let post_ramp = (truth.len() > RAMP_UP_CHARACTERS)
        .then(|| frac(&decisions[RAMP_UP_CHARACTERS..], &truth[RAMP_UP_CHARACTERS..]));
    Ok(Accuracy { overall: frac(decisions, truth), post_ramp })
}
