//! Online LLP decoder and the supervised shrinkage-LDA baseline.
//!
//! Both train `w = Σ̂⁻¹ (µ₊ − µ₋)`. The LLP decoder obtains the class means
//! from group means through the mixing matrix and uses the global covariance
//! of all epochs; it never sees a label. Symbols are chosen by summing the
//! scores of the stimuli that highlighted them.

pub mod shrinkage;
pub mod state;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use shrinkage::{shrink, ScatterStats, ShrunkCovariance};
pub use state::OnlineLlpState;

use crate::error::{check_dim, LlpError, Result};
use crate::mixing::{pseudoinverse, reconstruct_means, GroupMeans, MixingMatrix};
use crate::sequence::{SymbolGrid, Trial};
use crate::types::{dot, FeatureVector, Label};

/// Linear projection `f(x) = wᵀx` without bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub w: Vec<f64>,
    /// Shrinkage intensity used for the covariance.
    pub gamma: f64,
    pub d: usize,
    #[serde(default)]
    pub metadata: ClassifierMetadata,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassifierMetadata {
    /// `llp` or `supervised`.
    pub method: String,
    /// Epochs used for training.
    pub epochs: usize,
}

impl LinearClassifier {
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.d, x.len())?;
        Ok(dot(&self.w, x))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("classifier serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s).map_err(|e| LlpError::InvalidArgument(e.to_string()))?;
        check_dim(c.d, c.w.len())?;
        Ok(c)
    }
}

/// `f(x) = wᵀx`.
pub fn score_epoch(c: &LinearClassifier, x: &[f64]) -> Result<f64> {
    c.score(x)
}

/// Solves `Σ̂ w = diff` through a Cholesky factorization.
fn solve_spd(cov: &ShrunkCovariance, diff: &[f64]) -> Result<Vec<f64>> {
    check_dim(cov.matrix.nrows(), diff.len())?;
    let chol = cov
        .matrix
        .clone()
        .cholesky()
        .ok_or_else(|| LlpError::Singular("covariance is not positive definite".into()))?;
    let w = chol.solve(&DVector::from_column_slice(diff));
    if w.iter().any(|v| !v.is_finite()) {
        return Err(LlpError::Singular("non-finite projection".into()));
    }
    Ok(w.iter().copied().collect())
}

/// Trains the label-free classifier from the running state.
pub fn train_llp(state: &OnlineLlpState, m: &MixingMatrix) -> Result<LinearClassifier> {
    let means = state.class_means(m)?;
    let cov = state.pooled_covariance()?;
    let w = solve_spd(&cov, &means.difference())?;
    Ok(LinearClassifier {
        w,
        gamma: cov.gamma,
        d: state.dim(),
        metadata: ClassifierMetadata { method: "llp".into(), epochs: state.count() },
    })
}

/// Same classifier as [`train_llp`], computed in one pass over stored epochs.
pub fn train_llp_batch(features: &[FeatureVector], groups: &[usize], m: &MixingMatrix) -> Result<LinearClassifier> {
    check_dim(features.len(), groups.len())?;
    let d = features.first().map_or(0, |f| f.dim());
    let g = m.groups();
    let mut sums = vec![vec![0.0; d]; g];
    let mut counts = vec![0usize; g];
    for (x, &k) in features.iter().zip(groups) {
        check_dim(d, x.dim())?;
        if k >= g {
            return Err(LlpError::InvalidArgument(format!("group {k} out of range for {g} groups")));
        }
        for (s, v) in sums[k].iter_mut().zip(x.iter()) {
            *s += v;
        }
        counts[k] += 1;
    }
    if counts.contains(&0) {
        return Err(LlpError::InsufficientData("a group has no epochs".into()));
    }
    let means = sums.iter().zip(&counts).map(|(s, &c)| s.iter().map(|v| v / c as f64).collect()).collect();
    let class = reconstruct_means(&pseudoinverse(m)?, &GroupMeans::new(means, counts)?)?;
    let cov = shrink(&ScatterStats::from_vectors(features)?);
    let w = solve_spd(&cov, &class.difference())?;
    Ok(LinearClassifier {
        w,
        gamma: cov.gamma,
        d,
        metadata: ClassifierMetadata { method: "llp".into(), epochs: features.len() },
    })
}

/// How the supervised baseline forms its covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMode {
    /// Unweighted average of the two class-wise covariances, then shrinkage.
    #[default]
    ClassAverage,
    /// Global covariance of all samples, as the LLP decoder uses.
    Pooled,
}

/// Shrinkage LDA trained with labels.
pub fn train_supervised(
    features: &[FeatureVector],
    labels: &[Label],
    mode: CovarianceMode,
) -> Result<LinearClassifier> {
    check_dim(features.len(), labels.len())?;
    let d = features.first().map_or(0, |f| f.dim());
    let (pos, neg): (Vec<&[f64]>, Vec<&[f64]>) = {
        let mut p = Vec::new();
        let mut n = Vec::new();
        for (f, l) in features.iter().zip(labels) {
            check_dim(d, f.dim())?;
            if l.is_target() {
                p.push(&f[..]);
            } else {
                n.push(&f[..]);
            }
        }
        (p, n)
    };
    if pos.is_empty() || neg.is_empty() {
        return Err(LlpError::InsufficientData("both classes are needed".into()));
    }
    let mean = |xs: &[&[f64]]| -> Vec<f64> {
        let mut m = vec![0.0; d];
        for x in xs {
            for (a, v) in m.iter_mut().zip(x.iter()) {
                *a += v;
            }
        }
        m.iter().map(|v| v / xs.len() as f64).collect()
    };
    let diff: Vec<f64> = mean(&pos).iter().zip(mean(&neg)).map(|(a, b)| a - b).collect();
    let stats = match mode {
        CovarianceMode::ClassAverage => {
            ScatterStats::average(&ScatterStats::from_samples(&pos)?, &ScatterStats::from_samples(&neg)?)?
        }
        CovarianceMode::Pooled => {
            let all: Vec<&[f64]> = features.iter().map(|f| &f[..]).collect();
            ScatterStats::from_samples(&all)?
        }
    };
    let cov = shrink(&stats);
    let w = solve_spd(&cov, &diff)?;
    Ok(LinearClassifier {
        w,
        gamma: cov.gamma,
        d,
        metadata: ClassifierMetadata { method: "supervised".into(), epochs: features.len() },
    })
}

/// Picks the selectable symbol whose stimuli have the largest summed score.
/// Ties go to the lowest cell id.
pub fn select_from_scores(trial: &Trial, grid: &SymbolGrid, scores: &[f64]) -> Result<usize> {
    check_dim(trial.len(), scores.len())?;
    let mut totals = vec![0.0; grid.len()];
    for (s, &score) in trial.stimuli.iter().zip(scores) {
        for &id in &s.stimulus.0 {
            if id < totals.len() {
                totals[id] += score;
            }
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for id in grid.selectable() {
        if best.is_none_or(|(_, b)| totals[id] > b) {
            best = Some((id, totals[id]));
        }
    }
    best.map(|(id, _)| id).ok_or_else(|| LlpError::InvalidArgument("grid has no selectable symbols".into()))
}

/// Scores every epoch of a trial and selects the symbol.
pub fn select_symbol(
    c: &LinearClassifier,
    trial: &Trial,
    grid: &SymbolGrid,
    epochs: &[FeatureVector],
) -> Result<usize> {
    check_dim(trial.len(), epochs.len())?;
    let scores = epochs.iter().map(|x| c.score(x)).collect::<Result<Vec<_>>>()?;
    select_from_scores(trial, grid, &scores)
}

/// Re-decodes earlier trials with the current classifier.
pub fn posthoc_reanalyze(
    c: &LinearClassifier,
    grid: &SymbolGrid,
    history: &[(Trial, Vec<FeatureVector>)],
) -> Result<Vec<usize>> {
    history.iter().map(|(t, e)| select_symbol(c, t, grid, e)).collect()
}

/// Weight vector via an explicit dense inverse; used to cross-check the solver.
pub fn dense_inverse_weights(cov: &DMatrix<f64>, diff: &[f64]) -> Option<Vec<f64>> {
    let inv = cov.clone().try_inverse()?;
    Some((inv * DVector::from_column_slice(diff)).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::auc;
    use crate::sequence::{assemble_trial, label_stimuli, TrialDesign};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn fixed_cov(diag: &[f64]) -> ShrunkCovariance {
        ShrunkCovariance {
            matrix: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
            gamma: 0.0,
            target_scale: 1.0,
            degenerate: false,
        }
    }

    fn blobs(n: usize, sep: f64, seed: u64) -> (Vec<FeatureVector>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for k in 0..n {
            let l = if k % 3 == 0 { Label::Target } else { Label::NonTarget };
            let c = if l.is_target() { sep } else { -sep };
            xs.push(FeatureVector(vec![
                c + noise.sample(&mut rng),
                0.5 * c + noise.sample(&mut rng),
                noise.sample(&mut rng),
            ]));
            ys.push(l);
        }
        (xs, ys)
    }

    #[test]
    fn solve_examples() {
        assert_eq!(solve_spd(&fixed_cov(&[1.0, 1.0]), &[2.0, 0.0]).unwrap(), vec![2.0, 0.0]);
        let w = solve_spd(&fixed_cov(&[2.0, 0.5]), &[1.0, 1.0]).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn scoring() {
        let c = LinearClassifier { w: vec![2.0, 0.0], gamma: 0.0, d: 2, metadata: Default::default() };
        assert_eq!(score_epoch(&c, &[3.0, 5.0]).unwrap(), 6.0);
        assert!(score_epoch(&c, &[1.0]).is_err());
        let zero = LinearClassifier { w: vec![0.0; 2], ..c.clone() };
        assert_eq!(zero.score(&[3.0, 5.0]).unwrap(), 0.0);
        assert_eq!(LinearClassifier::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn state_updates() {
        let mut s = OnlineLlpState::new(2, 2);
        s.update(&[1.0, 2.0], 0).unwrap();
        assert_eq!(s.group_counts(), &[1, 0]);
        assert_eq!(s.group_sums()[0], vec![1.0, 2.0]);
        assert!(s.update(&[1.0], 0).is_err());
        assert!(s.update(&[1.0, 1.0], 2).is_err());
        assert!(matches!(s.group_means(), Err(LlpError::InsufficientData(_))));
        s.update(&[3.0, 4.0], 1).unwrap();
        s.update(&[5.0, 6.0], 0).unwrap();
        let g = s.group_means().unwrap();
        assert_eq!(g.means[0], vec![3.0, 4.0]);
        assert_eq!(g.means[1], vec![3.0, 4.0]);
        s.reset();
        assert_eq!(s.count(), 0);
        assert!(s.pooled_covariance().is_err());
    }

    #[test]
    fn trial_group_counts() {
        let grid = SymbolGrid::speller();
        let t = assemble_trial(&grid, &TrialDesign::speller(), 4).unwrap();
        let mut s = OnlineLlpState::new(1, 2);
        for st in &t.stimuli {
            s.update(&[0.0], st.group).unwrap();
        }
        assert_eq!(s.group_counts(), &[32, 36]);
    }

    #[test]
    fn accumulators_match_batch_and_order() {
        let (xs, _) = blobs(120, 1.0, 9);
        let mut a = OnlineLlpState::new(3, 2);
        let mut b = OnlineLlpState::new(3, 2);
        for (k, x) in xs.iter().enumerate() {
            a.update(x, k % 2).unwrap();
        }
        for (k, x) in xs.iter().enumerate().rev() {
            b.update(x, k % 2).unwrap();
        }
        let batch = ScatterStats::from_vectors(&xs).unwrap();
        for s in [&a, &b] {
            let st = s.scatter().unwrap();
            for (u, v) in st.cov.iter().zip(batch.cov.iter()) {
                assert!((u - v).abs() <= 1e-9 * v.abs().max(1e-3));
            }
            assert!((st.entry_variance - batch.entry_variance).abs() <= 1e-9 * batch.entry_variance);
        }
        for (u, v) in a.group_sums().iter().flatten().zip(b.group_sums().iter().flatten()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn supervised_separates_blobs_and_is_antisymmetric() {
        let (xs, ys) = blobs(90, 4.0, 1);
        let c = train_supervised(&xs, &ys, CovarianceMode::ClassAverage).unwrap();
        let scores: Vec<f64> = xs.iter().map(|x| c.score(x).unwrap()).collect();
        assert_eq!(auc(&scores, &ys).unwrap(), 1.0);
        let flipped: Vec<Label> = ys.iter().map(|l| l.flipped()).collect();
        let cf = train_supervised(&xs, &flipped, CovarianceMode::ClassAverage).unwrap();
        for (a, b) in c.w.iter().zip(&cf.w) {
            assert!((a + b).abs() < 1e-12);
        }
        assert!(train_supervised(&xs, &vec![Label::Target; xs.len()], CovarianceMode::Pooled).is_err());
    }

    #[test]
    fn supervised_matches_dense_inverse() {
        let (xs, ys) = blobs(30, 1.0, 5);
        let c = train_supervised(&xs, &ys, CovarianceMode::ClassAverage).unwrap();
        let pos: Vec<&[f64]> = xs.iter().zip(&ys).filter(|(_, l)| l.is_target()).map(|(x, _)| &x[..]).collect();
        let neg: Vec<&[f64]> = xs.iter().zip(&ys).filter(|(_, l)| !l.is_target()).map(|(x, _)| &x[..]).collect();
        let stats = ScatterStats::average(
            &ScatterStats::from_samples(&pos).unwrap(),
            &ScatterStats::from_samples(&neg).unwrap(),
        )
        .unwrap();
        let cov = shrink(&stats);
        let mp: Vec<f64> = (0..3).map(|i| pos.iter().map(|x| x[i]).sum::<f64>() / pos.len() as f64).collect();
        let mn: Vec<f64> = (0..3).map(|i| neg.iter().map(|x| x[i]).sum::<f64>() / neg.len() as f64).collect();
        let diff: Vec<f64> = mp.iter().zip(&mn).map(|(a, b)| a - b).collect();
        let w = dense_inverse_weights(&cov.matrix, &diff).unwrap();
        for (a, b) in c.w.iter().zip(&w) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn symbol_selection_rules() {
        let grid = SymbolGrid::speller();
        let t = assemble_trial(&grid, &TrialDesign::speller(), 2).unwrap();
        let attended = grid.selectable()[17];
        let labels = label_stimuli(&t, &grid, attended).unwrap();
        let scores: Vec<f64> = labels.iter().map(|l| if l.is_target() { 1.0 } else { 0.0 }).collect();
        assert_eq!(select_from_scores(&t, &grid, &scores).unwrap(), attended);
        let shifted: Vec<f64> = scores.iter().map(|s| s + 7.5).collect();
        assert_eq!(select_from_scores(&t, &grid, &shifted).unwrap(), attended);
        assert_eq!(select_from_scores(&t, &grid, &vec![0.3; 68]).unwrap(), grid.selectable()[0]);
        assert!(select_from_scores(&t, &grid, &[0.0; 10]).is_err());
    }

    #[test]
    fn batch_training_matches_online() {
        let (xs, ys) = blobs(150, 1.0, 4);
        let groups: Vec<usize> =
            ys.iter().enumerate().map(|(k, l)| usize::from(!l.is_target() && k % 5 != 0)).collect();
        let m = MixingMatrix::new(vec![[0.8, 0.2], [0.0, 1.0]]);
        let mut s = OnlineLlpState::new(3, 2);
        for (x, &g) in xs.iter().zip(&groups) {
            s.update(x, g).unwrap();
        }
        let a = train_llp(&s, &m).unwrap();
        let b = train_llp_batch(&xs, &groups, &m).unwrap();
        for (u, v) in a.w.iter().zip(&b.w) {
            assert!((u - v).abs() <= 1e-9 * v.abs().max(1.0));
        }
    }

    #[test]
    fn posthoc_of_empty_history_is_empty() {
        let c = LinearClassifier { w: vec![1.0], gamma: 0.0, d: 1, metadata: Default::default() };
        assert!(posthoc_reanalyze(&c, &SymbolGrid::speller(), &[]).unwrap().is_empty());
    }
}
