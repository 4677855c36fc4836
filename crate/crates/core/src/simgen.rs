//! Synthetic ERP features, artificial grouped datasets and simulated online
//! spelling sessions.
//!
//! Epochs live directly in feature space: `x = c ± (s/2) δ + z + U v` with
//! `z ~ N(0, I)`, `v ~ N(0, I_r)`, so the noise covariance is `I + U Uᵀ`.
//! `δ` is normalized to unit Mahalanobis length, which makes the scale `s`
//! the class separation `Δ` and the ideal AUC `Φ(s/√2)`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{posthoc_reanalyze, select_symbol, train_llp, LinearClassifier, OnlineLlpState};
use crate::error::{check_dim, LlpError, Result};
use crate::eval::{auc, character_accuracy, supervised_cv};
use crate::mixing::{pseudoinverse, reconstruct_means, ClassMeans, GroupMeans, MixingMatrix};
use crate::sequence::{assemble_trial, label_stimuli, SymbolGrid, Trial, TrialDesign};
use crate::types::{FeatureVector, Label};

/// Feature dimension of the default preprocessing.
pub const DEFAULT_DIM: usize = 174;
/// Rank of the correlated noise component.
pub const DEFAULT_NOISE_RANK: usize = 5;
/// Test sentence, 63 characters.
pub const DEFAULT_SENTENCE: &str = "FRANZY JAGT IM KOMPLETT VERWAHRLOSTEN TAXI QUER DURCH FREIBURG.";

const CHANNELS: usize = 29;
/// Relative class difference per feature interval.
const TEMPORAL_PROFILE: [f64; 6] = [-0.4, -0.2, 0.5, 1.0, 0.8, 0.3];
/// Norm of each correlated noise direction.
const NOISE_DIRECTION_NORM: f64 = 3.0;
/// Epochs in a calibration set: one 63-character session.
const CALIBRATION_TRIALS: usize = 63;
const CALIBRATION_FOLDS: usize = 5;
const CALIBRATION_TOLERANCE: f64 = 0.0025;
const CALIBRATION_MAX_SCALE: f64 = 64.0;
const CALIBRATION_ITERATIONS: usize = 40;

/// Gaussian two-class model with shared covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModel {
    /// Mid-point of the two class templates.
    pub center: Vec<f64>,
    /// Unit-Mahalanobis class difference direction.
    pub direction: Vec<f64>,
    /// Columns `uⱼ` of the low-rank noise factor.
    pub noise_factor: Vec<Vec<f64>>,
    pub snr_scale: f64,
}

impl SyntheticModel {
    /// ERP-like templates over the interval × channel feature layout.
    pub fn new(d: usize, rank: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(LlpError::InvalidArgument("model dimension must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spatial: Vec<f64> = (0..CHANNELS).map(|_| rng.gen_range(0.2..1.0)).collect();
        let raw: Vec<f64> =
            (0..d).map(|i| TEMPORAL_PROFILE[(i / CHANNELS) % TEMPORAL_PROFILE.len()] * spatial[i % CHANNELS]).collect();
        let center = (0..d).map(|_| 0.5 * normal(&mut rng)).collect();
        let sd = NOISE_DIRECTION_NORM / (d as f64).sqrt();
        let noise_factor = (0..rank).map(|_| (0..d).map(|_| sd * normal(&mut rng)).collect()).collect();
        let mut m = Self { center, direction: raw, noise_factor, snr_scale: 1.0 };
        let norm = m.mahalanobis_norm(&m.direction)?;
        m.direction.iter_mut().for_each(|v| *v /= norm);
        Ok(m)
    }

    pub fn speller(seed: u64) -> Result<Self> {
        Self::new(DEFAULT_DIM, DEFAULT_NOISE_RANK, seed)
    }

    pub fn with_snr(mut self, snr_scale: f64) -> Self {
        self.snr_scale = snr_scale;
        self
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `I + U Uᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut c = DMatrix::identity(d, d);
        for u in &self.noise_factor {
            let u = DVector::from_column_slice(u);
            c += &u * u.transpose();
        }
        c
    }

    fn mahalanobis_norm(&self, v: &[f64]) -> Result<f64> {
        let chol = self.covariance().cholesky().ok_or_else(|| LlpError::Singular("model covariance".into()))?;
        let v = DVector::from_column_slice(v);
        let n = v.dot(&chol.solve(&v)).sqrt();
        if n > 0.0 {
            Ok(n)
        } else {
            Err(LlpError::InvalidArgument("class difference is zero".into()))
        }
    }

    /// Class means at the current scale.
    pub fn class_means(&self) -> ClassMeans {
        let half = self.snr_scale / 2.0;
        let shift = |s: f64| self.center.iter().zip(&self.direction).map(|(c, d)| c + s * half * d).collect();
        ClassMeans { plus: shift(1.0), minus: shift(-1.0) }
    }

    /// Zero-mean noise draw.
    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.dim()).map(|_| normal(rng)).collect();
        for u in &self.noise_factor {
            let v = normal(rng);
            for (a, b) in x.iter_mut().zip(u) {
                *a += v * b;
            }
        }
        x
    }

    /// Class mean plus `noise`.
    fn shifted(&self, label: Label, snr_scale: f64, noise: &[f64]) -> FeatureVector {
        let half = label.sign() * snr_scale / 2.0;
        FeatureVector(self.center.iter().zip(&self.direction).zip(noise).map(|((c, d), z)| c + half * d + z).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s).map_err(|e| LlpError::InvalidArgument(e.to_string()))?;
        check_dim(m.dim(), m.direction.len())?;
        for u in &m.noise_factor {
            check_dim(m.dim(), u.len())?;
        }
        Ok(m)
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// One epoch of the given class.
pub fn sample_epoch<R: Rng + ?Sized>(m: &SyntheticModel, label: Label, rng: &mut R) -> FeatureVector {
    let z = m.sample_noise(rng);
    m.shifted(label, m.snr_scale, &z)
}

/// Labels of `trials` speller trials: 16 targets among 68 stimuli each.
fn calibration_labels<R: Rng + ?Sized>(design: &TrialDesign, trials: usize, rng: &mut R) -> Vec<Label> {
    let targets: usize = design.group_targets().iter().map(|(t, _)| t).sum();
    let mut out = Vec::with_capacity(trials * design.stimuli());
    for _ in 0..trials {
        let mut block: Vec<Label> =
            (0..design.stimuli()).map(|k| if k < targets { Label::Target } else { Label::NonTarget }).collect();
        block.shuffle(rng);
        out.extend(block);
    }
    out
}

/// Fresh labelled data shaped like one spelling session, e.g. to check a calibration.
pub fn session_like_data<R: Rng + ?Sized>(m: &SyntheticModel, rng: &mut R) -> (Vec<FeatureVector>, Vec<Label>) {
    let labels = calibration_labels(&TrialDesign::speller(), CALIBRATION_TRIALS, rng);
    let xs = labels.iter().map(|&l| sample_epoch(m, l, rng)).collect();
    (xs, labels)
}

/// Finds the scale at which shrinkage-LDA reaches `target_auc` in
/// chronological cross-validation.
///
/// Bisection over the scale with common random numbers: labels and noise
/// are drawn once, so the cross-validated AUC is a deterministic function
/// of the scale.
pub fn calibrate_snr<R: Rng + ?Sized>(m: &SyntheticModel, target_auc: f64, rng: &mut R) -> Result<f64> {
    if !(0.5..1.0).contains(&target_auc) {
        return Err(LlpError::InvalidArgument(format!("target AUC {target_auc} outside [0.5, 1)")));
    }
    if target_auc == 0.5 {
        return Ok(0.0);
    }
    let labels = calibration_labels(&TrialDesign::speller(), CALIBRATION_TRIALS, rng);
    let noise: Vec<Vec<f64>> = labels.iter().map(|_| m.sample_noise(rng)).collect();
    let cv_auc = |s: f64| -> Result<f64> {
        let xs: Vec<FeatureVector> = labels.iter().zip(&noise).map(|(&l, z)| m.shifted(l, s, z)).collect();
        supervised_cv(&xs, &labels, CALIBRATION_FOLDS)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut at_hi = cv_auc(hi)?;
    while at_hi < target_auc {
        lo = hi;
        hi *= 2.0;
        if hi > CALIBRATION_MAX_SCALE {
            return Err(LlpError::NoConvergence(format!("AUC {target_auc} not reached (best {at_hi:.4})")));
        }
        at_hi = cv_auc(hi)?;
    }
    if (at_hi - target_auc).abs() <= CALIBRATION_TOLERANCE {
        return Ok(hi);
    }
    let mut mid = (lo + hi) / 2.0;
    for _ in 0..CALIBRATION_ITERATIONS {
        mid = (lo + hi) / 2.0;
        let a = cv_auc(mid)?;
        log::debug!("calibration scale {mid:.4} → AUC {a:.4}");
        if (a - target_auc).abs() <= CALIBRATION_TOLERANCE {
            return Ok(mid);
        }
        if a < target_auc {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    log::warn!("calibration stopped at bracket width {:.2e}", hi - lo);
    Ok(mid)
}

/// Chronologically ordered labelled epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPool {
    pub features: Vec<FeatureVector>,
    pub labels: Vec<Label>,
}

impl LabeledPool {
    pub fn new(features: Vec<FeatureVector>, labels: Vec<Label>) -> Result<Self> {
        check_dim(features.len(), labels.len())?;
        if !labels.iter().any(|l| l.is_target()) || labels.iter().all(|l| l.is_target()) {
            return Err(LlpError::InsufficientData("pool needs both classes".into()));
        }
        Ok(Self { features, labels })
    }

    /// `n_target` targets followed by interleaved non-targets, in random order.
    pub fn sample<R: Rng + ?Sized>(
        m: &SyntheticModel,
        n_target: usize,
        n_nontarget: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut labels: Vec<Label> = std::iter::repeat_n(Label::Target, n_target)
            .chain(std::iter::repeat_n(Label::NonTarget, n_nontarget))
            .collect();
        labels.shuffle(rng);
        let features = labels.iter().map(|&l| sample_epoch(m, l, rng)).collect();
        Self::new(features, labels)
    }
}

/// Epochs assigned to groups with prescribed class proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtificialSet {
    pub features: Vec<FeatureVector>,
    pub labels: Vec<Label>,
    /// Zero-based group of each epoch.
    pub groups: Vec<usize>,
}

impl ArtificialSet {
    pub fn group_means(&self, n_groups: usize) -> Result<GroupMeans> {
        let d = self.features.first().map_or(0, |f| f.dim());
        let mut sums = vec![vec![0.0; d]; n_groups];
        let mut counts = vec![0usize; n_groups];
        for (x, &g) in self.features.iter().zip(&self.groups) {
            for (s, v) in sums[g].iter_mut().zip(x.iter()) {
                *s += v;
            }
            counts[g] += 1;
        }
        if counts.contains(&0) {
            return Err(LlpError::InsufficientData("a group is empty".into()));
        }
        let means = sums.iter().zip(&counts).map(|(s, &c)| s.iter().map(|v| v / c as f64).collect()).collect();
        GroupMeans::new(means, counts)
    }

    /// Target count per group.
    pub fn group_targets(&self, n_groups: usize) -> Vec<usize> {
        let mut t = vec![0; n_groups];
        for (l, &g) in self.labels.iter().zip(&self.groups) {
            t[g] += usize::from(l.is_target());
        }
        t
    }
}

/// Builds `n` epochs split into equally sized groups whose target fractions
/// follow the rows of `m` as closely as integer counts allow.
///
/// Epochs of each class are taken chronologically from the start of the
/// pool and spread over the groups at random.
pub fn assemble_artificial<R: Rng + ?Sized>(
    pool: &LabeledPool,
    m: &MixingMatrix,
    n: usize,
    rng: &mut R,
) -> Result<ArtificialSet> {
    let g = m.groups();
    if n < g {
        return Err(LlpError::InvalidArgument(format!("{n} epochs for {g} groups")));
    }
    let sizes: Vec<usize> = (0..g).map(|k| n / g + usize::from(k < n % g)).collect();
    let targets: Vec<usize> =
        sizes.iter().enumerate().map(|(k, &s)| (s as f64 * m.pi_plus(k)).round() as usize).collect();
    let need_t: usize = targets.iter().sum();
    let need_n = n - need_t;
    let pos: Vec<usize> = (0..pool.labels.len()).filter(|&i| pool.labels[i].is_target()).take(need_t).collect();
    let neg: Vec<usize> = (0..pool.labels.len()).filter(|&i| !pool.labels[i].is_target()).take(need_n).collect();
    if pos.len() < need_t || neg.len() < need_n {
        return Err(LlpError::InsufficientData(format!(
            "pool has {} targets and {} non-targets, {need_t} and {need_n} needed",
            pos.len(),
            neg.len()
        )));
    }
    let mut t_slots: Vec<usize> = targets.iter().enumerate().flat_map(|(k, &c)| std::iter::repeat_n(k, c)).collect();
    let mut n_slots: Vec<usize> =
        sizes.iter().zip(&targets).enumerate().flat_map(|(k, (&s, &t))| std::iter::repeat_n(k, s - t)).collect();
    t_slots.shuffle(rng);
    n_slots.shuffle(rng);
    let mut picked: Vec<(usize, usize)> = pos.into_iter().zip(t_slots).chain(neg.into_iter().zip(n_slots)).collect();
    picked.sort_unstable();
    Ok(ArtificialSet {
        features: picked.iter().map(|&(i, _)| pool.features[i].clone()).collect(),
        labels: picked.iter().map(|&(i, _)| pool.labels[i]).collect(),
        groups: picked.iter().map(|&(_, k)| k).collect(),
    })
}

/// Root-mean-square error of LLP-reconstructed class means over both classes.
pub fn reconstruction_rmse(set: &ArtificialSet, m: &MixingMatrix, truth: &ClassMeans) -> Result<f64> {
    let est = reconstruct_means(&pseudoinverse(m)?, &set.group_means(m.groups())?)?;
    let d = truth.plus.len();
    check_dim(d, est.plus.len())?;
    let se: f64 =
        est.plus.iter().zip(&truth.plus).chain(est.minus.iter().zip(&truth.minus)).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((se / (2 * d) as f64).sqrt())
}

/// Settings of one simulated spelling session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub sentence: String,
    pub seed: u64,
    pub grid: SymbolGrid,
    pub design: TrialDesign,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            sentence: DEFAULT_SENTENCE.to_string(),
            seed: 0,
            grid: SymbolGrid::speller(),
            design: TrialDesign::speller(),
        }
    }
}

/// Stimuli, epochs and labels of one simulated trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: Trial,
    pub epochs: Vec<FeatureVector>,
    pub labels: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub seed: u64,
    pub truth: Vec<usize>,
    pub online: Vec<usize>,
    pub posthoc: Vec<usize>,
    /// AUC on each trial of the classifier that decoded it; `None` before training.
    pub auc_trajectory: Vec<Option<f64>>,
    pub online_accuracy: f64,
    pub online_post_ramp: Option<f64>,
    pub posthoc_accuracy: f64,
    #[serde(skip)]
    pub history: Vec<TrialRecord>,
    #[serde(skip)]
    pub final_classifier: Option<LinearClassifier>,
}

/// Spells the sentence with the online LLP decoder.
///
/// Before the first trial the decoder guesses uniformly among selectable
/// symbols. After every trial its epochs enter the state and the classifier
/// is retrained. At the end all trials are decoded again with the final
/// classifier.
pub fn simulate_session(m: &SyntheticModel, cfg: &SessionConfig) -> Result<SessionResult> {
    let truth = cfg.grid.encode(&cfg.sentence)?;
    if truth.is_empty() {
        return Err(LlpError::InvalidArgument("sentence is empty".into()));
    }
    let mixing = cfg.design.mixing();
    let selectable = cfg.grid.selectable();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = OnlineLlpState::new(m.dim(), cfg.design.groups());
    let mut classifier: Option<LinearClassifier> = None;
    let mut online = Vec::with_capacity(truth.len());
    let mut auc_trajectory = Vec::with_capacity(truth.len());
    let mut history = Vec::with_capacity(truth.len());
    for &attended in &truth {
        let trial = assemble_trial(&cfg.grid, &cfg.design, rng.gen())?;
        let labels = label_stimuli(&trial, &cfg.grid, attended)?;
        let epochs: Vec<FeatureVector> = labels.iter().map(|&l| sample_epoch(m, l, &mut rng)).collect();
        let decision = match &classifier {
            Some(c) => {
                let scores = epochs.iter().map(|x| c.score(x)).collect::<Result<Vec<_>>>()?;
                auc_trajectory.push(Some(auc(&scores, &labels)?));
                select_symbol(c, &trial, &cfg.grid, &epochs)?
            }
            None => {
                auc_trajectory.push(None);
                *selectable.choose(&mut rng).expect("grid has selectable symbols")
            }
        };
        online.push(decision);
        for (x, st) in epochs.iter().zip(&trial.stimuli) {
            state.update(x, st.group)?;
        }
        classifier = Some(train_llp(&state, &mixing)?);
        history.push(TrialRecord { trial, epochs, labels });
    }
    let last = classifier.expect("at least one trial");
    let pairs: Vec<(Trial, Vec<FeatureVector>)> = history.iter().map(|r| (r.trial.clone(), r.epochs.clone())).collect();
    let posthoc = posthoc_reanalyze(&last, &cfg.grid, &pairs)?;
    let on = character_accuracy(&online, &truth)?;
    let post = character_accuracy(&posthoc, &truth)?;
    Ok(SessionResult {
        seed: cfg.seed,
        truth,
        online,
        posthoc,
        auc_trajectory,
        online_accuracy: on.overall,
        online_post_ramp: on.post_ramp,
        posthoc_accuracy: post.overall,
        history,
        final_classifier: Some(last),
    })
}

/// Runs one session per seed in parallel.
pub fn simulate_sessions(m: &SyntheticModel, base: &SessionConfig, seeds: &[u64]) -> Result<Vec<SessionResult>> {
    seeds.par_iter().map(|&seed| simulate_session(m, &SessionConfig { seed, ..base.clone() })).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_model(snr: f64) -> SyntheticModel {
        SyntheticModel::new(12, 2, 7).unwrap().with_snr(snr)
    }

    #[test]
    fn direction_has_unit_mahalanobis_length() {
        let m = SyntheticModel::speller(1).unwrap();
        assert_eq!(m.dim(), 174);
        assert!((m.mahalanobis_norm(&m.direction).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(SyntheticModel::from_json(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn zero_snr_makes_classes_identical() {
        let m = small_model(0.0);
        let cm = m.class_means();
        assert_eq!(cm.plus, cm.minus);
        let a = sample_epoch(&m, Label::Target, &mut ChaCha8Rng::seed_from_u64(4));
        let b = sample_epoch(&m, Label::NonTarget, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }

    #[test]
    fn sample_mean_is_close_to_template() {
        let m = SyntheticModel { noise_factor: vec![], ..small_model(2.0) };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mut mean = vec![0.0; m.dim()];
        for _ in 0..n {
            for (a, v) in mean.iter_mut().zip(sample_epoch(&m, Label::Target, &mut rng).iter()) {
                *a += v / n as f64;
            }
        }
        for (a, b) in mean.iter().zip(&m.class_means().plus) {
            assert!((a - b).abs() < 4.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = small_model(1.0);
        let a = sample_epoch(&m, Label::Target, &mut ChaCha8Rng::seed_from_u64(5));
        let b = sample_epoch(&m, Label::Target, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn calibration_bounds() {
        let m = small_model(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(calibrate_snr(&m, 0.5, &mut rng).unwrap(), 0.0);
        assert!(calibrate_snr(&m, 1.0, &mut rng).is_err());
        assert!(calibrate_snr(&m, 0.3, &mut rng).is_err());
        let lo = calibrate_snr(&m, 0.8, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let hi = calibrate_snr(&m, 0.95, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(lo < hi);
        let (xs, ys) = session_like_data(&m.clone().with_snr(hi), &mut ChaCha8Rng::seed_from_u64(3));
        let a = supervised_cv(&xs, &ys, 5).unwrap();
        assert!((a - 0.95).abs() <= 0.01, "{a}");
    }

    #[test]
    fn artificial_sets() {
        let m = small_model(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pool = LabeledPool::sample(&m, 400, 800, &mut rng).unwrap();
        let id = assemble_artificial(&pool, &MixingMatrix::identity(), 100, &mut rng).unwrap();
        for (l, g) in id.labels.iter().zip(&id.groups) {
            assert_eq!(l.is_target(), *g == 0);
        }
        let sp = assemble_artificial(&pool, &MixingMatrix::speller(), 680, &mut rng).unwrap();
        let t = sp.group_targets(2);
        assert!((t[0] as f64 - 340.0 * 3.0 / 8.0).abs() <= 1.0);
        assert!((t[1] as f64 - 340.0 * 2.0 / 18.0).abs() <= 1.0);
        assert_eq!(sp.groups.iter().filter(|&&g| g == 0).count(), 340);
        assert!(assemble_artificial(&pool, &MixingMatrix::speller(), 5000, &mut rng).is_err());
        assert!(LabeledPool::new(vec![FeatureVector(vec![1.0])], vec![Label::Target]).is_err());
    }

    #[test]
    fn sessions_are_deterministic_and_separable_at_high_snr() {
        let m = small_model(12.0);
        let cfg = SessionConfig { sentence: "HALLO WELT".into(), seed: 3, ..Default::default() };
        let a = simulate_session(&m, &cfg).unwrap();
        let b = simulate_session(&m, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.online[1..], a.truth[1..]);
        assert_eq!(a.posthoc, a.truth);
        assert!(a.auc_trajectory[0].is_none());
        assert_eq!(a.history.len(), 10);
    }

    #[test]
    fn bad_sentence_is_rejected() {
        let cfg = SessionConfig { sentence: "#".into(), ..Default::default() };
        assert!(simulate_session(&small_model(1.0), &cfg).is_err());
        let cfg = SessionConfig { sentence: String::new(), ..Default::default() };
        assert!(simulate_session(&small_model(1.0), &cfg).is_err());
    }
}
