//! Mean-map algebra for learning from label proportions.
//!
//! A [`MixingMatrix`] holds, for each of `G` groups, the proportion of
//! target (`+`) and non-target (`-`) samples in that group. Since the
//! expected group mean is the proportion-weighted mixture of the two class
//! means, the class means can be recovered from the group means alone with
//! the pseudoinverse `(ΠᵀΠ)⁻¹Πᵀ`:
//!
//! ```text
//! µ₊ = Σₖ ν₊ᵏ µₖ        µ₋ = Σₖ ν₋ᵏ µₖ
//! ```
//!
//! The price for not knowing the labels is variance inflation, summarised by
//! the noise amplification factor `G · Σ_c Σ_k (ν_cᵏ)²`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, LlpError, Result};

/// Tolerance on row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;
/// Threshold on `det(ΠᵀΠ)` below which the matrix is treated as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Row-stochastic `G × 2` matrix of target / non-target proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingMatrix {
    rows: Vec<[f64; 2]>,
}

/// A single broken invariant of a [`MixingMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingViolation {
    TooFewGroups { groups: usize },
    RowSum { row: usize, sum: f64 },
    OutOfRange { row: usize, col: usize, value: f64 },
    RankDeficient { determinant: f64 },
}

impl std::fmt::Display for MixingViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::TooFewGroups { groups } => write!(f, "{groups} group(s), at least 2 needed"),
            Self::RowSum { row, sum } => write!(f, "row {row} sums to {sum}, not 1"),
            Self::OutOfRange { row, col, value } => write!(f, "entry ({row}, {col}) = {value} outside [0, 1]"),
            Self::RankDeficient { determinant } => write!(f, "rank < 2 (det = {determinant:e})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingReport {
    pub violations: Vec<MixingViolation>,
}

impl MixingReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl MixingMatrix {
    /// Wraps the rows without checking them; see [`validate_mixing`].
    pub fn new(rows: Vec<[f64; 2]>) -> Self {
        Self { rows }
    }

    /// Builds the matrix and rejects it unless every invariant holds.
    pub fn try_new(rows: Vec<[f64; 2]>) -> Result<Self> {
        let m = Self::new(rows);
        let report = validate_mixing(&m);
        if let Some(v) = report.violations.first() {
            return Err(match v {
                MixingViolation::RankDeficient { determinant } => {
                    LlpError::Singular(format!("mixing matrix has rank < 2 (det(ΠᵀΠ) = {determinant:e})"))
                }
                other => LlpError::InvalidMixing(other.to_string()),
            });
        }
        Ok(m)
    }

    /// The two-sequence speller design: 3 targets in 8 stimuli, 2 in 18.
    pub fn speller() -> Self {
        Self::new(vec![[3.0 / 8.0, 5.0 / 8.0], [2.0 / 18.0, 16.0 / 18.0]])
    }

    /// Fully supervised case: every group is pure.
    pub fn identity() -> Self {
        Self::new(vec![[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn groups(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.rows
    }

    /// Proportion of targets in group `k`.
    pub fn pi_plus(&self, k: usize) -> f64 {
        self.rows[k][0]
    }

    /// Proportion of non-targets in group `k`.
    pub fn pi_minus(&self, k: usize) -> f64 {
        self.rows[k][1]
    }

    /// Entries of `ΠᵀΠ` as `(a, b, c)` for the symmetric matrix `[[a, b], [b, c]]`.
    fn gram(&self) -> (f64, f64, f64) {
        self.rows.iter().fold((0.0, 0.0, 0.0), |(a, b, c), r| (a + r[0] * r[0], b + r[0] * r[1], c + r[1] * r[1]))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| LlpError::InvalidMixing(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("mixing matrix serializes")
    }
}

/// Checks row sums, entry range and rank.
pub fn validate_mixing(m: &MixingMatrix) -> MixingReport {
    let mut violations = Vec::new();
    if m.groups() < 2 {
        violations.push(MixingViolation::TooFewGroups { groups: m.groups() });
    }
    for (row, r) in m.rows.iter().enumerate() {
        for (col, &value) in r.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                violations.push(MixingViolation::OutOfRange { row, col, value });
            }
        }
        let sum = r[0] + r[1];
        if !sum.is_finite() || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            violations.push(MixingViolation::RowSum { row, sum });
        }
    }
    let (a, b, c) = m.gram();
    let determinant = a * c - b * b;
    if !(determinant > RANK_TOLERANCE) {
        violations.push(MixingViolation::RankDeficient { determinant });
    }
    MixingReport { violations }
}

/// Reconstruction weights `ν`, one row per class and one column per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseCoefficients {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl InverseCoefficients {
    pub fn groups(&self) -> usize {
        self.plus.len()
    }

    /// `ν · Π` as a row-major 2×2 array.
    pub fn times(&self, m: &MixingMatrix) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for (k, r) in m.rows().iter().enumerate() {
            for j in 0..2 {
                out[0][j] += self.plus[k] * r[j];
                out[1][j] += self.minus[k] * r[j];
            }
        }
        out
    }
}

/// `(ΠᵀΠ)⁻¹Πᵀ` through the closed-form 2×2 inverse of the Gram matrix.
pub fn pseudoinverse(m: &MixingMatrix) -> Result<InverseCoefficients> {
    let m = MixingMatrix::try_new(m.rows.clone())?;
    let (a, b, c) = m.gram();
    let det = a * c - b * b;
    let (i00, i01, i11) = (c / det, -b / det, a / det);
    let plus = m.rows.iter().map(|r| i00 * r[0] + i01 * r[1]).collect();
    let minus = m.rows.iter().map(|r| i01 * r[0] + i11 * r[1]).collect();
    Ok(InverseCoefficients { plus, minus })
}

/// `G · Σ_c Σ_k (ν_cᵏ)²`.
pub fn noise_amplification(m: &MixingMatrix) -> Result<f64> {
    let nu = pseudoinverse(m)?;
    let frob: f64 = nu.plus.iter().chain(&nu.minus).map(|v| v * v).sum();
    Ok(m.groups() as f64 * frob)
}

/// Per-group mean feature vectors with the number of samples behind each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    pub means: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
}

impl GroupMeans {
    pub fn new(means: Vec<Vec<f64>>, counts: Vec<usize>) -> Result<Self> {
        if means.len() != counts.len() {
            return Err(LlpError::InvalidArgument(format!("{} group means but {} counts", means.len(), counts.len())));
        }
        if let Some(first) = means.first() {
            for m in &means[1..] {
                check_dim(first.len(), m.len())?;
            }
        }
        Ok(Self { means, counts })
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }
}

/// Target and non-target class means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMeans {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl ClassMeans {
    /// `µ₊ − µ₋`.
    pub fn difference(&self) -> Vec<f64> {
        self.plus.iter().zip(&self.minus).map(|(p, m)| p - m).collect()
    }
}

/// Mixes class means into the group means implied by `m`.
pub fn mix_class_means(m: &MixingMatrix, classes: &ClassMeans) -> GroupMeans {
    let means = m
        .rows()
        .iter()
        .map(|r| classes.plus.iter().zip(&classes.minus).map(|(p, n)| r[0] * p + r[1] * n).collect())
        .collect();
    GroupMeans { means, counts: vec![1; m.groups()] }
}

/// Unweighted linear reconstruction of the class means from group means.
pub fn reconstruct_means(nu: &InverseCoefficients, g: &GroupMeans) -> Result<ClassMeans> {
    check_dim(nu.groups(), g.means.len())?;
    if let Some(k) = g.counts.iter().position(|&c| c == 0) {
        return Err(LlpError::InsufficientData(format!("group {k} has no samples")));
    }
    let d = g.dim();
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    for (k, mean) in g.means.iter().enumerate() {
        for (j, &v) in mean.iter().enumerate() {
            plus[j] += nu.plus[k] * v;
            minus[j] += nu.minus[k] * v;
        }
    }
    Ok(ClassMeans { plus, minus })
}
