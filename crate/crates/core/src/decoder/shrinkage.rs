//! Analytic shrinkage of covariance estimates toward a scaled identity.
//!
//! With sample covariance `C` (denominator `n − 1`) and target `ν I`,
//! `ν = mean(diag C)`, the intensity is
//!
//! ```text
//! γ = Σᵢⱼ Var(cᵢⱼ) / Σᵢⱼ (cᵢⱼ − ν δᵢⱼ)²,    clipped to [0, 1]
//! Var(cᵢⱼ) = n / (n − 1)³ · Σₖ (wₖᵢⱼ − w̄ᵢⱼ)²,  wₖᵢⱼ = (xₖᵢ − x̄ᵢ)(xₖⱼ − x̄ⱼ)
//! ```
//!
//! and the estimate is `(1 − γ) C + γ ν I`.

use nalgebra::DMatrix;

use crate::error::{LlpError, Result};
use crate::types::FeatureVector;

/// Second-order statistics plus the estimated variance of the covariance entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterStats {
    pub n: usize,
    pub mean: Vec<f64>,
    /// Sample covariance, denominator `n − 1`.
    pub cov: DMatrix<f64>,
    /// `Σᵢⱼ Var(cᵢⱼ)`.
    pub entry_variance: f64,
}

impl ScatterStats {
    /// Batch computation from the samples themselves.
    pub fn from_samples(xs: &[&[f64]]) -> Result<Self> {
        let n = xs.len();
        if n < 2 {
            return Err(LlpError::InsufficientData(format!("covariance needs ≥ 2 samples, got {n}")));
        }
        let d = xs[0].len();
        if let Some(x) = xs.iter().find(|x| x.len() != d) {
            return Err(LlpError::DimensionMismatch { expected: d, got: x.len() });
        }
        let mut mean = vec![0.0; d];
        for x in xs {
            for (m, v) in mean.iter_mut().zip(x.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centered = DMatrix::from_fn(n, d, |k, i| xs[k][i] - mean[i]);
        let scatter = centered.transpose() * &centered;
        let sq = centered.map(|v| v * v);
        let fourth = sq.transpose() * &sq;
        let nf = n as f64;
        let mut dev = 0.0;
        for i in 0..d {
            for j in 0..d {
                dev += fourth[(i, j)] - scatter[(i, j)] * scatter[(i, j)] / nf;
            }
        }
        Ok(Self { n, mean, cov: scatter / (nf - 1.0), entry_variance: nf / (nf - 1.0).powi(3) * dev })
    }

    pub fn from_vectors(xs: &[FeatureVector]) -> Result<Self> {
        let refs: Vec<&[f64]> = xs.iter().map(|x| &x[..]).collect();
        Self::from_samples(&refs)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Unweighted average of two estimates; entry variances combine as for
    /// a mean of independent estimators.
    pub fn average(a: &Self, b: &Self) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(LlpError::DimensionMismatch { expected: a.dim(), got: b.dim() });
        }
        Ok(Self {
            n: a.n + b.n,
            mean: a.mean.iter().zip(&b.mean).map(|(x, y)| (x + y) / 2.0).collect(),
            cov: (&a.cov + &b.cov) * 0.5,
            entry_variance: (a.entry_variance + b.entry_variance) / 4.0,
        })
    }
}

/// Regularized covariance with its shrinkage parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrunkCovariance {
    pub matrix: DMatrix<f64>,
    pub gamma: f64,
    /// Mean diagonal variance `ν`.
    pub target_scale: f64,
    /// Set when the sample covariance is identically zero.
    pub degenerate: bool,
}

/// Applies the analytic intensity to `stats`.
pub fn shrink(stats: &ScatterStats) -> ShrunkCovariance {
    let d = stats.dim();
    let c = &stats.cov;
    let nu = c.trace() / d as f64;
    let mut dist = 0.0;
    for i in 0..d {
        for j in 0..d {
            let t = if i == j { nu } else { 0.0 };
            dist += (c[(i, j)] - t).powi(2);
        }
    }
    let gamma = if dist > 0.0 { (stats.entry_variance / dist).clamp(0.0, 1.0) } else { 1.0 };
    let mut matrix = c * (1.0 - gamma);
    for i in 0..d {
        matrix[(i, i)] += gamma * nu;
    }
    let degenerate = c.iter().all(|v| *v == 0.0);
    if degenerate {
        log::warn!("sample covariance is zero; shrunk covariance is degenerate");
    }
    ShrunkCovariance { matrix, gamma, target_scale: nu, degenerate }
}
