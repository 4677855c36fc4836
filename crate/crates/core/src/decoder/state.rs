use nalgebra::DMatrix;

use super::shrinkage::{shrink, ScatterStats, ShrunkCovariance};
use crate::error::{check_dim, LlpError, Result};
use crate::mixing::{pseudoinverse, reconstruct_means, ClassMeans, GroupMeans, MixingMatrix};

/// Running sums that hold everything the online decoder knows.
///
/// Besides per-group sums it keeps raw moment sums up to fourth order over
/// all epochs, which is what the shrinkage intensity needs.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineLlpState {
    dim: usize,
    group_sums: Vec<Vec<f64>>,
    group_counts: Vec<usize>,
    n: usize,
    /// `Σ xᵢ`
    sum: Vec<f64>,
    /// `Σ xᵢ xⱼ`, row-major.
    cross: Vec<f64>,
    /// `Σ xᵢ² xⱼ`, row-major.
    sq_lin: Vec<f64>,
    /// `Σ xᵢ² xⱼ²`, row-major.
    sq_sq: Vec<f64>,
}

impl OnlineLlpState {
    pub fn new(dim: usize, groups: usize) -> Self {
        Self {
            dim,
            group_sums: vec![vec![0.0; dim]; groups],
            group_counts: vec![0; groups],
            n: 0,
            sum: vec![0.0; dim],
            cross: vec![0.0; dim * dim],
            sq_lin: vec![0.0; dim * dim],
            sq_sq: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn groups(&self) -> usize {
        self.group_counts.len()
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn group_counts(&self) -> &[usize] {
        &self.group_counts
    }

    pub fn group_sums(&self) -> &[Vec<f64>] {
        &self.group_sums
    }

    /// Forgets everything, e.g. at the start of a new sentence.
    pub fn reset(&mut self) {
        *self = Self::new(self.dim, self.groups());
    }

    pub fn update(&mut self, x: &[f64], group: usize) -> Result<()> {
        check_dim(self.dim, x.len())?;
        if group >= self.groups() {
            return Err(LlpError::InvalidArgument(format!("group {group} out of range for {} groups", self.groups())));
        }
        for (s, v) in self.group_sums[group].iter_mut().zip(x) {
            *s += v;
        }
        self.group_counts[group] += 1;
        self.n += 1;
        let d = self.dim;
        for i in 0..d {
            let xi = x[i];
            let xi2 = xi * xi;
            self.sum[i] += xi;
            let row = i * d;
            let cross = &mut self.cross[row..row + d];
            let sq_lin = &mut self.sq_lin[row..row + d];
            let sq_sq = &mut self.sq_sq[row..row + d];
            for j in 0..d {
                let xj = x[j];
                cross[j] += xi * xj;
                sq_lin[j] += xi2 * xj;
                sq_sq[j] += xi2 * xj * xj;
            }
        }
        Ok(())
    }

    pub fn group_means(&self) -> Result<GroupMeans> {
        if let Some(k) = self.group_counts.iter().position(|&c| c == 0) {
            return Err(LlpError::InsufficientData(format!("group {k} has no epochs yet")));
        }
        let means = self
            .group_sums
            .iter()
            .zip(&self.group_counts)
            .map(|(s, &c)| s.iter().map(|v| v / c as f64).collect())
            .collect();
        GroupMeans::new(means, self.group_counts.clone())
    }

    /// Class means recovered through the mixing matrix.
    pub fn class_means(&self, m: &MixingMatrix) -> Result<ClassMeans> {
        check_dim(m.groups(), self.groups())?;
        reconstruct_means(&pseudoinverse(m)?, &self.group_means()?)
    }

    /// Global covariance statistics of all epochs seen so far.
    pub fn scatter(&self) -> Result<ScatterStats> {
        let n = self.n;
        if n < 2 {
            return Err(LlpError::InsufficientData(format!("covariance needs ≥ 2 epochs, got {n}")));
        }
        let d = self.dim;
        let nf = n as f64;
        let m: Vec<f64> = self.sum.iter().map(|s| s / nf).collect();
        let scatter = DMatrix::from_fn(d, d, |i, j| self.cross[i * d + j] - nf * m[i] * m[j]);
        let mut dev = 0.0;
        for i in 0..d {
            let (mi, si) = (m[i], self.sum[i]);
            for j in 0..d {
                let mj = m[j];
                // Σₖ (xᵢ − mᵢ)² (xⱼ − mⱼ)² expanded in raw moments
                let centered4 =
                    self.sq_sq[i * d + j] - 2.0 * mj * self.sq_lin[i * d + j] - 2.0 * mi * self.sq_lin[j * d + i]
                        + mj * mj * self.cross[i * d + i]
                        + mi * mi * self.cross[j * d + j]
                        + 4.0 * mi * mj * self.cross[i * d + j]
                        - 2.0 * mi * mj * mj * si
                        - 2.0 * mi * mi * mj * self.sum[j]
                        + nf * mi * mi * mj * mj;
                let s = scatter[(i, j)];
                dev += centered4 - s * s / nf;
            }
        }
        Ok(ScatterStats { n, mean: m, cov: scatter / (nf - 1.0), entry_variance: nf / (nf - 1.0).powi(3) * dev })
    }

    /// Shrinkage-regularized global covariance.
    pub fn pooled_covariance(&self) -> Result<ShrunkCovariance> {
        Ok(shrink(&self.scatter()?))
    }
}
