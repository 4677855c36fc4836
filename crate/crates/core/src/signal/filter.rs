//! Chebyshev type II band-pass design as cascaded second-order sections.
//!
//! The design goes analog prototype → band-pass transform → bilinear
//! transform (with pre-warped band edges) → pole/zero pairing into
//! biquads. Filtering is causal, forward only.

use std::f64::consts::PI;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{LlpError, Result};

type C64 = Complex<f64>;

/// How the two band frequencies are placed on the magnitude response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandEdges {
    /// Band edges are the −3 dB points; the stopband begins further out.
    #[default]
    HalfPower,
    /// Band edges are where the response first reaches the stopband attenuation.
    Stopband,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    /// Order of the low-pass prototype; the band-pass filter has twice as many poles.
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub stopband_attenuation_db: f64,
    pub edges: BandEdges,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self { order: 3, low_hz: 0.5, high_hz: 8.0, stopband_attenuation_db: 40.0, edges: BandEdges::HalfPower }
    }
}

impl FilterSpec {
    pub fn validate(&self, rate: f64) -> Result<()> {
        if self.order == 0 {
            return Err(LlpError::InvalidArgument("filter order must be positive".into()));
        }
        if !(self.stopband_attenuation_db > 0.0) {
            return Err(LlpError::InvalidArgument("stopband attenuation must be positive".into()));
        }
        if !(rate > 0.0) {
            return Err(LlpError::InvalidArgument(format!("bad sampling rate {rate}")));
        }
        if !(0.0 < self.low_hz && self.low_hz < self.high_hz && self.high_hz < rate / 2.0) {
            return Err(LlpError::InvalidArgument(format!(
                "band [{}, {}] Hz must satisfy 0 < low < high < {} Hz",
                self.low_hz,
                self.high_hz,
                rate / 2.0
            )));
        }
        Ok(())
    }
}

/// One biquad: `b0 + b1 z⁻¹ + b2 z⁻²` over `1 + a1 z⁻¹ + a2 z⁻²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: C64) -> C64 {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z2 * self.b[2];
        let den = self.a[0] + z_inv * self.a[1] + z2 * self.a[2];
        num / den
    }

    /// Roots of `z² + a1 z + a2`.
    pub fn poles(&self) -> [C64; 2] {
        let (a1, a2) = (self.a[1], self.a[2]);
        let disc = C64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        [(-a1 + disc) / 2.0, (-a1 - disc) / 2.0]
    }
}

/// Cascade of second-order sections designed for a fixed sampling rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
    pub rate: f64,
}

impl SosFilter {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> C64 {
        let w = 2.0 * PI * freq_hz / self.rate;
        let z_inv = C64::from_polar(1.0, -w);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    pub fn magnitude_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).norm().log10()
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().flat_map(|s| s.poles()).all(|p| p.norm() < 1.0)
    }

    /// Causal filtering of one channel (transposed direct form II per section).
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            let (mut s1, mut s2) = (0.0, 0.0);
            for v in y.iter_mut() {
                let input = *v;
                let out = s.b[0] * input + s1;
                s1 = s.b[1] * input - s.a[1] * out + s2;
                s2 = s.b[2] * input - s.a[2] * out;
                *v = out;
            }
        }
        y
    }
}

/// Analog Chebyshev II low-pass prototype with its stopband edge at 1 rad/s.
fn cheby2_prototype(order: usize, rs_db: f64) -> (Vec<C64>, Vec<C64>, f64) {
    let n = order as f64;
    let de = 1.0 / (10f64.powf(0.1 * rs_db) - 1.0).sqrt();
    let mu = (1.0 / de).asinh() / n;
    let ms: Vec<f64> = (0..order).map(|i| -(n - 1.0) + 2.0 * i as f64).filter(|m| m.abs() > 0.5).collect();
    let zeros: Vec<C64> = ms.iter().map(|m| (C64::i() / (m * PI / (2.0 * n)).sin()).conj() * -1.0).collect();
    let poles: Vec<C64> = (0..order)
        .map(|i| {
            let m = -(n - 1.0) + 2.0 * i as f64;
            let p = -C64::from_polar(1.0, PI * m / (2.0 * n));
            C64::new(mu.sinh() * p.re, mu.cosh() * p.im).inv()
        })
        .collect();
    let num: C64 = poles.iter().map(|p| -p).product();
    let den: C64 = zeros.iter().map(|z| -z).product();
    (zeros, poles, (num / den).re)
}

fn pair_conjugates(roots: &[C64]) -> Vec<[C64; 2]> {
    let tol = 1e-9;
    let mut complex: Vec<C64> = roots.iter().copied().filter(|r| r.im > tol).collect();
    complex.sort_by(|a, b| a.re.total_cmp(&b.re));
    let mut real: Vec<f64> = roots.iter().filter(|r| r.im.abs() <= tol).map(|r| r.re).collect();
    real.sort_by(f64::total_cmp);
    let mut pairs: Vec<[C64; 2]> = complex.into_iter().map(|c| [c, c.conj()]).collect();
    for chunk in real.chunks(2) {
        let second = chunk.get(1).copied().unwrap_or(0.0);
        pairs.push([C64::new(chunk[0], 0.0), C64::new(second, 0.0)]);
    }
    pairs
}

fn quadratic([r1, r2]: [C64; 2]) -> [f64; 3] {
    [1.0, -(r1 + r2).re, (r1 * r2).re]
}

/// Designs the band-pass filter for `rate` Hz.
pub fn design_bandpass(spec: &FilterSpec, rate: f64) -> Result<SosFilter> {
    spec.validate(rate)?;
    let (mut z, mut p, mut k) = cheby2_prototype(spec.order, spec.stopband_attenuation_db);
    let degree = p.len() - z.len();

    if spec.edges == BandEdges::HalfPower {
        // Move the −3 dB frequency of the prototype to 1 rad/s.
        let de = 1.0 / (10f64.powf(0.1 * spec.stopband_attenuation_db) - 1.0).sqrt();
        let scale = ((1.0 / de).acosh() / spec.order as f64).cosh();
        z.iter_mut().for_each(|v| *v *= scale);
        p.iter_mut().for_each(|v| *v *= scale);
        k *= scale.powi(degree as i32);
    }

    // pre-warped analog band edges
    let fs2 = 2.0 * rate;
    let w1 = fs2 * (PI * spec.low_hz / rate).tan();
    let w2 = fs2 * (PI * spec.high_hz / rate).tan();
    let wo = (w1 * w2).sqrt();
    let bw = w2 - w1;

    let to_bandpass = |roots: &[C64]| -> Vec<C64> {
        let scaled: Vec<C64> = roots.iter().map(|r| r * (bw / 2.0)).collect();
        let mut out: Vec<C64> = scaled.iter().map(|r| r + (r * r - wo * wo).sqrt()).collect();
        out.extend(scaled.iter().map(|r| r - (r * r - wo * wo).sqrt()));
        out
    };
    let mut z_bp = to_bandpass(&z);
    let p_bp = to_bandpass(&p);
    z_bp.extend(std::iter::repeat_n(C64::new(0.0, 0.0), degree));
    let k_bp = k * bw.powi(degree as i32);

    // bilinear transform
    let num: C64 = z_bp.iter().map(|r| fs2 - r).product();
    let den: C64 = p_bp.iter().map(|r| fs2 - r).product();
    let k_z = k_bp * (num / den).re;
    let mut z_z: Vec<C64> = z_bp.iter().map(|r| (fs2 + r) / (fs2 - r)).collect();
    let p_z: Vec<C64> = p_bp.iter().map(|r| (fs2 + r) / (fs2 - r)).collect();
    z_z.extend(std::iter::repeat_n(C64::new(-1.0, 0.0), p_bp.len() - z_bp.len()));

    // Pair each pole pair, closest to the unit circle first, with its nearest zero pair.
    let mut pole_pairs = pair_conjugates(&p_z);
    pole_pairs.sort_by(|a, b| b[0].norm().total_cmp(&a[0].norm()));
    let mut zero_pairs = pair_conjugates(&z_z);
    let mut sections = Vec::with_capacity(pole_pairs.len());
    for pp in pole_pairs {
        let best = zero_pairs
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                let da = (a[0] - pp[0]).norm().min((a[1] - pp[0]).norm());
                let db = (b[0] - pp[0]).norm().min((b[1] - pp[0]).norm());
                da.total_cmp(&db)
            })
            .map(|(i, _)| i)
            .expect("as many zero pairs as pole pairs");
        let zp = zero_pairs.swap_remove(best);
        sections.push(Biquad { b: quadratic(zp), a: quadratic(pp) });
    }
    if let Some(first) = sections.first_mut() {
        first.b.iter_mut().for_each(|v| *v *= k_z);
    }
    Ok(SosFilter { sections, rate })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Oracle: evaluate the product of section polynomials at `e^{jω}` directly,
    /// expanding each numerator and denominator as a positive-power polynomial.
    fn direct_magnitude_db(f: &SosFilter, hz: f64) -> f64 {
        let z = C64::from_polar(1.0, 2.0 * PI * hz / f.rate);
        let mut h = C64::new(1.0, 0.0);
        for s in &f.sections {
            let num = z * z * s.b[0] + z * s.b[1] + s.b[2];
            let den = z * z * s.a[0] + z * s.a[1] + s.a[2];
            h *= num / den;
        }
        20.0 * h.norm().log10()
    }

    #[test]
    fn default_design_meets_magnitude_contract() {
        let spec = FilterSpec::default();
        let f = design_bandpass(&spec, 1000.0).unwrap();
        assert_eq!(f.sections.len(), 3);
        assert!(f.is_stable());
        for hz in [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0] {
            let db = direct_magnitude_db(&f, hz);
            assert!(db.abs() <= 3.0, "{hz} Hz: {db} dB");
            assert!((db - f.magnitude_db(hz)).abs() < 1e-9);
        }
        for hz in [0.1, 25.0] {
            let db = direct_magnitude_db(&f, hz);
            assert!(db <= -(spec.stopband_attenuation_db - 3.0), "{hz} Hz: {db} dB");
        }
        // band edges sit at the half-power points
        assert!((direct_magnitude_db(&f, 0.5) + 3.01).abs() < 0.05);
        assert!((direct_magnitude_db(&f, 8.0) + 3.01).abs() < 0.05);
    }

    #[test]
    fn stopband_edges_reach_attenuation_at_band_edges() {
        let spec = FilterSpec { edges: BandEdges::Stopband, ..FilterSpec::default() };
        let f = design_bandpass(&spec, 1000.0).unwrap();
        assert!(f.is_stable());
        assert!((f.magnitude_db(0.5) + 40.0).abs() < 0.1);
        assert!((f.magnitude_db(8.0) + 40.0).abs() < 0.1);
        assert!(f.magnitude_db(2.0).abs() < 3.0);
    }

    #[test]
    fn inverted_or_out_of_range_band_is_rejected() {
        let spec = FilterSpec { low_hz: 8.0, high_hz: 0.5, ..FilterSpec::default() };
        assert!(design_bandpass(&spec, 1000.0).is_err());
        let spec = FilterSpec { high_hz: 60.0, ..FilterSpec::default() };
        assert!(design_bandpass(&spec, 100.0).is_err());
    }

    #[test]
    fn impulse_response_matches_difference_equation() {
        let f = design_bandpass(&FilterSpec::default(), 1000.0).unwrap();
        let n = 3000;
        let mut x = vec![0.0; n];
        x[0] = 1.0;
        let fast = f.filter(&x);
        // direct form I, one section at a time
        let mut signal = x;
        for s in &f.sections {
            let mut y = vec![0.0; n];
            for t in 0..n {
                let xm1 = if t >= 1 { signal[t - 1] } else { 0.0 };
                let xm2 = if t >= 2 { signal[t - 2] } else { 0.0 };
                let ym1 = if t >= 1 { y[t - 1] } else { 0.0 };
                let ym2 = if t >= 2 { y[t - 2] } else { 0.0 };
                y[t] = s.b[0] * signal[t] + s.b[1] * xm1 + s.b[2] * xm2 - s.a[1] * ym1 - s.a[2] * ym2;
            }
            signal = y;
        }
        for (a, b) in fast.iter().zip(&signal) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn dc_decays() {
        let f = design_bandpass(&FilterSpec::default(), 1000.0).unwrap();
        assert!(f.response(0.0).norm() < 1e-6);
        let y = f.filter(&vec![10.0; 20_000]);
        let tail = y[18_000..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(tail < 0.05, "tail {tail}");
    }

    #[test]
    fn zero_in_zero_out() {
        let f = design_bandpass(&FilterSpec::default(), 1000.0).unwrap();
        assert!(f.filter(&[0.0; 100]).iter().all(|v| *v == 0.0));
    }
}
