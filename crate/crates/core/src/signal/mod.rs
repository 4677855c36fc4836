//! Preprocessing from continuous multichannel recordings to epoch features.
//!
//! The chain is: band-pass filter → decimation → epoching around stimulus
//! onsets → baseline correction → per-channel interval means.

pub mod filter;
pub mod io;

use serde::{Deserialize, Serialize};

pub use filter::{design_bandpass, BandEdges, FilterSpec, SosFilter};

use crate::error::{LlpError, Result};
use crate::types::{FeatureVector, Label};

/// Channel montage of the speller recordings (31 EEG channels).
pub const DEFAULT_CHANNELS: [&str; 31] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "FC5", "FC1", "FC2", "FC6", "T7", "C3", "Cz", "C4", "T8", "CP5", "CP1",
    "CP2", "CP6", "P7", "P3", "Pz", "P4", "P8", "PO9", "O1", "Oz", "O2", "PO10", "FCz",
];

/// Default feature intervals in ms after stimulus onset.
pub const DEFAULT_INTERVALS: [[f64; 2]; 6] =
    [[50.0, 120.0], [121.0, 200.0], [201.0, 280.0], [281.0, 380.0], [381.0, 530.0], [531.0, 700.0]];

const TIME_EPS: f64 = 1e-9;

/// Stimulus onset with its bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    /// Sample index of the onset.
    pub index: usize,
    /// Attended symbol of the trial the stimulus belongs to, when known.
    pub symbol: Option<usize>,
    /// Zero-based sequence group.
    pub group: usize,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousRecording {
    /// `channels × time` in µV.
    pub samples: Vec<Vec<f64>>,
    pub rate: f64,
    pub channel_names: Vec<String>,
    pub markers: Vec<Marker>,
}

impl ContinuousRecording {
    pub fn new(samples: Vec<Vec<f64>>, rate: f64, channel_names: Vec<String>, markers: Vec<Marker>) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(LlpError::InvalidArgument(format!("sampling rate {rate} must be positive")));
        }
        if samples.len() != channel_names.len() {
            return Err(LlpError::DimensionMismatch { expected: channel_names.len(), got: samples.len() });
        }
        let len = samples.first().map_or(0, Vec::len);
        if samples.iter().any(|c| c.len() != len) {
            return Err(LlpError::InvalidArgument("channels differ in length".into()));
        }
        if markers.windows(2).any(|w| w[0].index >= w[1].index) {
            return Err(LlpError::InvalidArgument("markers must be strictly increasing".into()));
        }
        if let Some(m) = markers.iter().find(|m| m.index >= len) {
            return Err(LlpError::InvalidArgument(format!("marker at {} beyond {len} samples", m.index)));
        }
        Ok(Self { samples, rate, channel_names, markers })
    }

    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Causal per-channel filtering; markers are untouched.
pub fn apply_filter(filter: &SosFilter, rec: &ContinuousRecording) -> ContinuousRecording {
    ContinuousRecording { samples: rec.samples.iter().map(|c| filter.filter(c)).collect(), ..rec.clone() }
}

/// Keeps every `factor`-th sample, starting at 0.
pub fn downsample(rec: &ContinuousRecording, factor: usize) -> Result<ContinuousRecording> {
    if factor < 1 {
        return Err(LlpError::InvalidArgument("downsampling factor must be ≥ 1".into()));
    }
    let samples = rec.samples.iter().map(|c| c.iter().step_by(factor).copied().collect()).collect();
    let markers = rec.markers.iter().map(|m| Marker { index: m.index / factor, ..m.clone() }).collect();
    Ok(ContinuousRecording {
        samples,
        rate: rec.rate / factor as f64,
        channel_names: rec.channel_names.clone(),
        markers,
    })
}

/// Time-locked window of the signal around one marker.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    /// `channels × window` in µV.
    pub samples: Vec<Vec<f64>>,
    pub start_ms: f64,
    pub end_ms: f64,
    pub rate: f64,
    pub channel_names: Vec<String>,
    pub meta: Marker,
}

impl Epoch {
    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Time of sample `j` in ms relative to onset.
    pub fn time_ms(&self, j: usize) -> f64 {
        self.start_ms + j as f64 * 1000.0 / self.rate
    }

    /// Indices of samples with `lo ≤ t ≤ hi`.
    pub fn indices_in(&self, lo: f64, hi: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| {
                let t = self.time_ms(j);
                t >= lo - TIME_EPS && t <= hi + TIME_EPS
            })
            .collect()
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|c| c.eq_ignore_ascii_case(name))
    }

    /// All channels concatenated over the samples inside `[lo, hi]` ms.
    pub fn flatten_window(&self, lo: f64, hi: f64) -> Vec<f64> {
        let idx = self.indices_in(lo, hi);
        self.samples.iter().flat_map(|c| idx.iter().map(move |&j| c[j])).collect()
    }
}

fn ms_to_offset(ms: f64, rate: f64) -> i64 {
    (ms * rate / 1000.0).round() as i64
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    pub epochs: Vec<Epoch>,
    /// Positions (in the marker list) of markers too close to the recording edge.
    pub skipped: Vec<usize>,
}

/// Cuts one epoch per marker over `[start_ms, end_ms]`.
pub fn extract_epochs(rec: &ContinuousRecording, window: [f64; 2]) -> Result<EpochSet> {
    let [start_ms, end_ms] = window;
    if !(start_ms < end_ms) {
        return Err(LlpError::InvalidArgument(format!("window [{start_ms}, {end_ms}] is empty")));
    }
    let lo = ms_to_offset(start_ms, rec.rate);
    let hi = ms_to_offset(end_ms, rec.rate);
    let len = rec.len() as i64;
    let mut epochs = Vec::with_capacity(rec.markers.len());
    let mut skipped = Vec::new();
    for (pos, m) in rec.markers.iter().enumerate() {
        let first = m.index as i64 + lo;
        let last = m.index as i64 + hi;
        if first < 0 || last >= len {
            log::warn!("marker {pos} at sample {} leaves no room for the epoch window", m.index);
            skipped.push(pos);
            continue;
        }
        let (first, last) = (first as usize, last as usize);
        epochs.push(Epoch {
            samples: rec.samples.iter().map(|c| c[first..=last].to_vec()).collect(),
            start_ms: lo as f64 * 1000.0 / rec.rate,
            end_ms: hi as f64 * 1000.0 / rec.rate,
            rate: rec.rate,
            channel_names: rec.channel_names.clone(),
            meta: m.clone(),
        });
    }
    Ok(EpochSet { epochs, skipped })
}

/// Subtracts, per channel, the mean over samples inside `interval`.
pub fn baseline_correct(e: &Epoch, interval: [f64; 2]) -> Result<Epoch> {
    let idx = e.indices_in(interval[0], interval[1]);
    if idx.is_empty() {
        return Err(LlpError::InvalidArgument(format!("baseline interval {interval:?} contains no samples")));
    }
    let samples = e
        .samples
        .iter()
        .map(|c| {
            let mean = idx.iter().map(|&j| c[j]).sum::<f64>() / idx.len() as f64;
            c.iter().map(|v| v - mean).collect()
        })
        .collect();
    Ok(Epoch { samples, ..e.clone() })
}

/// Interval definitions and channel selection for feature extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSpec {
    pub intervals: Vec<[f64; 2]>,
    pub exclude_channels: Vec<String>,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self { intervals: DEFAULT_INTERVALS.to_vec(), exclude_channels: vec!["Fp1".into(), "Fp2".into()] }
    }
}

impl FeatureSpec {
    /// Indices of channels that survive the exclusion list.
    pub fn channel_mask(&self, names: &[String]) -> Vec<usize> {
        (0..names.len()).filter(|&i| !self.exclude_channels.iter().any(|x| x.eq_ignore_ascii_case(&names[i]))).collect()
    }
}

/// Mean amplitude per (interval, channel); index = `interval · n_channels + channel`.
pub fn interval_features(e: &Epoch, spec: &FeatureSpec) -> Result<FeatureVector> {
    let channels = spec.channel_mask(&e.channel_names);
    let mut values = Vec::with_capacity(spec.intervals.len() * channels.len());
    for &[lo, hi] in &spec.intervals {
        let idx = e.indices_in(lo, hi);
        if idx.is_empty() {
            return Err(LlpError::InvalidArgument(format!("interval [{lo}, {hi}] ms contains no samples")));
        }
        for &c in &channels {
            let row = &e.samples[c];
            values.push(idx.iter().map(|&j| row[j]).sum::<f64>() / idx.len() as f64);
        }
    }
    Ok(FeatureVector(values))
}

/// Full preprocessing configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Preprocessing {
    pub filter: FilterSpec,
    pub target_rate: f64,
    pub window: [f64; 2],
    pub baseline: [f64; 2],
    pub features: FeatureSpec,
}

impl Default for Preprocessing {
    fn default() -> Self {
        Self {
            filter: FilterSpec::default(),
            target_rate: 100.0,
            window: [-200.0, 700.0],
            baseline: [-200.0, 0.0],
            features: FeatureSpec::default(),
        }
    }
}

/// Output of [`Preprocessing::run`].
#[derive(Debug, Clone)]
pub struct Preprocessed {
    /// Baseline-corrected epochs at the target rate.
    pub epochs: Vec<Epoch>,
    pub features: Vec<FeatureVector>,
    pub skipped: Vec<usize>,
}

impl Preprocessing {
    pub fn run(&self, rec: &ContinuousRecording) -> Result<Preprocessed> {
        let filter = design_bandpass(&self.filter, rec.rate)?;
        let filtered = apply_filter(&filter, rec);
        let ratio = rec.rate / self.target_rate;
        let factor = ratio.round();
        if factor < 1.0 || (ratio - factor).abs() > 1e-9 {
            return Err(LlpError::InvalidArgument(format!(
                "cannot decimate {} Hz to {} Hz by an integer factor",
                rec.rate, self.target_rate
            )));
        }
        let decimated = downsample(&filtered, factor as usize)?;
        let set = extract_epochs(&decimated, self.window)?;
        let epochs = set.epochs.iter().map(|e| baseline_correct(e, self.baseline)).collect::<Result<Vec<_>>>()?;
        let features = epochs.iter().map(|e| interval_features(e, &self.features)).collect::<Result<Vec<_>>>()?;
        Ok(Preprocessed { epochs, features, skipped: set.skipped })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("ch{i}")).collect()
    }

    fn marker(index: usize) -> Marker {
        Marker { index, symbol: None, group: 0, label: None }
    }

    fn ramp_epoch(rate: f64) -> Epoch {
        // one channel equal to its time in ms over [-200, 700]
        let rec = ContinuousRecording::new(
            vec![(0..200).map(|i| (i as f64 - 50.0) * 1000.0 / rate).collect()],
            rate,
            names(1),
            vec![marker(50)],
        )
        .unwrap();
        extract_epochs(&rec, [-200.0, 700.0]).unwrap().epochs.remove(0)
    }

    #[test]
    fn recording_invariants() {
        assert!(ContinuousRecording::new(vec![vec![0.0; 10]], 0.0, names(1), vec![]).is_err());
        assert!(ContinuousRecording::new(vec![vec![0.0; 10]], 100.0, names(1), vec![marker(3), marker(3)]).is_err());
        assert!(ContinuousRecording::new(vec![vec![0.0; 10]], 100.0, names(1), vec![marker(10)]).is_err());
    }

    #[test]
    fn downsample_rate_and_markers() {
        let rec =
            ContinuousRecording::new(vec![(0..2000).map(f64::from).collect()], 1000.0, names(1), vec![marker(1005)])
                .unwrap();
        let d = downsample(&rec, 10).unwrap();
        assert_eq!(d.rate, 100.0);
        assert_eq!(d.markers[0].index, 100);
        assert_eq!(d.len(), 200);
        assert_eq!(d.samples[0][3], 30.0);
        assert_eq!(downsample(&rec, 1).unwrap(), rec);
        assert!(downsample(&rec, 0).is_err());
    }

    #[test]
    fn epoch_length_at_100_hz() {
        let e = ramp_epoch(100.0);
        assert_eq!(e.len(), 91);
        assert_eq!(e.time_ms(0), -200.0);
        assert_eq!(e.samples[0][0], -200.0);
        assert_eq!(e.samples[0][90], 700.0);
    }

    #[test]
    fn epochs_near_edges_are_skipped() {
        let rec =
            ContinuousRecording::new(vec![vec![0.0; 100]], 100.0, names(1), vec![marker(5), marker(20), marker(95)])
                .unwrap();
        let set = extract_epochs(&rec, [-200.0, 700.0]).unwrap();
        assert_eq!(set.epochs.len(), 1);
        assert_eq!(set.epochs[0].meta.index, 20);
        assert_eq!(set.skipped, vec![0, 2]);
        let rec = ContinuousRecording::new(vec![vec![0.0; 100]], 100.0, names(1), vec![]).unwrap();
        assert!(extract_epochs(&rec, [-200.0, 700.0]).unwrap().epochs.is_empty());
    }

    #[test]
    fn baseline_of_ramp() {
        let e = baseline_correct(&ramp_epoch(100.0), [-200.0, 0.0]).unwrap();
        // t = 0 is sample 20; the 21 baseline samples average to −100
        assert!((e.samples[0][20] - 100.0).abs() < 1e-12);
        let again = baseline_correct(&e, [-200.0, 0.0]).unwrap();
        for (a, b) in again.samples[0].iter().zip(&e.samples[0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(baseline_correct(&e, [1000.0, 1100.0]).is_err());
    }

    #[test]
    fn constant_epoch_features() {
        let mut e = ramp_epoch(100.0);
        e.samples = vec![vec![5.0; 91]; 31];
        e.channel_names = DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect();
        let f = interval_features(&e, &FeatureSpec::default()).unwrap();
        assert_eq!(f.dim(), 174);
        assert!(f.iter().all(|v| (*v - 5.0).abs() < 1e-12));
        let zeroed = interval_features(&baseline_correct(&e, [-200.0, 0.0]).unwrap(), &FeatureSpec::default()).unwrap();
        assert!(zeroed.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn ramp_interval_mean() {
        let e = ramp_epoch(100.0);
        let spec = FeatureSpec { intervals: vec![[50.0, 120.0]], exclude_channels: vec![] };
        let f = interval_features(&e, &spec).unwrap();
        assert!((f[0] - 85.0).abs() < 1e-12);
        let spec = FeatureSpec { intervals: vec![[52.0, 58.0]], exclude_channels: vec![] };
        assert!(interval_features(&e, &spec).is_err());
    }

    #[test]
    fn feature_layout_is_interval_major() {
        let mut e = ramp_epoch(100.0);
        e.samples = (0..3).map(|c| vec![c as f64; 91]).collect();
        e.channel_names = names(3);
        let spec = FeatureSpec { intervals: vec![[0.0, 100.0], [200.0, 300.0]], exclude_channels: vec!["ch1".into()] };
        let f = interval_features(&e, &spec).unwrap();
        assert_eq!(f.0, vec![0.0, 2.0, 0.0, 2.0]);
    }

    #[test]
    fn adjacent_default_intervals_are_disjoint_on_grid() {
        let e = ramp_epoch(100.0);
        let mut seen = std::collections::HashSet::new();
        for [lo, hi] in DEFAULT_INTERVALS {
            for j in e.indices_in(lo, hi) {
                assert!(seen.insert(j));
            }
        }
    }

    #[test]
    fn default_preprocessing_gives_174_features() {
        let rate = 1000.0;
        let n = 5000;
        let samples: Vec<Vec<f64>> =
            (0..31).map(|c| (0..n).map(|t| ((t as f64) * 0.01 + c as f64).sin()).collect()).collect();
        let rec = ContinuousRecording::new(
            samples,
            rate,
            DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect(),
            vec![marker(1000), marker(2500), marker(4900)],
        )
        .unwrap();
        let out = Preprocessing::default().run(&rec).unwrap();
        assert_eq!(out.features.len(), 2);
        assert_eq!(out.skipped, vec![2]);
        assert!(out.features.iter().all(|f| f.dim() == 174));
    }
}
