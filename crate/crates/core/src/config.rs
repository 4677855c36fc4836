//! Experiment configuration, read from TOML.
//!
//! Every section is optional and defaults to the speller protocol, except
//! that a `[model]` section must name its `snr_target`.
//!
//! ```toml
//! [mixing]
//! rows = [[0.375, 0.625], [0.1111111111111111, 0.8888888888888888]]
//!
//! [session]
//! sentence = "HALLO WELT"
//! seeds = 20
//!
//! [model]
//! snr_target = 0.97
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LlpError, Result};
use crate::mixing::MixingMatrix;
use crate::sequence::{SequenceSpec, SymbolGrid, TrialDesign};
use crate::signal::Preprocessing;
use crate::simgen::{DEFAULT_DIM, DEFAULT_NOISE_RANK, DEFAULT_SENTENCE};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Overrides the mixing matrix implied by the trial design.
    pub mixing: Option<MixingMatrix>,
    pub grid: Option<SymbolGrid>,
    pub design: Option<DesignConfig>,
    pub session: SessionSettings,
    pub model: Option<ModelSettings>,
    pub preprocessing: Preprocessing,
    pub evaluate: EvaluateSettings,
    pub sweep: SweepSettings,
    pub output: OutputSettings,
}

/// One entry per sequence type; `group` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceEntry {
    pub length: usize,
    pub appearances: usize,
    pub group: usize,
    #[serde(default = "one")]
    pub count: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub highlight_size: usize,
    pub sequence: Vec<SequenceEntry>,
}

impl DesignConfig {
    pub fn to_design(&self) -> Result<TrialDesign> {
        let mut sequences = Vec::new();
        for e in &self.sequence {
            if e.group == 0 {
                return Err(LlpError::InvalidArgument("design groups are 1-based".into()));
            }
            let spec = SequenceSpec { length: e.length, appearances: e.appearances };
            sequences.extend(std::iter::repeat_n((spec, e.group - 1), e.count));
        }
        if sequences.is_empty() {
            return Err(LlpError::InvalidArgument("design has no sequences".into()));
        }
        Ok(TrialDesign { sequences, highlight_size: self.highlight_size })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSettings {
    pub sentence: String,
    pub seeds: usize,
    /// First session seed; session `i` uses `seed + i`.
    pub seed: u64,
}

impl Default for SessionSettings {
    fn default() -> Self {
        Self { sentence: DEFAULT_SENTENCE.to_string(), seeds: 20, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSettings {
    /// Supervised cross-validated AUC the model is calibrated to.
    pub snr_target: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_rank")]
    pub rank: usize,
    /// Seed of the templates and of the calibration data.
    #[serde(default)]
    pub model_seed: u64,
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

fn default_rank() -> usize {
    DEFAULT_NOISE_RANK
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSettings {
    pub folds: usize,
    pub alpha: f64,
    /// Also leave out group-2 epochs in the homogeneity test.
    pub symmetric: bool,
    pub homogeneity_window: [f64; 2],
}

impl Default for EvaluateSettings {
    fn default() -> Self {
        Self { folds: 5, alpha: 0.05, symmetric: false, homogeneity_window: [0.0, 700.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    /// Candidate mixing matrices; empty means the built-in candidates.
    pub matrices: Vec<MixingMatrix>,
    pub epochs: usize,
    pub test_epochs: usize,
    pub seeds: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { matrices: Vec::new(), epochs: 2160, test_epochs: 2000, seeds: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| LlpError::InvalidArgument(format!("config: {}", e.message())))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LlpError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(m) = &self.model {
            if !(0.5..1.0).contains(&m.snr_target) {
                return Err(LlpError::InvalidArgument(format!("model.snr_target {} outside [0.5, 1)", m.snr_target)));
            }
        }
        if self.session.sentence.is_empty() {
            return Err(LlpError::InvalidArgument("session.sentence is empty".into()));
        }
        if let Some(m) = &self.mixing {
            MixingMatrix::try_new(m.rows().to_vec())?;
        }
        self.grid().encode(&self.session.sentence)?;
        self.design()?;
        Ok(())
    }

    pub fn grid(&self) -> SymbolGrid {
        self.grid.clone().unwrap_or_default()
    }

    pub fn design(&self) -> Result<TrialDesign> {
        self.design.as_ref().map_or_else(|| Ok(TrialDesign::speller()), DesignConfig::to_design)
    }

    pub fn mixing(&self) -> Result<MixingMatrix> {
        Ok(self.mixing.clone().unwrap_or(self.design()?.mixing()))
    }

    /// The model section, required by commands that simulate data.
    pub fn require_model(&self) -> Result<&ModelSettings> {
        self.model.as_ref().ok_or_else(|| LlpError::InvalidArgument("config: missing field `model.snr_target`".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_speller_protocol() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c.design().unwrap(), TrialDesign::speller());
        assert_eq!(c.grid(), SymbolGrid::speller());
        assert_eq!(c.session.sentence.chars().count(), 63);
        assert!(c.require_model().is_err());
    }

    #[test]
    fn model_needs_snr_target() {
        let err = ExperimentConfig::from_toml("[model]\ndim = 10\n").unwrap_err();
        assert!(err.to_string().contains("snr_target"), "{err}");
        let c = ExperimentConfig::from_toml("[model]\nsnr_target = 0.9\n").unwrap();
        assert_eq!(c.require_model().unwrap().dim, 174);
    }

    #[test]
    fn custom_design_and_mixing() {
        let text = r#"
[design]
highlight_size = 12
[[design.sequence]]
length = 8
appearances = 3
group = 1
count = 4
[[design.sequence]]
length = 18
appearances = 2
group = 2
count = 2
[mixing]
rows = [[0.9, 0.1], [0.1, 0.9]]
"#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.design().unwrap(), TrialDesign::speller());
        assert_eq!(c.mixing().unwrap().rows()[0], [0.9, 0.1]);
        assert!(ExperimentConfig::from_toml("[mixing]\nrows = [[0.5, 0.5], [0.5, 0.5]]\n").is_err());
        assert!(ExperimentConfig::from_toml("[session]\nsentence = \"#\"\n").is_err());
        assert!(ExperimentConfig::from_toml("[bogus]\n").is_err());
    }
}
