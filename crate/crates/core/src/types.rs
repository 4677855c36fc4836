use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{LlpError, Result};

/// Target (attended) or non-target stimulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Target,
    NonTarget,
}

impl Label {
    /// `+1` for targets, `-1` otherwise.
    pub fn sign(self) -> f64 {
        match self {
            Label::Target => 1.0,
            Label::NonTarget => -1.0,
        }
    }

    pub fn is_target(self) -> bool {
        self == Label::Target
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Target => Label::NonTarget,
            Label::NonTarget => Label::Target,
        }
    }

    /// Parses `+1`, `1`, `-1`; `NA` and the empty string map to `None`.
    pub fn parse(s: &str) -> Result<Option<Self>> {
        match s.trim() {
            "+1" | "1" => Ok(Some(Label::Target)),
            "-1" => Ok(Some(Label::NonTarget)),
            "NA" | "" => Ok(None),
            other => Err(LlpError::InvalidArgument(format!("bad label `{other}`"))),
        }
    }

    pub fn format(label: Option<Self>) -> &'static str {
        match label {
            Some(Label::Target) => "+1",
            Some(Label::NonTarget) => "-1",
            None => "NA",
        }
    }
}

/// Feature representation of one epoch.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for FeatureVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
