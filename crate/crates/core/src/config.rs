//! Solver configuration documents and the two shipped presets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anneal::{AnnealConfig, AnnealError};
use crate::model::Weights;

pub const PANDEMIC_PRESET: &str = include_str!("../presets/pandemic.json");
pub const NORMAL_ASSIGNMENT_PRESET: &str = include_str!("../presets/normal-assignment.json");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Anneal(#[from] AnnealError),
    #[error("min_fraction {0} is outside (0, 1]")]
    MinFraction(f64),
    #[error("unknown preset '{0}' (expected pandemic or normal-assignment)")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub weights: Weights,
    pub anneal: AnnealConfig,
    /// Applied to every non-exam section when set.
    #[serde(default)]
    pub min_fraction: Option<f64>,
    /// Keeps only this many best-ranked PRAs per section.
    #[serde(default)]
    pub max_pras_per_section: Option<usize>,
}

impl SolverConfig {
    pub fn pandemic() -> Self {
        SolverConfig {
            weights: Weights::pandemic(),
            anneal: AnnealConfig::pandemic(),
            min_fraction: Some(0.25),
            max_pras_per_section: None,
        }
    }

    /// Ordinary single-room classroom assignment: every meeting in person.
    pub fn normal_assignment() -> Self {
        SolverConfig {
            weights: Weights::normal_assignment(),
            anneal: AnnealConfig::normal_assignment(),
            min_fraction: Some(1.0),
            max_pras_per_section: None,
        }
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        match name {
            "pandemic" => SolverConfig::from_json(PANDEMIC_PRESET),
            "normal-assignment" | "normal_assignment" | "normal" => SolverConfig::from_json(NORMAL_ASSIGNMENT_PRESET),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: SolverConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.anneal.validate()?;
        if let Some(f) = self.min_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(ConfigError::MinFraction(f));
            }
        }
        Ok(())
    }
}
