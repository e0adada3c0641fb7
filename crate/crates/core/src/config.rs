//! Tolerances and defaults, loadable from a JSON file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::original::{GenerateOptions, ProjectionOptions};
use crate::outcomes;
use crate::paint::PaintOptions;
use crate::surrogate::DEFAULT_RHO;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Offset in the normalization weights of the achievement function.
    pub range_delta: f64,
    /// Augmentation coefficient of the achievement function.
    pub rho: f64,
    pub paint: PaintOptions,
    pub projection: ProjectionOptions,
    pub generate: GenerateOptions,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            range_delta: outcomes::DEFAULT_RANGE_DELTA,
            rho: DEFAULT_RHO,
            paint: PaintOptions::default(),
            projection: ProjectionOptions::default(),
            generate: GenerateOptions::default(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Applies one seed to every randomized stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.paint.delaunay.seed = seed;
        self.projection.crs.seed = seed;
        self.generate.seed = seed;
        self
    }

    pub fn session_settings(&self) -> SessionSettings {
        SessionSettings {
            range_delta: self.range_delta,
            rho: self.rho,
            paint: self.paint.clone(),
            projection: ProjectionOptions { rho: self.rho, ..self.projection.clone() },
        }
    }
}

/// The part of the configuration a session carries in its log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSettings {
    pub range_delta: f64,
    pub rho: f64,
    pub paint: PaintOptions,
    pub projection: ProjectionOptions,
}

impl Default for SessionSettings {
    fn default() -> Self {
        Config::default().session_settings()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_keeps_defaults() {
        let c = Config::from_json(r#"{"rho": 0.01, "paint": {"gap_tol": 1e-6}}"#).unwrap();
        assert_eq!(c.rho, 0.01);
        assert_eq!(c.paint.gap_tol, 1e-6);
        assert_eq!(c.range_delta, Config::default().range_delta);
        assert_eq!(c.session_settings().projection.rho, 0.01);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(Config::from_json(r#"{"rhoo": 1}"#), Err(Error::Schema(_))));
    }

    #[test]
    fn seed_applies_everywhere() {
        let c = Config::default().with_seed(9);
        assert_eq!((c.paint.delaunay.seed, c.projection.crs.seed, c.generate.seed), (9, 9, 9));
    }
}
