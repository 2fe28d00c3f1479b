//! JSON scenario files.
//!
//! ```json
//! {
//!   "n": 4, "p": 20.0, "sigma_i2": 1.0, "sigma_e2": 1.0,
//!   "gamma_bar_db": 1.0, "d": 0.5,
//!   "c_t": { "x_min": -1.5, "x_max": 1.5, "y_min": -1.5, "y_max": 1.5 },
//!   "c_r": { "x_min": -1.5, "x_max": 1.5, "y_min": -1.5, "y_max": 1.5 },
//!   "epsilon": 1e-4,
//!   "geometry": { "paths": 14 }
//! }
//! ```
//!
//! `geometry` is either `{ "paths": L }`, drawn per seed with
//! [`crate::experiment::generate_channel`], or a full
//! [`ChannelGeometry`] object.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelGeometry, Region};
use crate::driver::ScenarioConfig;
use crate::experiment::generate_channel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeometrySpec {
    Generated(GeneratedGeometry),
    Explicit(ChannelGeometry),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedGeometry {
    pub paths: usize,
}

fn default_epsilon() -> f64 {
    1e-4
}

fn default_sigma_e2() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n: usize,
    pub p: f64,
    pub sigma_i2: f64,
    #[serde(default = "default_sigma_e2")]
    pub sigma_e2: f64,
    pub gamma_bar_db: f64,
    pub d: f64,
    pub c_t: Region,
    pub c_r: Region,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub geometry: GeometrySpec,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Path count of a generated geometry.
    pub fn paths(&self) -> Option<usize> {
        match &self.geometry {
            GeometrySpec::Generated(g) => Some(g.paths),
            GeometrySpec::Explicit(_) => None,
        }
    }

    /// Builds the scenario, drawing the channel from `seed` when the
    /// geometry is generated.
    pub fn scenario(&self, seed: u64) -> Result<ScenarioConfig> {
        let geometry = match &self.geometry {
            GeometrySpec::Generated(g) => generate_channel(seed, g.paths, g.paths)?,
            GeometrySpec::Explicit(g) => g.clone(),
        };
        self.with_geometry(geometry)
    }

    pub fn with_geometry(&self, geometry: ChannelGeometry) -> Result<ScenarioConfig> {
        let config = ScenarioConfig {
            n: self.n,
            p: self.p,
            sigma_i2: self.sigma_i2,
            sigma_e2: self.sigma_e2,
            gamma_bar_db: self.gamma_bar_db,
            d: self.d,
            c_t: self.c_t,
            c_r: self.c_r,
            epsilon: self.epsilon,
            geometry,
        };
        config.validate()?;
        Ok(config)
    }
}
