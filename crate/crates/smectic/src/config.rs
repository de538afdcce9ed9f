//! Versioned TOML configuration of an `ldg-flow` run.
//!
//! ```toml
//! schema_version = 1
//! seed = 1
//! kappa = 8.0
//! b = 1.2
//! tau = 2.0
//! K1 = 10.0
//! K2 = 10.0
//! K3 = 10.0
//! K4 = 0.0
//! drop_null_lagrangian = false
//!
//! [domain]
//! kind = "ball"        # or "box" with lengths = [1.0, 1.0, 1.0]
//! radius = 1.0
//!
//! [grid]
//! cells = 48           # ball: cells across the diameter; box: use h = 0.03125
//!
//! [stop]
//! rel_tol = 1e-6
//! abs_floor = 1e-6
//! window = 20
//! max_steps = 4000
//! # layer = 0.375      # defaults to 3 / kappa
//!
//! [init]
//! amplitude = 0.1
//!
//! [director]
//! quat = [1.0, 0.0, 0.0, 0.0]
//! ```
//!
//! Unknown keys anywhere are rejected.

use serde::{Deserialize, Serialize};
use smectic_core::geom::{DirectorRotation, Quat};
use smectic_core::ldg::{LdGGrid, LdGParams, StopRule};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdGConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub kappa: f64,
    pub b: f64,
    pub tau: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    #[serde(rename = "K3")]
    pub k3: f64,
    #[serde(rename = "K4", default)]
    pub k4: f64,
    #[serde(default)]
    pub drop_null_lagrangian: bool,
    #[serde(default)]
    pub stop: StopConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub director: DirectorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainConfig {
    Box { lengths: [f64; 3] },
    Ball { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub cells: Option<usize>,
    pub h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StopConfig {
    pub rel_tol: f64,
    pub abs_floor: f64,
    pub window: usize,
    pub max_steps: usize,
    pub layer: Option<f64>,
}

impl Default for StopConfig {
    fn default() -> Self {
        StopConfig {
            rel_tol: 1e-6,
            abs_floor: 1e-6,
            window: 20,
            max_steps: 4000,
            layer: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    pub amplitude: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig { amplitude: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DirectorConfig {
    /// `[w, x, y, z]`, normalized on use.
    pub quat: [f64; 4],
}

impl Default for DirectorConfig {
    fn default() -> Self {
        DirectorConfig {
            quat: [1.0, 0.0, 0.0, 0.0],
        }
    }
}

/// Everything a run needs, validated.
#[derive(Debug, Clone)]
pub struct LdGSetup {
    pub grid: LdGGrid,
    pub params: LdGParams,
    pub stop: StopRule,
    pub director: DirectorRotation,
    pub amplitude: f64,
    pub seed: u64,
}

fn field(name: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{name}`: {reason}"))
}

impl LdGConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: LdGConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(field(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", cfg.schema_version),
            ));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn setup(&self) -> Result<LdGSetup> {
        let grid = match (&self.domain, self.grid.cells, self.grid.h) {
            (DomainConfig::Ball { radius }, Some(cells), None) => {
                LdGGrid::ball(*radius, cells).map_err(|e| field("grid.cells", e))?
            }
            (DomainConfig::Box { lengths }, None, Some(h)) => {
                LdGGrid::cuboid(*lengths, h).map_err(|e| field("grid.h", e))?
            }
            (DomainConfig::Ball { .. }, _, _) => return Err(field("grid", "a ball takes `cells` only")),
            (DomainConfig::Box { .. }, _, _) => return Err(field("grid", "a box takes `h` only")),
        };
        let params = LdGParams::from_b(self.kappa, self.b, self.tau, [self.k1, self.k2, self.k3, self.k4])
            .map(|p| LdGParams {
                drop_null_lagrangian: self.drop_null_lagrangian,
                ..p
            })
            .map_err(|e| field("parameters", e))?;
        if !(self.b > 0.0) {
            return Err(field("b", "must be positive"));
        }
        let s = &self.stop;
        if !(s.rel_tol > 0.0) || !(s.abs_floor > 0.0) {
            return Err(field("stop", "tolerances must be positive"));
        }
        if s.window == 0 || s.max_steps == 0 {
            return Err(field("stop", "window and max_steps must be positive"));
        }
        let layer = s.layer.unwrap_or(3.0 / self.kappa);
        if !(layer > 0.0) {
            return Err(field("stop.layer", "must be positive"));
        }
        if !(self.init.amplitude >= 0.0) || !self.init.amplitude.is_finite() {
            return Err(field("init.amplitude", "must be nonnegative"));
        }
        let director = DirectorRotation::new(Quat::from_array(self.director.quat), self.tau)
            .map_err(|e| field("director.quat", e))?;
        Ok(LdGSetup {
            grid,
            params,
            stop: StopRule {
                rel_tol: s.rel_tol,
                abs_floor: s.abs_floor,
                window: s.window,
                max_steps: s.max_steps,
                layer,
            },
            director,
            amplitude: self.init.amplitude,
            seed: self.seed,
        })
    }
}
