//! Scenario parameters and unit conversions.
//!
//! Internal units are W, MHz and Mbps; angles enter in degrees and dBm only
//! appears at the configuration and reporting boundary.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::channel::ReuseFactor;

/// Full description of a network instance to generate and solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Sector radius in meters.
    pub sector_radius: f64,
    /// Sector opening angle in degrees (360 for a full circle).
    pub sector_angle: f64,
    /// Number of users to place (the collection point is extra).
    pub num_users: usize,
    /// Ring width `d` in meters; the innermost ring spans `2d`.
    pub group_width_d: f64,
    /// Spectrum reuse period in rings (>= 3), or `"inf"` for no reuse.
    pub reuse_factor_f: ReuseFactor,
    /// Maximum angular separation for a relay link, degrees.
    pub theta: f64,
    /// Relay links must be shorter than `d_th_factor * group_width_d`.
    pub d_th_factor: f64,
    /// Path loss scale factor.
    pub k: f64,
    /// Path loss reference distance in meters.
    pub l0: f64,
    /// Path loss exponent.
    pub a: f64,
    /// Noise power spectral density in W/MHz.
    pub n0: f64,
    /// Total spectrum in MHz.
    pub w_max: f64,
    /// Per-node transmit power budget in W.
    pub p_max: f64,
    /// Allowed reuse interference as a fraction of the noise floor.
    pub alpha: f64,
    /// Weight of the total-power tiebreak subtracted from the objective.
    pub epsilon_power: f64,
    /// Seed for position sampling (and any solver-side randomness).
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            sector_radius: 210.0,
            sector_angle: 60.0,
            num_users: 44,
            group_width_d: 30.0,
            reuse_factor_f: ReuseFactor::Finite(3),
            theta: 15.0,
            d_th_factor: 1.5,
            k: 1.0,
            l0: 1.0,
            a: 4.0,
            n0: 1e-11,
            w_max: 10.0,
            p_max: 0.5,
            alpha: 0.1,
            epsilon_power: 1e-6,
            rng_seed: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("reuse factor must be at least 3 rings, got {0}")]
    ReuseTooSmall(u32),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        for (name, v) in [
            ("sector_radius", self.sector_radius),
            ("sector_angle", self.sector_angle),
            ("group_width_d", self.group_width_d),
            ("theta", self.theta),
            ("d_th_factor", self.d_th_factor),
            ("k", self.k),
            ("l0", self.l0),
            ("a", self.a),
            ("n0", self.n0),
            ("w_max", self.w_max),
            ("p_max", self.p_max),
            ("alpha", self.alpha),
        ] {
            if !(v > 0.0) {
                return Err(ScenarioError::NonPositive(name));
            }
        }
        if self.epsilon_power < 0.0 {
            return Err(ScenarioError::NonPositive("epsilon_power"));
        }
        if let ReuseFactor::Finite(f) = self.reuse_factor_f {
            if f < 3 {
                return Err(ScenarioError::ReuseTooSmall(f));
            }
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config: Self = serde_json::from_str(&text).map_err(|source| ScenarioError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn sector_angle_rad(&self) -> f64 {
        self.sector_angle.to_radians()
    }

    pub fn theta_rad(&self) -> f64 {
        self.theta.to_radians()
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}
