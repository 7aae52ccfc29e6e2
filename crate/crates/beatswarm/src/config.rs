//! Single configuration file shared by all pipeline stages.
//!
//! Every key is optional and falls back to the documented default; unknown
//! keys are hard errors so typos never silently change behavior.
//!
//! ```toml
//! [limits]
//! p_lo = [-4.0, -4.0, 0.2]      # arena lower corner (m)
//! p_hi = [4.0, 4.0, 3.0]        # arena upper corner (m)
//! v_max = 2.0                   # speed bound (m/s)
//! f_lo = 4.0                    # min collective thrust (m/s^2)
//! f_hi = 16.0                   # max collective thrust (m/s^2)
//! gravity = [0.0, 0.0, 9.81]
//! ellipsoid_radii = [0.25, 0.25, 0.60]   # collision envelope semi-axes
//!
//! [model]
//! k_p = 10.0                    # tracking gain (s^-2)
//! k_d = 5.0                     # damping gain (s^-1)
//! dt = 0.1                      # control interval (s)
//!
//! [filter]
//! degree = 8                    # Bernstein degree
//! horizon = 15                  # steps
//! alpha = 1.0                   # predicted-motion smoothness weight
//! beta = 1.0                    # command smoothness weight
//! gamma = 100.0                 # reference-tracking weight (0 = pins only)
//! d_cost = 2                    # smoothness derivative order (2 or 3)
//! d_cont = 2                    # cross-step continuity order
//! rho0 = 1000.0                 # initial constraint penalty
//! rho_growth = 1.5              # penalty escalation on stalls
//! max_am_iters = 300
//! tol_residual = 0.001
//! # neighbor_radius = 5.0       # optional; absent couples all pairs
//! collision_inflation = 1.002   # internal envelope margin
//!
//! [music]
//! frame = 2048
//! hop = 512
//! compression = 1000.0
//! local_avg_window = 0.5        # seconds
//! threshold = 0.3               # fraction of the novelty maximum
//! min_gap = 0.25                # seconds (caps detection at 240 BPM)
//!
//! [prompt]
//! max_context_chars = 8000
//! ```

use crate::core::{discretize_model, ClosedLoopModel, ModelError, PhysicalLimits, Vec3};
use crate::filter::FilterConfig;
use crate::music::MusicParams;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid config value: {0}")]
    Value(String),
}

/// Root of the configuration file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub limits: LimitsSection,
    pub model: ModelSection,
    pub filter: FilterSection,
    pub music: MusicSection,
    pub prompt: PromptSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsSection {
    pub p_lo: [f64; 3],
    pub p_hi: [f64; 3],
    pub v_max: f64,
    pub f_lo: f64,
    pub f_hi: f64,
    pub gravity: [f64; 3],
    pub ellipsoid_radii: [f64; 3],
}

impl Default for LimitsSection {
    fn default() -> Self {
        let l = PhysicalLimits::default();
        LimitsSection {
            p_lo: l.p_lo.to_array(),
            p_hi: l.p_hi.to_array(),
            v_max: l.v_max,
            f_lo: l.f_lo,
            f_hi: l.f_hi,
            gravity: l.gravity.to_array(),
            ellipsoid_radii: l.ellipsoid_radii.to_array(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Proportional tracking gain (s^-2).
    pub k_p: f64,
    /// Derivative tracking gain (s^-1).
    pub k_d: f64,
    /// Control interval (s).
    pub dt: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            k_p: crate::core::DEFAULT_K_P,
            k_d: crate::core::DEFAULT_K_D,
            dt: crate::core::DEFAULT_DT,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    /// Bernstein polynomial degree.
    pub degree: usize,
    /// Horizon length in control steps.
    pub horizon: usize,
    /// Weight on predicted-position derivative cost.
    pub alpha: f64,
    /// Weight on commanded-reference derivative cost.
    pub beta: f64,
    /// Reference-tracking weight (0 disables tracking pull).
    pub gamma: f64,
    /// Derivative order in the smoothness objective.
    pub d_cost: usize,
    /// Continuity order enforced across consecutive steps.
    pub d_cont: usize,
    /// Initial constraint penalty weight.
    pub rho0: f64,
    /// Multiplicative penalty growth when residuals stall.
    pub rho_growth: f64,
    /// Maximum alternating-minimization iterations per step.
    pub max_am_iters: usize,
    /// Convergence tolerance on constraint residuals.
    pub tol_residual: f64,
    /// Collision neighborhood radius in meters; absent = all pairs.
    pub neighbor_radius: Option<f64>,
    /// Internal inflation factor on the avoidance ellipsoid (>= 1).
    pub collision_inflation: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        let f = FilterConfig::default();
        FilterSection {
            degree: f.degree,
            horizon: f.horizon,
            alpha: f.alpha,
            beta: f.beta,
            gamma: f.gamma,
            d_cost: f.d_cost,
            d_cont: f.d_cont,
            rho0: f.rho0,
            rho_growth: f.rho_growth,
            max_am_iters: f.max_am_iters,
            tol_residual: f.tol_residual,
            neighbor_radius: f.neighbor_radius,
            collision_inflation: f.collision_inflation,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MusicSection {
    /// STFT frame length in samples (power of two).
    pub frame: usize,
    /// STFT hop in samples.
    pub hop: usize,
    /// Logarithmic compression strength for the novelty spectrum.
    pub compression: f64,
    /// Local-average subtraction window (s).
    pub local_avg_window: f64,
    /// Peak threshold as a fraction of the novelty maximum.
    pub threshold: f64,
    /// Minimum gap between detected beats (s).
    pub min_gap: f64,
}

impl Default for MusicSection {
    fn default() -> Self {
        let m = MusicParams::default();
        MusicSection {
            frame: m.frame,
            hop: m.hop,
            compression: m.compression,
            local_avg_window: m.local_avg_window,
            threshold: m.threshold,
            min_gap: m.min_gap,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptSection {
    /// Cap on the serialized music-context size in characters.
    pub max_context_chars: usize,
}

impl Default for PromptSection {
    fn default() -> Self {
        PromptSection { max_context_chars: 8000 }
    }
}

impl Config {
    /// Loads a TOML config file; unknown keys are rejected.
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Config::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Config, ConfigError> {
        let config: Config = toml::from_str(text)?;
        config.limits().validate()?;
        config.filter_config().validate().map_err(ConfigError::Value)?;
        Ok(config)
    }

    pub fn limits(&self) -> PhysicalLimits {
        PhysicalLimits {
            p_lo: Vec3::from_array(self.limits.p_lo),
            p_hi: Vec3::from_array(self.limits.p_hi),
            v_max: self.limits.v_max,
            f_lo: self.limits.f_lo,
            f_hi: self.limits.f_hi,
            gravity: Vec3::from_array(self.limits.gravity),
            ellipsoid_radii: Vec3::from_array(self.limits.ellipsoid_radii),
        }
    }

    pub fn model(&self) -> Result<ClosedLoopModel, ModelError> {
        discretize_model(self.model.k_p, self.model.k_d, self.model.dt)
    }

    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            degree: self.filter.degree,
            horizon: self.filter.horizon,
            alpha: self.filter.alpha,
            beta: self.filter.beta,
            gamma: self.filter.gamma,
            d_cost: self.filter.d_cost,
            d_cont: self.filter.d_cont,
            rho0: self.filter.rho0,
            rho_growth: self.filter.rho_growth,
            max_am_iters: self.filter.max_am_iters,
            tol_residual: self.filter.tol_residual,
            neighbor_radius: self.filter.neighbor_radius,
            collision_inflation: self.filter.collision_inflation,
        }
    }

    pub fn music_params(&self) -> MusicParams {
        MusicParams {
            frame: self.music.frame,
            hop: self.music.hop,
            compression: self.music.compression,
            local_avg_window: self.music.local_avg_window,
            threshold: self.music.threshold,
            min_gap: self.music.min_gap,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = Config::from_toml("").unwrap();
        assert_eq!(c.model.dt, 0.1);
        assert_eq!(c.filter.horizon, FilterConfig::default().horizon);
    }

    #[test]
    fn partial_sections_merge_with_defaults() {
        let c = Config::from_toml("[model]\nk_p = 20.0\n").unwrap();
        assert_eq!(c.model.k_p, 20.0);
        assert_eq!(c.model.k_d, crate::core::DEFAULT_K_D);
    }

    #[test]
    fn unknown_keys_are_hard_errors() {
        assert!(Config::from_toml("[model]\nkp = 20.0\n").is_err());
        assert!(Config::from_toml("[mdoel]\nk_p = 20.0\n").is_err());
    }
}
