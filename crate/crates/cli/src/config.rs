use std::path::Path;

use hamflow::features::BankConfig;
use hamflow::landscape::smooth;
use hamflow::{DirectionMode, ScalarField};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const TOOL_VERSION: &str = concat!("hamflow ", env!("CARGO_PKG_VERSION"));

/// Every tunable of a run. Loaded from a TOML file; unspecified keys keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub min_orbit_len: usize,
    /// Omitted means `4 * (width + height)`.
    pub max_orbit_len: Option<usize>,
    pub eps_stationary: f64,
    /// Gaussian pre-smoothing applied to every image; 0 disables it.
    pub sigma: f64,
    pub direction_mode: DirectionMode,
    pub rounds: usize,
    pub haar_target: usize,
    /// Worker threads; omitted uses all cores. Not part of the config hash.
    pub threads: Option<usize>,
    pub seed: u64,
    pub scale_factor: f64,
    pub stride: usize,
    pub nms_iou: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let bank = BankConfig::default();
        RunConfig {
            min_orbit_len: bank.min_orbit_len,
            max_orbit_len: None,
            eps_stationary: bank.eps_stationary,
            sigma: 0.0,
            direction_mode: DirectionMode::Wrapped,
            rounds: 20,
            haar_target: 27_000,
            threads: None,
            seed: 1,
            scale_factor: 1.25,
            stride: 4,
            nms_iou: 0.3,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Usage(format!("config: {m}")));
        if self.min_orbit_len < 2 {
            return bad("min_orbit_len must be >= 2");
        }
        if self.max_orbit_len.is_some_and(|m| m < 2) {
            return bad("max_orbit_len must be >= 2");
        }
        if !self.eps_stationary.is_finite() || self.eps_stationary <= 0.0 {
            return bad("eps_stationary must be positive");
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return bad("sigma must be >= 0");
        }
        if self.rounds < 1 {
            return bad("rounds must be >= 1");
        }
        if self.haar_target < 1 {
            return bad("haar_target must be >= 1");
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1");
        }
        if !self.scale_factor.is_finite() || self.scale_factor <= 1.0 {
            return bad("scale_factor must be > 1");
        }
        if self.stride < 1 {
            return bad("stride must be >= 1");
        }
        if !(0.0..1.0).contains(&self.nms_iou) {
            return bad("nms_iou must lie in [0, 1)");
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the JSON form, thread count excluded.
    pub fn hash(&self) -> String {
        let hashed = RunConfig { threads: None, ..self.clone() };
        let json = serde_json::to_string(&hashed).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn bank_config(&self) -> BankConfig {
        BankConfig {
            eps_stationary: self.eps_stationary,
            min_orbit_len: self.min_orbit_len,
            max_orbit_len: self.max_orbit_len,
            direction_mode: self.direction_mode,
        }
    }

    pub fn preprocess(&self, img: &ScalarField<f64>) -> Result<ScalarField<f64>, CliError> {
        if self.sigma == 0.0 {
            return Ok(img.clone());
        }
        Ok(smooth(img, self.sigma)?)
    }
}

/// Provenance stamped into artifacts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub tool_version: String,
    pub config_hash: String,
}

impl Stamp {
    pub fn new(cfg: &RunConfig) -> Self {
        Stamp { tool_version: TOOL_VERSION.to_owned(), config_hash: cfg.hash() }
    }

    /// Leading comment line for CSV outputs.
    pub fn csv_comment(&self) -> String {
        format!("# {} config_hash={}\n", self.tool_version, self.config_hash)
    }

    pub fn svg_comment(&self) -> String {
        format!("<!-- {} config_hash={} -->\n", self.tool_version, self.config_hash)
    }
}
