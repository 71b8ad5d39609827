//! Run-wide parameters shared by the extraction, training, and evaluation
//! stages, loadable from TOML or JSON.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::MIN_SEGMENT_LEN;

/// Configuration errors.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("config file must end in .toml or .json: {path}")]
    UnknownFormat { path: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Parameters of one pipeline run. Every field has a default; a config file
/// may override any subset. Unknown keys are rejected to catch typos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Segment length in frames.
    pub n: usize,
    /// Segment stride in frames; omitted means `n` (non-overlapping).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    /// Pixel-autoregression model order.
    pub ar_order: usize,
    /// Pulse band lower edge, Hz.
    pub band_lo_hz: f64,
    /// Pulse band upper edge, Hz.
    pub band_hi_hz: f64,
    /// Sub-region grid rows over the rectified cheek patch.
    pub grid_rows: usize,
    /// Sub-region grid columns.
    pub grid_cols: usize,
    /// Rectified cheek patch height in pixels.
    pub roi_rows: usize,
    /// Rectified cheek patch width in pixels.
    pub roi_cols: usize,
    /// Seed for every random choice in the run.
    pub seed: u64,
    /// Worker threads; `0` uses all available cores.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 128,
            stride: None,
            ar_order: 36,
            band_lo_hz: 0.7,
            band_hi_hz: 4.0,
            grid_rows: 6,
            grid_cols: 6,
            roi_rows: 72,
            roi_cols: 72,
            seed: 0,
            jobs: 0,
        }
    }
}

impl RunConfig {
    /// The stride actually used: the explicit value, or `n`.
    pub fn effective_stride(&self) -> usize {
        self.stride.unwrap_or(self.n)
    }

    /// Number of sub-regions, i.e. rows of every pulse fingerprint map.
    pub fn grid_cells(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    /// Checks all cross-field requirements.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::Invalid(m));
        if self.n < MIN_SEGMENT_LEN {
            return fail(format!(
                "segment length {} is below the minimum {MIN_SEGMENT_LEN}",
                self.n
            ));
        }
        if self.effective_stride() == 0 {
            return fail("stride must be positive".into());
        }
        if !(self.band_lo_hz > 0.0 && self.band_lo_hz < self.band_hi_hz) {
            return fail(format!(
                "band edges must satisfy 0 < lo < hi, got {}..{}",
                self.band_lo_hz, self.band_hi_hz
            ));
        }
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return fail("grid dimensions must be positive".into());
        }
        if self.roi_rows == 0
            || self.roi_cols == 0
            || !self.roi_rows.is_multiple_of(self.grid_rows)
            || !self.roi_cols.is_multiple_of(self.grid_cols)
        {
            return fail(format!(
                "patch {}x{} must divide evenly into a {}x{} grid",
                self.roi_rows, self.roi_cols, self.grid_rows, self.grid_cols
            ));
        }
        if self.ar_order == 0 {
            return fail("autoregression order must be positive".into());
        }
        let seq_len = 2 * self.roi_rows * self.roi_cols;
        if seq_len <= 4 * self.ar_order {
            return fail(format!(
                "autoregression order {} too high for a {}x{} patch ({} samples per scan)",
                self.ar_order, self.roi_rows, self.roi_cols, seq_len
            ));
        }
        Ok(())
    }

    /// Loads and validates a TOML (`.toml`) or JSON (`.json`) config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        let parsed: Self = match ext.as_deref() {
            Some("toml") => toml_from_str(&text).map_err(|message| ConfigError::Parse {
                path: path.display().to_string(),
                message,
            })?,
            Some("json") => serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?,
            _ => {
                return Err(ConfigError::UnknownFormat {
                    path: path.display().to_string(),
                })
            }
        };
        parsed.validate()?;
        Ok(parsed)
    }

    /// Writes the config as TOML.
    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        let text = toml_to_string(self);
        fs::write(path, text).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }
}

fn toml_from_str(text: &str) -> Result<RunConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

fn toml_to_string(config: &RunConfig) -> String {
    toml::to_string_pretty(config).expect("config serializes to TOML")
}
