//! Job configuration shared by the command-line tools.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::DEFAULT_THRESHOLD;
use crate::geometry::{ActivePlane, DEFAULT_TOP_VIEW_SCALE};
use crate::hog::HogConfig;
use crate::io::{read_json, IoError};
use crate::raster::{DEFAULT_BACKGROUND, DEFAULT_CLOSING_RADIUS_MM};
use crate::similarity::Metric;

/// Environment variable that overrides [`JobConfig::output_dir`].
pub const OUTPUT_ENV: &str = "LAYERLENS_OUTPUT";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobConfig {
    pub gcode_path: Option<PathBuf>,
    pub calibration_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub scale_px_per_mm: f64,
    pub hog: HogConfig,
    pub metrics: Vec<Metric>,
    pub threshold: f64,
    /// Per-metric thresholds taking precedence over `threshold`.
    pub threshold_overrides: BTreeMap<Metric, f64>,
    pub min_region_blocks: usize,
    pub closing_radius_mm: f64,
    /// `analyze` and `watch` raise an alarm when any metric's anomalous-area
    /// ratio exceeds this percentage.
    pub alarm_ratio_pct: f64,
    /// Observation square in printer coordinates.
    pub plane: ActivePlane,
    pub extrusion_width_mm: f64,
    pub background: u8,
    /// Watch-mode poll interval.
    pub poll_interval_ms: u64,
}

impl Default for JobConfig {
    fn default() -> Self {
        Self {
            gcode_path: None,
            calibration_path: None,
            output_dir: PathBuf::from("layerlens_out"),
            scale_px_per_mm: DEFAULT_TOP_VIEW_SCALE,
            hog: HogConfig::default(),
            metrics: Metric::SELECTED.to_vec(),
            threshold: DEFAULT_THRESHOLD,
            threshold_overrides: BTreeMap::new(),
            min_region_blocks: 1,
            closing_radius_mm: DEFAULT_CLOSING_RADIUS_MM,
            alarm_ratio_pct: 5.0,
            plane: ActivePlane::default(),
            extrusion_width_mm: 0.4,
            background: DEFAULT_BACKGROUND,
            poll_interval_ms: 1000,
        }
    }
}

impl JobConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let cfg: JobConfig = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.metrics.is_empty() {
            return bad("at least one metric is required".into());
        }
        if !(self.scale_px_per_mm > 0.0) || !self.scale_px_per_mm.is_finite() {
            return bad(format!("scale_px_per_mm must be positive, got {}", self.scale_px_per_mm));
        }
        for (what, t) in std::iter::once(("threshold".to_string(), self.threshold))
            .chain(self.threshold_overrides.iter().map(|(m, &t)| (format!("threshold for {m}"), t)))
        {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("{what} must lie in (0, 1), got {t}"));
            }
        }
        if !(self.closing_radius_mm >= 0.0) {
            return bad("closing_radius_mm must be non-negative".into());
        }
        if !(self.extrusion_width_mm > 0.0) {
            return bad("extrusion_width_mm must be positive".into());
        }
        if !(self.alarm_ratio_pct >= 0.0) {
            return bad("alarm_ratio_pct must be non-negative".into());
        }
        self.hog.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn threshold_for(&self, m: Metric) -> f64 {
        self.threshold_overrides.get(&m).copied().unwrap_or(self.threshold)
    }

    /// Applies the output-directory environment override, if set.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
    }
}
