//! TOML pipeline configuration.
//!
//! Every section is optional and falls back to the defaults of the
//! corresponding stage; unknown keys anywhere are an error.

use std::path::{Path, PathBuf};
use std::time::Duration;

use boxmask_core::camera::CameraAnnotConfig;
use boxmask_core::filter::FilterConfig;
use boxmask_core::fusion::FusionConfig;
use boxmask_core::lidar::LidarAnnotConfig;
use boxmask_core::refine::RefineConfig;
use boxmask_core::{MaskBackend, SyntheticBackend};
use serde::{Deserialize, Serialize};

use crate::http_backend::HttpBackend;
use crate::{Error, Result};

/// Environment variable that replaces `backend.endpoint`.
pub const BACKEND_ENV: &str = "BOXMASK_BACKEND";

/// Endpoint value selecting the in-process synthetic backend.
pub const SYNTHETIC: &str = "synthetic";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    /// `synthetic` or an `http://host:port` base URL.
    pub endpoint: String,
    pub timeout_secs: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint: SYNTHETIC.to_string(),
            timeout_secs: 30.0,
        }
    }
}

impl BackendConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    /// Builds the configured backend.
    pub fn connect(&self) -> Result<Box<dyn MaskBackend + Send>> {
        let endpoint = self.endpoint.trim();
        if endpoint == SYNTHETIC {
            Ok(Box::new(SyntheticBackend))
        } else if endpoint.starts_with("http://") || endpoint.starts_with("https://") {
            Ok(Box::new(HttpBackend::new(endpoint, self.timeout())))
        } else {
            Err(Error::Config(format!(
                "backend endpoint must be `{SYNTHETIC}` or an http(s) URL, got `{endpoint}`"
            )))
        }
    }
}

/// Which annotation variants `fuse` derives next to the dense mask.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariantsConfig {
    pub camera: bool,
    pub lidar: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_root: PathBuf,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub filter: FilterConfig,
    pub fusion: FusionConfig,
    pub variants: VariantsConfig,
    pub camera: CameraAnnotConfig,
    pub lidar: LidarAnnotConfig,
    pub refine: RefineConfig,
    pub backend: BackendConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            output_root: PathBuf::from("out"),
            workers: 0,
            filter: FilterConfig::default(),
            fusion: FusionConfig::default(),
            variants: VariantsConfig::default(),
            camera: CameraAnnotConfig::default(),
            lidar: LidarAnnotConfig::default(),
            refine: RefineConfig::default(),
            backend: BackendConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.fusion.validate()?;
        self.camera.validate()?;
        self.lidar.validate()?;
        self.refine.validate()?;
        if !(self.backend.timeout_secs > 0.0 && self.backend.timeout_secs.is_finite()) {
            return Err(Error::Config("backend.timeout_secs must be positive".into()));
        }
        if self.output_root.as_os_str().is_empty() {
            return Err(Error::Config("output_root must not be empty".into()));
        }
        Ok(())
    }

    /// Applies the backend environment override, if set.
    pub fn apply_env(&mut self) {
        if let Ok(endpoint) = std::env::var(BACKEND_ENV) {
            if !endpoint.trim().is_empty() {
                self.backend.endpoint = endpoint.trim().to_string();
            }
        }
    }
}
