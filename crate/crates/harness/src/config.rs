//! Harness configuration: a TOML file, every section optional, with CLI
//! flags overriding individual fields.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use benchwatch_core::measure::DEFAULT_SEARCH_CAP;
use benchwatch_core::regression::RegressionPolicy;
use benchwatch_core::workload::DEFAULT_TIMEOUT_SECS;

use crate::error::HarnessError;
use crate::runner::DeviceAvailability;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub policy: RegressionPolicy,
    #[serde(default)]
    pub devices: DevicesConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub webhook: WebhookConfig,
    #[serde(default)]
    pub providers: ProvidersConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Directory of `*.workload` spec files; builtins are always present.
    pub registry: Option<PathBuf>,
    #[serde(default = "default_store_dir")]
    pub baseline_store: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output: PathBuf,
    /// Defaults to `<output>/bs-cache`.
    pub bs_cache: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            registry: None,
            baseline_store: default_store_dir(),
            output: default_output_dir(),
            bs_cache: None,
        }
    }
}

fn default_store_dir() -> PathBuf {
    PathBuf::from("baseline-store")
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("benchwatch-out")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DevicesConfig {
    #[serde(default = "default_true")]
    pub cpu: bool,
    #[serde(default = "default_true")]
    pub gpu: bool,
}

fn default_true() -> bool {
    true
}

impl Default for DevicesConfig {
    fn default() -> Self {
        Self { cpu: true, gpu: true }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    #[serde(default = "default_repeats")]
    pub repeats: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_search_cap")]
    pub search_cap: u32,
}

fn default_repeats() -> u32 {
    benchwatch_core::measure::DEFAULT_REPEATS
}

fn default_timeout_secs() -> u64 {
    DEFAULT_TIMEOUT_SECS
}

fn default_search_cap() -> u32 {
    DEFAULT_SEARCH_CAP
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            repeats: default_repeats(),
            timeout_secs: default_timeout_secs(),
            search_cap: default_search_cap(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WebhookConfig {
    pub url: Option<String>,
    /// Name of the environment variable holding the bearer token.
    pub auth_token_env: Option<String>,
}

impl WebhookConfig {
    pub fn token(&self) -> Option<String> {
        self.auth_token_env
            .as_ref()
            .and_then(|name| std::env::var(name).ok())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    /// Build/measure against a seeded simulated history file.
    Simulated,
    /// Shell out to a configured build command; measure with the real
    /// harness against the built artifact.
    Command,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvidersConfig {
    #[serde(default = "default_provider_mode")]
    pub mode: ProviderMode,
    /// Command template with `{commit}` substitution; its last stdout line
    /// is the artifact path. Required in command mode.
    pub build_cmd: Option<String>,
    /// Artifact under test for the nightly itself (command mode);
    /// substituted for `{artifact}` in workload specs.
    pub artifact: Option<String>,
}

fn default_provider_mode() -> ProviderMode {
    ProviderMode::Simulated
}

impl Default for ProvidersConfig {
    fn default() -> Self {
        Self {
            mode: default_provider_mode(),
            build_cmd: None,
            artifact: None,
        }
    }
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let config: CliConfig = toml::from_str(&text)
            .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Required paths must exist before any measurement starts.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if let Some(registry) = &self.paths.registry {
            if !registry.is_dir() {
                return Err(HarnessError::Validation(format!(
                    "registry path {} does not exist",
                    registry.display()
                )));
            }
        }
        self.policy.validate()?;
        if self.measure.repeats < 1 {
            return Err(HarnessError::Validation("repeats must be >= 1".to_string()));
        }
        if self.providers.mode == ProviderMode::Command && self.providers.build_cmd.is_none() {
            return Err(HarnessError::Validation(
                "providers.build_cmd is required in command mode".to_string(),
            ));
        }
        Ok(())
    }

    pub fn availability(&self) -> DeviceAvailability {
        DeviceAvailability {
            cpu: self.devices.cpu,
            gpu: self.devices.gpu,
        }
    }

    pub fn bs_cache_dir(&self) -> PathBuf {
        self.paths
            .bs_cache
            .clone()
            .unwrap_or_else(|| self.paths.output.join("bs-cache"))
    }

    pub fn timeout(&self) -> std::time::Duration {
        std::time::Duration::from_secs(self.measure.timeout_secs)
    }
}
