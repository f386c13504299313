//! Run configuration: defaults, then an optional TOML/JSON file, then flags.

use std::path::{Path, PathBuf};

use anyhow::Context;
use drlatent::causal::{DEFAULT_MAGNITUDE, DEFAULT_TREAT_FRACTION};
use drlatent::data::DEFAULT_MAX_KWH;
use drlatent::forecast::{Family, ForecastConfig, Method};
use drlatent::synthetic::GeneratorConfig;
use drlatent::Hour;
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub meter: Option<PathBuf>,
    pub temperature: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            meter: None,
            temperature: None,
            metadata: None,
            events: None,
            store: None,
            out: PathBuf::from("out"),
        }
    }
}

/// Settings of the `simulate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub users: usize,
    pub generator: GeneratorConfig,
    /// Day on which every simulated user signs up.
    pub signup_day: usize,
    /// Share of daytime hours after signup that carry an event.
    pub event_fraction: f64,
    /// Largest reduction at an event, in kWh.
    pub event_kwh: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            users: 6,
            generator: GeneratorConfig::default(),
            signup_day: 60,
            event_fraction: 0.05,
            event_kwh: 0.6,
        }
    }
}

/// Everything that determines a command's output. Written into every file
/// the command produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Method used by `reduction`.
    pub estimator: Method,
    pub forecast: ForecastConfig,
    /// Largest injected reduction c̄ in scaled units.
    pub magnitude: f64,
    pub treat_fraction: f64,
    /// Share of each user's pretreatment hours used for training in `forecast`.
    pub train_fraction: f64,
    /// Synthetic signup for `synth`; by default each user's series is cut at
    /// the midnight closest to two thirds of its length.
    pub signup: Option<Hour>,
    pub max_kwh: f64,
    pub station: Option<String>,
    pub adf_max_lags: usize,
    pub simulate: SimulateConfig,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            methods: Method::ALL.to_vec(),
            estimator: Method::Latent(Family::Ols),
            forecast: ForecastConfig::default(),
            magnitude: DEFAULT_MAGNITUDE,
            treat_fraction: DEFAULT_TREAT_FRACTION,
            train_fraction: 0.75,
            signup: None,
            max_kwh: DEFAULT_MAX_KWH,
            station: None,
            adf_max_lags: 24,
            simulate: SimulateConfig::default(),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let parsed = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(anyhow::Error::from),
            _ => toml::from_str(&text).map_err(anyhow::Error::from),
        };
        parsed
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))
            .map_err(anyhow::Error::from)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    pub fn store(&self) -> anyhow::Result<&Path> {
        self.paths
            .store
            .as_deref()
            .ok_or_else(|| UsageError("--store is required".into()).into())
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> anyhow::Result<()> {
        let fail = |m: String| Err(UsageError(m).into());
        if self.methods.is_empty() {
            return fail("no methods selected".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail(format!("train_fraction {} must lie in (0, 1)", self.train_fraction));
        }
        if !(self.treat_fraction > 0.0 && self.treat_fraction <= 1.0) {
            return fail(format!("treat_fraction {} must lie in (0, 1]", self.treat_fraction));
        }
        if !(self.magnitude >= 0.0) {
            return fail(format!("magnitude {} must be non-negative", self.magnitude));
        }
        Ok(())
    }
}
