//! Scenario and suite files (TOML).
//!
//! ```toml
//! [[scenario]]
//! id = "rho916-q90-delta"
//! seeds = [1, 2, 3]
//! num_packets = 200000
//! gamma = { concentration = 5.0, rate = 0.5 }
//! utilization = 0.916
//! target = { quantile = 0.9 }
//! aqm = { kind = "delta", model_path = "model.json", mode = "dp" }
//! ```

use std::path::{Path, PathBuf};

use delta_aqm::queue::DEFAULT_AQM_WINDOW;
use delta_aqm::{CodelParams, Config, Gamma, QueueConfig, ServiceModel};
use serde::{Deserialize, Serialize};

use crate::BenchError;

pub const DEFAULT_NUM_PACKETS: u64 = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaParams {
    pub concentration: f64,
    pub rate: f64,
}

impl Default for GammaParams {
    fn default() -> Self {
        Self {
            concentration: 5.0,
            rate: 0.5,
        }
    }
}

impl GammaParams {
    pub fn mean(&self) -> f64 {
        self.concentration / self.rate
    }

    pub fn service(&self) -> Result<Gamma, BenchError> {
        Ok(Gamma::new(self.concentration, self.rate)?)
    }
}

/// Either an explicit delay or the `q`-quantile of the no-AQM sojourn time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Delay(f64),
    Quantile(f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchKind {
    Enum,
    #[default]
    Dp,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AqmSpec {
    #[default]
    None,
    OfflineOptimum,
    /// Parameters left out are tuned per scenario.
    Codel {
        #[serde(default)]
        target: Option<f64>,
        #[serde(default)]
        interval: Option<f64>,
    },
    Delta {
        model_path: PathBuf,
        #[serde(default)]
        mode: SearchKind,
        #[serde(default)]
        include_self_in_condition: bool,
    },
}

impl AqmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AqmSpec::None => "none",
            AqmSpec::OfflineOptimum => "offline_optimum",
            AqmSpec::Codel { .. } => "codel",
            AqmSpec::Delta { .. } => "delta",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_num_packets")]
    pub num_packets: u64,
    #[serde(default)]
    pub gamma: GammaParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utilization: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inter_arrival: Option<f64>,
    pub target: TargetSpec,
    #[serde(default)]
    pub aqm: AqmSpec,
    #[serde(default = "default_window")]
    pub aqm_window: usize,
    /// Seed of the no-AQM run that calibrates a quantile target; defaults to
    /// the row's own seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_seed: Option<u64>,
    /// Link whose no-AQM run calibrates a quantile target, at the same
    /// utilization; defaults to `gamma`. Lets a mismatch study keep the
    /// delay targets of the training link.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_gamma: Option<GammaParams>,
}

fn default_num_packets() -> u64 {
    DEFAULT_NUM_PACKETS
}

fn default_window() -> usize {
    DEFAULT_AQM_WINDOW
}

fn invalid(field: &str, reason: impl Into<String>) -> BenchError {
    BenchError::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl ScenarioConfig {
    /// A no-AQM scenario at `utilization` with an explicit target.
    pub fn new(id: impl Into<String>, utilization: f64, target: TargetSpec) -> Self {
        Self {
            id: id.into(),
            seed: None,
            seeds: None,
            num_packets: DEFAULT_NUM_PACKETS,
            gamma: GammaParams::default(),
            utilization: Some(utilization),
            inter_arrival: None,
            target,
            aqm: AqmSpec::None,
            aqm_window: DEFAULT_AQM_WINDOW,
            calibration_seed: None,
            calibration_gamma: None,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.id.is_empty() {
            return Err(invalid("id", "must not be empty"));
        }
        if self.num_packets == 0 {
            return Err(invalid("num_packets", "must be at least 1"));
        }
        if self.seed.is_some() && self.seeds.is_some() {
            return Err(invalid("seeds", "give either seed or seeds, not both"));
        }
        if matches!(&self.seeds, Some(s) if s.is_empty()) {
            return Err(invalid("seeds", "must not be empty"));
        }
        self.gamma.service()?;
        if let Some(g) = &self.calibration_gamma {
            g.service()?;
        }
        match (self.utilization, self.inter_arrival) {
            (Some(_), Some(_)) => return Err(invalid("utilization", "give either utilization or inter_arrival")),
            (None, None) => return Err(invalid("utilization", "one of utilization or inter_arrival is required")),
            (Some(rho), None) if !(rho > 0.0 && rho < 1.0) => {
                return Err(invalid("utilization", format!("must lie in (0, 1), got {rho}")))
            }
            (None, Some(ia)) if !(ia > 0.0 && ia.is_finite()) => {
                return Err(invalid("inter_arrival", format!("must be positive, got {ia}")))
            }
            _ => {}
        }
        match self.target {
            TargetSpec::Delay(d) if !(d > 0.0) => {
                return Err(invalid("target.delay", format!("must be positive, got {d}")))
            }
            TargetSpec::Quantile(q) if !(q > 0.0 && q < 1.0) => {
                return Err(invalid("target.quantile", format!("must lie in (0, 1), got {q}")))
            }
            _ => {}
        }
        if let AqmSpec::Codel { target, interval } = self.aqm {
            for (field, v) in [("aqm.target", target), ("aqm.interval", interval)] {
                if matches!(v, Some(v) if !(v > 0.0 && v.is_finite())) {
                    return Err(invalid(field, "must be positive"));
                }
            }
        }
        self.queue_config(1.0).map(|_| ())
    }

    pub fn seeds(&self) -> Vec<u64> {
        match (&self.seeds, self.seed) {
            (Some(s), _) => s.clone(),
            (None, Some(s)) => vec![s],
            (None, None) => vec![0],
        }
    }

    pub fn mean_service(&self) -> f64 {
        self.gamma.mean()
    }

    pub fn utilization(&self) -> f64 {
        match (self.utilization, self.inter_arrival) {
            (Some(rho), _) => rho,
            (None, Some(ia)) => self.mean_service() / ia,
            (None, None) => f64::NAN,
        }
    }

    pub fn target_quantile(&self) -> Option<f64> {
        match self.target {
            TargetSpec::Quantile(q) => Some(q),
            TargetSpec::Delay(_) => None,
        }
    }

    /// The scenario whose no-AQM run sets a quantile target.
    pub fn calibration_base(&self) -> ScenarioConfig {
        let mut base = self.clone();
        if let Some(g) = self.calibration_gamma {
            base.gamma = g;
        }
        base
    }

    /// Queue parameters with the given target delay.
    pub fn queue_config(&self, target_delay: f64) -> Result<Config, BenchError> {
        let service = ServiceModel::Gamma(self.gamma.service()?);
        let mut config = match (self.utilization, self.inter_arrival) {
            (Some(rho), _) => QueueConfig::with_utilization(rho, service, target_delay)?,
            (None, Some(ia)) => QueueConfig {
                inter_arrival: ia,
                service,
                target_delay,
                aqm_window: DEFAULT_AQM_WINDOW,
            },
            (None, None) => return Err(invalid("utilization", "one of utilization or inter_arrival is required")),
        };
        config.aqm_window = self.aqm_window;
        config.validate()?;
        Ok(config)
    }

    /// Explicit CoDel parameters, if both are given.
    pub fn fixed_codel(&self) -> Result<Option<CodelParams>, BenchError> {
        match self.aqm {
            AqmSpec::Codel {
                target: Some(t),
                interval: Some(i),
            } => Ok(Some(CodelParams::new(t, i)?)),
            _ => Ok(None),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<ScenarioConfig>,
}

impl Suite {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let suite: Suite = toml::from_str(text).map_err(|e| BenchError::Parse(e.message().to_string()))?;
        suite.validate()?;
        Ok(suite)
    }

    /// Reads a suite and resolves relative model paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let mut suite = Self::from_toml(&text)?;
        suite.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(suite)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("suite serializes")
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let mut ids = std::collections::HashSet::new();
        for s in &self.scenarios {
            s.validate().map_err(|e| e.in_scenario(&s.id))?;
            if !ids.insert(s.id.as_str()) {
                return Err(invalid("id", format!("duplicate scenario id {:?}", s.id)));
            }
        }
        Ok(())
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for s in &mut self.scenarios {
            if let AqmSpec::Delta { model_path, .. } = &mut s.aqm {
                if model_path.is_relative() {
                    *model_path = base.join(&*model_path);
                }
            }
        }
    }
}

/// Reads a single scenario whose fields sit at the top level of the file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, BenchError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let mut scenario: ScenarioConfig =
        toml::from_str(&text).map_err(|e| BenchError::Parse(e.message().to_string()))?;
    scenario.validate()?;
    if let AqmSpec::Delta { model_path, .. } = &mut scenario.aqm {
        if model_path.is_relative() {
            *model_path = path.parent().unwrap_or(Path::new(".")).join(&*model_path);
        }
    }
    Ok(scenario)
}
