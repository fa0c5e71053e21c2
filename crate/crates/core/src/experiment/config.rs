use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::acquisition::{AcquisitionKind, AcquisitionSpec, Kappa};
use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::netsim::{NetworkConfig, NetworkMode};
use crate::node::{Policy, SurrogateConfig, TMode, DEFAULT_GREEDY_RESTARTS, DEFAULT_THOMPSON_GRID};
use crate::policy::{MhConfig, TemperatureSchedule};
use crate::surrogate::{FitConfig, Hyperparameters};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SP-EI")]
    SpEi,
    #[serde(rename = "SP-PI")]
    SpPi,
    #[serde(rename = "SP-UCB")]
    SpUcb,
    #[serde(rename = "PDTS")]
    Pdts,
    #[serde(rename = "SequentialEI")]
    SequentialEi,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::SpEi, Method::SpPi, Method::SpUcb, Method::Pdts, Method::SequentialEi];

    pub fn name(&self) -> &'static str {
        match self {
            Method::SpEi => "SP-EI",
            Method::SpPi => "SP-PI",
            Method::SpUcb => "SP-UCB",
            Method::Pdts => "PDTS",
            Method::SequentialEi => "SequentialEI",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            Method::SpEi => "stochastic policy, Boltzmann sampling of expected improvement",
            Method::SpPi => "stochastic policy, Boltzmann sampling of probability of improvement",
            Method::SpUcb => "stochastic policy, Boltzmann sampling of the lower confidence bound",
            Method::Pdts => "distributed Thompson sampling (argmin of a posterior draw)",
            Method::SequentialEi => "one node, greedy expected improvement, one evaluation at a time",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown method '{s}'")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One method or a comparison bundle sharing trial seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MethodSpec {
    One(Method),
    Many(Vec<Method>),
}

impl MethodSpec {
    pub fn methods(&self) -> Vec<Method> {
        match self {
            MethodSpec::One(m) => vec![*m],
            MethodSpec::Many(v) => v.clone(),
        }
    }
}

/// A group of identical nodes inside a custom fleet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetEntry {
    pub count: usize,
    pub method: Method,
    /// Per-group temperature override (stochastic methods).
    #[serde(default)]
    pub schedule: Option<ScheduleConfig>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TModeConfig {
    #[default]
    Global,
    Local,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleMode {
    #[default]
    #[serde(rename = "GLIE")]
    Glie,
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub mode: ScheduleMode,
    pub beta: Option<f64>,
    pub glie_grid_size: usize,
    pub t_mode: TModeConfig,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { mode: ScheduleMode::Glie, beta: None, glie_grid_size: 1024, t_mode: TModeConfig::Global }
    }
}

impl ScheduleConfig {
    pub fn schedule(&self) -> Result<TemperatureSchedule<f64>> {
        let s = match self.mode {
            ScheduleMode::Glie => TemperatureSchedule::Glie { grid_size: self.glie_grid_size },
            ScheduleMode::Fixed => TemperatureSchedule::Fixed(
                self.beta.ok_or_else(|| Error::config("Fixed schedule needs beta"))?,
            ),
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaConfig {
    Fixed(f64),
    /// The string `"schedule"`.
    Named(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub xi: f64,
    pub kappa: KappaConfig,
    pub greedy_restarts: usize,
    pub thompson_grid: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            xi: 0.0,
            kappa: KappaConfig::Named("schedule".into()),
            greedy_restarts: DEFAULT_GREEDY_RESTARTS,
            thompson_grid: DEFAULT_THOMPSON_GRID,
        }
    }
}

impl AcquisitionConfig {
    pub fn spec(&self, kind: AcquisitionKind) -> Result<AcquisitionSpec<f64>> {
        let kappa = match &self.kappa {
            KappaConfig::Fixed(k) => Kappa::Fixed(*k),
            KappaConfig::Named(s) if s == "schedule" => Kappa::Schedule,
            KappaConfig::Named(s) => return Err(Error::config(format!("kappa must be a number or \"schedule\", got '{s}'"))),
        };
        let spec = AcquisitionSpec { kind, xi: self.xi, kappa };
        spec.validate()?;
        Ok(spec)
    }
}

/// Hyperparameters held fixed for the whole run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedHyper {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub rq_shape: f64,
    pub isotropic: bool,
    pub standardize: bool,
    pub fit_starts: usize,
    pub fit_evals: usize,
    pub dense_factor: usize,
    pub refit_every: usize,
    pub fixed: Option<FixedHyper>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        let fit = FitConfig::<f64>::default();
        let s = SurrogateConfig::default();
        Self {
            family: KernelFamily::Matern52,
            rq_shape: 1.0,
            isotropic: false,
            standardize: true,
            fit_starts: fit.starts,
            fit_evals: fit.evals_per_start,
            dense_factor: s.dense_factor,
            refit_every: s.refit_every,
            fixed: None,
        }
    }
}

impl KernelConfig {
    pub fn surrogate(&self, dim: usize, fit_seed: u64) -> Result<SurrogateConfig> {
        let initial = match &self.fixed {
            None => None,
            Some(h) => {
                let lengthscales = match h.lengthscales.len() {
                    1 => vec![h.lengthscales[0]; dim],
                    n if n == dim => h.lengthscales.clone(),
                    n => return Err(Error::config(format!("fixed lengthscales: expected 1 or {dim} values, got {n}"))),
                };
                let kernel = KernelSpec::new(self.family, lengthscales, h.signal_variance, self.rq_shape)?;
                Some(Hyperparameters { kernel, noise_variance: h.noise_variance })
            }
        };
        let fit = FitConfig {
            fixed: initial.is_some(),
            isotropic: self.isotropic,
            starts: self.fit_starts,
            evals_per_start: self.fit_evals,
            seed: fit_seed,
            initial,
            standardize: self.standardize,
            rq_shape: self.rq_shape,
            ..FitConfig::default()
        };
        Ok(SurrogateConfig { family: self.family, fit, dense_factor: self.dense_factor, refit_every: self.refit_every, memo: None })
    }
}

fn default_nodes() -> usize {
    10
}

fn default_trials() -> usize {
    10
}

fn default_budget() -> usize {
    100
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

/// A full experiment description, as read from a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: String,
    #[serde(default)]
    pub objective_params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fleet: Option<Vec<FleetEntry>>,
    #[serde(default = "default_nodes")]
    pub n_nodes: usize,
    #[serde(default)]
    pub mode: NetworkMode,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Global evaluations after the initial design.
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Initial points per node; `2d + 2` when absent.
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub mh: MhConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(objective: &str, methods: &[Method]) -> Self {
        Self {
            objective: objective.to_string(),
            objective_params: Value::Object(Default::default()),
            method: Some(MethodSpec::Many(methods.to_vec())),
            fleet: None,
            n_nodes: default_nodes(),
            mode: NetworkMode::SyncBatch,
            trials: default_trials(),
            budget: default_budget(),
            p: None,
            seed: 0,
            kernel: KernelConfig::default(),
            acquisition: AcquisitionConfig::default(),
            schedule: ScheduleConfig::default(),
            mh: MhConfig::default(),
            network: NetworkConfig::default(),
            output_dir: default_output(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        match (&self.method, &self.fleet) {
            (Some(_), Some(_)) => return Err(Error::config("give either method or fleet, not both")),
            (None, None) => return Err(Error::config("one of method or fleet is required")),
            (Some(m), None) if m.methods().is_empty() => return Err(Error::config("method list is empty")),
            (None, Some(f)) => {
                if f.is_empty() || f.iter().any(|e| e.count == 0) {
                    return Err(Error::config("fleet groups need a positive count"));
                }
                let total: usize = f.iter().map(|e| e.count).sum();
                if total != self.n_nodes {
                    return Err(Error::config(format!("fleet has {total} nodes but n_nodes is {}", self.n_nodes)));
                }
            }
            _ => {}
        }
        if self.n_nodes == 0 {
            return Err(Error::config("n_nodes must be at least 1"));
        }
        if self.p == Some(0) {
            return Err(Error::config("p must be at least 1"));
        }
        self.mh.validate()?;
        self.schedule.schedule()?;
        self.acquisition.spec(AcquisitionKind::Ucb)?;
        if self.acquisition.greedy_restarts == 0 || self.acquisition.thompson_grid == 0 {
            return Err(Error::config("greedy_restarts and thompson_grid must be positive"));
        }
        NetworkConfig { mode: self.mode, ..self.network.clone() }.validate()
    }

    /// Names of the runs this config produces, in output order.
    pub fn run_names(&self) -> Vec<String> {
        match (&self.method, &self.fleet) {
            (_, Some(_)) => vec!["fleet".to_string()],
            (Some(m), None) => m.methods().iter().map(|m| m.name().to_string()).collect(),
            (None, None) => Vec::new(),
        }
    }

    pub(crate) fn t_mode(&self) -> TMode {
        match self.schedule.t_mode {
            TModeConfig::Global => TMode::Global,
            TModeConfig::Local => TMode::Local,
        }
    }

    /// Node policy for `method`; `schedule` overrides the global one.
    pub(crate) fn policy(&self, method: Method, schedule: Option<&ScheduleConfig>) -> Result<Policy> {
        let stochastic = |kind| -> Result<Policy> {
            Ok(Policy::Stochastic {
                acquisition: self.acquisition.spec(kind)?,
                schedule: schedule.unwrap_or(&self.schedule).schedule()?,
                mh: self.mh.clone(),
            })
        };
        match method {
            Method::SpEi => stochastic(AcquisitionKind::Ei),
            Method::SpPi => stochastic(AcquisitionKind::Pi),
            Method::SpUcb => stochastic(AcquisitionKind::Ucb),
            Method::Pdts => Ok(Policy::Thompson { grid_size: self.acquisition.thompson_grid }),
            Method::SequentialEi => Ok(Policy::Greedy {
                acquisition: self.acquisition.spec(AcquisitionKind::Ei)?,
                restarts: self.acquisition.greedy_restarts,
            }),
        }
    }
}
