//! A single optimization agent: evaluates its share of the low-discrepancy
//! initial design, then repeatedly refreshes its surrogate, picks a query
//! with its policy, evaluates it and hands the record out for broadcast.
//!
//! A node's behavior depends only on its config, its seed and the set of
//! records it holds. Records are kept in canonical `(node_id, seq)` order,
//! so arrival order never reaches the numerics.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::acquisition::{acquisition_range, AcquisitionSpec, Incumbent};
use crate::error::{Error, Result};
use crate::kernel::KernelFamily;
use crate::policy::{boltzmann_sample, glie_beta, greedy_argmax, thompson_select, MhConfig, TemperatureSchedule};
use crate::rng::derive_seed;
use crate::sobol::Sobol;
use crate::space::{unit_shift, Domain};
use crate::surrogate::{
    fit_hyperparameters, Dataset, FitConfig, GpModel, Hyperparameters, ModelOptions, ObservationRecord, RecordKey,
};

pub type Record = ObservationRecord<f64>;

/// What travels on the wire: one record and nothing else.
#[derive(Clone, Debug, PartialEq)]
pub struct BroadcastMessage {
    pub record: Record,
}

impl BroadcastMessage {
    pub fn new(record: Record) -> Self {
        Self { record }
    }
}

/// How a node picks its next query.
#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    /// Boltzmann sampling of the acquisition.
    Stochastic { acquisition: AcquisitionSpec<f64>, schedule: TemperatureSchedule<f64>, mh: MhConfig },
    /// Argmin of a joint posterior draw on a fresh grid.
    Thompson { grid_size: usize },
    /// Argmax of the acquisition.
    Greedy { acquisition: AcquisitionSpec<f64>, restarts: usize },
}

pub const DEFAULT_THOMPSON_GRID: usize = 512;
pub const DEFAULT_GREEDY_RESTARTS: usize = 16;

impl Policy {
    pub fn stochastic(acquisition: AcquisitionSpec<f64>) -> Self {
        Policy::Stochastic { acquisition, schedule: TemperatureSchedule::default(), mh: MhConfig::default() }
    }

    pub fn greedy(acquisition: AcquisitionSpec<f64>) -> Self {
        Policy::Greedy { acquisition, restarts: DEFAULT_GREEDY_RESTARTS }
    }

    pub fn thompson() -> Self {
        Policy::Thompson { grid_size: DEFAULT_THOMPSON_GRID }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Policy::Stochastic { acquisition, schedule, mh } => {
                acquisition.validate()?;
                schedule.validate()?;
                mh.validate()
            }
            Policy::Thompson { grid_size } if *grid_size == 0 => Err(Error::invalid("Thompson grid size must be positive")),
            Policy::Greedy { acquisition, restarts } => {
                if *restarts == 0 {
                    return Err(Error::invalid("greedy restarts must be positive"));
                }
                acquisition.validate()
            }
            _ => Ok(()),
        }
    }
}

/// Which count feeds the GLIE schedule and the UCB weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TMode {
    /// Every observation the node knows about.
    #[default]
    Global,
    /// Only the node's own evaluations.
    Local,
}

/// Fit results shared by the nodes of one run, keyed by the record keys of
/// the dataset. Within a run a key always carries the same payload and the
/// fit is a pure function of the data, so a hit returns exactly what a fresh
/// fit would. Never share a memo across runs or surrogate configs.
#[derive(Clone, Default)]
pub struct FitMemo(Arc<Mutex<HashMap<Vec<RecordKey>, (Hyperparameters<f64>, bool)>>>);

impl FitMemo {
    fn get_or_fit(&self, data: &Dataset<f64>, fit: impl FnOnce() -> Result<(Hyperparameters<f64>, bool)>) -> Result<(Hyperparameters<f64>, bool)> {
        let key: Vec<RecordKey> = data.keys().copied().collect();
        if let Some(hit) = self.0.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let out = fit()?;
        self.0.lock().unwrap().insert(key, out.clone());
        Ok(out)
    }
}

impl std::fmt::Debug for FitMemo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FitMemo({} entries)", self.0.lock().map(|m| m.len()).unwrap_or(0))
    }
}

/// A memo changes no result, so it takes no part in config equality.
impl PartialEq for FitMemo {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateConfig {
    pub family: KernelFamily,
    /// Fitting options. `fit.seed` must be shared by every node of a fleet
    /// so equal datasets give equal hyperparameters.
    pub fit: FitConfig<f64>,
    /// Refit on every update while the dataset holds at most `dense_factor·d` records.
    pub dense_factor: usize,
    /// Past that, refit once this many new records have arrived.
    pub refit_every: usize,
    pub memo: Option<FitMemo>,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self { family: KernelFamily::Matern52, fit: FitConfig::default(), dense_factor: 20, refit_every: 5, memo: None }
    }
}

impl SurrogateConfig {
    /// Never fit; always use `hyper`.
    pub fn fixed(hyper: Hyperparameters<f64>) -> Self {
        let family = hyper.kernel.family;
        Self { family, fit: FitConfig { fixed: true, initial: Some(hyper), ..FitConfig::default() }, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeConfig {
    pub node_id: u32,
    pub domain: Domain<f64>,
    pub policy: Policy,
    pub surrogate: SurrogateConfig,
    /// Initial-design points evaluated before the policy takes over.
    pub p: usize,
    /// Maximum local evaluations, initial design included.
    pub budget: usize,
    pub t_mode: TMode,
    pub seed: u64,
}

impl NodeConfig {
    pub fn new(node_id: u32, domain: Domain<f64>, policy: Policy, seed: u64) -> Self {
        let p = default_p(domain.dim());
        Self { node_id, domain, policy, surrogate: SurrogateConfig::default(), p, budget: p + 50, t_mode: TMode::Global, seed }
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if self.surrogate.refit_every == 0 {
            return Err(Error::invalid("refit_every must be positive"));
        }
        if self.p > self.budget {
            return Err(Error::config(format!("node {}: p = {} exceeds budget {}", self.node_id, self.p, self.budget)));
        }
        Ok(())
    }
}

/// `2d + 2`.
pub fn default_p(dim: usize) -> usize {
    2 * dim + 2
}

/// A Sobol table over `[0,1]^dim` of `len` points. With `shift` set, every
/// point is moved by the same seeded Cranley–Patterson rotation.
pub fn ld_table(len: usize, dim: usize, shift: Option<u64>) -> Result<Vec<Vec<f64>>> {
    let sobol = Sobol::new(dim)?;
    Ok(match shift {
        None => sobol.points(len),
        Some(seed) => sobol.shifted_points(len, &unit_shift(dim, seed)),
    })
}

/// Node `k` gets table rows `[k·p, (k+1)·p)` mapped into the box.
pub fn init_design(node_id: u32, p: usize, dim: usize, domain: &Domain<f64>, table: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if domain.dim() != dim {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: dim });
    }
    let start = node_id as usize * p;
    let end = start + p;
    if table.len() < end {
        return Err(Error::config(format!("low-discrepancy table has {} rows, node {node_id} needs {end}", table.len())));
    }
    table[start..end]
        .iter()
        .map(|u| {
            if u.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: u.len() });
            }
            Ok(domain.from_unit(u))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum DiagnosticKind {
    /// The MH chain accepted fewer than 1% of burn-in proposals.
    LowAcceptance { rate: f64 },
    /// Every fit start failed; default hyperparameters were used.
    FitFallback,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub node_id: u32,
    pub seq: u64,
    pub kind: DiagnosticKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub x: Vec<f64>,
    /// Inverse temperature used (stochastic policy only).
    pub beta: Option<f64>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Message { message: BroadcastMessage, diagnostics: Vec<Diagnostic> },
    Exhausted,
}

/// Hyperparameter bookkeeping shared by nodes and the reference loop.
#[derive(Clone, Debug, Default)]
struct ModelCache {
    model: Option<GpModel<f64>>,
    hyper: Option<Hyperparameters<f64>>,
    fitted_at: usize,
}

impl ModelCache {
    /// Rebuilds the model on `data`, refitting per the cadence.
    fn rebuild(&mut self, data: &Dataset<f64>, cfg: &SurrogateConfig) -> Result<bool> {
        let n = data.len();
        let refit = match &self.hyper {
            None => true,
            Some(_) => n <= cfg.dense_factor * data.dim() || n >= self.fitted_at + cfg.refit_every,
        };
        let mut fallback = false;
        if refit {
            let hyper = if cfg.fit.fixed || n < 2 {
                fit_hyperparameters(data, cfg.family, &FitConfig { fixed: true, ..cfg.fit.clone() })?.hyper
            } else {
                let fit = || fit_hyperparameters(data, cfg.family, &cfg.fit).map(|o| (o.hyper, o.fallback));
                let (hyper, fb) = match &cfg.memo {
                    Some(memo) => memo.get_or_fit(data, fit)?,
                    None => fit()?,
                };
                fallback = fb;
                hyper
            };
            self.hyper = Some(hyper);
            self.fitted_at = n;
        }
        let options = ModelOptions { standardize: cfg.fit.standardize, jitter: 0.0 };
        self.model = Some(GpModel::new(self.hyper.clone().unwrap(), data, options)?);
        Ok(fallback)
    }
}

/// Picks the next query from `model` under `policy`. `t` is the count fed
/// to the schedules.
fn select_with(
    policy: &Policy,
    model: &GpModel<f64>,
    domain: &Domain<f64>,
    t: usize,
    seed: u64,
    node_id: u32,
    seq: u64,
) -> Result<Selection> {
    let mut diagnostics = Vec::new();
    let incumbent = || Incumbent::from_model(model).unwrap_or_else(|| Incumbent { rho: 0.0, x_best: domain.center() });
    let (x, beta) = match policy {
        Policy::Greedy { acquisition, restarts } => {
            let spec = with_t(acquisition, t);
            (greedy_argmax(model, &spec, &incumbent(), domain, *restarts, derive_seed(seed, &[1]))?, None)
        }
        Policy::Thompson { grid_size } => (thompson_select(model, domain, *grid_size, derive_seed(seed, &[2]))?, None),
        Policy::Stochastic { acquisition, schedule, mh } => {
            let spec = with_t(acquisition, t);
            let inc = incumbent();
            let beta = match *schedule {
                TemperatureSchedule::Fixed(b) => b,
                TemperatureSchedule::Glie { grid_size } => {
                    if t <= 1 {
                        0.0
                    } else {
                        let c = acquisition_range(model, &spec, &inc, domain, grid_size, derive_seed(seed, &[3]))?;
                        glie_beta(t as u64, c)
                    }
                }
            };
            let draw = boltzmann_sample(model, &spec, &inc, beta, domain, mh, derive_seed(seed, &[4]))?;
            if draw.stats.low_acceptance {
                diagnostics.push(Diagnostic {
                    node_id,
                    seq,
                    kind: DiagnosticKind::LowAcceptance { rate: draw.stats.burn_in_acceptance },
                });
            }
            (draw.point, Some(beta))
        }
    };
    Ok(Selection { x, beta, diagnostics })
}

/// UCB reads its κ schedule from the model size; pin it to `t` instead.
fn with_t(spec: &AcquisitionSpec<f64>, t: usize) -> AcquisitionSpec<f64> {
    use crate::acquisition::{AcquisitionKind, Kappa};
    match (spec.kind, spec.kappa) {
        (AcquisitionKind::Ucb, Kappa::Schedule) => AcquisitionSpec { kappa: Kappa::Fixed(spec.kappa_at(t)), ..*spec },
        _ => *spec,
    }
}

#[derive(Clone, Debug)]
pub struct NodeState {
    config: NodeConfig,
    dataset: Dataset<f64>,
    cache: ModelCache,
    stale: bool,
    pending_init: Vec<Vec<f64>>,
    seq: u64,
}

impl NodeState {
    /// A fresh node that will evaluate `init_points` first (see [`init_design`]).
    pub fn new(config: NodeConfig, init_points: Vec<Vec<f64>>) -> Result<Self> {
        config.validate()?;
        if init_points.len() > config.budget {
            return Err(Error::config("more initial points than budget"));
        }
        for x in &init_points {
            config.domain.check_point(x)?;
        }
        let dataset = Dataset::new(config.domain.clone());
        Ok(Self { config, dataset, cache: ModelCache::default(), stale: true, pending_init: init_points, seq: 0 })
    }

    /// A node spun up mid-run. It takes every record in `history` and skips
    /// its initial design, unless `history` is empty, in which case it starts
    /// like a fresh node on `init_points`.
    pub fn join<'a>(
        history: impl IntoIterator<Item = &'a BroadcastMessage>,
        config: NodeConfig,
        init_points: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let mut node = Self::new(config, Vec::new())?;
        node.ingest(history)?;
        if node.dataset.is_empty() {
            node.pending_init = init_points;
        }
        Ok(node)
    }

    pub fn node_id(&self) -> u32 {
        self.config.node_id
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Dataset<f64> {
        &self.dataset
    }

    /// The current model, if it matches the dataset.
    pub fn model(&self) -> Option<&GpModel<f64>> {
        if self.stale {
            None
        } else {
            self.cache.model.as_ref()
        }
    }

    /// Records produced by this node so far.
    pub fn seq(&self) -> u64 {
        self.seq
    }

    /// Observations known to this node.
    pub fn t(&self) -> usize {
        self.dataset.len()
    }

    /// Initial-design points not evaluated yet.
    pub fn pending_init(&self) -> usize {
        self.pending_init.len()
    }

    pub fn in_init(&self) -> bool {
        !self.pending_init.is_empty()
    }

    pub fn is_exhausted(&self) -> bool {
        self.seq as usize >= self.config.budget
    }

    pub fn remaining(&self) -> usize {
        self.config.budget.saturating_sub(self.seq as usize)
    }

    pub fn incumbent(&self) -> Option<Incumbent<f64>> {
        Incumbent::from_dataset(&self.dataset)
    }

    /// Inserts every record; returns how many were new. Re-delivery is a
    /// no-op. A record conflicting with a stored one under the same key is a
    /// protocol violation.
    pub fn ingest<'a>(&mut self, msgs: impl IntoIterator<Item = &'a BroadcastMessage>) -> Result<usize> {
        let mut fresh = 0;
        for m in msgs {
            if self.dataset.insert(m.record.clone())? {
                fresh += 1;
            }
        }
        if fresh > 0 {
            self.stale = true;
        }
        Ok(fresh)
    }

    /// Brings the model up to date with the dataset. Returns a fit-fallback
    /// diagnostic if fitting failed.
    pub fn refresh_model(&mut self) -> Result<Option<Diagnostic>> {
        if !self.stale && self.cache.model.is_some() {
            return Ok(None);
        }
        let fallback = self.cache.rebuild(&self.dataset, &self.config.surrogate)?;
        self.stale = false;
        Ok(fallback.then(|| Diagnostic { node_id: self.config.node_id, seq: self.seq, kind: DiagnosticKind::FitFallback }))
    }

    fn policy_t(&self) -> usize {
        match self.config.t_mode {
            TMode::Global => self.dataset.len(),
            TMode::Local => self.seq as usize,
        }
    }

    /// Seed of the next step.
    pub fn step_seed(&self) -> u64 {
        derive_seed(self.config.seed, &[u64::from(self.config.node_id), self.seq])
    }

    /// Chooses the next post-init query without evaluating it.
    pub fn select(&mut self, seed: u64) -> Result<Selection> {
        let fit = self.refresh_model()?;
        let model = self.cache.model.as_ref().expect("model refreshed");
        let mut sel = select_with(
            &self.config.policy,
            model,
            &self.config.domain,
            self.policy_t(),
            seed,
            self.config.node_id,
            self.seq,
        )?;
        sel.diagnostics.extend(fit);
        Ok(sel)
    }

    /// Evaluates the next point (initial design first, then the policy),
    /// stores the record and returns it for broadcast.
    pub fn step<F: Fn(&[f64]) -> f64 + ?Sized>(&mut self, objective: &F) -> Result<StepOutcome> {
        if self.is_exhausted() {
            return Ok(StepOutcome::Exhausted);
        }
        let (x, diagnostics) = if self.pending_init.is_empty() {
            let sel = self.select(self.step_seed())?;
            (sel.x, sel.diagnostics)
        } else {
            (self.pending_init.remove(0), Vec::new())
        };
        let y = objective(&x);
        if !y.is_finite() {
            return Err(Error::invalid(format!("objective returned {y} at {x:?}")));
        }
        let record = Record::new(self.config.node_id, self.seq, x, y);
        self.dataset.insert(record.clone())?;
        self.stale = true;
        self.seq += 1;
        Ok(StepOutcome::Message { message: BroadcastMessage::new(record), diagnostics })
    }
}

/// Textbook sequential BO with one evaluation per iteration: evaluate
/// `init_points`, then until `budget` evaluations are done refresh the model
/// and query the point chosen by `policy`. Records are labeled as if produced
/// by node `node_id`, with the same per-step seeds a node would use.
pub fn sequential_bo<F: Fn(&[f64]) -> f64 + ?Sized>(
    config: &NodeConfig,
    init_points: &[Vec<f64>],
    objective: &F,
) -> Result<Vec<Record>> {
    config.validate()?;
    let mut data = Dataset::new(config.domain.clone());
    let mut cache = ModelCache::default();
    let mut out = Vec::with_capacity(config.budget);
    for i in 0..config.budget {
        let x = match init_points.get(i) {
            Some(x) => x.clone(),
            None => {
                cache.rebuild(&data, &config.surrogate)?;
                let t = match config.t_mode {
                    TMode::Global => data.len(),
                    TMode::Local => i,
                };
                let seed = derive_seed(config.seed, &[u64::from(config.node_id), i as u64]);
                let model = cache.model.as_ref().unwrap();
                select_with(&config.policy, model, &config.domain, t, seed, config.node_id, i as u64)?.x
            }
        };
        let y = objective(&x);
        let r = Record::new(config.node_id, i as u64, x, y);
        data.insert(r.clone())?;
        out.push(r);
    }
    Ok(out)
}
