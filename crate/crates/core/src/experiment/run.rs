use rayon::prelude::*;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::netsim::{self, NetworkConfig};
use crate::node::{default_p, init_design, ld_table, FitMemo, NodeConfig, NodeState, SurrogateConfig};
use crate::objectives::{get_objective, Objective};
use crate::rng::derive_seed;

use super::config::{ExperimentConfig, Method};

const FIT_STREAM: u64 = 1;
const NODE_STREAM: u64 = 2;
const NET_STREAM: u64 = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    /// 1-based global evaluation count, initial design included.
    pub eval_index: usize,
    pub node_id: u32,
    pub tick: u64,
    pub x: Vec<f64>,
    pub y: f64,
    pub best_so_far: f64,
    /// Absent when the objective's minimum is unknown.
    pub immediate_regret: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegretTrace {
    pub method: String,
    pub trial: usize,
    /// Leading rows that belong to the initial design.
    pub n_init: usize,
    pub rows: Vec<TraceRow>,
    /// Diagnostic flags raised during the run.
    pub flags: usize,
}

impl RegretTrace {
    /// Drops the initial design and renumbers from 1. `best_so_far` still
    /// accounts for the initial values.
    pub fn post_init(&self) -> Self {
        let rows = self.rows[self.n_init.min(self.rows.len())..]
            .iter()
            .enumerate()
            .map(|(i, r)| TraceRow { eval_index: i + 1, ..r.clone() })
            .collect();
        Self { rows, n_init: 0, ..self.clone() }
    }

    pub fn final_best(&self) -> Option<f64> {
        self.rows.last().map(|r| r.best_so_far)
    }

    pub fn final_regret(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.immediate_regret)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialFailure {
    pub method: String,
    pub trial: usize,
    pub error: String,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub traces: Vec<RegretTrace>,
    pub failures: Vec<TrialFailure>,
}

pub fn trial_seed(master: u64, trial: usize) -> u64 {
    derive_seed(master, &[trial as u64])
}

/// The objective used in trial `trial`. GP-sampled objectives draw a fresh
/// function per trial, seeded from their `seed` parameter and the trial index.
pub fn objective_for_trial(config: &ExperimentConfig, trial: usize) -> Result<Objective> {
    if !config.objective.starts_with("gp-") {
        return get_objective(&config.objective, &config.objective_params);
    }
    let mut params = match &config.objective_params {
        Value::Null => serde_json::Map::new(),
        Value::Object(m) => m.clone(),
        _ => return Err(Error::config("objective_params must be an object")),
    };
    let base = params.get("seed").and_then(Value::as_u64).unwrap_or(0);
    let seed = derive_seed(base, &[trial as u64]);
    params.insert("seed".into(), Value::from(seed));
    get_objective(&config.objective, &Value::Object(params))
}

enum Run {
    Method(Method),
    Fleet,
}

fn build_nodes(config: &ExperimentConfig, run: &Run, objective: &Objective, seed: u64) -> Result<(Vec<NodeState>, usize)> {
    let dim = objective.dim();
    let domain = objective.domain().clone();
    let p = config.p.unwrap_or_else(|| default_p(dim));
    let n = config.n_nodes;
    let table = ld_table(n * p, dim, Some(seed))?;
    let surrogate = SurrogateConfig {
        memo: Some(FitMemo::default()),
        ..config.kernel.surrogate(dim, derive_seed(seed, &[FIT_STREAM]))?
    };
    let node_seed = derive_seed(seed, &[NODE_STREAM]);
    let per_node = p + config.budget.div_ceil(n);
    let make = |id: u32, method: Method, schedule, p: usize, budget: usize| -> Result<NodeState> {
        let cfg = NodeConfig {
            node_id: id,
            domain: domain.clone(),
            policy: config.policy(method, schedule)?,
            surrogate: surrogate.clone(),
            p,
            budget,
            t_mode: config.t_mode(),
            seed: node_seed,
        };
        NodeState::new(cfg, init_design(id, p, dim, &domain, &table)?)
    };
    let nodes = match run {
        Run::Method(Method::SequentialEi) => vec![make(0, Method::SequentialEi, None, n * p, n * p + config.budget)?],
        Run::Method(m) => (0..n as u32).map(|id| make(id, *m, None, p, per_node)).collect::<Result<_>>()?,
        Run::Fleet => {
            let mut out = Vec::with_capacity(n);
            for group in config.fleet.as_deref().unwrap_or_default() {
                for _ in 0..group.count {
                    let id = out.len() as u32;
                    out.push(make(id, group.method, group.schedule.as_ref(), p, per_node)?);
                }
            }
            out
        }
    };
    Ok((nodes, n * p))
}

fn run_one(config: &ExperimentConfig, name: &str, run: &Run, objective: &Objective, trial: usize) -> Result<RegretTrace> {
    let seed = trial_seed(config.seed, trial);
    let (nodes, n_init) = build_nodes(config, run, objective, seed)?;
    let network = NetworkConfig {
        mode: config.mode,
        seed: derive_seed(seed, &[NET_STREAM, config.network.seed]),
        ..config.network.clone()
    };
    let f = |x: &[f64]| objective.eval(x);
    let out = netsim::run(nodes, &f, &network, n_init + config.budget, Vec::new())?;
    let mut best = f64::INFINITY;
    let rows = out
        .trace
        .entries
        .iter()
        .map(|e| {
            best = best.min(e.y);
            TraceRow {
                eval_index: e.global_index + 1,
                node_id: e.node_id,
                tick: e.tick,
                x: e.x.clone(),
                y: e.y,
                best_so_far: best,
                immediate_regret: objective.immediate_regret(best).ok(),
            }
        })
        .collect();
    Ok(RegretTrace { method: name.to_string(), trial, n_init, rows, flags: out.trace.flags.len() })
}

/// Runs every (method, trial) pair. All methods of a trial share its seed,
/// hence the same initial design. Failed runs are reported, not fatal.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let runs: Vec<(String, Run)> = match (&config.method, &config.fleet) {
        (_, Some(_)) => vec![("fleet".to_string(), Run::Fleet)],
        (Some(m), None) => m.methods().into_iter().map(|m| (m.name().to_string(), Run::Method(m))).collect(),
        (None, None) => unreachable!("validated"),
    };
    let objectives: Vec<Objective> = (0..config.trials).map(|r| objective_for_trial(config, r)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..runs.len()).flat_map(|m| (0..config.trials).map(move |r| (m, r))).collect();
    let results: Vec<(usize, usize, Result<RegretTrace>)> = jobs
        .into_par_iter()
        .map(|(m, r)| (m, r, run_one(config, &runs[m].0, &runs[m].1, &objectives[r], r)))
        .collect();
    let mut out = ExperimentOutput::default();
    for (m, r, res) in results {
        match res {
            Ok(t) => out.traces.push(t),
            Err(e) => out.failures.push(TrialFailure { method: runs[m].0.clone(), trial: r, error: e.to_string() }),
        }
    }
    Ok(out)
}
