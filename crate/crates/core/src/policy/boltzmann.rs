//! Metropolis–Hastings sampling of the Boltzmann policy `p(x) ∝ exp(β·α(x))`.
//!
//! The chain only ever looks at differences `β·(α' − α)`, so large β cannot
//! overflow. The proposal is a mixture of isotropic Gaussian steps; moves
//! leaving the box are rejected.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::acquisition::{acquisition_value, AcquisitionSpec, Incumbent};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::scalar::Scalar;
use crate::space::Domain;
use crate::surrogate::GpModel;

use super::greedy::greedy_argmax;

/// Restarts used by [`ChainInit::GreedyStart`].
pub const GREEDY_START_RESTARTS: usize = 4;

/// Chains accepting fewer than this fraction of burn-in proposals are flagged.
pub const LOW_ACCEPTANCE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainInit {
    GreedyStart,
    RandomStart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MhConfig {
    pub chain_length: usize,
    pub burn_in: usize,
    pub proposal_weights: Vec<f64>,
    /// Step standard deviations as fractions of each domain width.
    pub proposal_scales: Vec<f64>,
    pub init: ChainInit,
}

impl Default for MhConfig {
    fn default() -> Self {
        Self {
            chain_length: 500,
            burn_in: 100,
            proposal_weights: vec![0.5, 0.5],
            proposal_scales: vec![0.1, 0.01],
            init: ChainInit::GreedyStart,
        }
    }
}

impl MhConfig {
    pub fn validate(&self) -> Result<()> {
        if self.proposal_weights.is_empty() || self.proposal_weights.len() != self.proposal_scales.len() {
            return Err(Error::invalid("proposal weights and scales must be non-empty and of equal length"));
        }
        if self.proposal_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("proposal weights must be non-negative"));
        }
        let total: f64 = self.proposal_weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("proposal weights sum to {total}, expected 1")));
        }
        if self.proposal_scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("proposal scales must be positive"));
        }
        if self.burn_in >= self.chain_length {
            return Err(Error::invalid("burn_in must be smaller than chain_length"));
        }
        Ok(())
    }

    fn pick_scale(&self, rng: &mut Rng) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, s) in self.proposal_weights.iter().zip(&self.proposal_scales) {
            acc += w;
            if u < acc {
                return *s;
            }
        }
        *self.proposal_scales.last().unwrap()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ChainStats {
    pub steps: usize,
    pub accepted: usize,
    /// Acceptance rate over the burn-in prefix.
    pub burn_in_acceptance: f64,
    pub low_acceptance: bool,
}

impl ChainStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoltzmannDraw<T> {
    pub point: Vec<T>,
    pub stats: ChainStats,
}

/// Generic MH loop. `energy` is `α`, only called when `beta > 0`.
/// `visit` sees the state after every step.
fn run_chain<S: Clone, T: Scalar>(
    start: S,
    beta: T,
    mh: &MhConfig,
    steps: usize,
    rng: &mut Rng,
    mut propose: impl FnMut(&S, f64, &mut Rng) -> Option<S>,
    mut energy: impl FnMut(&S) -> Result<T>,
    mut visit: impl FnMut(usize, &S),
) -> Result<(S, ChainStats)> {
    let tempered = beta > T::zero();
    let mut state = start;
    let mut e = if tempered { energy(&state)? } else { T::zero() };
    let mut stats = ChainStats { steps, ..Default::default() };
    let mut burn_accepted = 0;
    for step in 0..steps {
        let scale = mh.pick_scale(rng);
        let u: f64 = rng.random();
        if let Some(cand) = propose(&state, scale, rng) {
            let accept = if tempered {
                let ec = energy(&cand)?;
                let log_ratio = beta * (ec - e);
                let ok = log_ratio >= T::zero() || T::lit(u).ln() < log_ratio;
                if ok {
                    e = ec;
                }
                ok
            } else {
                true
            };
            if accept {
                state = cand;
                stats.accepted += 1;
                if step < mh.burn_in {
                    burn_accepted += 1;
                }
            }
        }
        visit(step, &state);
    }
    let burn = mh.burn_in.min(steps);
    stats.burn_in_acceptance = if burn == 0 { 1.0 } else { burn_accepted as f64 / burn as f64 };
    stats.low_acceptance = stats.burn_in_acceptance < LOW_ACCEPTANCE;
    Ok((state, stats))
}

fn check_beta<T: Scalar>(beta: T) -> Result<()> {
    if !(beta >= T::zero()) || !beta.is_finite() {
        return Err(Error::invalid("beta must be finite and non-negative"));
    }
    Ok(())
}

/// One draw from `exp(β·α(x))` over the box.
pub fn boltzmann_sample<T: Scalar>(
    model: &GpModel<T>,
    spec: &AcquisitionSpec<T>,
    inc: &Incumbent<T>,
    beta: T,
    domain: &Domain<T>,
    mh: &MhConfig,
    seed: u64,
) -> Result<BoltzmannDraw<T>> {
    check_beta(beta)?;
    mh.validate()?;
    let mut rng = rng_from_seed(derive_seed(seed, &[0]));
    let start = match mh.init {
        ChainInit::GreedyStart => greedy_argmax(model, spec, inc, domain, GREEDY_START_RESTARTS, derive_seed(seed, &[1]))?,
        ChainInit::RandomStart => {
            let u: Vec<f64> = (0..domain.dim()).map(|_| rng.random()).collect();
            domain.from_unit(&u)
        }
    };
    let widths = domain.widths();
    let propose = |x: &Vec<T>, scale: f64, rng: &mut Rng| {
        let mut cand = x.clone();
        for (c, w) in cand.iter_mut().zip(&widths) {
            let z: f64 = rng.sample(StandardNormal);
            *c = *c + T::lit(z * scale) * *w;
        }
        domain.contains(&cand).then_some(cand)
    };
    let energy = |x: &Vec<T>| acquisition_value(model, spec, inc, x);
    let (point, stats) = run_chain(start, beta, mh, mh.chain_length, &mut rng, propose, energy, |_, _| {})?;
    Ok(BoltzmannDraw { point, stats })
}

/// Evenly spaced 1-d lattice sampler. Proposals are the continuous Gaussian
/// steps rounded to whole lattice offsets, which keeps them symmetric.
/// `values[i]` is `α` at lattice point `i`.
#[derive(Clone, Debug)]
pub struct LatticeSampler<'a, T> {
    values: &'a [T],
    beta: T,
    mh: &'a MhConfig,
}

impl<'a, T: Scalar> LatticeSampler<'a, T> {
    pub fn new(values: &'a [T], beta: T, mh: &'a MhConfig) -> Result<Self> {
        check_beta(beta)?;
        mh.validate()?;
        if values.len() < 2 {
            return Err(Error::invalid("lattice needs at least two points"));
        }
        Ok(Self { values, beta, mh })
    }

    fn start(&self, rng: &mut Rng) -> usize {
        match self.mh.init {
            ChainInit::GreedyStart => {
                let mut best = 0;
                for (i, v) in self.values.iter().enumerate() {
                    if *v > self.values[best] {
                        best = i;
                    }
                }
                best
            }
            ChainInit::RandomStart => rng.random_range(0..self.values.len()),
        }
    }

    fn chain(&self, steps: usize, rng: &mut Rng, visit: impl FnMut(usize, &usize)) -> Result<(usize, ChainStats)> {
        let n = self.values.len();
        let span = (n - 1) as f64;
        let start = self.start(rng);
        let propose = |i: &usize, scale: f64, rng: &mut Rng| {
            let z: f64 = rng.sample(StandardNormal);
            let j = *i as i64 + (z * scale * span).round() as i64;
            (0..n as i64).contains(&j).then_some(j as usize)
        };
        run_chain(start, self.beta, self.mh, steps, rng, propose, |i: &usize| Ok(self.values[*i]), visit)
    }

    /// One draw: the final state of a chain of `chain_length` steps.
    pub fn draw(&self, seed: u64) -> Result<(usize, ChainStats)> {
        self.chain(self.mh.chain_length, &mut rng_from_seed(seed), |_, _| {})
    }

    /// A single long chain; returns every state after the burn-in.
    pub fn trajectory(&self, steps: usize, seed: u64) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(steps.saturating_sub(self.mh.burn_in));
        let burn = self.mh.burn_in;
        self.chain(steps, &mut rng_from_seed(seed), |step, s| {
            if step >= burn {
                out.push(*s);
            }
        })?;
        Ok(out)
    }
}

/// Acquisition values on `n` evenly spaced points of a 1-d domain.
pub fn lattice_values<T: Scalar>(
    model: &GpModel<T>,
    spec: &AcquisitionSpec<T>,
    inc: &Incumbent<T>,
    domain: &Domain<T>,
    n: usize,
) -> Result<(Vec<T>, Vec<T>)> {
    if domain.dim() != 1 || n < 2 {
        return Err(Error::invalid("lattice mode needs a 1-d domain and at least two points"));
    }
    let step = domain.width(0) / T::from_usize(n - 1).unwrap();
    let points: Vec<T> = (0..n).map(|i| domain.lower[0] + T::from_usize(i).unwrap() * step).collect();
    let values = points.iter().map(|p| acquisition_value(model, spec, inc, &[*p])).collect::<Result<Vec<_>>>()?;
    Ok((points, values))
}
