//! Closed-form acquisition functions over the GP posterior.
//!
//! The engine minimizes. EI and PI measure improvement below the incumbent
//! `rho`; UCB is the optimistic lower bound, negated so that larger is always
//! more attractive to query.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::space::Domain;
use crate::surrogate::{Dataset, GpModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AcquisitionKind {
    #[serde(rename = "EI")]
    Ei,
    #[serde(rename = "PI")]
    Pi,
    #[serde(rename = "UCB")]
    Ucb,
}

/// UCB exploration weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kappa<T> {
    Fixed(T),
    /// `κ_t = √(2 ln(t² π² / 0.3))`, with `t` the number of observations.
    Schedule,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcquisitionSpec<T> {
    pub kind: AcquisitionKind,
    /// Improvement margin for EI and PI, in objective units.
    pub xi: T,
    pub kappa: Kappa<T>,
}

impl<T: Scalar> AcquisitionSpec<T> {
    pub fn ei() -> Self {
        Self { kind: AcquisitionKind::Ei, xi: T::zero(), kappa: Kappa::Fixed(T::lit(2.0)) }
    }

    pub fn pi() -> Self {
        Self { kind: AcquisitionKind::Pi, ..Self::ei() }
    }

    pub fn ucb(kappa: Kappa<T>) -> Self {
        Self { kind: AcquisitionKind::Ucb, kappa, ..Self::ei() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi >= T::zero()) {
            return Err(Error::invalid("xi must be non-negative"));
        }
        if let Kappa::Fixed(k) = self.kappa {
            if !(k > T::zero()) {
                return Err(Error::invalid("kappa must be positive"));
            }
        }
        Ok(())
    }

    /// Exploration weight at observation count `t` (UCB only).
    pub fn kappa_at(&self, t: usize) -> T {
        match self.kappa {
            Kappa::Fixed(k) => k,
            Kappa::Schedule => ucb_kappa_schedule(t.max(1)),
        }
    }
}

impl<T: Scalar> Default for AcquisitionSpec<T> {
    fn default() -> Self {
        Self::ei()
    }
}

/// Best observed value so far.
#[derive(Clone, Debug, PartialEq)]
pub struct Incumbent<T> {
    pub rho: T,
    pub x_best: Vec<T>,
}

impl<T: Scalar> Incumbent<T> {
    pub fn from_dataset(data: &Dataset<T>) -> Option<Self> {
        data.best().map(|r| Self { rho: r.y, x_best: r.x.clone() })
    }

    /// Same as [`Incumbent::from_dataset`] on the model's snapshot (canonical order, first minimum wins).
    pub fn from_model(model: &GpModel<T>) -> Option<Self> {
        let mut best: Option<usize> = None;
        for (i, y) in model.ys().iter().enumerate() {
            if best.map_or(true, |b| *y < model.ys()[b]) {
                best = Some(i);
            }
        }
        best.map(|i| Self { rho: model.ys()[i], x_best: model.xs()[i].clone() })
    }
}

/// Expected improvement below `rho − xi` of `Y ~ N(mu, sigma²)`.
pub fn ei<T: Scalar>(mu: T, sigma: T, rho: T, xi: T) -> T {
    let imp = rho - xi - mu;
    if !(sigma > T::zero()) {
        return imp.max(T::zero());
    }
    let z = imp / sigma;
    (imp * z.norm_cdf() + sigma * z.norm_pdf()).max(T::zero())
}

/// Probability that `Y ~ N(mu, sigma²)` falls below `rho − xi`.
pub fn pi<T: Scalar>(mu: T, sigma: T, rho: T, xi: T) -> T {
    let imp = rho - xi - mu;
    if !(sigma > T::zero()) {
        return if imp > T::zero() { T::one() } else { T::zero() };
    }
    (imp / sigma).norm_cdf()
}

/// `−mu + kappa·sigma`.
pub fn ucb<T: Scalar>(mu: T, sigma: T, kappa: T) -> T {
    -mu + kappa * sigma
}

/// `√(2 ln(t² π² / 0.3))`.
pub fn ucb_kappa_schedule<T: Scalar>(t: usize) -> T {
    let t = T::from_usize(t).unwrap();
    (T::lit(2.0) * (t * t * T::PI() * T::PI() / T::lit(0.3)).ln()).sqrt()
}

/// Acquisition value at `x` under `model`.
pub fn acquisition_value<T: Scalar>(model: &GpModel<T>, spec: &AcquisitionSpec<T>, inc: &Incumbent<T>, x: &[T]) -> Result<T> {
    let p = model.posterior(x)?;
    let sigma = p.std_dev();
    Ok(match spec.kind {
        AcquisitionKind::Ei => ei(p.mean, sigma, inc.rho, spec.xi),
        AcquisitionKind::Pi => pi(p.mean, sigma, inc.rho, spec.xi),
        AcquisitionKind::Ucb => ucb(p.mean, sigma, spec.kappa_at(model.len())),
    })
}

/// Range (max − min) of the acquisition over a seeded Sobol grid plus every
/// observed point. This is the normalizer of the GLIE temperature.
pub fn acquisition_range<T: Scalar>(
    model: &GpModel<T>,
    spec: &AcquisitionSpec<T>,
    inc: &Incumbent<T>,
    domain: &Domain<T>,
    grid_size: usize,
    seed: u64,
) -> Result<T> {
    if grid_size < 2 {
        return Err(Error::invalid("acquisition range needs a grid of at least two points"));
    }
    let grid = domain.low_discrepancy_grid(grid_size, seed)?;
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for x in grid.iter().chain(model.xs()) {
        let v = acquisition_value(model, spec, inc, x)?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((hi - lo).max(T::zero()))
}
