//! Type-II maximum likelihood for kernel hyperparameters.
//!
//! Parameters are searched in log space: one log-lengthscale per input
//! dimension (or a single tied one), log signal variance and log noise
//! variance. Each start runs cyclic coordinate ascent where every coordinate
//! move is a golden-section search inside a bracket that halves every sweep.

use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Scalar;
use crate::sobol::Sobol;
use crate::space::unit_shift;

use super::dataset::Dataset;
use super::gp::{lml_from_factor, Hyperparameters, Targets};

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig<T> {
    /// Skip the search and return `initial` (or the default) untouched.
    pub fixed: bool,
    /// One lengthscale shared by all dimensions.
    pub isotropic: bool,
    pub starts: usize,
    pub evals_per_start: usize,
    pub seed: u64,
    /// Lengthscales range over `[w/r, w·r]` for domain width `w`, signal
    /// variance over `[v/r, v·r]` for target variance `v`.
    pub bound_ratio: f64,
    /// Noise variance bounds as multiples of the target variance.
    pub noise_bounds: (f64, f64),
    /// Warm start (first start point); also the value returned in fixed mode.
    pub initial: Option<Hyperparameters<T>>,
    /// Fit on standardized targets, as the model will see them.
    pub standardize: bool,
    /// Shape used when the family is rational quadratic (not searched).
    pub rq_shape: T,
}

impl<T: Scalar> Default for FitConfig<T> {
    fn default() -> Self {
        Self {
            fixed: false,
            isotropic: false,
            starts: 8,
            evals_per_start: 100,
            seed: 0,
            bound_ratio: 1e3,
            noise_bounds: (1e-8, 1.0),
            initial: None,
            standardize: true,
            rq_shape: T::one(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOutcome<T> {
    pub hyper: Hyperparameters<T>,
    /// Log evidence of the returned hyperparameters (on the fitted targets);
    /// `-inf` when the fit fell back.
    pub log_likelihood: T,
    /// Every start failed numerically and the default was returned.
    pub fallback: bool,
    pub evaluations: usize,
}

/// Hyperparameters used when nothing better is known: a quarter of the
/// domain width per lengthscale, unit-ish signal and small noise.
pub fn default_hyperparameters<T: Scalar>(
    family: KernelFamily,
    widths: &[T],
    target_variance: T,
    rq_shape: T,
) -> Hyperparameters<T> {
    let v = if target_variance > T::zero() && target_variance.is_finite() { target_variance } else { T::one() };
    let lengthscales = widths
        .iter()
        .map(|w| if *w > T::zero() { *w * T::lit(0.25) } else { T::lit(0.25) })
        .collect();
    Hyperparameters {
        kernel: KernelSpec { family, lengthscales, signal_variance: v, rq_shape },
        noise_variance: v * T::lit(1e-6),
    }
}

/// Precomputed per-dimension squared differences, lower triangle packed.
struct Evidence<T> {
    family: KernelFamily,
    rq_shape: T,
    n: usize,
    dim: usize,
    isotropic: bool,
    sq: Vec<Vec<T>>,
    ys: Vec<T>,
}

impl<T: Scalar> Evidence<T> {
    fn new(family: KernelFamily, rq_shape: T, xs: &[Vec<T>], ys: Vec<T>, isotropic: bool) -> Self {
        let n = xs.len();
        let dim = xs.first().map_or(0, Vec::len);
        let mut sq = vec![Vec::with_capacity(n * (n - 1) / 2); dim];
        for i in 0..n {
            for j in 0..i {
                for (d, s) in sq.iter_mut().enumerate() {
                    let diff = xs[i][d] - xs[j][d];
                    s.push(diff * diff);
                }
            }
        }
        Self { family, rq_shape, n, dim, isotropic, sq, ys }
    }

    fn n_params(&self) -> usize {
        if self.isotropic { 3 } else { self.dim + 2 }
    }

    fn decode(&self, theta: &[T]) -> Hyperparameters<T> {
        let lengthscales = if self.isotropic {
            vec![theta[0].exp(); self.dim]
        } else {
            theta[..self.dim].iter().map(|t| t.exp()).collect()
        };
        let k = theta.len();
        Hyperparameters {
            kernel: KernelSpec {
                family: self.family,
                lengthscales,
                signal_variance: theta[k - 2].exp(),
                rq_shape: self.rq_shape,
            },
            noise_variance: theta[k - 1].exp(),
        }
    }

    fn eval(&self, theta: &[T]) -> Option<T> {
        let h = self.decode(theta);
        let inv_l2: Vec<T> = h.kernel.lengthscales.iter().map(|l| T::one() / (*l * *l)).collect();
        let mut k = Matrix::zeros(self.n, self.n);
        let diag = h.kernel.signal_variance + h.noise_variance;
        let mut idx = 0;
        for i in 0..self.n {
            k[(i, i)] = diag;
            for j in 0..i {
                let r2 = (0..self.dim).fold(T::zero(), |acc, d| acc + self.sq[d][idx] * inv_l2[d]);
                let v = h.kernel.from_sq_dist(r2);
                k[(i, j)] = v;
                k[(j, i)] = v;
                idx += 1;
            }
        }
        let chol = Cholesky::new(&k)?;
        let v = lml_from_factor(&chol, &self.ys);
        v.is_finite().then_some(v)
    }
}

struct Budgeted<'a, T> {
    evidence: &'a Evidence<T>,
    left: usize,
    used: usize,
}

impl<T: Scalar> Budgeted<'_, T> {
    fn eval(&mut self, theta: &[T]) -> Option<T> {
        if self.left == 0 {
            return None;
        }
        self.left -= 1;
        self.used += 1;
        Some(self.evidence.eval(theta).unwrap_or(T::neg_infinity()))
    }
}

fn coordinate_ascent<T: Scalar>(
    f: &mut Budgeted<'_, T>,
    start: Vec<T>,
    lo: &[T],
    hi: &[T],
) -> Option<(Vec<T>, T)> {
    let mut best = start;
    let mut best_val = f.eval(&best)?;
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut half_width: Vec<T> = lo.iter().zip(hi).map(|(l, h)| (*h - *l) * T::lit(0.25)).collect();
    'sweeps: loop {
        for c in 0..best.len() {
            let mut a = (best[c] - half_width[c]).max(lo[c]);
            let mut b = (best[c] + half_width[c]).min(hi[c]);
            if b <= a {
                continue;
            }
            let mut probe = best.clone();
            let at = |x: T, f: &mut Budgeted<'_, T>, probe: &mut Vec<T>| {
                probe[c] = x;
                f.eval(probe)
            };
            let mut x1 = b - inv_phi * (b - a);
            let mut x2 = a + inv_phi * (b - a);
            let Some(mut f1) = at(x1, f, &mut probe) else { break 'sweeps };
            let Some(mut f2) = at(x2, f, &mut probe) else { break 'sweeps };
            let mut local = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
            for _ in 0..4 {
                if f1 >= f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - inv_phi * (b - a);
                    match at(x1, f, &mut probe) {
                        Some(v) => f1 = v,
                        None => break,
                    }
                    if f1 > local.1 {
                        local = (x1, f1);
                    }
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + inv_phi * (b - a);
                    match at(x2, f, &mut probe) {
                        Some(v) => f2 = v,
                        None => break,
                    }
                    if f2 > local.1 {
                        local = (x2, f2);
                    }
                }
            }
            if local.1 > best_val {
                best[c] = local.0;
                best_val = local.1;
            }
            if f.left == 0 {
                break 'sweeps;
            }
        }
        for h in half_width.iter_mut() {
            *h = *h * T::lit(0.5);
        }
    }
    best_val.is_finite().then_some((best, best_val))
}

/// Maximizes the log marginal likelihood of `data` over the hyperparameters of `family`.
pub fn fit_hyperparameters<T: Scalar>(
    data: &Dataset<T>,
    family: KernelFamily,
    config: &FitConfig<T>,
) -> Result<FitOutcome<T>> {
    let widths = data.domain().widths();
    let targets = Targets::new(&data.ys(), config.standardize);
    let variance = sample_variance(&targets.values);
    let default = default_hyperparameters(family, &widths, variance, config.rq_shape);
    if config.fixed {
        let hyper = config.initial.clone().unwrap_or(default);
        return Ok(FitOutcome { hyper, log_likelihood: T::nan(), fallback: false, evaluations: 0 });
    }
    if data.len() < 2 {
        return Err(Error::invalid("hyperparameter fitting needs at least two observations"));
    }
    if config.starts == 0 || config.evals_per_start == 0 {
        return Err(Error::invalid("fit needs at least one start and one evaluation"));
    }
    let v = default.kernel.signal_variance;
    let ratio = T::lit(config.bound_ratio).ln();
    let evidence = Evidence::new(family, config.rq_shape, &data.xs(), targets.values.clone(), config.isotropic);
    let k = evidence.n_params();
    let width_of = |i: usize| if widths[i] > T::zero() { widths[i] } else { T::one() };
    let mut lo = Vec::with_capacity(k);
    let mut hi = Vec::with_capacity(k);
    if config.isotropic {
        let w = (0..widths.len()).map(width_of).fold(T::zero(), |m, w| m.max(w));
        lo.push(w.ln() - ratio);
        hi.push(w.ln() + ratio);
    } else {
        for i in 0..widths.len() {
            lo.push(width_of(i).ln() - ratio);
            hi.push(width_of(i).ln() + ratio);
        }
    }
    lo.push(v.ln() - ratio);
    hi.push(v.ln() + ratio);
    lo.push(v.ln() + T::lit(config.noise_bounds.0).ln());
    hi.push(v.ln() + T::lit(config.noise_bounds.1).ln());

    let encode = |h: &Hyperparameters<T>| -> Vec<T> {
        let mut theta = Vec::with_capacity(k);
        if config.isotropic {
            let mean_log = h.kernel.lengthscales.iter().map(|l| l.ln()).sum::<T>()
                / T::from_usize(h.kernel.lengthscales.len()).unwrap();
            theta.push(mean_log);
        } else {
            theta.extend(h.kernel.lengthscales.iter().map(|l| l.ln()));
        }
        theta.push(h.kernel.signal_variance.ln());
        theta.push(h.noise_variance.max(T::min_positive_value()).ln());
        theta.iter().zip(lo.iter().zip(&hi)).map(|(t, (l, u))| t.max(*l).min(*u)).collect()
    };

    let warm = config
        .initial
        .as_ref()
        .filter(|h| h.kernel.family == family && h.kernel.dim() == widths.len())
        .unwrap_or(&default);
    let mut starts = vec![encode(warm)];
    let sobol = Sobol::new(k)?;
    let shift = unit_shift(k, config.seed);
    for u in sobol.shifted_points(config.starts.saturating_sub(1), &shift) {
        starts.push(u.iter().enumerate().map(|(i, ui)| lo[i] + T::lit(*ui) * (hi[i] - lo[i])).collect());
    }

    let mut best: Option<(Vec<T>, T)> = None;
    let mut evaluations = 0;
    for start in starts {
        let mut f = Budgeted { evidence: &evidence, left: config.evals_per_start, used: 0 };
        let found = coordinate_ascent(&mut f, start, &lo, &hi);
        evaluations += f.used;
        if let Some((theta, val)) = found {
            if best.as_ref().map_or(true, |(_, b)| val > *b) {
                best = Some((theta, val));
            }
        }
    }
    Ok(match best {
        Some((theta, val)) => FitOutcome { hyper: evidence.decode(&theta), log_likelihood: val, fallback: false, evaluations },
        None => FitOutcome { hyper: default, log_likelihood: T::neg_infinity(), fallback: true, evaluations },
    })
}

fn sample_variance<T: Scalar>(ys: &[T]) -> T {
    if ys.len() < 2 {
        return T::one();
    }
    let n = T::from_usize(ys.len()).unwrap();
    let mean = ys.iter().copied().sum::<T>() / n;
    ys.iter().map(|y| (*y - mean) * (*y - mean)).sum::<T>() / (n - T::one())
}
