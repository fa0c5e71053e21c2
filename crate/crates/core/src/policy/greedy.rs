use crate::acquisition::{acquisition_value, AcquisitionSpec, Incumbent};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::space::Domain;
use crate::surrogate::GpModel;

/// Initial coordinate step as a fraction of each domain width.
const INITIAL_STEP: f64 = 0.1;
/// Refinement stops once every step is below this fraction of its width.
const MIN_STEP: f64 = 1e-7;
const MAX_EVALS_PER_RESTART: usize = 400;

/// Bounded coordinate ascent with a shrinking step, maximizing `f` from `start`.
pub(crate) fn coordinate_ascent<T: Scalar>(
    domain: &Domain<T>,
    start: Vec<T>,
    mut f: impl FnMut(&[T]) -> Result<T>,
) -> Result<(Vec<T>, T)> {
    let widths = domain.widths();
    let mut x = start;
    let mut v = f(&x)?;
    let mut step: Vec<T> = widths.iter().map(|w| *w * T::lit(INITIAL_STEP)).collect();
    let mut evals = 1;
    let floor: Vec<T> = widths.iter().map(|w| *w * T::lit(MIN_STEP)).collect();
    while evals < MAX_EVALS_PER_RESTART && step.iter().zip(&floor).any(|(s, m)| *s > *m) {
        let mut improved = false;
        for d in 0..x.len() {
            if !(step[d] > floor[d]) {
                continue;
            }
            for sign in [T::one(), -T::one()] {
                let mut cand = x.clone();
                cand[d] = (x[d] + sign * step[d]).max(domain.lower[d]).min(domain.upper[d]);
                if cand[d] == x[d] {
                    continue;
                }
                let vc = f(&cand)?;
                evals += 1;
                if vc > v {
                    x = cand;
                    v = vc;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            for s in step.iter_mut() {
                *s = *s * T::lit(0.5);
            }
        }
    }
    Ok((x, v))
}

/// Multistart maximization of an arbitrary function over the box. Starts are
/// a seeded Sobol design; ties go to the lowest start index.
pub(crate) fn multistart_argmax<T: Scalar>(
    domain: &Domain<T>,
    restarts: usize,
    seed: u64,
    mut f: impl FnMut(&[T]) -> Result<T>,
) -> Result<(Vec<T>, T)> {
    if restarts == 0 {
        return Err(Error::invalid("greedy maximization needs at least one restart"));
    }
    let mut best: Option<(Vec<T>, T)> = None;
    for start in domain.low_discrepancy_grid(restarts, seed)? {
        let (x, v) = coordinate_ascent(domain, start, &mut f)?;
        if best.as_ref().map_or(true, |(_, b)| v > *b) {
            best = Some((x, v));
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Greedy policy: the (approximate) maximizer of the acquisition function.
pub fn greedy_argmax<T: Scalar>(
    model: &GpModel<T>,
    spec: &AcquisitionSpec<T>,
    inc: &Incumbent<T>,
    domain: &Domain<T>,
    restarts: usize,
    seed: u64,
) -> Result<Vec<T>> {
    multistart_argmax(domain, restarts, seed, |x| acquisition_value(model, spec, inc, x)).map(|(x, _)| x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelFamily, KernelSpec};
    use crate::surrogate::{Hyperparameters, ModelOptions};

    fn prior(domain: Domain<f64>) -> GpModel<f64> {
        let h = Hyperparameters {
            kernel: KernelSpec::isotropic(KernelFamily::Matern52, domain.dim(), 0.3, 1.0).unwrap(),
            noise_variance: 0.0,
        };
        GpModel::new(h, &crate::surrogate::Dataset::new(domain), ModelOptions::raw()).unwrap()
    }

    #[test]
    fn flat_acquisition_returns_first_start() {
        let domain = Domain::unit(2);
        let m = prior(domain.clone());
        let inc = Incumbent { rho: 0.0, x_best: vec![0.5, 0.5] };
        let x = greedy_argmax(&m, &AcquisitionSpec::ei(), &inc, &domain, 5, 7).unwrap();
        assert_eq!(x, domain.low_discrepancy_grid(1, 7).unwrap()[0]);
    }

    #[test]
    fn collapsed_domain() {
        let domain = Domain::new(vec![0.25, -1.0], vec![0.25, -1.0]).unwrap();
        let m = prior(domain.clone());
        let inc = Incumbent { rho: 0.0, x_best: vec![0.25, -1.0] };
        let x = greedy_argmax(&m, &AcquisitionSpec::ei(), &inc, &domain, 3, 1).unwrap();
        assert_eq!(x, vec![0.25, -1.0]);
    }

    #[test]
    fn finds_smooth_maximum() {
        let domain = Domain::new(vec![-1.0], vec![2.0]).unwrap();
        let (x, v): (Vec<f64>, f64) = multistart_argmax(&domain, 4, 0, |x| Ok(-(x[0] - 0.7) * (x[0] - 0.7))).unwrap();
        assert!((x[0] - 0.7).abs() < 1e-5);
        assert!(v > -1e-10);
    }

    #[test]
    fn zero_restarts_rejected() {
        let domain = Domain::unit(1);
        assert!(multistart_argmax(&domain, 0, 0, |_| Ok(0.0)).is_err());
    }
}
