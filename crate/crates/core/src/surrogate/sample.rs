use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::linalg::{dot, factor_with_jitter, Matrix};
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;
use crate::sobol::Sobol;
use crate::space::Domain;

use super::gp::GpModel;

fn standard_normals<T: Scalar>(n: usize, seed: u64) -> Vec<T> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            T::lit(z)
        })
        .collect()
}

/// One joint draw of the latent function from the posterior over `grid`.
pub fn posterior_sample_at<T: Scalar>(model: &GpModel<T>, grid: &[Vec<T>], seed: u64) -> Result<Vec<T>> {
    if grid.is_empty() {
        return Err(Error::invalid("posterior sample needs a non-empty grid"));
    }
    for g in grid {
        model.domain().check_point(g)?;
    }
    let kernel = model.kernel();
    let n = grid.len();
    let whitened: Vec<Vec<T>> = grid.iter().map(|g| model.whitened_cross(g)).collect();
    let mut cov = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval_unchecked(&grid[i], &grid[j]) - dot(&whitened[i], &whitened[j]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let f = factor_with_jitter(&cov, T::zero(), kernel.signal_variance, "posterior_sample_at")?;
    let z = standard_normals::<T>(n, seed);
    let noise = f.chol.mul_lower(&z);
    let (offset, scale) = (model.output_offset(), model.output_scale());
    Ok(grid
        .iter()
        .zip(noise)
        .map(|(g, e)| offset + scale * (model.internal_mean(g) + e))
        .collect())
}

/// A deterministic function drawn from a GP prior: the noise-free posterior
/// mean conditioned on one joint prior sample at Sobol anchor points.
#[derive(Clone, Debug)]
pub struct GpSample<T> {
    kernel: KernelSpec<T>,
    domain: Domain<T>,
    anchors: Vec<Vec<T>>,
    anchor_values: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> GpSample<T> {
    pub fn eval(&self, x: &[T]) -> T {
        dot(&self.kernel.cross(x, &self.anchors), &self.weights)
    }

    pub fn anchors(&self) -> &[Vec<T>] {
        &self.anchors
    }

    pub fn anchor_values(&self) -> &[T] {
        &self.anchor_values
    }

    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.kernel
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }
}

/// Draws a random objective from the GP prior with kernel `spec` over `domain`.
pub fn sample_objective<T: Scalar>(spec: &KernelSpec<T>, domain: &Domain<T>, anchor_count: usize, seed: u64) -> Result<GpSample<T>> {
    if anchor_count == 0 {
        return Err(Error::invalid("sample_objective needs at least one anchor"));
    }
    spec.validate()?;
    crate::error::check_dim(domain.dim(), spec.dim())?;
    let sobol = Sobol::new(domain.dim())?;
    let anchors: Vec<Vec<T>> = sobol.points(anchor_count).iter().map(|u| domain.from_unit(u)).collect();
    let k = spec.gram_matrix(&anchors)?;
    let f = factor_with_jitter(&k, T::zero(), spec.signal_variance, "sample_objective")?;
    let z = standard_normals::<T>(anchor_count, seed);
    let values = f.chol.mul_lower(&z);
    let weights = f.chol.solve(&values);
    Ok(GpSample { kernel: spec.clone(), domain: domain.clone(), anchors, anchor_values: values, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;
    use crate::surrogate::{Dataset, Hyperparameters, ModelOptions, ObservationRecord};

    fn se() -> Hyperparameters<f64> {
        Hyperparameters { kernel: KernelSpec::isotropic(KernelFamily::SquaredExponential, 1, 0.2, 1.0).unwrap(), noise_variance: 0.0 }
    }

    #[test]
    fn empty_grid_rejected() {
        let m = GpModel::prior(se(), Domain::unit(1)).unwrap();
        assert!(posterior_sample_at(&m, &[], 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let m = GpModel::prior(se(), Domain::unit(1)).unwrap();
        let grid = vec![vec![0.1], vec![0.5], vec![0.9]];
        assert_eq!(posterior_sample_at(&m, &grid, 4).unwrap(), posterior_sample_at(&m, &grid, 4).unwrap());
        assert_ne!(posterior_sample_at(&m, &grid, 4).unwrap(), posterior_sample_at(&m, &grid, 5).unwrap());
    }

    #[test]
    fn sample_pinned_at_noise_free_observation() {
        let d = Dataset::from_records(Domain::unit(1), [ObservationRecord::new(0, 0, vec![0.4], 1.7)]).unwrap();
        let m = GpModel::new(se(), &d, ModelOptions::raw()).unwrap();
        for seed in 0..20 {
            let s = posterior_sample_at(&m, &[vec![0.4], vec![0.9]], seed).unwrap();
            assert!((s[0] - 1.7).abs() < 1e-4);
        }
    }

    #[test]
    fn objective_interpolates_anchors_and_is_deterministic() {
        let spec = KernelSpec::<f64>::isotropic(KernelFamily::Matern52, 2, 0.2, 1.0).unwrap();
        let a = sample_objective(&spec, &Domain::unit(2), 200, 9).unwrap();
        let b = sample_objective(&spec, &Domain::unit(2), 200, 9).unwrap();
        for (x, v) in a.anchors().iter().zip(a.anchor_values()) {
            assert!((a.eval(x) - v).abs() < 1e-6);
            assert_eq!(a.eval(x).to_bits(), b.eval(x).to_bits());
        }
        assert!(sample_objective(&spec, &Domain::unit(2), 0, 9).is_err());
    }
}
