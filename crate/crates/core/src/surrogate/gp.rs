use crate::error::{check_dim, Error, Result};
use crate::kernel::{kernel_gram, KernelSpec};
use crate::linalg::{dot, Cholesky};
use crate::scalar::Scalar;
use crate::space::Domain;

use super::dataset::{Dataset, RecordKey};

/// Largest negative posterior variance (relative to the signal variance)
/// that is treated as rounding noise and clamped to zero.
pub const NEGATIVE_VARIANCE_TOLERANCE: f64 = 1e-8;

/// Kernel plus observation noise.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparameters<T> {
    pub kernel: KernelSpec<T>,
    pub noise_variance: T,
}

/// Inference options that do not change the kernel itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelOptions<T> {
    /// Center targets on their mean and scale by their standard deviation
    /// before inference; outputs are mapped back to objective units.
    pub standardize: bool,
    /// Diagonal jitter tried first (escalated on failure).
    pub jitter: T,
}

impl<T: Scalar> Default for ModelOptions<T> {
    fn default() -> Self {
        Self { standardize: true, jitter: T::zero() }
    }
}

impl<T: Scalar> ModelOptions<T> {
    /// Exact textbook formulas on the raw targets.
    pub fn raw() -> Self {
        Self { standardize: false, jitter: T::zero() }
    }
}

/// Targets as seen by the GP, plus the affine map back to objective units.
#[derive(Clone, Debug)]
pub(crate) struct Targets<T> {
    pub values: Vec<T>,
    pub offset: T,
    pub scale: T,
}

impl<T: Scalar> Targets<T> {
    pub fn new(ys: &[T], standardize: bool) -> Self {
        let n = ys.len();
        if !standardize || n == 0 {
            return Self { values: ys.to_vec(), offset: T::zero(), scale: T::one() };
        }
        let nf = T::from_usize(n).unwrap();
        let mean = ys.iter().copied().sum::<T>() / nf;
        let scale = if n >= 2 {
            let ss = ys.iter().map(|y| (*y - mean) * (*y - mean)).sum::<T>();
            let sd = (ss / T::from_usize(n - 1).unwrap()).sqrt();
            if sd > T::zero() && sd.is_finite() { sd } else { T::one() }
        } else {
            T::one()
        };
        Self { values: ys.iter().map(|y| (*y - mean) / scale).collect(), offset: mean, scale }
    }
}

/// GP posterior mean and latent-function variance at one point, in objective units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Posterior<T> {
    pub mean: T,
    pub variance: T,
}

impl<T: Scalar> Posterior<T> {
    pub fn std_dev(&self) -> T {
        self.variance.sqrt()
    }
}

/// Zero-mean GP conditioned on a canonically ordered dataset snapshot.
#[derive(Clone, Debug)]
pub struct GpModel<T> {
    hyper: Hyperparameters<T>,
    options: ModelOptions<T>,
    domain: Domain<T>,
    keys: Vec<RecordKey>,
    xs: Vec<Vec<T>>,
    ys: Vec<T>,
    targets: Targets<T>,
    chol: Option<Cholesky<T>>,
    alpha: Vec<T>,
    jitter: T,
}

impl<T: Scalar> GpModel<T> {
    pub fn new(hyper: Hyperparameters<T>, data: &Dataset<T>, options: ModelOptions<T>) -> Result<Self> {
        hyper.kernel.validate()?;
        check_dim(data.dim(), hyper.kernel.dim())?;
        if hyper.noise_variance < T::zero() {
            return Err(Error::invalid("noise variance must be non-negative"));
        }
        let keys: Vec<RecordKey> = data.keys().copied().collect();
        let xs = data.xs();
        let ys = data.ys();
        let targets = Targets::new(&ys, options.standardize);
        let (chol, alpha, jitter) = if xs.is_empty() {
            (None, Vec::new(), T::zero())
        } else {
            let g = kernel_gram(&hyper.kernel, &xs, hyper.noise_variance, options.jitter)?;
            let alpha = g.chol.solve(&targets.values);
            (Some(g.chol), alpha, g.jitter)
        };
        Ok(Self { hyper, options, domain: data.domain().clone(), keys, xs, ys, targets, chol, alpha, jitter })
    }

    /// The prior: no observations at all.
    pub fn prior(hyper: Hyperparameters<T>, domain: Domain<T>) -> Result<Self> {
        Self::new(hyper, &Dataset::new(domain), ModelOptions::raw())
    }

    pub fn hyperparameters(&self) -> &Hyperparameters<T> {
        &self.hyper
    }

    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.hyper.kernel
    }

    pub fn options(&self) -> ModelOptions<T> {
        self.options
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn keys(&self) -> &[RecordKey] {
        &self.keys
    }

    pub fn xs(&self) -> &[Vec<T>] {
        &self.xs
    }

    pub fn ys(&self) -> &[T] {
        &self.ys
    }

    pub fn cholesky(&self) -> Option<&Cholesky<T>> {
        self.chol.as_ref()
    }

    /// `K⁻¹ y` in the model's internal (possibly standardized) target units.
    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn jitter(&self) -> T {
        self.jitter
    }

    /// Multiplier from internal to objective units (1 without standardization).
    pub fn output_scale(&self) -> T {
        self.targets.scale
    }

    pub fn output_offset(&self) -> T {
        self.targets.offset
    }

    /// `(μ, σ²)` at `xq`. `σ²` is the latent variance, clamped at zero for
    /// rounding-level negatives; larger negatives are a numerical failure.
    pub fn posterior(&self, xq: &[T]) -> Result<Posterior<T>> {
        check_dim(self.domain.dim(), xq.len())?;
        let kernel = &self.hyper.kernel;
        let prior_var = kernel.eval_unchecked(xq, xq);
        let (mean, var) = match &self.chol {
            None => (T::zero(), prior_var),
            Some(chol) => {
                let kq = kernel.cross(xq, &self.xs);
                let mean = dot(&kq, &self.alpha);
                let v = chol.solve_lower(&kq);
                (mean, prior_var - dot(&v, &v))
            }
        };
        // Cancellation error grows with n and machine epsilon; the fixed floor only binds in f64.
        let round = T::lit(1e3) * T::epsilon() * T::lit(self.xs.len().max(1) as f64);
        let tol = T::lit(NEGATIVE_VARIANCE_TOLERANCE).max(round) * kernel.signal_variance;
        let var = if var >= T::zero() {
            var
        } else if var > -tol {
            T::zero()
        } else {
            return Err(Error::NumericalFailure {
                context: format!("negative posterior variance {:e}", var.as_f64()),
                jitter: self.jitter.as_f64(),
            });
        };
        let s = self.targets.scale;
        Ok(Posterior { mean: self.targets.offset + s * mean, variance: s * s * var })
    }

    /// `L⁻¹ k(X, xq)` for a batch of query points, in internal units.
    pub(crate) fn whitened_cross(&self, xq: &[T]) -> Vec<T> {
        match &self.chol {
            None => Vec::new(),
            Some(chol) => chol.solve_lower(&self.hyper.kernel.cross(xq, &self.xs)),
        }
    }

    /// Posterior mean in internal units, without the output map.
    pub(crate) fn internal_mean(&self, xq: &[T]) -> T {
        if self.xs.is_empty() {
            T::zero()
        } else {
            dot(&self.hyper.kernel.cross(xq, &self.xs), &self.alpha)
        }
    }
}

/// `−½ yᵀK⁻¹y − ½ log det K − (n/2) log 2π` on the raw targets.
pub fn log_marginal_likelihood<T: Scalar>(kernel: &KernelSpec<T>, noise_variance: T, data: &Dataset<T>) -> Result<T> {
    if data.is_empty() {
        return Err(Error::invalid("log marginal likelihood needs at least one observation"));
    }
    check_dim(data.dim(), kernel.dim())?;
    let g = kernel_gram(kernel, &data.xs(), noise_variance, T::zero())?;
    Ok(lml_from_factor(&g.chol, &data.ys()))
}

pub(crate) fn lml_from_factor<T: Scalar>(chol: &Cholesky<T>, ys: &[T]) -> T {
    let z = chol.solve_lower(ys);
    let n = T::from_usize(ys.len()).unwrap();
    let half = T::lit(0.5);
    -half * dot(&z, &z) - half * chol.log_det() - half * n * (T::lit(2.0) * T::PI()).ln()
}
