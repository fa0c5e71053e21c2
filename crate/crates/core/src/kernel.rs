//! Stationary covariance kernels with per-dimension (ARD) lengthscales.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{factor_with_jitter, Cholesky, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelFamily {
    Matern12,
    Matern32,
    Matern52,
    SquaredExponential,
    RationalQuadratic,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 5] = [
        KernelFamily::Matern12,
        KernelFamily::Matern32,
        KernelFamily::Matern52,
        KernelFamily::SquaredExponential,
        KernelFamily::RationalQuadratic,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec<T> {
    pub family: KernelFamily,
    pub lengthscales: Vec<T>,
    pub signal_variance: T,
    /// Shape parameter of the rational quadratic; ignored by other families.
    pub rq_shape: T,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn new(family: KernelFamily, lengthscales: Vec<T>, signal_variance: T, rq_shape: T) -> Result<Self> {
        let spec = Self { family, lengthscales, signal_variance, rq_shape };
        spec.validate()?;
        Ok(spec)
    }

    /// Tied lengthscale across `dim` inputs, unit RQ shape.
    pub fn isotropic(family: KernelFamily, dim: usize, lengthscale: T, signal_variance: T) -> Result<Self> {
        Self::new(family, vec![lengthscale; dim], signal_variance, T::one())
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(Error::invalid("kernel needs at least one lengthscale"));
        }
        if self.lengthscales.iter().any(|l| !(*l > T::zero()) || !l.is_finite()) {
            return Err(Error::invalid("lengthscales must be positive and finite"));
        }
        if !(self.signal_variance > T::zero()) || !self.signal_variance.is_finite() {
            return Err(Error::invalid("signal variance must be positive and finite"));
        }
        if self.family == KernelFamily::RationalQuadratic && !(self.rq_shape > T::zero()) {
            return Err(Error::invalid("rational quadratic shape must be positive"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// `Σ ((x_i − y_i) / l_i)²`. Symmetric bit-for-bit since `(a−b)² = (b−a)²` in IEEE arithmetic.
    #[inline]
    pub fn scaled_sq_dist(&self, x: &[T], x2: &[T]) -> T {
        x.iter()
            .zip(x2)
            .zip(&self.lengthscales)
            .fold(T::zero(), |acc, ((a, b), l)| {
                let d = (*a - *b) / *l;
                acc + d * d
            })
    }

    /// Kernel profile as a function of the scaled squared distance.
    #[inline]
    pub fn from_sq_dist(&self, r2: T) -> T {
        let sv = self.signal_variance;
        match self.family {
            KernelFamily::Matern12 => sv * (-r2.sqrt()).exp(),
            KernelFamily::Matern32 => {
                let s = T::lit(3.0).sqrt() * r2.sqrt();
                sv * (T::one() + s) * (-s).exp()
            }
            KernelFamily::Matern52 => {
                let s = T::lit(5.0).sqrt() * r2.sqrt();
                sv * (T::one() + s + T::lit(5.0 / 3.0) * r2) * (-s).exp()
            }
            KernelFamily::SquaredExponential => sv * (-T::lit(0.5) * r2).exp(),
            KernelFamily::RationalQuadratic => {
                let a = self.rq_shape;
                sv * (T::one() + r2 / (T::lit(2.0) * a)).powf(-a)
            }
        }
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[T], x2: &[T]) -> T {
        self.from_sq_dist(self.scaled_sq_dist(x, x2))
    }

    pub fn eval(&self, x: &[T], x2: &[T]) -> Result<T> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), x2.len())?;
        Ok(self.eval_unchecked(x, x2))
    }

    /// Cross-covariances `[k(xq, x_i)]`.
    pub fn cross(&self, xq: &[T], xs: &[Vec<T>]) -> Vec<T> {
        xs.iter().map(|xi| self.eval_unchecked(xq, xi)).collect()
    }

    /// Noise-free Gram matrix `[k(x_i, x_j)]`.
    pub fn gram_matrix(&self, xs: &[Vec<T>]) -> Result<Matrix<T>> {
        for x in xs {
            check_dim(self.dim(), x.len())?;
        }
        let n = xs.len();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.eval_unchecked(&xs[i], &xs[i]);
            for j in 0..i {
                let v = self.eval_unchecked(&xs[i], &xs[j]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    pub fn cast<U: Scalar>(&self) -> KernelSpec<U> {
        KernelSpec {
            family: self.family,
            lengthscales: self.lengthscales.iter().map(|v| U::lit(v.as_f64())).collect(),
            signal_variance: U::lit(self.signal_variance.as_f64()),
            rq_shape: U::lit(self.rq_shape.as_f64()),
        }
    }
}

/// `K + (noise + jitter)·I` together with its Cholesky factor.
#[derive(Clone, Debug)]
pub struct Gram<T> {
    pub matrix: Matrix<T>,
    pub chol: Cholesky<T>,
    /// Jitter actually used; may exceed the requested one after escalation.
    pub jitter: T,
}

/// Builds and factorizes the training covariance. Jitter escalates from
/// `1e-10·σ²` to `1e-4·σ²` when the requested jitter does not factorize.
pub fn kernel_gram<T: Scalar>(spec: &KernelSpec<T>, xs: &[Vec<T>], noise_variance: T, jitter: T) -> Result<Gram<T>> {
    if noise_variance < T::zero() || jitter < T::zero() {
        return Err(Error::invalid("noise variance and jitter must be non-negative"));
    }
    let mut k = spec.gram_matrix(xs)?;
    k.add_diagonal(noise_variance);
    let f = factor_with_jitter(&k, jitter, spec.signal_variance, "kernel_gram")?;
    k.add_diagonal(f.jitter);
    Ok(Gram { matrix: k, chol: f.chol, jitter: f.jitter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(family: KernelFamily) -> KernelSpec<f64> {
        KernelSpec::new(family, vec![0.7, 1.9], 1.3, 0.8).unwrap()
    }

    #[test]
    fn zero_distance_gives_signal_variance() {
        for f in KernelFamily::ALL {
            let s = spec(f);
            assert_eq!(s.eval(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.3);
        }
    }

    #[test]
    fn unit_distance_closed_forms() {
        let m52 = KernelSpec::<f64>::isotropic(KernelFamily::Matern52, 1, 1.0, 1.0).unwrap();
        // (1 + √5 + 5/3)·e^{−√5}, evaluated independently in extended precision.
        assert!((m52.eval(&[0.0], &[1.0]).unwrap() - 0.523_994_108_831_820_3).abs() < 1e-12);
        let se = KernelSpec::<f64>::isotropic(KernelFamily::SquaredExponential, 1, 1.0, 1.0).unwrap();
        assert!((se.eval(&[0.0], &[1.0]).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let s = spec(KernelFamily::Matern32);
        assert!(matches!(s.eval(&[0.0], &[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn invalid_hyperparameters() {
        assert!(KernelSpec::new(KernelFamily::Matern52, vec![0.0], 1.0, 1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Matern52, vec![1.0], -1.0, 1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::RationalQuadratic, vec![1.0], 1.0, 0.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Matern52, vec![1.0], 1.0, 0.0).is_ok());
    }

    #[test]
    fn gram_single_point() {
        let s = spec(KernelFamily::Matern52);
        let g = kernel_gram(&s, &[vec![0.1, 0.2]], 0.01, 1e-6).unwrap();
        assert!((g.matrix[(0, 0)] - (1.3 + 0.01 + 1e-6)).abs() < 1e-15);
    }

    #[test]
    fn gram_duplicate_points_need_escalation() {
        let s = KernelSpec::<f64>::isotropic(KernelFamily::SquaredExponential, 1, 1.0, 1.0).unwrap();
        let xs = vec![vec![0.4], vec![0.4]];
        let g = kernel_gram(&s, &xs, 0.0, 0.0).unwrap();
        assert!(g.jitter >= 1e-10 && g.jitter <= 1e-4);
        assert!(g.chol.reconstruct().max_abs_diff(&g.matrix) < 1e-12);
    }

    #[test]
    fn gram_matches_entrywise_kernel() {
        let s = KernelSpec::<f64>::isotropic(KernelFamily::Matern32, 1, 0.3, 2.0).unwrap();
        let xs = vec![vec![0.05], vec![0.4], vec![0.93]];
        let g = kernel_gram(&s, &xs, 0.0, 0.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((g.matrix[(i, j)] - s.eval(&xs[i], &xs[j]).unwrap()).abs() < 1e-12);
                assert!((g.matrix[(i, j)] - g.matrix[(j, i)]).abs() < 1e-12);
            }
        }
    }

    fn family() -> impl Strategy<Value = KernelFamily> {
        prop::sample::select(KernelFamily::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn symmetric_exactly(f in family(), a in prop::collection::vec(-5.0..5.0f64, 2), b in prop::collection::vec(-5.0..5.0f64, 2)) {
            let s = spec(f);
            prop_assert_eq!(s.eval(&a, &b).unwrap().to_bits(), s.eval(&b, &a).unwrap().to_bits());
        }

        #[test]
        fn stationary(f in family(), a in prop::collection::vec(-5.0..5.0f64, 2), b in prop::collection::vec(-5.0..5.0f64, 2), shift in prop::collection::vec(-3.0..3.0f64, 2)) {
            let s = spec(f);
            let a2: Vec<f64> = a.iter().zip(&shift).map(|(x, c)| x + c).collect();
            let b2: Vec<f64> = b.iter().zip(&shift).map(|(x, c)| x + c).collect();
            prop_assert!((s.eval(&a, &b).unwrap() - s.eval(&a2, &b2).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn bounded_by_signal_variance(f in family(), a in prop::collection::vec(-5.0..5.0f64, 2), b in prop::collection::vec(-5.0..5.0f64, 2)) {
            let v = spec(f).eval(&a, &b).unwrap();
            prop_assert!(v >= 0.0 && v <= 1.3);
        }

        #[test]
        fn strictly_decreasing_in_distance(f in family(), r in 0.01..6.0f64, dr in 0.01..1.0f64) {
            let s = KernelSpec::new(f, vec![1.0], 1.0, 0.8).unwrap();
            prop_assert!(s.from_sq_dist((r + dr) * (r + dr)) < s.from_sq_dist(r * r));
        }

        #[test]
        fn gram_is_positive_definite(f in family(), pts in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 2), 1..20)) {
            let s = spec(f);
            let mut k = s.gram_matrix(&pts).unwrap();
            k.add_diagonal(1e-10);
            let chol = Cholesky::new(&k);
            prop_assert!(chol.is_some());
            let chol = chol.unwrap();
            for i in 0..pts.len() {
                prop_assert!(chol.factor()[(i, i)] > 0.0);
            }
        }
    }
}
