use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;
use crate::sobol::Sobol;

/// Axis-aligned box `[lower_i, upper_i]` in R^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> Domain<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::invalid("domain must have at least one dimension"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::invalid("domain bounds must be finite with lower <= upper"));
        }
        Ok(Self { lower, upper })
    }

    /// `[0,1]^d`.
    pub fn unit(dim: usize) -> Self {
        Self { lower: vec![T::zero(); dim], upper: vec![T::one(); dim] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, i: usize) -> T {
        self.upper[i] - self.lower[i]
    }

    pub fn widths(&self) -> Vec<T> {
        (0..self.dim()).map(|i| self.width(i)).collect()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn check_point(&self, x: &[T]) -> Result<()> {
        check_dim(self.dim(), x.len())
    }

    /// Maps a point of the unit cube into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<T> {
        u.iter()
            .enumerate()
            .map(|(i, &ui)| self.lower[i] + T::lit(ui) * self.width(i))
            .collect()
    }

    pub fn clamp(&self, x: &mut [T]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.max(self.lower[i]).min(self.upper[i]);
        }
    }

    pub fn center(&self) -> Vec<T> {
        self.from_unit(&vec![0.5; self.dim()])
    }

    /// `n` Sobol points rotated by a seed-derived shift, scaled into the box.
    /// Grids drawn with the same seed are nested in `n`.
    pub fn low_discrepancy_grid(&self, n: usize, seed: u64) -> Result<Vec<Vec<T>>> {
        let sobol = Sobol::new(self.dim())?;
        let shift = unit_shift(self.dim(), seed);
        Ok(sobol.shifted_points(n, &shift).iter().map(|u| self.from_unit(u)).collect())
    }

    pub fn cast<U: Scalar>(&self) -> Domain<U> {
        Domain {
            lower: self.lower.iter().map(|v| U::lit(v.as_f64())).collect(),
            upper: self.upper.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Deterministic Cranley–Patterson shift in `[0,1)^d`.
pub fn unit_shift(dim: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = crate::rng::rng_from_seed(crate::rng::derive_seed(seed, &[0x5eed_5b1f]));
    (0..dim).map(|_| rng.random::<f64>()).collect()
}
