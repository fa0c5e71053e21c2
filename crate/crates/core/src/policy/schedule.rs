use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Floor for the acquisition range in the GLIE denominator.
pub const EPSILON_C: f64 = 1e-9;

/// Inverse temperature source for the Boltzmann policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TemperatureSchedule<T> {
    Fixed(T),
    /// `β_t = ln t / C_t`, with `C_t` estimated on a grid of `grid_size` points.
    Glie { grid_size: usize },
}

impl<T: Scalar> TemperatureSchedule<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TemperatureSchedule::Fixed(b) if !(b > T::zero()) => {
                Err(Error::invalid("fixed inverse temperature must be positive"))
            }
            TemperatureSchedule::Glie { grid_size } if grid_size < 2 => {
                Err(Error::invalid("GLIE grid needs at least two points"))
            }
            _ => Ok(()),
        }
    }
}

impl<T: Scalar> Default for TemperatureSchedule<T> {
    fn default() -> Self {
        TemperatureSchedule::Glie { grid_size: 1024 }
    }
}

/// `ln t / max(C, ε)`. Zero at `t = 1`, which makes the policy uniform.
pub fn glie_beta<T: Scalar>(t: u64, c: T) -> T {
    if t <= 1 {
        return T::zero();
    }
    let t = T::from_u64(t).unwrap();
    t.ln() / c.max(T::lit(EPSILON_C))
}
