use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::space::Domain;
use crate::surrogate::{posterior_sample_at, GpModel};

/// Thompson baseline: minimizer of one joint posterior draw over a fresh
/// seeded grid.
pub fn thompson_select<T: Scalar>(model: &GpModel<T>, domain: &Domain<T>, grid_size: usize, seed: u64) -> Result<Vec<T>> {
    if grid_size == 0 {
        return Err(Error::invalid("Thompson grid must hold at least one point"));
    }
    let mut grid = domain.low_discrepancy_grid(grid_size, derive_seed(seed, &[0]))?;
    if grid.len() == 1 {
        return Ok(grid.pop().unwrap());
    }
    let draw = posterior_sample_at(model, &grid, derive_seed(seed, &[1]))?;
    let mut best = 0;
    for (i, v) in draw.iter().enumerate() {
        if *v < draw[best] {
            best = i;
        }
    }
    Ok(grid.swap_remove(best))
}
