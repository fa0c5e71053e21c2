//! Sobol low-discrepancy sequence over `[0,1)^d` with Joe–Kuo direction numbers.
//!
//! Element 0 is the first point after the origin, i.e. `(0.5, 0.5, …)`, which
//! is what the node initialization table and all candidate grids start from.

use crate::error::{Error, Result};

const BITS: usize = 32;

/// `(degree s, coefficient a, initial m_1..m_s)` for dimensions 2 and up
/// (new-joe-kuo-6.21201).
const DIRECTIONS: &[(u32, u32, &[u32])] = &[
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
];

/// Largest supported dimension.
pub const MAX_DIM: usize = DIRECTIONS.len() + 1;

#[derive(Clone, Debug)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
}

impl Sobol {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::invalid(format!("sobol dimension {dim} outside 1..={MAX_DIM}")));
        }
        let mut directions = Vec::with_capacity(dim);
        let mut first = [0u32; BITS];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1 << (BITS - 1 - k);
        }
        directions.push(first);
        for &(s, a, m) in &DIRECTIONS[..dim - 1] {
            let s = s as usize;
            let mut v = [0u32; BITS];
            for k in 0..s {
                v[k] = m[k] << (BITS - 1 - k);
            }
            for k in s..BITS {
                let mut x = v[k - s] ^ (v[k - s] >> s);
                for j in 0..s - 1 {
                    if (a >> j) & 1 == 1 {
                        x ^= v[k - s + 1 + j];
                    }
                }
                v[k] = x;
            }
            directions.push(v);
        }
        Ok(Self { directions })
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// The `index`-th point of the sequence (origin excluded).
    pub fn point(&self, index: u64) -> Vec<f64> {
        let i = index + 1;
        assert!(i < (1u64 << BITS), "sobol index out of range");
        let gray = i ^ (i >> 1);
        self.directions
            .iter()
            .map(|v| {
                let mut x = 0u32;
                let mut g = gray;
                let mut bit = 0;
                while g != 0 {
                    if g & 1 == 1 {
                        x ^= v[bit];
                    }
                    g >>= 1;
                    bit += 1;
                }
                f64::from(x) / 4_294_967_296.0
            })
            .collect()
    }

    /// First `n` points.
    pub fn points(&self, n: usize) -> Vec<Vec<f64>> {
        (0..n as u64).map(|i| self.point(i)).collect()
    }

    /// First `n` points after a Cranley–Patterson rotation by `shift` (mod 1).
    /// Prefixes are nested: a longer grid always contains a shorter one.
    pub fn shifted_points(&self, n: usize, shift: &[f64]) -> Vec<Vec<f64>> {
        assert_eq!(shift.len(), self.dim());
        (0..n as u64)
            .map(|i| {
                self.point(i)
                    .into_iter()
                    .zip(shift)
                    .map(|(u, s)| {
                        let v = u + s;
                        if v >= 1.0 { v - 1.0 } else { v }
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leading_points() {
        let s = Sobol::new(2).unwrap();
        assert_eq!(s.point(0), vec![0.5, 0.5]);
        assert_eq!(s.point(1), vec![0.75, 0.25]);
        assert_eq!(s.point(2), vec![0.25, 0.75]);
        assert_eq!(s.point(3), vec![0.375, 0.375]);
    }

    #[test]
    fn first_dimension_is_van_der_corput() {
        let s = Sobol::new(1).unwrap();
        // Gray-code order permutes within each dyadic block.
        let mut block: Vec<f64> = (3..7).map(|i| s.point(i)[0]).collect();
        block.sort_by(f64::total_cmp);
        assert_eq!(block, vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn rejects_unsupported_dimensions() {
        assert!(Sobol::new(0).is_err());
        assert!(Sobol::new(MAX_DIM + 1).is_err());
        assert!(Sobol::new(MAX_DIM).is_ok());
    }

    #[test]
    fn shifted_points_stay_in_unit_cube() {
        let s = Sobol::new(3).unwrap();
        for p in s.shifted_points(200, &[0.9, 0.3, 0.999]) {
            assert!(p.iter().all(|&u| (0.0..1.0).contains(&u)));
        }
    }
}
