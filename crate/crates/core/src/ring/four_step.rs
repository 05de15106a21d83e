//! Four-step negacyclic NTT over a `G×E` grid.
//!
//! Both directions run the same pipeline: an `E`-point transform on every
//! `E`-element chunk, an element-wise twiddle multiply, a transpose, and a
//! `G`-point transform on every transposed row. The first stage is
//! decimation-in-time and the second decimation-in-frequency; the direction
//! only changes table contents.
//!
//! Forward, with chunk `g` holding `a[e·G + g]`:
//!   stage 1: `Y[g][k] = Σ_e a[eG+g] ψ_E^{(2k+1)e}` (negacyclic, the `ψ_E^e`
//!            pre-factors live in the stage-1 table)
//!   grid:    `Y[g][k] *= ψ^{(2k+1)g}` (carries stage 2's negacyclic
//!            pre-multiplication)
//!   stage 2: cyclic `G`-point over `g`, giving `X[k + E·k_g]`.
//!
//! Inverse, with chunk `h` holding `X[k·G + h]`:
//!   stage 1: cyclic inverse `E`-point over `k`
//!   grid:    `W[h][e] *= ψ^{-(2h+1)e}`
//!   stage 2: cyclic inverse `G`-point over `h`, then the post factors
//!            `N^{-1} ψ^{-E·g}`, giving `a[e + E·g]`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::ntt::{cyclic_dif, cyclic_dit};
use super::transpose::{transpose_quadrant_swap, Matrix};
use super::{Domain, GridShape, ResidueVector, RingError};
use crate::rns::PrimeModulus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Twiddle SRAM contents for one `(q, N, E, direction)`.
#[derive(Debug, PartialEq, Eq)]
pub struct FourStepTables {
    pub shape: GridShape,
    pub direction: Direction,
    /// Multiplied into each chunk before stage 1 (forward only; ones otherwise).
    pub stage1_pre: Vec<u64>,
    /// Powers of the `E`-point root, `E/2` entries.
    pub stage1_roots: Vec<u64>,
    /// Row-major `G×E` inter-stage grid.
    pub grid: Vec<u64>,
    /// Powers of the `G`-point root, `G/2` entries.
    pub stage2_roots: Vec<u64>,
    /// Multiplied after stage 2, indexed by output column `g` (inverse only).
    pub stage2_post: Vec<u64>,
}

fn powers(m: &PrimeModulus, base: u64, count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut x = 1;
    for _ in 0..count {
        out.push(x);
        x = m.mul(x, base);
    }
    out
}

impl FourStepTables {
    pub fn build(m: &PrimeModulus, shape: GridShape, direction: Direction) -> Self {
        let (g, e, n) = (shape.g(), shape.e(), shape.n());
        let psi = m.psi_for(n);
        let psi = match direction {
            Direction::Forward => psi,
            Direction::Inverse => m.inv(psi),
        };
        let omega_e = m.pow(psi, 2 * g as u64);
        let omega_g = m.pow(psi, 2 * e as u64);
        let mut grid = Vec::with_capacity(n);
        for row in 0..g {
            for col in 0..e {
                let exp = match direction {
                    Direction::Forward => (2 * col as u64 + 1) * row as u64,
                    Direction::Inverse => (2 * row as u64 + 1) * col as u64,
                };
                grid.push(m.pow(psi, exp));
            }
        }
        let (stage1_pre, stage2_post) = match direction {
            Direction::Forward => (powers(m, m.pow(psi, g as u64), e), vec![1; g]),
            Direction::Inverse => {
                let n_inv = m.inv(n as u64 % m.q());
                let post = powers(m, m.pow(psi, e as u64), g)
                    .into_iter()
                    .map(|x| m.mul(x, n_inv))
                    .collect();
                (vec![1; e], post)
            }
        };
        Self {
            shape,
            direction,
            stage1_pre,
            stage1_roots: powers(m, omega_e, e / 2),
            grid,
            stage2_roots: powers(m, omega_g, g / 2),
            stage2_post,
        }
    }

    pub fn get(m: &PrimeModulus, shape: GridShape, direction: Direction) -> Arc<Self> {
        type Key = (u64, u64, usize, usize, Direction);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<FourStepTables>>>> = OnceLock::new();
        let key = (m.q(), m.psi(), shape.g(), shape.e(), direction);
        let cache = CACHE.get_or_init(Default::default);
        if let Some(t) = cache.lock().expect("twiddle cache poisoned").get(&key) {
            return Arc::clone(t);
        }
        let built = Arc::new(Self::build(m, shape, direction));
        cache
            .lock()
            .expect("twiddle cache poisoned")
            .entry(key)
            .or_insert(built)
            .clone()
    }
}

fn transpose(mat: Matrix<u64>) -> Matrix<u64> {
    transpose_quadrant_swap(&mat).expect("power-of-two grid").0
}

pub fn ntt_four_step(rv: &ResidueVector, shape: GridShape, dir: Direction) -> Result<ResidueVector, RingError> {
    let expected = match dir {
        Direction::Forward => Domain::Coefficient,
        Direction::Inverse => Domain::Ntt,
    };
    if rv.domain() != expected {
        return Err(RingError::WrongDomain { expected });
    }
    if shape.n() != rv.len() {
        return Err(RingError::BadShape {
            g: shape.g(),
            e: shape.e(),
            n: rv.len(),
        });
    }
    if rv.len() > rv.modulus().n_max() {
        return Err(RingError::TooLong {
            n: rv.len(),
            n_max: rv.modulus().n_max(),
        });
    }
    let m = rv.modulus();
    let (g, e) = (shape.g(), shape.e());
    let t = FourStepTables::get(m, shape, dir);

    // Natural order viewed as E×G; its transpose puts stride-G elements in
    // each E-lane chunk.
    let mut chunks = transpose(Matrix::new(e, g, rv.coeffs().to_vec()));
    for r in 0..g {
        let row = chunks.row_mut(r);
        for (x, &p) in row.iter_mut().zip(&t.stage1_pre) {
            *x = m.mul(*x, p);
        }
        cyclic_dit(row, &t.stage1_roots, 1, m);
        for (x, &w) in row.iter_mut().zip(&t.grid[r * e..(r + 1) * e]) {
            *x = m.mul(*x, w);
        }
    }
    let mut cols = transpose(chunks);
    for r in 0..e {
        let row = cols.row_mut(r);
        cyclic_dif(row, &t.stage2_roots, 1, m);
        for (x, &p) in row.iter_mut().zip(&t.stage2_post) {
            *x = m.mul(*x, p);
        }
    }
    // Row r, column c holds index r + E·c.
    let out = transpose(cols).into_data();
    let domain = match dir {
        Direction::Forward => Domain::Ntt,
        Direction::Inverse => Domain::Coefficient,
    };
    Ok(rv.with_coeffs(out, domain))
}

/// `(multipliers per E-point NTT, multipliers in the whole unit)`: two
/// butterfly networks plus the twiddle multiplier row.
pub fn ntt_unit_multiplier_count(e: usize) -> (usize, usize) {
    assert!(e.is_power_of_two() && e >= 4, "lane count must be a power of two >= 4");
    let per = e * (e.trailing_zeros() as usize - 1) / 2;
    (per, 2 * per + e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{intt_reference, ntt_reference};
    use crate::rns::generate_moduli;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random(n: usize, m: PrimeModulus, seed: u64) -> ResidueVector {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let c = (0..n).map(|_| rng.gen_range(0..m.q())).collect();
        ResidueVector::new(c, m, Domain::Coefficient).unwrap()
    }

    #[test]
    fn n16_e4_matches_reference() {
        let m = *generate_moduli(16, 1, 20, 5).unwrap().modulus(0);
        let a = random(16, m, 1);
        let shape = GridShape::new(4, 4).unwrap();
        let f = ntt_four_step(&a, shape, Direction::Forward).unwrap();
        assert_eq!(f, ntt_reference(&a).unwrap());
        assert_eq!(ntt_four_step(&f, shape, Direction::Inverse).unwrap(), a);
    }

    #[test]
    fn all_small_shapes() {
        for log_n in 2..=10 {
            let n = 1usize << log_n;
            let m = *generate_moduli(n, 1, 26, log_n).unwrap().modulus(0);
            let a = random(n, m, log_n);
            let fa = ntt_reference(&a).unwrap();
            let mut e = 2;
            while e <= n {
                if let Ok(shape) = GridShape::for_length(n, e) {
                    assert_eq!(ntt_four_step(&a, shape, Direction::Forward).unwrap(), fa, "n={n} e={e}");
                    assert_eq!(
                        ntt_four_step(&fa, shape, Direction::Inverse).unwrap(),
                        intt_reference(&fa).unwrap()
                    );
                }
                e *= 2;
            }
        }
    }

    #[test]
    fn zero_stays_zero() {
        let m = *generate_moduli(64, 1, 20, 0).unwrap().modulus(0);
        let z = ResidueVector::zero(64, m, Domain::Coefficient);
        let shape = GridShape::new(8, 8).unwrap();
        assert_eq!(ntt_four_step(&z, shape, Direction::Forward).unwrap().coeffs(), &[0; 64]);
    }

    #[test]
    fn rejects_bad_shape() {
        let m = *generate_moduli(64, 1, 20, 0).unwrap().modulus(0);
        let z = ResidueVector::zero(64, m, Domain::Coefficient);
        let shape = GridShape::new(4, 4).unwrap();
        assert!(ntt_four_step(&z, shape, Direction::Forward).is_err());
        assert!(ntt_four_step(&z, GridShape::new(8, 8).unwrap(), Direction::Inverse).is_err());
    }

    #[test]
    fn multiplier_counts() {
        assert_eq!(ntt_unit_multiplier_count(128), (384, 896));
        assert_eq!(ntt_unit_multiplier_count(4), (2, 8));
        assert_eq!(ntt_unit_multiplier_count(8), (8, 24));
    }

    #[test]
    fn tables_rebuild_identically() {
        let m = *generate_moduli(256, 1, 24, 2).unwrap().modulus(0);
        let s = GridShape::new(16, 16).unwrap();
        for d in [Direction::Forward, Direction::Inverse] {
            assert_eq!(FourStepTables::build(&m, s, d), FourStepTables::build(&m, s, d));
        }
    }
}
