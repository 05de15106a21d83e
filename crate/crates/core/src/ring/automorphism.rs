//! Automorphisms `σ_k: a(x) → a(x^k)` for odd `k`.
//!
//! In the coefficient domain `σ_k` is a signed permutation; in the
//! evaluation domain it is a pure index permutation. Viewing the vector as
//! a `G×E` grid, the destination column of every element depends only on
//! its source column and the destination row is `(g·mult + w(col)) mod G`.
//! That is what lets the vectorized unit work in `E`-element chunks:
//! permute columns, transpose, permute rows, transpose back.

use super::transpose::{transpose_quadrant_swap, Matrix};
use super::{Domain, GridShape, ResidueVector, RingError};

fn check_k(k: u64, n: usize) -> Result<(), RingError> {
    if k.is_multiple_of(2) || k >= 2 * n as u64 {
        return Err(RingError::BadGaloisIndex(k));
    }
    Ok(())
}

/// `k^{-1} mod 2N`.
pub fn galois_inverse(k: u64, n: usize) -> u64 {
    crate::rns::mod_inv_general(k, 2 * n as u64).expect("odd k is a unit mod 2N")
}

pub fn automorphism_coeff(rv: &ResidueVector, k: u64) -> Result<ResidueVector, RingError> {
    if rv.domain() != Domain::Coefficient {
        return Err(RingError::WrongDomain {
            expected: Domain::Coefficient,
        });
    }
    let n = rv.len();
    check_k(k, n)?;
    let m = rv.modulus();
    let two_n = 2 * n as u64;
    let mut out = vec![0; n];
    for (i, &a) in rv.coeffs().iter().enumerate() {
        let ik = (i as u64 * k) % two_n;
        if ik < n as u64 {
            out[ik as usize] = a;
        } else {
            out[(ik - n as u64) as usize] = m.neg(a);
        }
    }
    Ok(rv.with_coeffs(out, Domain::Coefficient))
}

/// `map[j]` is the source index feeding output `j` of `σ_k` in the
/// evaluation domain: `2·map[j] + 1 ≡ k·(2j + 1) (mod 2N)`.
pub fn eval_index_map(n: usize, k: u64) -> Vec<usize> {
    let two_n = 2 * n as u64;
    (0..n as u64)
        .map(|j| (((k * (2 * j + 1)) % two_n - 1) / 2) as usize)
        .collect()
}

pub fn automorphism_eval(rv: &ResidueVector, k: u64) -> Result<ResidueVector, RingError> {
    if rv.domain() != Domain::Ntt {
        return Err(RingError::WrongDomain { expected: Domain::Ntt });
    }
    check_k(k, rv.len())?;
    let src = rv.coeffs();
    let out = eval_index_map(rv.len(), k).into_iter().map(|s| src[s]).collect();
    Ok(rv.with_coeffs(out, Domain::Ntt))
}

/// Column/row factorization of one automorphism on a `G×E` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AutomorphismPlan {
    pub shape: GridShape,
    pub domain: Domain,
    /// Destination column for each source column.
    pub col_dest: Vec<usize>,
    /// Row offset `w` indexed by destination column.
    pub row_offset: Vec<usize>,
    pub row_mult: usize,
    /// `k mod 2N` for the coefficient-domain sign rule.
    k: u64,
}

impl AutomorphismPlan {
    pub fn new(shape: GridShape, k: u64, domain: Domain) -> Result<Self, RingError> {
        let (g, e) = (shape.g(), shape.e());
        check_k(k, shape.n())?;
        let mut col_dest = vec![0; e];
        let mut row_offset = vec![0; e];
        let row_mult = match domain {
            Domain::Coefficient => {
                // (gE + e)k = E(gk + w) + c with c = ek mod E, w = ek div E
                for col in 0..e {
                    let ek = col as u64 * k;
                    let c = (ek % e as u64) as usize;
                    col_dest[col] = c;
                    row_offset[c] = (ek / e as u64) as usize;
                }
                k
            }
            Domain::Ntt => {
                // Forward map uses k' = k^{-1}: k'(2gE + 2e + 1)
                //   = 2E(gk' + w) + v, destination E·((gk'+w) mod G) + (v-1)/2
                let kp = galois_inverse(k, shape.n());
                for col in 0..e {
                    let t = kp * (2 * col as u64 + 1);
                    let v = t % (2 * e as u64);
                    let c = ((v - 1) / 2) as usize;
                    col_dest[col] = c;
                    row_offset[c] = (t / (2 * e as u64)) as usize;
                }
                kp
            }
        };
        Ok(Self {
            shape,
            domain,
            col_dest,
            row_offset,
            row_mult: (row_mult % (2 * g as u64)) as usize,
            k,
        })
    }

    /// Destination row for source row `g` and destination column `c`, and
    /// whether the coefficient flips sign.
    fn row_dest(&self, g: usize, c: usize) -> (usize, bool) {
        let big_g = self.shape.g();
        let raw = (g * self.row_mult + self.row_offset[c]) % (2 * big_g);
        let negate = self.domain == Domain::Coefficient && raw >= big_g;
        (raw % big_g, negate)
    }

    /// `k` this plan was built for.
    pub fn k(&self) -> u64 {
        self.k
    }
}

pub fn automorphism_vectorized(rv: &ResidueVector, k: u64, shape: GridShape) -> Result<ResidueVector, RingError> {
    if shape.n() != rv.len() {
        return Err(RingError::BadShape {
            g: shape.g(),
            e: shape.e(),
            n: rv.len(),
        });
    }
    let plan = AutomorphismPlan::new(shape, k, rv.domain())?;
    let (g, e) = (shape.g(), shape.e());
    let m = rv.modulus();

    // 1. same column permutation on every chunk
    let mut grid = vec![0u64; rv.len()];
    for (r, chunk) in rv.coeffs().chunks(e).enumerate() {
        for (col, &x) in chunk.iter().enumerate() {
            grid[r * e + plan.col_dest[col]] = x;
        }
    }
    // 2. G×E -> E×G
    let (t, _) = transpose_quadrant_swap(&Matrix::new(g, e, grid))?;
    // 3. one fixed permutation per transposed row
    let mut permuted = vec![0u64; rv.len()];
    for c in 0..e {
        let row = t.row(c);
        for (src_row, &x) in row.iter().enumerate() {
            let (dst_row, negate) = plan.row_dest(src_row, c);
            permuted[c * g + dst_row] = if negate { m.neg(x) } else { x };
        }
    }
    // 4. back to G×E
    let (out, _) = transpose_quadrant_swap(&Matrix::new(e, g, permuted))?;
    Ok(rv.with_coeffs(out.into_data(), rv.domain()))
}
