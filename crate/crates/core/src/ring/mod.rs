//! Residue polynomials in `Z_q[x]/(x^N + 1)` and the vector primitives the
//! accelerator implements on them.

mod automorphism;
mod four_step;
mod ntt;
mod transpose;

pub use automorphism::{
    automorphism_coeff, automorphism_eval, automorphism_vectorized, eval_index_map, galois_inverse, AutomorphismPlan,
};
pub use four_step::{ntt_four_step, ntt_unit_multiplier_count, Direction, FourStepTables};
pub use ntt::{intt_reference, ntt_reference, NttTables};
pub use transpose::{transpose_quadrant_swap, Matrix, TransposeTiming};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rns::PrimeModulus;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RingError {
    #[error("length {0} is not a power of two >= 2")]
    BadLength(usize),
    #[error("length {n} exceeds modulus capacity {n_max}")]
    TooLong { n: usize, n_max: usize },
    #[error("operands disagree on {0}")]
    Mismatch(&'static str),
    #[error("expected {expected:?}-domain input")]
    WrongDomain { expected: Domain },
    #[error("automorphism index {0} must be odd and below 2N")]
    BadGaloisIndex(u64),
    #[error("grid {g}x{e} does not tile N={n} with g <= e, both powers of two")]
    BadShape { g: usize, e: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    Coefficient,
    Ntt,
}

/// `N` residues modulo one RNS prime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidueVector {
    coeffs: Vec<u64>,
    modulus: PrimeModulus,
    domain: Domain,
}

impl ResidueVector {
    pub fn new(coeffs: Vec<u64>, modulus: PrimeModulus, domain: Domain) -> Result<Self, RingError> {
        let n = coeffs.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(RingError::BadLength(n));
        }
        if n > modulus.n_max() {
            return Err(RingError::TooLong {
                n,
                n_max: modulus.n_max(),
            });
        }
        assert!(coeffs.iter().all(|&c| c < modulus.q()), "residues must be reduced");
        Ok(Self {
            coeffs,
            modulus,
            domain,
        })
    }

    pub fn zero(n: usize, modulus: PrimeModulus, domain: Domain) -> Self {
        Self::new(vec![0; n], modulus, domain).expect("valid length")
    }

    /// Reduces signed coefficients into this modulus.
    pub fn from_signed(values: &[i64], modulus: PrimeModulus, domain: Domain) -> Result<Self, RingError> {
        let coeffs = values.iter().map(|&v| modulus.reduce_i64(v)).collect();
        Self::new(coeffs, modulus, domain)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<u64> {
        self.coeffs
    }

    pub fn modulus(&self) -> &PrimeModulus {
        &self.modulus
    }

    pub fn q(&self) -> u64 {
        self.modulus.q()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub(crate) fn with_coeffs(&self, coeffs: Vec<u64>, domain: Domain) -> Self {
        debug_assert_eq!(coeffs.len(), self.coeffs.len());
        Self {
            coeffs,
            modulus: self.modulus,
            domain,
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<(), RingError> {
        if self.len() != other.len() {
            return Err(RingError::Mismatch("length"));
        }
        if self.modulus != other.modulus {
            return Err(RingError::Mismatch("modulus"));
        }
        if self.domain != other.domain {
            return Err(RingError::Mismatch("domain"));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, RingError> {
        self.check_compatible(other)?;
        let m = self.modulus;
        Ok(self.with_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| m.add(a, b))
                .collect(),
            self.domain,
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, RingError> {
        self.check_compatible(other)?;
        let m = self.modulus;
        Ok(self.with_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| m.sub(a, b))
                .collect(),
            self.domain,
        ))
    }

    /// Element-wise product. In the NTT domain this is polynomial
    /// multiplication.
    pub fn pointwise_mul(&self, other: &Self) -> Result<Self, RingError> {
        self.check_compatible(other)?;
        let m = self.modulus;
        Ok(self.with_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| m.mul(a, b))
                .collect(),
            self.domain,
        ))
    }

    pub fn scalar_mul(&self, s: u64) -> Self {
        let m = self.modulus;
        let s = s % m.q();
        self.with_coeffs(self.coeffs.iter().map(|&a| m.mul(a, s)).collect(), self.domain)
    }

    pub fn neg(&self) -> Self {
        let m = self.modulus;
        self.with_coeffs(self.coeffs.iter().map(|&a| m.neg(a)).collect(), self.domain)
    }

    /// Centered lift of every coefficient, reduced into `target`.
    /// Keeps the domain tag; only meaningful for coefficient-domain data.
    pub fn lift_to(&self, target: PrimeModulus) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .map(|&c| target.reduce_i64(self.modulus.center(c)))
            .collect();
        Self {
            coeffs,
            modulus: target,
            domain: self.domain,
        }
    }
}

/// Schoolbook product modulo `x^N + 1`; `O(N^2)`, used as an oracle.
pub fn negacyclic_mul_reference(a: &ResidueVector, b: &ResidueVector) -> Result<ResidueVector, RingError> {
    a.check_compatible(b)?;
    if a.domain != Domain::Coefficient {
        return Err(RingError::WrongDomain {
            expected: Domain::Coefficient,
        });
    }
    let n = a.len();
    let m = a.modulus;
    let mut out = vec![0u64; n];
    for (i, &ai) in a.coeffs.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.coeffs.iter().enumerate() {
            let p = m.mul(ai, bj);
            let k = i + j;
            if k < n {
                out[k] = m.add(out[k], p);
            } else {
                out[k - n] = m.sub(out[k - n], p);
            }
        }
    }
    Ok(a.with_coeffs(out, Domain::Coefficient))
}

/// `N = g·e` viewed as `g` chunks of `e` lanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    g: usize,
    e: usize,
}

impl GridShape {
    pub fn new(g: usize, e: usize) -> Result<Self, RingError> {
        let ok = g.is_power_of_two() && e.is_power_of_two() && g <= e && e >= 2;
        if !ok {
            return Err(RingError::BadShape { g, e, n: g * e });
        }
        Ok(Self { g, e })
    }

    /// Shape for a length-`n` vector on `e` lanes.
    pub fn for_length(n: usize, e: usize) -> Result<Self, RingError> {
        if e == 0 || !n.is_multiple_of(e) {
            return Err(RingError::BadShape { g: 0, e, n });
        }
        Self::new(n / e, e)
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn e(&self) -> usize {
        self.e
    }

    pub fn n(&self) -> usize {
        self.g * self.e
    }
}
