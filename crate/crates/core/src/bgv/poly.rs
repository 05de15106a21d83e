//! RNS polynomials: one residue vector per active modulus.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::ring::{intt_reference, ntt_reference, Domain, ResidueVector, RingError};
use crate::rns::PrimeModulus;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RnsPoly {
    residues: Vec<ResidueVector>,
}

impl RnsPoly {
    pub fn new(residues: Vec<ResidueVector>) -> Self {
        assert!(!residues.is_empty(), "RNS polynomial needs at least one residue");
        let (n, d) = (residues[0].len(), residues[0].domain());
        assert!(
            residues.iter().all(|r| r.len() == n && r.domain() == d),
            "residues must agree on length and domain"
        );
        Self { residues }
    }

    /// Same signed integer polynomial reduced into every modulus.
    pub fn from_signed(values: &[i64], moduli: &[PrimeModulus], domain: Domain) -> Self {
        Self::new(
            moduli
                .iter()
                .map(|m| ResidueVector::from_signed(values, *m, domain).expect("valid length"))
                .collect(),
        )
    }

    pub fn level(&self) -> usize {
        self.residues.len()
    }

    pub fn n(&self) -> usize {
        self.residues[0].len()
    }

    pub fn domain(&self) -> Domain {
        self.residues[0].domain()
    }

    pub fn residues(&self) -> &[ResidueVector] {
        &self.residues
    }

    pub fn residue(&self, i: usize) -> &ResidueVector {
        &self.residues[i]
    }

    pub fn into_residues(self) -> Vec<ResidueVector> {
        self.residues
    }

    fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(&ResidueVector, &ResidueVector) -> Result<ResidueVector, RingError>,
    ) -> Result<Self, RingError> {
        if self.level() != other.level() {
            return Err(RingError::Mismatch("level"));
        }
        let residues = self
            .residues
            .iter()
            .zip(&other.residues)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { residues })
    }

    pub fn add(&self, other: &Self) -> Result<Self, RingError> {
        self.zip_with(other, ResidueVector::add)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, RingError> {
        self.zip_with(other, ResidueVector::sub)
    }

    pub fn mul(&self, other: &Self) -> Result<Self, RingError> {
        self.zip_with(other, ResidueVector::pointwise_mul)
    }

    pub fn map(&self, f: impl Fn(&ResidueVector) -> Result<ResidueVector, RingError>) -> Result<Self, RingError> {
        Ok(Self {
            residues: self.residues.iter().map(f).collect::<Result<Vec<_>, _>>()?,
        })
    }

    pub fn ntt(&self) -> Result<Self, RingError> {
        self.map(ntt_reference)
    }

    pub fn intt(&self) -> Result<Self, RingError> {
        self.map(intt_reference)
    }

    /// Drops residues beyond `level`.
    pub fn truncate(&self, level: usize) -> Self {
        Self {
            residues: self.residues[..level].to_vec(),
        }
    }

    /// Centered integer coefficients via CRT. Coefficient domain only.
    pub fn crt_lift(&self) -> Vec<BigInt> {
        assert_eq!(self.domain(), Domain::Coefficient, "CRT lift needs coefficients");
        let moduli: Vec<u64> = self.residues.iter().map(|r| r.q()).collect();
        let crt = Crt::new(&moduli);
        (0..self.n())
            .map(|k| {
                let res: Vec<u64> = self.residues.iter().map(|r| r.coeffs()[k]).collect();
                crt.lift_centered(&res)
            })
            .collect()
    }
}

/// Chinese-remainder reconstruction over a fixed basis. Wide integers are
/// confined to this type.
pub(crate) struct Crt {
    q: BigUint,
    half_q: BigUint,
    /// (Q/q_i) · [(Q/q_i)^{-1} mod q_i]
    basis: Vec<BigUint>,
    moduli: Vec<u64>,
}

impl Crt {
    pub(crate) fn new(moduli: &[u64]) -> Self {
        let q: BigUint = moduli.iter().fold(BigUint::one(), |acc, &m| acc * m);
        let basis = moduli
            .iter()
            .map(|&m| {
                let qi = &q / m;
                let r = (&qi % m).to_u64_digits().first().copied().unwrap_or(0);
                let inv = crate::rns::mod_inv(r, m);
                (qi * inv) % &q
            })
            .collect();
        Self {
            half_q: &q >> 1u32,
            q,
            basis,
            moduli: moduli.to_vec(),
        }
    }

    pub(crate) fn lift_centered(&self, residues: &[u64]) -> BigInt {
        debug_assert_eq!(residues.len(), self.moduli.len());
        let mut x = BigUint::zero();
        for (r, b) in residues.iter().zip(&self.basis) {
            x += b * *r;
        }
        x %= &self.q;
        if x > self.half_q {
            BigInt::from(x) - BigInt::from(self.q.clone())
        } else {
            BigInt::from(x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rns::generate_moduli;

    #[test]
    fn crt_round_trip() {
        let basis = generate_moduli(16, 3, 20, 2).unwrap();
        let values: Vec<i64> = (0..16).map(|i| (i * i * 1_000_003 - 77_777_777) as i64).collect();
        let p = RnsPoly::from_signed(&values, basis.moduli(), Domain::Coefficient);
        let lifted = p.crt_lift();
        for (v, l) in values.iter().zip(lifted) {
            assert_eq!(BigInt::from(*v), l);
        }
    }

    #[test]
    fn level_mismatch() {
        let basis = generate_moduli(16, 2, 20, 2).unwrap();
        let a = RnsPoly::from_signed(&[0; 16], basis.moduli(), Domain::Ntt);
        let b = a.truncate(1);
        assert!(a.add(&b).is_err());
    }
}
