//! Montgomery multiplication specialized to moduli `q ≡ −1 (mod 2^16)`.
//!
//! With `R = 2^32` the reduction runs as two 16-bit word steps. For this
//! modulus family `−q^{-1} ≡ 1 (mod 2^16)`, so each step's quotient digit
//! is just the low 16 bits of the running value: no multiplier is needed
//! to form it.

use thiserror::Error;

use super::mod_mul;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MontgomeryError {
    #[error("modulus {0} is not congruent to -1 mod 2^16")]
    WrongCongruence(u64),
    #[error("modulus {0} does not fit a 32-bit word")]
    TooWide(u64),
}

const DIGIT_BITS: u32 = 16;
const DIGIT_MASK: u128 = (1 << DIGIT_BITS) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MontgomeryModulus {
    q: u64,
    /// R^2 mod q, for conversion into Montgomery form.
    r2: u64,
}

impl MontgomeryModulus {
    pub fn new(q: u64) -> Result<Self, MontgomeryError> {
        if !(3..1 << 32).contains(&q) {
            return Err(MontgomeryError::TooWide(q));
        }
        if q & 0xffff != 0xffff {
            return Err(MontgomeryError::WrongCongruence(q));
        }
        let r = (1u128 << 32) % q as u128;
        let r2 = ((r * r) % q as u128) as u64;
        Ok(Self { q, r2 })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    /// `t · 2^{-32} mod q` for `t < q · 2^32`.
    fn redc(&self, t: u128) -> u64 {
        let q = self.q as u128;
        let mut t = t;
        for _ in 0..2 {
            let m = t & DIGIT_MASK;
            t = (t + m * q) >> DIGIT_BITS;
        }
        // t < 2q after two steps
        let mut r = t as u64;
        while r >= self.q {
            r -= self.q;
        }
        r
    }

    pub fn to_mont(&self, a: u64) -> u64 {
        debug_assert!(a < self.q);
        self.redc(a as u128 * self.r2 as u128)
    }

    pub fn from_mont(&self, a: u64) -> u64 {
        self.redc(a as u128)
    }

    /// Product of two Montgomery-form values, in Montgomery form.
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        self.redc(a as u128 * b as u128)
    }

    /// Convenience: plain-domain product through the Montgomery path.
    pub fn mul_plain(&self, a: u64, b: u64) -> u64 {
        self.from_mont(self.mul(self.to_mont(a), self.to_mont(b)))
    }

    /// Reference result for cross-checking.
    pub fn mul_reference(&self, a: u64, b: u64) -> u64 {
        mod_mul(a, b, self.q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rns::is_prime;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn admissible() -> Vec<u64> {
        (1..=1u64 << 16)
            .rev()
            .map(|k| k * (1 << 16) - 1)
            .filter(|&q| q < 1 << 32 && is_prime(q))
            .take(4)
            .chain([131071])
            .collect()
    }

    #[test]
    fn rejects_ntt_style_prime() {
        assert_eq!(
            MontgomeryModulus::new(65537),
            Err(MontgomeryError::WrongCongruence(65537))
        );
        assert!(MontgomeryModulus::new(1 << 33).is_err());
    }

    #[test]
    fn zero_maps_to_zero() {
        let m = MontgomeryModulus::new(131071).unwrap();
        assert_eq!(m.mul_plain(0, 12345), 0);
        assert_eq!(m.from_mont(m.to_mont(0)), 0);
    }

    #[test]
    fn agrees_with_reference() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for q in admissible() {
            let m = MontgomeryModulus::new(q).unwrap();
            for _ in 0..20_000 {
                let a = rng.gen_range(0..q);
                let b = rng.gen_range(0..q);
                assert_eq!(m.mul_plain(a, b), m.mul_reference(a, b), "q={q} a={a} b={b}");
            }
            assert_eq!(m.mul_plain(q - 1, q - 1), 1);
        }
    }
}
