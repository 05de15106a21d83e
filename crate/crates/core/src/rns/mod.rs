//! Residue-number-system arithmetic: NTT-friendly prime generation, scalar
//! modular operations and the restricted-modulus multiplier.
//!
//! Every residue is kept canonical in `[0, q)`. Moduli are word sized
//! (at most 32 bits) so products always fit a `u64` intermediate.

mod montgomery;

pub use montgomery::{MontgomeryError, MontgomeryModulus};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RnsError {
    #[error("ring dimension {0} is not a power of two >= 2")]
    BadDimension(usize),
    #[error("bit width {bits} too small for ring dimension {n} (need >= {min})")]
    WidthTooSmall { bits: u32, n: usize, min: u32 },
    #[error("bit width {0} exceeds the 32-bit word")]
    WidthTooLarge(u32),
    #[error("only {found} of {wanted} primes q = 1 mod {step} exist at {bits} bits")]
    NotEnoughPrimes {
        wanted: usize,
        found: usize,
        step: u64,
        bits: u32,
    },
    #[error("{q} is not an NTT-friendly prime for n = {n}")]
    NotNttFriendly { q: u64, n: usize },
    #[error("root {psi} is not a primitive {order}-th root of unity mod {q}")]
    BadRoot { psi: u64, order: usize, q: u64 },
}

#[inline]
pub fn mod_add(a: u64, b: u64, q: u64) -> u64 {
    debug_assert!(a < q && b < q);
    let s = a + b;
    if s >= q {
        s - q
    } else {
        s
    }
}

#[inline]
pub fn mod_sub(a: u64, b: u64, q: u64) -> u64 {
    debug_assert!(a < q && b < q);
    if a >= b {
        a - b
    } else {
        a + q - b
    }
}

#[inline]
pub fn mod_neg(a: u64, q: u64) -> u64 {
    debug_assert!(a < q);
    if a == 0 {
        0
    } else {
        q - a
    }
}

/// Double-width multiply then reduce. This is the reference every faster
/// multiplier is checked against.
#[inline]
pub fn mod_mul(a: u64, b: u64, q: u64) -> u64 {
    debug_assert!(a < q && b < q);
    ((a as u128 * b as u128) % q as u128) as u64
}

pub fn mod_pow(mut base: u64, mut exp: u64, q: u64) -> u64 {
    let mut acc = 1 % q;
    base %= q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mod_mul(acc, base, q);
        }
        base = mod_mul(base, base, q);
        exp >>= 1;
    }
    acc
}

/// Inverse by Fermat's little theorem; `q` must be prime and `a != 0`.
pub fn mod_inv(a: u64, q: u64) -> u64 {
    debug_assert!(!a.is_multiple_of(q));
    mod_pow(a, q - 2, q)
}

/// Inverse modulo an arbitrary modulus via extended Euclid.
pub fn mod_inv_general(a: u64, m: u64) -> Option<u64> {
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let qt = old_r / r;
        (old_r, r) = (r, old_r - qt * r);
        (old_s, s) = (s, old_s - qt * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

/// Deterministic Miller-Rabin for every `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in SMALL {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in SMALL {
        let mut x = mod_pow(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mod_mul(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// One NTT-friendly prime together with its root of unity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrimeModulus {
    q: u64,
    n_max: usize,
    psi: u64,
    psi_inv: u64,
    n_inv: u64,
}

impl PrimeModulus {
    /// Builds a modulus for rings up to `n_max`, searching for the smallest
    /// generator-derived primitive `2·n_max`-th root.
    pub fn new(q: u64, n_max: usize) -> Result<Self, RnsError> {
        check_dimension(n_max)?;
        let two_n = 2 * n_max as u64;
        if q >= 1 << 32 || !is_prime(q) || !(q - 1).is_multiple_of(two_n) {
            return Err(RnsError::NotNttFriendly { q, n: n_max });
        }
        let exp = (q - 1) / two_n;
        let psi = (2..q)
            .map(|g| mod_pow(g, exp, q))
            .find(|&x| mod_pow(x, n_max as u64, q) == q - 1)
            .expect("a primitive root exists for prime q");
        Self::with_root(q, n_max, psi)
    }

    /// Builds a modulus from a known root, verifying it.
    pub fn with_root(q: u64, n_max: usize, psi: u64) -> Result<Self, RnsError> {
        check_dimension(n_max)?;
        let two_n = 2 * n_max as u64;
        if q >= 1 << 32 || !is_prime(q) || !(q - 1).is_multiple_of(two_n) {
            return Err(RnsError::NotNttFriendly { q, n: n_max });
        }
        // psi^n = -1 implies psi^(2n) = 1 and, with n a power of two, that
        // the order is exactly 2n.
        if psi == 0 || psi >= q || mod_pow(psi, n_max as u64, q) != q - 1 {
            return Err(RnsError::BadRoot {
                psi,
                order: 2 * n_max,
                q,
            });
        }
        Ok(Self {
            q,
            n_max,
            psi,
            psi_inv: mod_inv(psi, q),
            n_inv: mod_inv(n_max as u64 % q, q),
        })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Primitive `2·n_max`-th root of unity.
    pub fn psi(&self) -> u64 {
        self.psi
    }

    pub fn psi_inv(&self) -> u64 {
        self.psi_inv
    }

    /// `n_max^{-1} mod q`.
    pub fn n_inv(&self) -> u64 {
        self.n_inv
    }

    /// Primitive `2n`-th root for a ring of dimension `n` dividing `n_max`.
    pub fn psi_for(&self, n: usize) -> u64 {
        assert!(n.is_power_of_two() && n <= self.n_max, "unsupported n={n}");
        mod_pow(self.psi, (self.n_max / n) as u64, self.q)
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        mod_add(a, b, self.q)
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        mod_sub(a, b, self.q)
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        mod_mul(a, b, self.q)
    }

    pub fn neg(&self, a: u64) -> u64 {
        mod_neg(a, self.q)
    }

    pub fn pow(&self, a: u64, e: u64) -> u64 {
        mod_pow(a, e, self.q)
    }

    pub fn inv(&self, a: u64) -> u64 {
        mod_inv(a, self.q)
    }

    /// Reduces a signed integer into `[0, q)`.
    pub fn reduce_i64(&self, x: i64) -> u64 {
        x.rem_euclid(self.q as i64) as u64
    }

    /// Centered representative in `(-q/2, q/2]`.
    pub fn center(&self, x: u64) -> i64 {
        if x > self.q / 2 {
            x as i64 - self.q as i64
        } else {
            x as i64
        }
    }
}

fn check_dimension(n: usize) -> Result<(), RnsError> {
    if n < 2 || !n.is_power_of_two() {
        return Err(RnsError::BadDimension(n));
    }
    Ok(())
}

/// Ordered list of distinct primes; `Q` is their product, never
/// materialized outside the CRT cold path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RnsBasis {
    moduli: Vec<PrimeModulus>,
    word_bits: u32,
}

impl RnsBasis {
    pub fn new(moduli: Vec<PrimeModulus>) -> Self {
        let mut seen = std::collections::HashSet::new();
        assert!(moduli.iter().all(|m| seen.insert(m.q())), "RNS moduli must be distinct");
        Self { moduli, word_bits: 32 }
    }

    /// Rebuilds a basis from serialized `(q, psi)` pairs.
    pub fn from_pairs(pairs: &[(u64, u64)], n_max: usize) -> Result<Self, RnsError> {
        let moduli = pairs
            .iter()
            .map(|&(q, psi)| PrimeModulus::with_root(q, n_max, psi))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(moduli))
    }

    pub fn pairs(&self) -> Vec<(u64, u64)> {
        self.moduli.iter().map(|m| (m.q(), m.psi())).collect()
    }

    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    pub fn word_bits(&self) -> u32 {
        self.word_bits
    }

    pub fn moduli(&self) -> &[PrimeModulus] {
        &self.moduli
    }

    pub fn modulus(&self, i: usize) -> &PrimeModulus {
        &self.moduli[i]
    }

    /// First `level` moduli.
    pub fn prefix(&self, level: usize) -> &[PrimeModulus] {
        &self.moduli[..level]
    }
}

/// Samples `l` distinct primes `q ≡ 1 (mod 2n)` of exactly `bits` bits.
pub fn generate_moduli(n: usize, l: usize, bits: u32, seed: u64) -> Result<RnsBasis, RnsError> {
    generate_moduli_with(n, l, bits, 1, seed)
}

/// Like [`generate_moduli`] but additionally requires `q ≡ 1 (mod extra)`.
///
/// Candidates are `c·step + 1` with `step = lcm(2n, extra)`; the walk over
/// `c` starts at a seeded random offset and wraps around, so the result is
/// deterministic and exhaustion is detected exactly.
pub fn generate_moduli_with(n: usize, l: usize, bits: u32, extra: u64, seed: u64) -> Result<RnsBasis, RnsError> {
    check_dimension(n)?;
    let min_bits = (2 * n as u64).trailing_zeros() + 1;
    if bits < min_bits {
        return Err(RnsError::WidthTooSmall { bits, n, min: min_bits });
    }
    if bits > 32 {
        return Err(RnsError::WidthTooLarge(bits));
    }
    let two_n = 2 * n as u64;
    let step = two_n / num_integer::gcd(two_n, extra.max(1)) * extra.max(1);
    let lo = 1u64 << (bits - 1);
    let hi = (1u64 << bits) - 1;
    // c ranges over all values with lo <= c*step + 1 <= hi.
    let c_min = lo.saturating_sub(1).div_ceil(step).max(1);
    let c_max = (hi - 1) / step;
    let span = if c_max >= c_min { c_max - c_min + 1 } else { 0 };

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut found = Vec::with_capacity(l);
    if span > 0 {
        let start = rng.gen_range(0..span);
        for off in 0..span {
            let c = c_min + (start + off) % span;
            let q = c * step + 1;
            if is_prime(q) {
                found.push(q);
                if found.len() == l {
                    break;
                }
            }
        }
    }
    if found.len() < l {
        return Err(RnsError::NotEnoughPrimes {
            wanted: l,
            found: found.len(),
            step,
            bits,
        });
    }
    let moduli = found
        .into_iter()
        .map(|q| PrimeModulus::new(q, n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RnsBasis::new(moduli))
}

/// Residue class of the restricted modulus family `q ≡ ±1 (mod 2^16)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Congruence {
    MinusOne,
    PlusOne,
}

/// Number of primes `q < 2^word_bits` with `q ≡ −1 (mod 2^16)`, found by
/// testing every candidate `k·2^16 − 1`.
pub fn count_restricted_moduli(word_bits: u32) -> usize {
    count_restricted_moduli_in(word_bits, Congruence::MinusOne)
}

pub fn count_restricted_moduli_in(word_bits: u32, class: Congruence) -> usize {
    assert!((17..=63).contains(&word_bits), "word_bits out of range");
    let step = 1u64 << 16;
    let bound = 1u64 << word_bits;
    (1..=bound / step)
        .map(|k| match class {
            Congruence::MinusOne => k * step - 1,
            Congruence::PlusOne => k * step + 1,
        })
        .filter(|&q| q < bound && is_prime(q))
        .count()
}
