//! BGV over the RNS/NTT substrate.
//!
//! A ciphertext is `(a, b = a·s + t·e + m)` and decrypts as `b − a·s`.
//! Both polynomials live in the NTT domain between operations.

mod keyswitch;
mod poly;

pub use keyswitch::{
    hint_bytes, keyswitch, keyswitch_counted, keyswitch_hintgen, HintTarget, KeySwitchHint, KeySwitchOutput, KsOpCounts,
};
pub use poly::RnsPoly;

use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ring::{automorphism_eval, intt_reference, ntt_reference, Domain, ResidueVector, RingError};
use crate::rns::{generate_moduli_with, mod_inv, PrimeModulus, RnsBasis, RnsError};

pub const DEFAULT_T: u64 = 257;
pub const DEFAULT_STDDEV: f64 = 3.2;
/// `N / log2 Q` below this draws a warning (16K over 512 bits).
pub const SECURITY_RATIO: f64 = 32.0;

#[derive(Debug, Error, PartialEq)]
pub enum BgvError {
    #[error(transparent)]
    Rns(#[from] RnsError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("level {level} outside 1..={max}")]
    BadLevel { level: usize, max: usize },
    #[error("level mismatch: {0} vs {1}")]
    LevelMismatch(usize, usize),
    #[error("plaintext modulus {t} not compatible with q = {q}")]
    BadPlaintextModulus { t: u64, q: u64 },
    #[error("plaintext coefficient {0} out of range")]
    BadPlaintext(u64),
    #[error("hint is for {found:?} at level {found_level}, needed {wanted:?} at level {wanted_level}")]
    HintMismatch {
        wanted: HintTarget,
        wanted_level: usize,
        found: HintTarget,
        found_level: usize,
    },
    #[error("cannot mod-switch below level 1")]
    LevelExhausted,
    #[error("noise overflow: decrypted plaintext does not match expected")]
    NoiseOverflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BgvParams {
    pub n: usize,
    pub basis: RnsBasis,
    pub t: u64,
    pub error_stddev: f64,
    pub seed: u64,
}

impl BgvParams {
    /// Fresh moduli with `q ≡ 1 (mod 2N)` and `q ≡ 1 (mod t)`.
    pub fn generate(n: usize, levels: usize, bits: u32, t: u64, seed: u64) -> Result<Self, BgvError> {
        let basis = generate_moduli_with(n, levels, bits, t, seed)?;
        Self::with_basis(n, basis, t, DEFAULT_STDDEV, seed)
    }

    pub fn with_basis(n: usize, basis: RnsBasis, t: u64, error_stddev: f64, seed: u64) -> Result<Self, BgvError> {
        for m in basis.moduli() {
            // mod_switch relies on q ≡ 1 (mod t)
            if t < 2 || m.q() % t != 1 {
                return Err(BgvError::BadPlaintextModulus { t, q: m.q() });
            }
            if m.n_max() < n {
                return Err(RnsError::NotNttFriendly { q: m.q(), n }.into());
            }
        }
        let p = Self {
            n,
            basis,
            t,
            error_stddev,
            seed,
        };
        let ratio = n as f64 / p.log_q();
        if ratio < SECURITY_RATIO {
            log::warn!("N/log2(Q) = {ratio:.1} is below {SECURITY_RATIO}; parameters are not secure");
        }
        Ok(p)
    }

    pub fn max_level(&self) -> usize {
        self.basis.len()
    }

    pub fn moduli(&self, level: usize) -> &[PrimeModulus] {
        &self.basis.moduli()[..level]
    }

    pub fn log_q(&self) -> f64 {
        self.basis.moduli().iter().map(|m| (m.q() as f64).log2()).sum()
    }

    /// Deterministic generator for one purpose-specific stream.
    pub fn rng(&self, stream: u64) -> ChaCha20Rng {
        let mut r = ChaCha20Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    fn check_level(&self, level: usize) -> Result<(), BgvError> {
        if level == 0 || level > self.max_level() {
            return Err(BgvError::BadLevel {
                level,
                max: self.max_level(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plaintext {
    coeffs: Vec<u64>,
    t: u64,
}

impl Plaintext {
    pub fn new(coeffs: Vec<u64>, t: u64) -> Result<Self, BgvError> {
        if let Some(&c) = coeffs.iter().find(|&&c| c >= t) {
            return Err(BgvError::BadPlaintext(c));
        }
        Ok(Self { coeffs, t })
    }

    pub fn zero(n: usize, t: u64) -> Self {
        Self { coeffs: vec![0; n], t }
    }

    pub fn constant(n: usize, t: u64, c: u64) -> Self {
        let mut coeffs = vec![0; n];
        coeffs[0] = c % t;
        Self { coeffs, t }
    }

    pub fn random(n: usize, t: u64, rng: &mut impl Rng) -> Self {
        Self {
            coeffs: (0..n).map(|_| rng.gen_range(0..t)).collect(),
            t,
        }
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a + b) % self.t)
            .collect();
        Self { coeffs, t: self.t }
    }

    /// Negacyclic product mod `t`.
    pub fn mul(&self, other: &Self) -> Self {
        let (n, t) = (self.len(), self.t);
        let mut out = vec![0u64; n];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                let p = a * b % t;
                let k = i + j;
                if k < n {
                    out[k] = (out[k] + p) % t;
                } else {
                    out[k - n] = (out[k - n] + t - p) % t;
                }
            }
        }
        Self { coeffs: out, t }
    }

    /// `m(x) → m(x^k)` for odd `k`.
    pub fn automorphism(&self, k: u64) -> Self {
        let (n, t) = (self.len() as u64, self.t);
        assert!(k % 2 == 1, "automorphism index must be odd");
        let mut out = vec![0u64; self.len()];
        for (i, &a) in self.coeffs.iter().enumerate() {
            let ik = (i as u64 * k) % (2 * n);
            if ik < n {
                out[ik as usize] = a;
            } else {
                out[(ik - n) as usize] = (t - a) % t;
            }
        }
        Self { coeffs: out, t }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretKey {
    coeffs: Vec<i64>,
    ntt: Vec<ResidueVector>,
}

impl SecretKey {
    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    /// `s` in the NTT domain over the first `level` moduli.
    pub fn ntt_poly(&self, level: usize) -> RnsPoly {
        RnsPoly::new(self.ntt[..level].to_vec())
    }
}

pub fn keygen(params: &BgvParams) -> SecretKey {
    let mut rng = params.rng(0);
    let coeffs: Vec<i64> = (0..params.n).map(|_| rng.gen_range(-1i64..=1)).collect();
    let ntt = RnsPoly::from_signed(&coeffs, params.basis.moduli(), Domain::Coefficient)
        .ntt()
        .expect("n within modulus range")
        .into_residues();
    SecretKey { coeffs, ntt }
}

/// Bounded Gaussian error, rejected beyond 6σ.
pub(crate) fn sample_error(n: usize, stddev: f64, rng: &mut impl Rng) -> Vec<i64> {
    if stddev == 0.0 {
        return vec![0; n];
    }
    let normal = Normal::new(0.0, stddev).expect("finite stddev");
    let bound = 6.0 * stddev;
    (0..n)
        .map(|_| loop {
            let x: f64 = normal.sample(rng);
            if x.abs() <= bound {
                break x.round() as i64;
            }
        })
        .collect()
}

pub(crate) fn sample_uniform(n: usize, m: PrimeModulus, rng: &mut impl Rng) -> ResidueVector {
    let c = (0..n).map(|_| rng.gen_range(0..m.q())).collect();
    ResidueVector::new(c, m, Domain::Ntt).expect("valid length")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Fresh,
    Derived,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ciphertext {
    pub a: RnsPoly,
    pub b: RnsPoly,
    pub provenance: Provenance,
}

impl Ciphertext {
    pub fn new(a: RnsPoly, b: RnsPoly, provenance: Provenance) -> Result<Self, BgvError> {
        if a.level() != b.level() {
            return Err(BgvError::LevelMismatch(a.level(), b.level()));
        }
        Ok(Self { a, b, provenance })
    }

    pub fn level(&self) -> usize {
        self.a.level()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    Sampled,
    /// `e = 0`, for debugging noise accounting.
    Zero,
}

pub fn encrypt(
    params: &BgvParams,
    m: &Plaintext,
    sk: &SecretKey,
    level: usize,
    rng: &mut impl Rng,
) -> Result<Ciphertext, BgvError> {
    encrypt_with(params, m, sk, level, rng, ErrorMode::Sampled)
}

pub fn encrypt_with(
    params: &BgvParams,
    m: &Plaintext,
    sk: &SecretKey,
    level: usize,
    rng: &mut impl Rng,
    mode: ErrorMode,
) -> Result<Ciphertext, BgvError> {
    params.check_level(level)?;
    let n = params.n;
    let moduli = params.moduli(level);
    let a = RnsPoly::new(moduli.iter().map(|q| sample_uniform(n, *q, rng)).collect());
    let e = match mode {
        ErrorMode::Sampled => sample_error(n, params.error_stddev, rng),
        ErrorMode::Zero => vec![0; n],
    };
    let t = params.t as i64;
    let te_m: Vec<i64> = e.iter().zip(m.coeffs()).map(|(e, m)| t * e + *m as i64).collect();
    let te_m = RnsPoly::from_signed(&te_m, moduli, Domain::Coefficient).ntt()?;
    let b = a.mul(&sk.ntt_poly(level))?.add(&te_m)?;
    Ciphertext::new(a, b, Provenance::Fresh)
}

/// `b − a·s` as centered wide integers.
fn phase(ct: &Ciphertext, sk: &SecretKey) -> Result<Vec<BigInt>, BgvError> {
    let d = ct.b.sub(&ct.a.mul(&sk.ntt_poly(ct.level()))?)?;
    Ok(d.intt()?.crt_lift())
}

pub fn decrypt(ct: &Ciphertext, sk: &SecretKey, t: u64) -> Result<Plaintext, BgvError> {
    let tb = BigInt::from(t);
    let coeffs = phase(ct, sk)?
        .into_iter()
        .map(|x| {
            let r = ((x % &tb) + &tb) % &tb;
            r.to_u64().expect("reduced below t")
        })
        .collect();
    Plaintext::new(coeffs, t)
}

/// Decrypts and reports [`BgvError::NoiseOverflow`] on mismatch.
pub fn decrypt_checked(ct: &Ciphertext, sk: &SecretKey, expected: &Plaintext) -> Result<Plaintext, BgvError> {
    let p = decrypt(ct, sk, expected.t())?;
    if &p != expected {
        return Err(BgvError::NoiseOverflow);
    }
    Ok(p)
}

/// `max |centered(b − a·s − m)|`.
pub fn noise(ct: &Ciphertext, sk: &SecretKey, expected: &Plaintext) -> Result<BigUint, BgvError> {
    let mut worst = BigUint::zero();
    for (x, m) in phase(ct, sk)?.into_iter().zip(expected.coeffs()) {
        let v = (x - BigInt::from(*m)).abs().to_biguint().expect("non-negative");
        if v > worst {
            worst = v;
        }
    }
    Ok(worst)
}

/// log2 of the centered modulus `Q/2` minus log2 of the noise.
pub fn noise_budget_bits(ct: &Ciphertext, sk: &SecretKey, expected: &Plaintext) -> Result<f64, BgvError> {
    let n = noise(ct, sk, expected)?;
    let log_q: f64 = ct.a.residues().iter().map(|r| (r.q() as f64).log2()).sum();
    Ok(log_q - 1.0 - (n.bits() as f64))
}

fn same_level(ct0: &Ciphertext, ct1: &Ciphertext) -> Result<(), BgvError> {
    if ct0.level() != ct1.level() {
        return Err(BgvError::LevelMismatch(ct0.level(), ct1.level()));
    }
    Ok(())
}

pub fn hom_add(ct0: &Ciphertext, ct1: &Ciphertext) -> Result<Ciphertext, BgvError> {
    same_level(ct0, ct1)?;
    Ciphertext::new(ct0.a.add(&ct1.a)?, ct0.b.add(&ct1.b)?, Provenance::Derived)
}

/// `m` in the NTT domain over the first `level` moduli.
pub fn plain_poly(params: &BgvParams, m: &Plaintext, level: usize) -> Result<RnsPoly, BgvError> {
    let v: Vec<i64> = m.coeffs().iter().map(|&c| c as i64).collect();
    Ok(RnsPoly::from_signed(&v, params.moduli(level), Domain::Coefficient).ntt()?)
}

/// Adds an unencrypted plaintext: only `b` changes.
pub fn add_plain(params: &BgvParams, ct: &Ciphertext, m: &Plaintext) -> Result<Ciphertext, BgvError> {
    let p = plain_poly(params, m, ct.level())?;
    Ciphertext::new(ct.a.clone(), ct.b.add(&p)?, Provenance::Derived)
}

pub fn mul_plain(params: &BgvParams, ct: &Ciphertext, m: &Plaintext) -> Result<Ciphertext, BgvError> {
    let p = plain_poly(params, m, ct.level())?;
    Ciphertext::new(ct.a.mul(&p)?, ct.b.mul(&p)?, Provenance::Derived)
}

fn check_hint(hint: &KeySwitchHint, wanted: HintTarget, level: usize) -> Result<(), BgvError> {
    if hint.target != wanted || hint.level() != level {
        return Err(BgvError::HintMismatch {
            wanted,
            wanted_level: level,
            found: hint.target,
            found_level: hint.level(),
        });
    }
    Ok(())
}

pub fn hom_mul(ct0: &Ciphertext, ct1: &Ciphertext, hint: &KeySwitchHint) -> Result<Ciphertext, BgvError> {
    same_level(ct0, ct1)?;
    check_hint(hint, HintTarget::Relinearize, ct0.level())?;
    let l2 = ct0.a.mul(&ct1.a)?;
    let l1 = ct0.a.mul(&ct1.b)?.add(&ct1.a.mul(&ct0.b)?)?;
    let l0 = ct0.b.mul(&ct1.b)?;
    let u = keyswitch(&l2, hint)?;
    Ciphertext::new(l1.add(&u.u1)?, l0.add(&u.u0)?, Provenance::Derived)
}

pub fn rotate(ct: &Ciphertext, k: u64, hint: &KeySwitchHint) -> Result<Ciphertext, BgvError> {
    check_hint(hint, HintTarget::Automorphism(k), ct.level())?;
    let sa = ct.a.map(|r| automorphism_eval(r, k))?;
    let sb = ct.b.map(|r| automorphism_eval(r, k))?;
    let u = keyswitch(&sa, hint)?;
    Ciphertext::new(u.u1, sb.add(&u.u0)?, Provenance::Derived)
}

/// Scalars used by [`mod_switch`] when dropping `q_L` into `q_j`:
/// `(q_L^{-1} mod q_j, −t·q_L^{-1} mod q_j)`.
pub fn mod_switch_constants(last: &PrimeModulus, target: &PrimeModulus, t: u64) -> (u64, u64) {
    let ql_inv = mod_inv(last.q() % target.q(), target.q());
    let neg_t_ql_inv = target.neg(target.mul(t % target.q(), ql_inv));
    (ql_inv, neg_t_ql_inv)
}

/// Drops `q_L`: `c' = (c − δ)/q_L` with `δ = t·[c·t^{-1}]_{q_L}` centered,
/// so `δ ≡ c (mod q_L)` and `δ ≡ 0 (mod t)`.
pub fn mod_switch(ct: &Ciphertext, t: u64) -> Result<Ciphertext, BgvError> {
    let level = ct.level();
    if level < 2 {
        return Err(BgvError::LevelExhausted);
    }
    let switch = |c: &RnsPoly| -> Result<RnsPoly, BgvError> {
        let last = c.residue(level - 1);
        let lm = *last.modulus();
        let t_inv = mod_inv(t % lm.q(), lm.q());
        let w = intt_reference(last)?.scalar_mul(t_inv);
        let mut out = Vec::with_capacity(level - 1);
        for j in 0..level - 1 {
            let cj = c.residue(j);
            let (ql_inv, neg_t_ql_inv) = mod_switch_constants(&lm, cj.modulus(), t);
            let x = ntt_reference(&w.lift_to(*cj.modulus()))?;
            out.push(cj.scalar_mul(ql_inv).add(&x.scalar_mul(neg_t_ql_inv))?);
        }
        Ok(RnsPoly::new(out))
    };
    Ciphertext::new(switch(&ct.a)?, switch(&ct.b)?, Provenance::Derived)
}

/// Applies [`mod_switch`] until `ct` sits at `level`.
pub fn mod_switch_to(ct: &Ciphertext, level: usize, t: u64) -> Result<Ciphertext, BgvError> {
    let mut c = ct.clone();
    while c.level() > level {
        c = mod_switch(&c, t)?;
    }
    Ok(c)
}

#[cfg(test)]
mod tests;
