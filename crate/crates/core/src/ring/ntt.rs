//! Reference negacyclic NTT.
//!
//! Convention: `NTT(a)_j = a(ψ^{2j+1}) = Σ_i a_i ψ^{(2j+1)i}` with `ψ` a
//! primitive `2N`-th root. Outputs are in natural order, so an automorphism
//! becomes a plain index permutation in the evaluation domain.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::{Domain, ResidueVector, RingError};
use crate::rns::PrimeModulus;

/// Precomputed powers for one `(q, N)` pair.
#[derive(Debug, PartialEq, Eq)]
pub struct NttTables {
    pub(crate) n: usize,
    pub(crate) modulus: PrimeModulus,
    /// ψ^i for i < N
    pub(crate) psi_pows: Vec<u64>,
    /// N^{-1} ψ^{-i} for i < N
    pub(crate) psi_inv_pows_scaled: Vec<u64>,
    /// ω^k for k < N/2, ω = ψ²
    pub(crate) omega_pows: Vec<u64>,
    pub(crate) omega_inv_pows: Vec<u64>,
}

impl NttTables {
    pub fn build(modulus: PrimeModulus, n: usize) -> Self {
        let psi = modulus.psi_for(n);
        let psi_inv = modulus.inv(psi);
        let n_inv = modulus.inv(n as u64 % modulus.q());
        let powers = |base: u64, count: usize, scale: u64| {
            let mut out = Vec::with_capacity(count);
            let mut x = scale;
            for _ in 0..count {
                out.push(x);
                x = modulus.mul(x, base);
            }
            out
        };
        let omega = modulus.mul(psi, psi);
        Self {
            n,
            modulus,
            psi_pows: powers(psi, n, 1),
            psi_inv_pows_scaled: powers(psi_inv, n, n_inv),
            omega_pows: powers(omega, n / 2, 1),
            omega_inv_pows: powers(modulus.inv(omega), n / 2, 1),
        }
    }

    /// Shared, lazily built tables.
    pub fn get(modulus: &PrimeModulus, n: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<(u64, u64, usize), Arc<NttTables>>>> = OnceLock::new();
        let key = (modulus.q(), modulus.psi_for(n), n);
        let cache = CACHE.get_or_init(Default::default);
        if let Some(t) = cache.lock().expect("ntt cache poisoned").get(&key) {
            return Arc::clone(t);
        }
        let built = Arc::new(Self::build(*modulus, n));
        cache
            .lock()
            .expect("ntt cache poisoned")
            .entry(key)
            .or_insert(built)
            .clone()
    }
}

pub(crate) fn bit_reverse_permute<T>(v: &mut [T]) {
    let n = v.len();
    let bits = n.trailing_zeros();
    if bits == 0 {
        return;
    }
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            v.swap(i, j);
        }
    }
}

/// In-place cyclic transform with `roots[k] = ω^k` (`ω` of order `v.len()`,
/// `roots.len() >= v.len()/2` with stride `stride`). Decimation in time:
/// bit-reversed load, natural-order result.
pub(crate) fn cyclic_dit(v: &mut [u64], roots: &[u64], stride: usize, m: &PrimeModulus) {
    let n = v.len();
    bit_reverse_permute(v);
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = stride * (n / len);
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = roots[k * step];
                let u = v[start + k];
                let t = m.mul(v[start + k + half], w);
                v[start + k] = m.add(u, t);
                v[start + k + half] = m.sub(u, t);
            }
        }
        len *= 2;
    }
}

/// Decimation-in-frequency counterpart of [`cyclic_dit`]: natural-order
/// load, butterflies from the widest stage down, final bit-reversal.
pub(crate) fn cyclic_dif(v: &mut [u64], roots: &[u64], stride: usize, m: &PrimeModulus) {
    let n = v.len();
    let mut len = n;
    while len >= 2 {
        let half = len / 2;
        let step = stride * (n / len);
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = roots[k * step];
                let u = v[start + k];
                let t = v[start + k + half];
                v[start + k] = m.add(u, t);
                v[start + k + half] = m.mul(m.sub(u, t), w);
            }
        }
        len /= 2;
    }
    bit_reverse_permute(v);
}

fn check(rv: &ResidueVector, expected: Domain) -> Result<(), RingError> {
    if rv.domain() != expected {
        return Err(RingError::WrongDomain { expected });
    }
    if rv.len() > rv.modulus().n_max() {
        return Err(RingError::TooLong {
            n: rv.len(),
            n_max: rv.modulus().n_max(),
        });
    }
    Ok(())
}

pub fn ntt_reference(rv: &ResidueVector) -> Result<ResidueVector, RingError> {
    check(rv, Domain::Coefficient)?;
    let t = NttTables::get(rv.modulus(), rv.len());
    let m = rv.modulus();
    let mut v: Vec<u64> = rv
        .coeffs()
        .iter()
        .zip(&t.psi_pows)
        .map(|(&a, &p)| m.mul(a, p))
        .collect();
    cyclic_dit(&mut v, &t.omega_pows, 1, m);
    Ok(rv.with_coeffs(v, Domain::Ntt))
}

pub fn intt_reference(rv: &ResidueVector) -> Result<ResidueVector, RingError> {
    check(rv, Domain::Ntt)?;
    let t = NttTables::get(rv.modulus(), rv.len());
    let m = rv.modulus();
    let mut v = rv.coeffs().to_vec();
    cyclic_dit(&mut v, &t.omega_inv_pows, 1, m);
    for (x, &s) in v.iter_mut().zip(&t.psi_inv_pows_scaled) {
        *x = m.mul(*x, s);
    }
    Ok(rv.with_coeffs(v, Domain::Coefficient))
}
