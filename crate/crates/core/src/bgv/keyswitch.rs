//! Key-switching with RNS-digit hints.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sample_error, sample_uniform, BgvError, BgvParams, RnsPoly, SecretKey};
use crate::ring::{automorphism_coeff, intt_reference, ntt_reference, Domain, ResidueVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HintTarget {
    /// Source secret `s²`.
    Relinearize,
    /// Source secret `−σ_k(s)`.
    Automorphism(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeySwitchHint {
    /// `[i][j]` is over `q_j`.
    pub ksh0: Vec<Vec<ResidueVector>>,
    pub ksh1: Vec<Vec<ResidueVector>>,
    pub target: HintTarget,
}

impl KeySwitchHint {
    pub fn level(&self) -> usize {
        self.ksh0.len()
    }

    pub fn byte_size(&self, word_bits: u32) -> u64 {
        let n = self.ksh0[0][0].len();
        hint_bytes(self.level(), n, word_bits)
    }
}

/// `2·L²·N·(word_bits/8)`.
pub fn hint_bytes(level: usize, n: usize, word_bits: u32) -> u64 {
    2 * (level * level) as u64 * n as u64 * (word_bits / 8) as u64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeySwitchOutput {
    pub u0: RnsPoly,
    pub u1: RnsPoly,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KsOpCounts {
    pub intts: usize,
    pub ntts: usize,
    pub muls: usize,
    pub adds: usize,
}

impl KsOpCounts {
    pub fn transforms(&self) -> usize {
        self.intts + self.ntts
    }
}

pub(crate) fn source_secret(
    params: &BgvParams,
    sk: &SecretKey,
    target: HintTarget,
    level: usize,
) -> Result<RnsPoly, BgvError> {
    let s = sk.ntt_poly(level);
    match target {
        HintTarget::Relinearize => Ok(s.mul(&s)?),
        HintTarget::Automorphism(k) => {
            let coeff = RnsPoly::from_signed(sk.coeffs(), params.moduli(level), Domain::Coefficient);
            Ok(coeff.map(|r| automorphism_coeff(r, k).map(|x| x.neg()))?.ntt()?)
        }
    }
}

/// Row `i` encrypts `P_i·s_from` under `s`, where `P_i ≡ δ_ij (mod q_j)`.
pub fn keyswitch_hintgen(
    params: &BgvParams,
    sk: &SecretKey,
    target: HintTarget,
    level: usize,
    rng: &mut impl Rng,
) -> Result<KeySwitchHint, BgvError> {
    params.check_level(level)?;
    let s_from = source_secret(params, sk, target, level)?;
    let s = sk.ntt_poly(level);
    let moduli = params.moduli(level);
    let t = params.t as i64;
    let mut ksh0 = Vec::with_capacity(level);
    let mut ksh1 = Vec::with_capacity(level);
    for i in 0..level {
        let e: Vec<i64> = sample_error(params.n, params.error_stddev, rng)
            .into_iter()
            .map(|x| t * x)
            .collect();
        let te = RnsPoly::from_signed(&e, moduli, Domain::Coefficient).ntt()?;
        let mut row0 = Vec::with_capacity(level);
        let mut row1 = Vec::with_capacity(level);
        for (j, q) in moduli.iter().enumerate() {
            let a = sample_uniform(params.n, *q, rng);
            let mut b = a.pointwise_mul(s.residue(j))?.add(te.residue(j))?;
            if i == j {
                b = b.add(s_from.residue(j))?;
            }
            row0.push(b);
            row1.push(a);
        }
        ksh0.push(row0);
        ksh1.push(row1);
    }
    Ok(KeySwitchHint { ksh0, ksh1, target })
}

pub fn keyswitch(x: &RnsPoly, hint: &KeySwitchHint) -> Result<KeySwitchOutput, BgvError> {
    keyswitch_counted(x, hint, &mut KsOpCounts::default())
}

/// Listing-1 key-switch, tallying the vector operations it performs.
pub fn keyswitch_counted(x: &RnsPoly, hint: &KeySwitchHint, ops: &mut KsOpCounts) -> Result<KeySwitchOutput, BgvError> {
    let l = x.level();
    if hint.level() != l {
        return Err(BgvError::LevelMismatch(l, hint.level()));
    }
    let mut u0: Vec<Option<ResidueVector>> = vec![None; l];
    let mut u1: Vec<Option<ResidueVector>> = vec![None; l];
    let accumulate =
        |acc: &mut Option<ResidueVector>, v: ResidueVector, ops: &mut KsOpCounts| -> Result<(), BgvError> {
            ops.adds += 1;
            *acc = Some(match acc.take() {
                None => v,
                Some(a) => a.add(&v)?,
            });
            Ok(())
        };
    for i in 0..l {
        let y = intt_reference(x.residue(i))?;
        ops.intts += 1;
        for j in 0..l {
            let qj = *hint.ksh0[i][j].modulus();
            let xqj = if i == j {
                x.residue(i).clone()
            } else {
                ops.ntts += 1;
                ntt_reference(&y.lift_to(qj))?
            };
            let p0 = xqj.pointwise_mul(&hint.ksh0[i][j])?;
            let p1 = xqj.pointwise_mul(&hint.ksh1[i][j])?;
            ops.muls += 2;
            accumulate(&mut u0[j], p0, ops)?;
            accumulate(&mut u1[j], p1, ops)?;
        }
    }
    let collect = |v: Vec<Option<ResidueVector>>| RnsPoly::new(v.into_iter().map(|r| r.expect("l >= 1")).collect());
    Ok(KeySwitchOutput {
        u0: collect(u0),
        u1: collect(u1),
    })
}
