use super::*;
use crate::ring::galois_inverse;

fn setup(n: usize, levels: usize) -> (BgvParams, SecretKey, ChaCha20Rng) {
    let p = BgvParams::generate(n, levels, 30, DEFAULT_T, 11).unwrap();
    let sk = keygen(&p);
    let rng = p.rng(1);
    (p, sk, rng)
}

#[test]
fn keygen_is_deterministic_and_ternary() {
    let (p, sk, _) = setup(64, 2);
    assert_eq!(keygen(&p), sk);
    assert!(sk.coeffs().iter().all(|c| (-1..=1).contains(c)));
    let mut other = p.clone();
    other.seed = 12;
    assert_ne!(keygen(&other).coeffs(), sk.coeffs());
}

#[test]
fn moduli_support_mod_switch() {
    let (p, _, _) = setup(1024, 6);
    assert!(p.basis.moduli().iter().all(|m| m.q() % 2048 == 1 && m.q() % 257 == 1));
    let bad = crate::rns::generate_moduli(64, 2, 20, 0).unwrap();
    assert!(matches!(
        BgvParams::with_basis(64, bad, 257, 3.2, 0),
        Err(BgvError::BadPlaintextModulus { .. })
    ));
}

#[test]
fn round_trip() {
    let (p, sk, mut rng) = setup(1024, 3);
    for level in 1..=3 {
        let m = Plaintext::random(p.n, p.t, &mut rng);
        let ct = encrypt(&p, &m, &sk, level, &mut rng).unwrap();
        assert_eq!(ct.level(), level);
        assert_eq!(decrypt(&ct, &sk, p.t).unwrap(), m);
    }
    let z = Plaintext::zero(p.n, p.t);
    let ct = encrypt(&p, &z, &sk, 3, &mut rng).unwrap();
    assert_eq!(decrypt(&ct, &sk, p.t).unwrap(), z);
    assert!(encrypt(&p, &z, &sk, 4, &mut rng).is_err());
}

#[test]
fn fresh_noise_bound() {
    let (p, sk, mut rng) = setup(1024, 2);
    let m = Plaintext::random(p.n, p.t, &mut rng);
    let ct = encrypt(&p, &m, &sk, 2, &mut rng).unwrap();
    let bound = BigUint::from((p.t as f64 * 6.0 * p.error_stddev).ceil() as u64 * (p.n as u64 + 1));
    assert!(noise(&ct, &sk, &m).unwrap() <= bound);
    let quiet = encrypt_with(&p, &m, &sk, 2, &mut rng, ErrorMode::Zero).unwrap();
    assert!(noise(&quiet, &sk, &m).unwrap().is_zero());
}

#[test]
fn addition() {
    let (p, sk, mut rng) = setup(256, 2);
    let ms: Vec<_> = (0..3).map(|_| Plaintext::random(p.n, p.t, &mut rng)).collect();
    let cts: Vec<_> = ms.iter().map(|m| encrypt(&p, m, &sk, 2, &mut rng).unwrap()).collect();
    let sum = hom_add(&hom_add(&cts[0], &cts[1]).unwrap(), &cts[2]).unwrap();
    assert_eq!(decrypt(&sum, &sk, p.t).unwrap(), ms[0].add(&ms[1]).add(&ms[2]));
    assert_eq!(hom_add(&cts[0], &cts[1]).unwrap(), hom_add(&cts[1], &cts[0]).unwrap());
    let z = encrypt(&p, &Plaintext::zero(p.n, p.t), &sk, 2, &mut rng).unwrap();
    assert_eq!(decrypt(&hom_add(&cts[0], &z).unwrap(), &sk, p.t).unwrap(), ms[0]);
    let low = mod_switch(&cts[0], p.t).unwrap();
    assert_eq!(hom_add(&low, &cts[1]), Err(BgvError::LevelMismatch(1, 2)));
}

#[test]
fn addition_matches_plain_oracle() {
    let (p, sk, mut rng) = setup(64, 2);
    for _ in 0..100 {
        let m0 = Plaintext::random(p.n, p.t, &mut rng);
        let m1 = Plaintext::random(p.n, p.t, &mut rng);
        let c0 = encrypt(&p, &m0, &sk, 2, &mut rng).unwrap();
        let c1 = encrypt(&p, &m1, &sk, 2, &mut rng).unwrap();
        assert_eq!(decrypt(&hom_add(&c0, &c1).unwrap(), &sk, p.t).unwrap(), m0.add(&m1));
    }
}

#[test]
fn multiplication() {
    let (p, sk, mut rng) = setup(1024, 6);
    let hint = keyswitch_hintgen(&p, &sk, HintTarget::Relinearize, 6, &mut rng).unwrap();
    let m0 = Plaintext::random(p.n, p.t, &mut rng);
    let m1 = Plaintext::random(p.n, p.t, &mut rng);
    let c0 = encrypt(&p, &m0, &sk, 6, &mut rng).unwrap();
    let c1 = encrypt(&p, &m1, &sk, 6, &mut rng).unwrap();
    let prod = hom_mul(&c0, &c1, &hint).unwrap();
    let expected = m0.mul(&m1);
    assert_eq!(decrypt_checked(&prod, &sk, &expected).unwrap(), expected);

    let one = encrypt(&p, &Plaintext::constant(p.n, p.t, 1), &sk, 6, &mut rng).unwrap();
    assert_eq!(decrypt(&hom_mul(&one, &c1, &hint).unwrap(), &sk, p.t).unwrap(), m1);

    let add_noise = noise(&hom_add(&c0, &c1).unwrap(), &sk, &m0.add(&m1)).unwrap();
    let mul_noise = noise(&prod, &sk, &expected).unwrap();
    assert!(mul_noise > add_noise * 1000u32);
}

#[test]
fn multiplication_rejects_wrong_hint() {
    let (p, sk, mut rng) = setup(64, 2);
    let rot = keyswitch_hintgen(&p, &sk, HintTarget::Automorphism(5), 2, &mut rng).unwrap();
    let c = encrypt(&p, &Plaintext::zero(64, p.t), &sk, 2, &mut rng).unwrap();
    assert!(matches!(hom_mul(&c, &c, &rot), Err(BgvError::HintMismatch { .. })));
    let relin1 = keyswitch_hintgen(&p, &sk, HintTarget::Relinearize, 1, &mut rng).unwrap();
    assert!(matches!(hom_mul(&c, &c, &relin1), Err(BgvError::HintMismatch { .. })));
}

#[test]
fn keyswitch_contract_and_counts() {
    let (p, sk, mut rng) = setup(256, 4);
    for target in [
        HintTarget::Relinearize,
        HintTarget::Automorphism(5),
        HintTarget::Automorphism(511),
    ] {
        let hint = keyswitch_hintgen(&p, &sk, target, 4, &mut rng).unwrap();
        let x = RnsPoly::new(p.moduli(4).iter().map(|q| sample_uniform(p.n, *q, &mut rng)).collect());
        let mut ops = KsOpCounts::default();
        let u = keyswitch_counted(&x, &hint, &mut ops).unwrap();
        assert_eq!((ops.intts, ops.ntts, ops.transforms()), (4, 12, 16));
        assert_eq!((ops.muls, ops.adds), (32, 32));
        // u0 − u1·s − x·s_from is a small multiple of t
        let s = sk.ntt_poly(4);
        let s_from = keyswitch::source_secret(&p, &sk, target, 4).unwrap();
        let diff =
            u.u0.sub(&u.u1.mul(&s).unwrap())
                .unwrap()
                .sub(&x.mul(&s_from).unwrap())
                .unwrap();
        let lifted = diff.intt().unwrap().crt_lift();
        let t = BigInt::from(p.t);
        let q_bits = p
            .moduli(4)
            .iter()
            .map(|m| 64 - m.q().leading_zeros() as u64)
            .sum::<u64>();
        for c in lifted {
            assert!((&c % &t).is_zero());
            assert!(c.bits() < q_bits / 2 + 16, "keyswitch error too large");
        }
    }
}

#[test]
fn hint_sizes() {
    assert_eq!(hint_bytes(16, 16384, 32), 33_554_432);
    let (p, sk, mut rng) = setup(64, 3);
    let h = keyswitch_hintgen(&p, &sk, HintTarget::Relinearize, 3, &mut rng).unwrap();
    assert_eq!(h.byte_size(32), 2 * 9 * 64 * 4);
    let h5 = keyswitch_hintgen(&p, &sk, HintTarget::Automorphism(5), 3, &mut rng).unwrap();
    let h7 = keyswitch_hintgen(&p, &sk, HintTarget::Automorphism(7), 3, &mut rng).unwrap();
    assert_ne!(h5.ksh0, h7.ksh0);
}

#[test]
fn rotation() {
    let (p, sk, mut rng) = setup(1024, 4);
    let m = Plaintext::random(p.n, p.t, &mut rng);
    let ct = encrypt(&p, &m, &sk, 4, &mut rng).unwrap();
    let h5 = keyswitch_hintgen(&p, &sk, HintTarget::Automorphism(5), 4, &mut rng).unwrap();
    let r = rotate(&ct, 5, &h5).unwrap();
    assert_eq!(decrypt(&r, &sk, p.t).unwrap(), m.automorphism(5));

    let k_inv = galois_inverse(5, p.n);
    let hinv = keyswitch_hintgen(&p, &sk, HintTarget::Automorphism(k_inv), 4, &mut rng).unwrap();
    assert_eq!(decrypt(&rotate(&r, k_inv, &hinv).unwrap(), &sk, p.t).unwrap(), m);

    let h1 = keyswitch_hintgen(&p, &sk, HintTarget::Automorphism(1), 4, &mut rng).unwrap();
    assert_eq!(decrypt(&rotate(&ct, 1, &h1).unwrap(), &sk, p.t).unwrap(), m);
    assert!(rotate(&ct, 3, &h5).is_err());
}

#[test]
fn modulus_switching() {
    let (p, sk, mut rng) = setup(1024, 3);
    let hint = keyswitch_hintgen(&p, &sk, HintTarget::Relinearize, 3, &mut rng).unwrap();
    let m0 = Plaintext::random(p.n, p.t, &mut rng);
    let m1 = Plaintext::random(p.n, p.t, &mut rng);
    let c0 = encrypt(&p, &m0, &sk, 3, &mut rng).unwrap();
    let c1 = encrypt(&p, &m1, &sk, 3, &mut rng).unwrap();
    let prod = hom_mul(&c0, &c1, &hint).unwrap();
    let expected = m0.mul(&m1);
    let before = noise(&prod, &sk, &expected).unwrap();
    let low = mod_switch(&prod, p.t).unwrap();
    assert_eq!(low.level(), 2);
    assert_eq!(decrypt(&low, &sk, p.t).unwrap(), expected);
    let after = noise(&low, &sk, &expected).unwrap();
    // rounding term: t·(1 + ‖s‖₁)·q_L/2 / q_L
    let q_l = BigUint::from(p.basis.modulus(2).q());
    let rounding = BigUint::from(p.t * (p.n as u64 + 1));
    assert!(after <= (before * 2u32) / &q_l + rounding);

    let fresh = mod_switch_to(&c0, 1, p.t).unwrap();
    assert_eq!(decrypt(&fresh, &sk, p.t).unwrap(), m0);
    assert_eq!(mod_switch(&fresh, p.t), Err(BgvError::LevelExhausted));
}

#[test]
fn plaintext_ops() {
    let (p, sk, mut rng) = setup(256, 2);
    let m = Plaintext::random(p.n, p.t, &mut rng);
    let w = Plaintext::random(p.n, p.t, &mut rng);
    let ct = encrypt(&p, &m, &sk, 2, &mut rng).unwrap();
    assert_eq!(decrypt(&add_plain(&p, &ct, &w).unwrap(), &sk, p.t).unwrap(), m.add(&w));
    assert_eq!(decrypt(&mul_plain(&p, &ct, &w).unwrap(), &sk, p.t).unwrap(), m.mul(&w));
}

#[test]
fn plaintext_algebra() {
    let t = 257;
    let mut x = vec![0; 8];
    x[1] = 1;
    let x = Plaintext::new(x, t).unwrap();
    let mut x7 = vec![0; 8];
    x7[7] = 1;
    // x · x^7 = x^8 = −1
    let x8 = x.mul(&Plaintext::new(x7, t).unwrap());
    assert_eq!(x8.coeffs()[0], t - 1);
    assert!(Plaintext::new(vec![257, 0], t).is_err());
    let m = Plaintext::new((0..8).collect(), t).unwrap();
    assert_eq!(m.automorphism(1), m);
    assert_eq!(m.automorphism(3).automorphism(galois_inverse(3, 8)), m);
}
