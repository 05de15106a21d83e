//! Acceptance criteria, one `criterion N: PASS|FAIL ...` line each. Exits
//! nonzero if any criterion fails.

use std::time::{Duration, Instant};

use fhesched::bench::run_suite;
use fhesched::bgv::{decrypt, hint_bytes, keygen, BgvParams, Plaintext};
use fhesched::compiler::{
    compile, naive_order, schedule_offchip_slots, translate, DataObject, Instr, InstructionDfg, ObjectClass, ObjectKey,
    Op, Ordering,
};
use fhesched::dsl::{
    build_matvec, encrypt_inputs, eval_encrypted, eval_plain, generate_hints, random_program, HomProgram,
    RandomProgramConfig,
};
use fhesched::ring::{
    automorphism_coeff, automorphism_eval, automorphism_vectorized, intt_reference, negacyclic_mul_reference,
    ntt_four_step, ntt_reference, ntt_unit_multiplier_count, Direction, Domain, GridShape, ResidueVector,
};
use fhesched::rns::{count_restricted_moduli, count_restricted_moduli_in, generate_moduli, Congruence, PrimeModulus};
use fhesched::sim::{functional_run, validate_and_run, FuModel, MachineConfig, SimStats};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const NTT_BUDGET: Duration = Duration::from_secs(120);
const FOUR_STEP_BUDGET: Duration = Duration::from_secs(120);
const BGV_BUDGET: Duration = Duration::from_secs(300);
const COUNT_BUDGET: Duration = Duration::from_secs(30);
const NTT_PAIRS: usize = 200;
const BGV_PROGRAMS: usize = 100;
const MIB: u64 = 1 << 20;
const SENSITIVITY_FLOOR: f64 = 1.2;

struct Outcome {
    n: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn report(n: u32, name: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome {
        n,
        name,
        passed,
        detail,
    }
}

fn random_vector(rng: &mut ChaCha20Rng, n: usize, m: PrimeModulus, domain: Domain) -> ResidueVector {
    let v = (0..n).map(|_| rng.gen_range(0..m.q())).collect();
    ResidueVector::new(v, m, domain).unwrap()
}

/// Every `(G, E)` grid of length `n` with `G ≤ E`.
fn shapes(n: usize) -> Vec<GridShape> {
    (1..=n.trailing_zeros())
        .map(|b| 1usize << b)
        .filter_map(|e| GridShape::for_length(n, e).ok())
        .collect()
}

fn c01_ntt_oracle() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    let mut bad = Vec::new();
    for log_n in 3..=12 {
        let n = 1usize << log_n;
        let basis = generate_moduli(n, 3, 30, 100 + log_n as u64).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(log_n as u64);
        for i in 0..NTT_PAIRS {
            let m = *basis.modulus(i % 3);
            let a = random_vector(&mut rng, n, m, Domain::Coefficient);
            let b = random_vector(&mut rng, n, m, Domain::Coefficient);
            let fast = intt_reference(
                &ntt_reference(&a)
                    .unwrap()
                    .pointwise_mul(&ntt_reference(&b).unwrap())
                    .unwrap(),
            )
            .unwrap();
            if fast != negacyclic_mul_reference(&a, &b).unwrap() {
                bad.push((n, m.q()));
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        1,
        "NTT oracle equivalence",
        bad.is_empty() && elapsed < NTT_BUDGET,
        format!(
            "{checked} pairs, N = 8..4096, {} mismatches, {elapsed:.1?} (limit {NTT_BUDGET:?})",
            bad.len()
        ),
    )
}

fn c02_four_step_equivalence() -> Outcome {
    let start = Instant::now();
    let mut grids = 0;
    let mut bad = Vec::new();
    let basis = generate_moduli(16384, 2, 30, 7).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for log_n in 1..=14 {
        let n = 1usize << log_n;
        let samples = if n <= 1024 { 8 } else { 2 };
        for shape in shapes(n) {
            grids += 1;
            for s in 0..samples {
                let m = *basis.modulus(s % 2);
                let x = random_vector(&mut rng, n, m, Domain::Coefficient);
                let fwd = ntt_four_step(&x, shape, Direction::Forward).unwrap();
                let reference = ntt_reference(&x).unwrap();
                let inv = ntt_four_step(&reference, shape, Direction::Inverse).unwrap();
                if fwd != reference || inv != x {
                    bad.push((shape.g(), shape.e()));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        2,
        "four-step equivalence",
        bad.is_empty() && elapsed < FOUR_STEP_BUDGET,
        format!("{grids} (G, E) grids up to N = 16384, mismatches {bad:?}, {elapsed:.1?} (limit {FOUR_STEP_BUDGET:?})"),
    )
}

fn c03_automorphism() -> Outcome {
    let basis = generate_moduli(16384, 1, 30, 3).unwrap();
    let m = *basis.modulus(0);
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut cases = 0;
    let mut bad = Vec::new();
    for log_n in 3..=14 {
        let n = 1usize << log_n;
        let two_n = 2 * n as u64;
        let ks: Vec<u64> = if n <= 256 {
            (1..two_n).step_by(2).collect()
        } else {
            let mut ks = vec![5, two_n - 1];
            ks.extend((0..6).map(|_| rng.gen_range(0..n as u64) * 2 + 1));
            ks
        };
        let x = random_vector(&mut rng, n, m, Domain::Coefficient);
        let x_ntt = ntt_reference(&x).unwrap();
        let grids = shapes(n);
        for &k in &ks {
            let coeff = automorphism_coeff(&x, k).unwrap();
            let eval = automorphism_eval(&x_ntt, k).unwrap();
            let ok = ntt_reference(&coeff).unwrap() == eval
                && grids.iter().all(|&s| {
                    automorphism_vectorized(&x, k, s).unwrap() == coeff
                        && automorphism_vectorized(&x_ntt, k, s).unwrap() == eval
                });
            cases += 1;
            if !ok {
                bad.push((n, k));
            }
        }
    }
    // a_205 lands at position 1 under k = 5 at N = 1024, negated since
    // 205·5 = 1024 + 1.
    let n = 1024;
    let mut unit = vec![0u64; n];
    unit[205] = 1;
    let e = ResidueVector::new(unit, m, Domain::Coefficient).unwrap();
    let moved = automorphism_coeff(&e, 5).unwrap();
    let vectorized = automorphism_vectorized(&e, 5, GridShape::new(32, 32).unwrap()).unwrap();
    let nonzero: Vec<usize> = (0..n).filter(|&i| moved.coeffs()[i] != 0).collect();
    let worked = nonzero == [1] && moved.coeffs()[1] == m.q() - 1 && vectorized == moved;
    report(
        3,
        "automorphism decomposition",
        bad.is_empty() && worked,
        format!(
            "{cases} (N, k) cases (all odd k for N <= 256), mismatches {bad:?}; N=1024 k=5: index 205 -> {nonzero:?}"
        ),
    )
}

fn c04_bgv_homomorphism() -> Outcome {
    let start = Instant::now();
    let params = BgvParams::generate(1024, 6, 30, 257, 4).unwrap();
    let sk = keygen(&params);
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let cfg = RandomProgramConfig::new(1024, 6, 4);
    let mut failed = Vec::new();
    for i in 0..BGV_PROGRAMS {
        let p = random_program(&cfg, &mut rng).unwrap();
        let plain: Vec<Plaintext> = p
            .inputs()
            .iter()
            .map(|_| Plaintext::random(1024, params.t, &mut rng))
            .collect();
        let inputs = encrypt_inputs(&params, &sk, &p, &plain, &mut rng).unwrap();
        let hints = generate_hints(&params, &sk, &p, &mut rng).unwrap();
        let got = eval_encrypted(&params, &p, &inputs, &hints).unwrap();
        let expected = eval_plain(&p, &plain).unwrap();
        let ok = got.len() == expected.len()
            && got
                .iter()
                .zip(&expected)
                .all(|(ct, e)| decrypt(ct, &sk, params.t).unwrap() == *e);
        if !ok {
            failed.push(i);
        }
    }
    let elapsed = start.elapsed();
    report(
        4,
        "BGV end-to-end homomorphism",
        failed.is_empty() && elapsed < BGV_BUDGET,
        format!(
            "{BGV_PROGRAMS} programs at N=1024, L=6, depth <= 4; failures {failed:?}; {elapsed:.1?} (limit {BGV_BUDGET:?})"
        ),
    )
}

fn c05_keyswitch_accounting() -> Outcome {
    let n = 64;
    let mut details = Vec::new();
    let mut ok = true;
    for level in [2usize, 4, 8, 16] {
        let params = BgvParams::generate(n, level + 1, 30, 257, 5).unwrap();
        for kind in ["mul", "rotate"] {
            let mut p = HomProgram::new(n).unwrap();
            let y = if kind == "mul" {
                let x = p.input(level + 1).unwrap();
                p.mul(x, x).unwrap()
            } else {
                let x = p.input(level).unwrap();
                p.rotate(x, 1).unwrap()
            };
            p.output(y).unwrap();
            let dfg = translate(&p, &naive_order(&p), &params).unwrap();
            let ks = |f: &dyn Fn(&Op) -> bool| dfg.instrs.iter().filter(|i| i.keyswitch && f(&i.op)).count();
            let counts = (
                ks(&Op::is_transform),
                ks(&|o| *o == Op::VecMul),
                ks(&|o| *o == Op::VecAdd),
            );
            let l2 = level * level;
            ok &= counts == (l2, 2 * l2, 2 * l2);
            if kind == "mul" {
                details.push(format!("L={level}: {counts:?}"));
            }
        }
    }
    let bytes = hint_bytes(16, 16384, 32);
    ok &= bytes == 32 * MIB;
    report(
        5,
        "key-switch accounting",
        ok,
        format!(
            "(transforms, muls, adds) {}; hint at L=16, N=16K = {bytes} B",
            details.join(", ")
        ),
    )
}

fn c06_restricted_moduli() -> Outcome {
    let start = Instant::now();
    let count = count_restricted_moduli(32);
    let elapsed = start.elapsed();
    let plus_one = count_restricted_moduli_in(32, Congruence::PlusOne);
    report(
        6,
        "restricted-modulus count",
        count == 6186 && elapsed < COUNT_BUDGET,
        format!(
            "primes q < 2^32, q = -1 mod 2^16: {count} (expected 6186); q = +1 mod 2^16: {plus_one}; {elapsed:.1?}"
        ),
    )
}

fn c07_multiplier_count() -> Outcome {
    let got = ntt_unit_multiplier_count(128);
    report(
        7,
        "multiplier-count model",
        got == (384, 896),
        format!("E=128 -> {got:?}"),
    )
}

fn matvec_config(slots: usize) -> (HomProgram, BgvParams, MachineConfig) {
    let p = build_matvec(4, 64, 4).unwrap();
    let params = BgvParams::generate(64, 4, 30, 257, 8).unwrap();
    (p, params, MachineConfig::desk(64, 8, slots))
}

fn replay(p: &HomProgram, params: &BgvParams, config: &MachineConfig, ordering: Ordering) -> SimStats {
    let c = compile(p, params, config, ordering).unwrap();
    let r = validate_and_run(&c.schedule, &c.dfg, config, None);
    assert!(r.passed(), "{:?}", r.violations.first());
    r.stats
}

fn c08_hint_reuse_ordering() -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    // exactly two level-4 hints, and two hints plus working space
    for slots in [64, 72] {
        let (p, params, config) = matvec_config(slots);
        let reuse = replay(&p, &params, &config, Ordering::HintReuse).traffic.ksh;
        let naive = replay(&p, &params, &config, Ordering::Program).traffic.ksh;
        ok &=
            reuse.non_compulsory == 0 && naive.compulsory == reuse.compulsory && naive.total() == 4 * naive.compulsory;
        details.push(format!(
            "{slots} slots: hint-reuse KSH {} B (compulsory {}), naive {} B = {:.3}x",
            reuse.total(),
            reuse.compulsory,
            naive.total(),
            naive.total() as f64 / naive.compulsory as f64
        ));
    }
    report(
        8,
        "hint-reuse ordering",
        ok,
        format!("matvec N=64 L=4; {}", details.join("; ")),
    )
}

/// One load per object and one store per access, so the only choice
/// phase 2 makes is which resident object to evict.
fn trace_dfg(objects: usize, trace: &[usize]) -> InstructionDfg {
    let object = |id, class, key, parts| DataObject {
        id,
        class,
        key,
        part_moduli: vec![0; parts],
        vector_bytes: 4,
    };
    let mut objs: Vec<DataObject> = (0..objects)
        .map(|i| object(i, ObjectClass::Input, ObjectKey::Cipher { node: i }, 1))
        .collect();
    let out = objs.len();
    objs.push(object(
        out,
        ObjectClass::Output,
        ObjectKey::Output { node: objects },
        trace.len(),
    ));
    let mut instrs = Vec::new();
    let mut push = |op, operands| {
        let id = instrs.len();
        instrs.push(Instr {
            id,
            op,
            operands,
            modulus: 0,
            priority: 0,
            homop: 0,
            keyswitch: false,
        });
        id
    };
    let loads: Vec<_> = (0..objects)
        .map(|o| push(Op::Load { obj: o, part: 0 }, vec![]))
        .collect();
    for (k, &o) in trace.iter().enumerate() {
        push(Op::Store { obj: out, part: k }, vec![loads[o]]);
    }
    // true next-use order
    let total = instrs.len() as u64;
    for i in &mut instrs {
        i.priority = total - i.id as u64;
    }
    InstructionDfg {
        n: 1,
        word_bits: 32,
        instrs,
        objects: objs,
        outputs: vec![out],
    }
}

/// Fewest fetches serving `trace` with `k` slots, by exhaustive search.
fn optimal_fetches(trace: &[usize], k: usize, cache: &mut Vec<usize>) -> usize {
    let Some((&x, rest)) = trace.split_first() else {
        return 0;
    };
    if cache.contains(&x) {
        return optimal_fetches(rest, k, cache);
    }
    if cache.len() < k {
        cache.push(x);
        let r = 1 + optimal_fetches(rest, k, cache);
        cache.pop();
        return r;
    }
    let mut best = usize::MAX;
    for i in 0..cache.len() {
        let old = cache[i];
        cache[i] = x;
        best = best.min(1 + optimal_fetches(rest, k, cache));
        cache[i] = old;
    }
    best
}

fn c09_eviction_optimality() -> Outcome {
    let mut traces: Vec<(usize, Vec<usize>)> = Vec::new();
    // every trace of up to 6 accesses over 4 objects
    for len in 1..=6u32 {
        for code in 0..4usize.pow(len) {
            traces.push((4, (0..len).map(|i| code / 4usize.pow(i) % 4).collect()));
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    for _ in 0..3000 {
        let len = rng.gen_range(7..=12);
        let objects = rng.gen_range(2..=6);
        traces.push((objects, (0..len).map(|_| rng.gen_range(0..objects)).collect()));
    }
    let mut cases = 0;
    let mut bad = Vec::new();
    for (objects, trace) in &traces {
        for k in 1..=4 {
            let dms = schedule_offchip_slots(&trace_dfg(*objects, trace), k).unwrap();
            cases += 1;
            if dms.fetches().count() != optimal_fetches(trace, k, &mut Vec::new()) {
                bad.push((trace.clone(), k));
            }
        }
    }
    report(
        9,
        "eviction optimality",
        bad.is_empty(),
        format!(
            "{cases} (trace, slots) cases, <= 12 accesses, <= 4 slots; {} differ from the optimum",
            bad.len()
        ),
    )
}

fn c10_schedule_validity() -> Outcome {
    let mut runs = 0;
    let mut failures = Vec::new();
    let mut run = |label: String, p: &HomProgram, params: &BgvParams, config: &MachineConfig, ordering| {
        let c = compile(p, params, config, ordering).unwrap();
        let (report, verdict) = functional_run(p, params, &c.dfg, &c.schedule, config, 10 + runs).unwrap();
        runs += 1;
        if !report.passed() || !verdict.is_some_and(|v| v.passed()) {
            failures.push(format!("{label}: {} violations, {verdict:?}", report.violations.len()));
        }
    };
    let (p, params, _) = matvec_config(72);
    for slots in [36, 72, 400] {
        for (name, ordering) in [("reuse", Ordering::HintReuse), ("naive", Ordering::Program)] {
            let config = MachineConfig::desk(64, 8, slots);
            run(format!("matvec/{name}/{slots}"), &p, &params, &config, ordering);
        }
    }
    let mut low = MachineConfig::desk(64, 8, 72);
    low.ntt_model = FuModel::LowThroughput;
    low.automorphism_model = FuModel::LowThroughput;
    run("matvec/low-throughput".into(), &p, &params, &low, Ordering::HintReuse);
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let params6 = BgvParams::generate(64, 6, 30, 257, 10).unwrap();
    for i in 0..12 {
        let p = random_program(&RandomProgramConfig::new(64, 6, 4), &mut rng).unwrap();
        let slots = [24, 48, 400][i % 3];
        run(
            format!("random{i}/{slots}"),
            &p,
            &params6,
            &MachineConfig::desk(64, 8, slots),
            Ordering::HintReuse,
        );
    }
    let mut suites = 0;
    for s in fhesched::bench::SUITES {
        let out = run_suite(s, &MachineConfig::desk(64, 8, 72), 10).unwrap();
        suites += 1;
        for c in out.checks.iter().filter(|c| !c.passed) {
            failures.push(format!("{s}: {}", c.name));
        }
    }
    report(
        10,
        "schedule validity",
        failures.is_empty(),
        format!("{runs} co-simulated schedules and {suites} bench suites; failures {failures:?}"),
    )
}

fn c11_traffic_conservation() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    let (p, params, _) = matvec_config(72);
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let params6 = BgvParams::generate(64, 6, 30, 257, 11).unwrap();
    let mut programs = vec![("matvec".to_string(), p, params)];
    for i in 0..4 {
        let r = random_program(&RandomProgramConfig::new(64, 6, 4), &mut rng).unwrap();
        programs.push((format!("random{i}"), r, params6.clone()));
    }
    for (name, p, params) in &programs {
        // enough slots for every object part and every computed value
        let footprint = {
            let c = compile(p, params, &MachineConfig::desk(64, 8, 400), Ordering::HintReuse).unwrap();
            c.dfg.objects.iter().map(DataObject::parts).sum::<usize>()
                + c.dfg.instrs.iter().filter(|i| i.op.produces_value()).count()
        };
        for slots in [24, 36, 72, footprint] {
            for ordering in [Ordering::HintReuse, Ordering::Program] {
                let t = replay(p, params, &MachineConfig::desk(64, 8, slots), ordering).traffic;
                checked += 1;
                let conserved = t.classified_total() == t.total && t.intermediate().compulsory == 0;
                let roomy = slots < footprint
                    || (t.ksh.non_compulsory == 0 && t.io.non_compulsory == 0 && t.intermediate().total() == 0);
                if !conserved || !roomy {
                    bad.push(format!("{name}/{slots}: {t:?}"));
                }
            }
        }
    }
    report(
        11,
        "traffic conservation",
        bad.is_empty(),
        format!("{checked} runs over 5 programs and 4 scratchpad sizes; violations {bad:?}"),
    )
}

fn c12_sensitivity() -> Outcome {
    let (p, params, full) = matvec_config(72);
    let mut low = full.clone();
    low.ntt_model = FuModel::LowThroughput;
    low.automorphism_model = FuModel::LowThroughput;
    let a = replay(&p, &params, &full, Ordering::HintReuse).total_cycles;
    let b = replay(&p, &params, &low, Ordering::HintReuse).total_cycles;
    let ratio = b as f64 / a as f64;
    report(
        12,
        "sensitivity trend",
        ratio > SENSITIVITY_FLOOR,
        format!("matvec {a} -> {b} cycles with low-throughput NTT and automorphism units, {ratio:.3}x (need > {SENSITIVITY_FLOOR})"),
    )
}

fn main() {
    let criteria: [fn() -> Outcome; 12] = [
        c01_ntt_oracle,
        c02_four_step_equivalence,
        c03_automorphism,
        c04_bgv_homomorphism,
        c05_keyswitch_accounting,
        c06_restricted_moduli,
        c07_multiplier_count,
        c08_hint_reuse_ordering,
        c09_eviction_optimality,
        c10_schedule_validity,
        c11_traffic_conservation,
        c12_sensitivity,
    ];
    let outcomes: Vec<Result<Outcome, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria.iter().map(|&c| s.spawn(c)).collect();
        handles
            .into_iter()
            .map(|h| {
                h.join().map_err(|e| {
                    e.downcast_ref::<String>()
                        .cloned()
                        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_default()
                })
            })
            .collect()
    });
    let mut failed = 0;
    for (i, o) in outcomes.into_iter().enumerate() {
        let o = o.unwrap_or_else(|panic| Outcome {
            n: i as u32 + 1,
            name: "panicked",
            passed: false,
            detail: panic,
        });
        println!(
            "criterion {:>2}: {} {}: {}",
            o.n,
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {} of 12 criteria pass", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
