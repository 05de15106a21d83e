//! Desk-scale benchmark suites.

use rand::Rng;
use thiserror::Error;

use crate::bgv::{BgvError, BgvParams};
use crate::compiler::{
    compile, schedule_cycles, schedule_offchip, CompileError, DataObject, Instr, InstructionDfg, ObjectClass,
    ObjectKey, Op, Ordering,
};
use crate::dsl::{build_matvec, DslError, HomProgram};
use crate::formats::RunRow;
use crate::ring::{automorphism_eval, ntt_reference, Domain, ResidueVector};
use crate::sim::{functional_run, validate_and_run, FunctionalError, MachineConfig, MemoryImage};

pub const SUITES: [&str; 5] = [
    "matvec",
    "keyswitch-micro",
    "ntt-micro",
    "automorphism-micro",
    "reuse-ablation",
];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown suite `{0}` (expected one of {list})", list = SUITES.join(", "))]
    UnknownSuite(String),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Bgv(#[from] BgvError),
    #[error(transparent)]
    Dsl(#[from] DslError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchOutcome {
    pub rows: Vec<RunRow>,
    pub checks: Vec<Check>,
    /// Naive-order over hint-reuse KSH bytes, for `reuse-ablation`.
    pub ksh_ratio: Option<f64>,
}

impl BenchOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }
}

/// Ring dimension used by the suites on `config`.
pub fn bench_n(config: &MachineConfig) -> usize {
    64.max(config.lanes)
}

pub fn run_suite(name: &str, config: &MachineConfig, seed: u64) -> Result<BenchOutcome, BenchError> {
    config.validate().map_err(CompileError::from)?;
    match name {
        "matvec" => matvec(config, seed),
        "keyswitch-micro" => keyswitch_micro(config, seed),
        "ntt-micro" => transform_micro(config, seed, false),
        "automorphism-micro" => transform_micro(config, seed, true),
        "reuse-ablation" => reuse_ablation(config, seed),
        other => Err(BenchError::UnknownSuite(other.into())),
    }
}

fn matvec_program(config: &MachineConfig) -> Result<HomProgram, DslError> {
    build_matvec(4, bench_n(config), 4)
}

fn matvec(config: &MachineConfig, seed: u64) -> Result<BenchOutcome, BenchError> {
    let p = matvec_program(config)?;
    let params = BgvParams::generate(p.n(), 4, 30, 257, seed)?;
    let c = compile(&p, &params, config, Ordering::HintReuse)?;
    let (report, verdict) = functional_run(&p, &params, &c.dfg, &c.schedule, config, seed)?;
    let mut out = BenchOutcome::default();
    out.rows.push(RunRow::new("matvec", &config.name, &report.stats));
    out.check(
        "matvec replay",
        report.passed(),
        format!("{} violations", report.violations.len()),
    );
    out.check(
        "matvec functional",
        verdict.is_some_and(|v| v.passed()),
        format!("{verdict:?}"),
    );
    Ok(out)
}

fn reuse_ablation(config: &MachineConfig, seed: u64) -> Result<BenchOutcome, BenchError> {
    let p = matvec_program(config)?;
    let params = BgvParams::generate(p.n(), 4, 30, 257, seed)?;
    let mut out = BenchOutcome::default();
    let mut ksh = Vec::new();
    for (label, ordering) in [
        ("hint-reuse", Ordering::HintReuse),
        ("program-order", Ordering::Program),
    ] {
        let c = compile(&p, &params, config, ordering)?;
        let report = validate_and_run(&c.schedule, &c.dfg, config, None);
        out.check(
            format!("{label} replay"),
            report.passed(),
            format!("{} violations", report.violations.len()),
        );
        let row = RunRow::new(&format!("matvec/{label}"), &config.name, &report.stats);
        ksh.push(row.ksh_bytes());
        out.rows.push(row);
    }
    out.ksh_ratio = Some(ksh[1] as f64 / ksh[0].max(1) as f64);
    Ok(out)
}

fn keyswitch_micro(config: &MachineConfig, seed: u64) -> Result<BenchOutcome, BenchError> {
    let n = bench_n(config);
    let mut out = BenchOutcome::default();
    for level in [2, 4] {
        for kind in ["mul", "rotate"] {
            let mut p = HomProgram::new(n)?;
            let y = if kind == "mul" {
                let x = p.input(level + 1)?;
                p.mul(x, x)?
            } else {
                let x = p.input(level)?;
                p.rotate(x, 1)?
            };
            p.output(y)?;
            let params = BgvParams::generate(n, level + 1, 30, 257, seed)?;
            let c = compile(&p, &params, config, Ordering::HintReuse)?;
            let ks = |f: fn(&Op) -> bool| c.dfg.instrs.iter().filter(|i| i.keyswitch && f(&i.op)).count();
            let counts = (ks(Op::is_transform), ks(|o| *o == Op::VecMul), ks(|o| *o == Op::VecAdd));
            let l2 = level * level;
            let name = format!("keyswitch-{kind}-L{level}");
            out.check(
                format!("{name} counts"),
                counts == (l2, 2 * l2, 2 * l2),
                format!(
                    "transforms, muls, adds = {counts:?}; expected ({l2}, {}, {})",
                    2 * l2,
                    2 * l2
                ),
            );
            let (report, verdict) = functional_run(&p, &params, &c.dfg, &c.schedule, config, seed)?;
            out.check(
                format!("{name} functional"),
                verdict.is_some_and(|v| v.bit_exact),
                format!("{verdict:?}"),
            );
            out.rows.push(RunRow::new(&name, &config.name, &report.stats));
        }
    }
    Ok(out)
}

/// One input object of `moduli` parts and one output object per op,
/// each op applied part-wise.
fn micro_dfg(n: usize, word_bits: u32, moduli: usize, ops: &[Op]) -> InstructionDfg {
    let vb = (n * word_bits as usize / 8) as u64;
    let part_moduli: Vec<usize> = (0..moduli).collect();
    let mut objects = vec![DataObject {
        id: 0,
        class: ObjectClass::Input,
        key: ObjectKey::Cipher { node: 0 },
        part_moduli: part_moduli.clone(),
        vector_bytes: vb,
    }];
    let mut instrs: Vec<Instr> = Vec::new();
    let mut push = |op: Op, operands: Vec<usize>, modulus: usize, homop: usize| {
        let id = instrs.len();
        instrs.push(Instr {
            id,
            op,
            operands,
            modulus,
            priority: 0,
            homop,
            keyswitch: false,
        });
        id
    };
    let loads: Vec<usize> = (0..moduli)
        .map(|j| push(Op::Load { obj: 0, part: j }, vec![], j, 0))
        .collect();
    for (i, op) in ops.iter().enumerate() {
        let obj = objects.len();
        objects.push(DataObject {
            id: obj,
            class: ObjectClass::Output,
            key: ObjectKey::Output { node: i + 1 },
            part_moduli: part_moduli.clone(),
            vector_bytes: vb,
        });
        for (j, &x) in loads.iter().enumerate() {
            let op = match *op {
                Op::Ntt { .. } => Op::Ntt { src: j },
                other => other,
            };
            let y = push(op, vec![x], j, i + 1);
            push(Op::Store { obj, part: j }, vec![y], j, i + 1);
        }
    }
    let count = instrs.len() as u64;
    for ins in &mut instrs {
        ins.priority = count - ins.id as u64;
    }
    InstructionDfg {
        n,
        word_bits,
        instrs,
        outputs: (1..objects.len()).collect(),
        objects,
    }
}

fn transform_micro(config: &MachineConfig, seed: u64, automorphism: bool) -> Result<BenchOutcome, BenchError> {
    let n = bench_n(config);
    let params = BgvParams::generate(n, 2, 30, 257, seed)?;
    let ks: Vec<u64> = vec![3, 5, 2 * n as u64 - 1];
    let (name, domain, ops) = if automorphism {
        (
            "automorphism-micro",
            Domain::Ntt,
            ks.iter().map(|&k| Op::Automorphism { k }).collect::<Vec<_>>(),
        )
    } else {
        ("ntt-micro", Domain::Coefficient, vec![Op::Ntt { src: 0 }])
    };
    let dfg = micro_dfg(n, params.basis.word_bits(), 2, &ops);
    let dms = schedule_offchip(&dfg, config)?;
    let schedule = schedule_cycles(&dms, &dfg, config)?;
    let mut rng = params.rng(2);
    let mut image = MemoryImage {
        basis: params.basis.clone(),
        parts: Default::default(),
    };
    let mut inputs = Vec::new();
    for j in 0..2 {
        let m = *params.basis.modulus(j);
        let v: Vec<u64> = (0..n).map(|_| rng.gen_range(0..m.q())).collect();
        let rv = ResidueVector::new(v, m, domain).map_err(BgvError::from)?;
        image.parts.insert((0, j), rv.clone());
        inputs.push(rv);
    }
    let report = validate_and_run(&schedule, &dfg, config, Some(&image));
    let mut out = BenchOutcome::default();
    out.check(
        format!("{name} replay"),
        report.passed(),
        format!("{} violations", report.violations.len()),
    );
    let mut mismatches = 0;
    if let Some(mem) = &report.memory {
        for (i, op) in ops.iter().enumerate() {
            for (j, x) in inputs.iter().enumerate() {
                let expected = match *op {
                    Op::Automorphism { k } => automorphism_eval(x, k),
                    _ => ntt_reference(x),
                }
                .map_err(BgvError::from)?;
                if mem.parts.get(&(i + 1, j)) != Some(&expected) {
                    mismatches += 1;
                }
            }
        }
    }
    out.check(
        format!("{name} matches reference"),
        report.memory.is_some() && mismatches == 0,
        format!("{mismatches} mismatching vectors"),
    );
    out.rows.push(RunRow::new(name, &config.name, &report.stats));
    Ok(out)
}
