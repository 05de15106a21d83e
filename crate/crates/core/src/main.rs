use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fhesched::bench::{run_suite, BenchError};
use fhesched::bgv::BgvParams;
use fhesched::compiler::{compile, CompileError, Ordering};
use fhesched::dsl::{parse_program, HomProgram};
use fhesched::formats::{
    emit_report, read_arch, read_artifacts, read_file, write_artifacts, Artifacts, FormatError, RunRow,
};
use fhesched::sim::{functional_run, sweep, validate_and_run, MachineConfig};

#[derive(Parser)]
#[command(
    name = "fhesched",
    version,
    about = "Compile and simulate BGV programs on a vector FHE accelerator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    HintReuse,
    Program,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a program into DFG, data-movement and stream artifacts.
    Compile {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        arch: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seed for modulus selection.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "hint-reuse")]
        order: OrderArg,
    },
    /// Replay compiled artifacts, printing a CSV report row.
    Simulate {
        schedule_dir: PathBuf,
        #[arg(long)]
        arch: PathBuf,
        /// Encrypt seeded inputs, run them through the schedule and check
        /// the decrypted outputs.
        #[arg(long, value_name = "SEED")]
        functional: Option<u64>,
        /// Write a key = value run log here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run a built-in benchmark suite.
    Bench {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        arch: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compile and replay one program on every matching arch file.
    Sweep {
        /// Glob over architecture files.
        #[arg(long)]
        arch: String,
        #[arg(long)]
        program: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Exit 1 for failed runs, 2 for bad input.
enum Failure {
    Run(String),
    Usage(String),
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<CompileError> for Failure {
    fn from(e: CompileError) -> Self {
        match e {
            CompileError::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

fn read_program(path: &Path) -> Result<HomProgram, Failure> {
    let text = read_file(path)?;
    parse_program(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn cmd_compile(program: &Path, arch: &Path, out: &Path, seed: u64, order: OrderArg) -> Result<(), Failure> {
    let config = read_arch(arch)?;
    let prog = read_program(program)?;
    let params = BgvParams::generate(prog.n(), prog.max_level().max(1), 30, 257, seed)
        .map_err(|e| Failure::Run(e.to_string()))?;
    let ordering = match order {
        OrderArg::HintReuse => Ordering::HintReuse,
        OrderArg::Program => Ordering::Program,
    };
    let c = compile(&prog, &params, &config, ordering)?;
    eprintln!(
        "compiled {} instructions, {} actions, {} cycles on {}",
        c.dfg.instrs.len(),
        c.dms.actions.len(),
        c.schedule.total_cycles,
        config.name
    );
    write_artifacts(
        out,
        &Artifacts {
            program: prog,
            params,
            order: c.order,
            dfg: c.dfg,
            dms: c.dms,
            schedule: c.schedule,
        },
    )?;
    Ok(())
}

fn cmd_simulate(dir: &Path, arch: &Path, functional: Option<u64>, log: Option<&Path>) -> Result<(), Failure> {
    let config = read_arch(arch)?;
    let a = read_artifacts(dir)?;
    let (report, verdict) = match functional {
        Some(seed) => functional_run(&a.program, &a.params, &a.dfg, &a.schedule, &config, seed)
            .map_err(|e| Failure::Run(e.to_string()))
            .map(|(r, v)| (r, Some(v)))?,
        None => (validate_and_run(&a.schedule, &a.dfg, &config, None), None),
    };
    let row = RunRow::new(&dir.display().to_string(), &config.name, &report.stats);
    print!("{}", emit_report(&[row]));
    let mut text = String::new();
    let _ = writeln!(text, "schedule = {}", dir.display());
    let _ = writeln!(text, "config = {}", config.name);
    let _ = writeln!(text, "cycles = {}", report.stats.total_cycles);
    let _ = writeln!(text, "violations = {}", report.violations.len());
    for v in &report.violations {
        eprintln!("violation: {v}");
        let _ = writeln!(text, "violation = {v}");
    }
    let verdict_ok = match verdict {
        None => true,
        Some(v) => {
            let ok = v.is_some_and(|v| v.passed());
            let status = if ok { "PASS" } else { "FAIL" };
            println!("{status}");
            let _ = writeln!(text, "functional = {status}");
            if let Some(v) = v {
                let _ = writeln!(text, "bit_exact = {}", v.bit_exact);
                let _ = writeln!(text, "decrypts = {}", v.decrypts);
                let _ = writeln!(text, "reference_decrypts = {}", v.reference_decrypts);
            }
            ok
        }
    };
    if let Some(path) = log {
        fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    if !report.passed() {
        return Err(Failure::Run(format!("{} violations", report.violations.len())));
    }
    if !verdict_ok {
        return Err(Failure::Run("functional check failed".into()));
    }
    Ok(())
}

fn cmd_bench(suite: &str, arch: &Path, seed: u64) -> Result<(), Failure> {
    let config = read_arch(arch)?;
    let out = run_suite(suite, &config, seed).map_err(|e| match e {
        BenchError::UnknownSuite(_) => Failure::Usage(e.to_string()),
        _ => Failure::Run(e.to_string()),
    })?;
    print!("{}", emit_report(&out.rows));
    for c in &out.checks {
        eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(r) = out.ksh_ratio {
        eprintln!("ksh_ratio = {r:.3}");
    }
    if out.passed() {
        Ok(())
    } else {
        Err(Failure::Run(format!("suite {suite} failed")))
    }
}

fn cmd_sweep(pattern: &str, program: &Path, seed: u64) -> Result<(), Failure> {
    let paths = glob::glob(pattern).map_err(|e| Failure::Usage(format!("bad glob `{pattern}`: {e}")))?;
    let mut configs: Vec<MachineConfig> = Vec::new();
    for p in paths {
        let p = p.map_err(|e| Failure::Usage(e.to_string()))?;
        configs.push(read_arch(&p)?);
    }
    if configs.is_empty() {
        return Err(Failure::Usage(format!("no arch files match `{pattern}`")));
    }
    let prog = read_program(program)?;
    let name = program
        .file_stem()
        .map_or_else(|| "program".into(), |s| s.to_string_lossy().into_owned());
    let table = sweep(&configs, &[(name, prog)], seed);
    print!("{}", table.to_csv());
    for &(a, b) in &table.anomalies {
        eprintln!(
            "warning: {} has more of every resource than {} but is slower",
            table.points[a].config.name, table.points[b].config.name
        );
    }
    let failed = table.points.iter().filter(|p| p.result.is_err()).count();
    if failed > 0 {
        return Err(Failure::Run(format!("{failed} runs failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Compile {
            program,
            arch,
            out,
            seed,
            order,
        } => cmd_compile(program, arch, out, *seed, *order),
        Command::Simulate {
            schedule_dir,
            arch,
            functional,
            log,
        } => cmd_simulate(schedule_dir, arch, *functional, log.as_deref()),
        Command::Bench { suite, arch, seed } => cmd_bench(suite, arch, *seed),
        Command::Sweep { arch, program, seed } => cmd_sweep(arch, program, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
