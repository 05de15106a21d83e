//! Design-space sweeps over machine configurations.

use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::config::{FuKind, MachineConfig};
use super::validate::validate_and_run;
use crate::bgv::BgvParams;
use crate::compiler::{compile, Ordering};
use crate::dsl::HomProgram;
use crate::formats::RunRow;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub program: String,
    pub config: MachineConfig,
    pub result: Result<RunRow, String>,
    /// No other run of the same program uses no more of every resource
    /// and finishes at least as fast, strictly better in one.
    pub pareto: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub points: Vec<SweepPoint>,
    /// `(richer, poorer)` point pairs where more of every resource gave
    /// more cycles.
    pub anomalies: Vec<(usize, usize)>,
}

/// Flat CSV row of a sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub program: String,
    pub config: String,
    pub clusters: usize,
    pub banks: usize,
    pub hbm_bytes_per_cycle: u64,
    pub scratchpad_bytes: u64,
    pub cycles: Option<u64>,
    pub ksh_bytes: Option<u64>,
    pub offchip_bytes: Option<u64>,
    pub noncompulsory_bytes: Option<u64>,
    pub peak_resident_bytes: Option<u64>,
    pub pareto: bool,
    pub error: String,
}

fn resources(c: &MachineConfig) -> Vec<u64> {
    let mut r: Vec<u64> = vec![
        c.clusters as u64,
        c.scratchpad_bytes,
        c.banks as u64,
        c.bank_ports as u64,
        c.xbar_ports_per_cluster as u64,
        c.rf_vectors_per_cluster as u64,
        c.rf_read_ports as u64,
        c.rf_write_ports as u64,
        c.hbm_bytes_per_cycle,
    ];
    r.extend(FuKind::ALL.iter().map(|&k| c.fu_count(k, 1 << 20) as u64));
    r
}

/// `a` has at least as much of every resource as `b`, with the same
/// timing model otherwise.
fn at_least(a: &MachineConfig, b: &MachineConfig) -> bool {
    let same = a.lanes == b.lanes
        && a.word_bits == b.word_bits
        && a.fu_latencies == b.fu_latencies
        && a.ntt_model == b.ntt_model
        && a.automorphism_model == b.automorphism_model
        && a.port_bytes == b.port_bytes
        && a.mem_worst_case_latency == b.mem_worst_case_latency;
    same && resources(a).iter().zip(resources(b)).all(|(x, y)| *x >= y)
}

fn run_one(config: &MachineConfig, name: &str, program: &HomProgram, seed: u64) -> Result<RunRow, String> {
    let params =
        BgvParams::generate(program.n(), program.max_level().max(1), 30, 257, seed).map_err(|e| e.to_string())?;
    let c = compile(program, &params, config, Ordering::HintReuse).map_err(|e| e.to_string())?;
    let report = validate_and_run(&c.schedule, &c.dfg, config, None);
    if let Some(v) = report.violations.first() {
        return Err(format!("{} violations, first: {v}", report.violations.len()));
    }
    Ok(RunRow::new(name, &config.name, &report.stats))
}

/// Compiles and replays every (program, config) pair on a worker pool.
/// Failed runs are recorded, not fatal.
pub fn sweep(configs: &[MachineConfig], programs: &[(String, HomProgram)], seed: u64) -> SweepTable {
    let jobs: Vec<(usize, usize)> = (0..programs.len())
        .flat_map(|p| (0..configs.len()).map(move |c| (p, c)))
        .collect();
    let results: Mutex<Vec<Option<Result<RunRow, String>>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(jobs.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, AtomicOrdering::Relaxed);
                let Some(&(p, c)) = jobs.get(i) else { break };
                let (name, prog) = &programs[p];
                let r = run_one(&configs[c], name, prog, seed);
                results.lock().expect("no poisoned worker")[i] = Some(r);
            });
        }
    });
    let results = results.into_inner().expect("workers joined");
    let mut points: Vec<SweepPoint> = jobs
        .iter()
        .zip(results)
        .map(|(&(p, c), r)| SweepPoint {
            program: programs[p].0.clone(),
            config: configs[c].clone(),
            result: r.expect("every job ran"),
            pareto: false,
        })
        .collect();
    let cycles = |i: usize, pts: &[SweepPoint]| pts[i].result.as_ref().ok().map(|r| r.cycles);
    let mut anomalies = Vec::new();
    for i in 0..points.len() {
        let Some(ci) = cycles(i, &points) else { continue };
        let mut dominated = false;
        for j in 0..points.len() {
            if i == j || points[i].program != points[j].program {
                continue;
            }
            let Some(cj) = cycles(j, &points) else { continue };
            let (a, b) = (&points[i].config, &points[j].config);
            // j uses no more than i and is no slower
            if at_least(a, b) && cj <= ci && (cj < ci || resources(a) != resources(b)) {
                dominated = true;
            }
            if at_least(a, b) && resources(a) != resources(b) && ci > cj {
                anomalies.push((i, j));
            }
        }
        points[i].pareto = !dominated;
    }
    SweepTable { points, anomalies }
}

impl SweepTable {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.points
            .iter()
            .map(|p| {
                let ok = p.result.as_ref().ok();
                SweepRow {
                    program: p.program.clone(),
                    config: p.config.name.clone(),
                    clusters: p.config.clusters,
                    banks: p.config.banks,
                    hbm_bytes_per_cycle: p.config.hbm_bytes_per_cycle,
                    scratchpad_bytes: p.config.scratchpad_bytes,
                    cycles: ok.map(|r| r.cycles),
                    ksh_bytes: ok.map(|r| r.ksh_bytes()),
                    offchip_bytes: ok.map(|r| {
                        r.ksh_bytes()
                            + r.io_bytes_compulsory
                            + r.io_bytes_noncompulsory
                            + r.intermediate_load_bytes
                            + r.intermediate_store_bytes
                    }),
                    noncompulsory_bytes: ok.map(|r| {
                        r.ksh_bytes_noncompulsory
                            + r.io_bytes_noncompulsory
                            + r.intermediate_load_bytes
                            + r.intermediate_store_bytes
                    }),
                    peak_resident_bytes: ok.map(|r| r.peak_resident_bytes),
                    pareto: p.pareto,
                    error: p.result.as_ref().err().cloned().unwrap_or_default(),
                }
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in self.rows() {
            w.serialize(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::build_matvec;

    fn matvec() -> Vec<(String, HomProgram)> {
        vec![("matvec".into(), build_matvec(4, 64, 4).unwrap())]
    }

    #[test]
    fn identical_configs_give_identical_rows() {
        let c = MachineConfig::desk(64, 8, 72);
        let t = sweep(&[c.clone(), c], &matvec(), 0);
        let rows = t.rows();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], rows[1]);
        assert!(rows[0].pareto && rows[0].cycles.is_some());
        assert!(t.anomalies.is_empty());
    }

    #[test]
    fn doubling_scratchpad_cuts_refetches() {
        let small = MachineConfig::desk(64, 8, 36);
        let big = MachineConfig::desk(64, 8, 72);
        let t = sweep(&[small, big], &matvec(), 0);
        let rows = t.rows();
        assert!(rows[0].noncompulsory_bytes.unwrap() > 0);
        assert!(rows[1].noncompulsory_bytes.unwrap() < rows[0].noncompulsory_bytes.unwrap());
        assert!(rows[1].pareto);
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn failures_do_not_abort() {
        let tiny = MachineConfig::desk(64, 8, 2);
        let ok = MachineConfig::desk(64, 8, 72);
        let t = sweep(&[tiny, ok], &matvec(), 0);
        assert!(t.points[0].result.is_err());
        assert!(t.points[1].result.is_ok());
        assert!(!t.points[0].pareto);
    }
}
