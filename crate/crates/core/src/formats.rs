//! On-disk formats: the sectioned architecture file, the three compile
//! artifacts (line-per-record JSON) and the CSV run report.

use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bgv::BgvParams;
use crate::compiler::{
    Component, CycleSchedule, DataMovementSchedule, DataObject, DmsAction, Instr, InstrId, InstructionDfg, ObjId,
    StreamEntry, TimedEvent,
};
use crate::dsl::{emit_program, parse_program, HomProgram, NodeId, ParseError};
use crate::sim::{ConfigError, FuCounts, FuKind, FuLatencies, FuModel, MachineConfig, SimStats};

pub const DFG_FILE: &str = "dfg.jsonl";
pub const DMS_FILE: &str = "dms.jsonl";
pub const STREAMS_FILE: &str = "streams.jsonl";
pub const ARTIFACT_FILES: [&str; 3] = [DFG_FILE, DMS_FILE, STREAMS_FILE];

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },
    #[error("{file}: {msg}")]
    Invalid { file: String, msg: String },
    #[error("arch file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("arch file: {0}")]
    Config(#[from] ConfigError),
    #[error("program: {0}")]
    Program(#[from] ParseError),
    #[error("report: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_file(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(io_err(path))
}

// ---- architecture description ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArchFile {
    machine: MachineSection,
    functional_units: FuSection,
    latencies: FuLatencies,
    scratchpad: ScratchpadSection,
    register_file: RegisterFileSection,
    memory: MemorySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MachineSection {
    name: String,
    clusters: usize,
    lanes: usize,
    word_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FuSection {
    ntt: usize,
    automorphism: usize,
    multiplier: usize,
    adder: usize,
    ntt_model: FuModel,
    automorphism_model: FuModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScratchpadSection {
    bytes: u64,
    banks: usize,
    bank_ports: usize,
    xbar_ports_per_cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegisterFileSection {
    vectors_per_cluster: usize,
    read_ports: usize,
    write_ports: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemorySection {
    hbm_bytes_per_cycle: u64,
    port_bytes: usize,
    worst_case_latency: u64,
}

impl From<&MachineConfig> for ArchFile {
    fn from(c: &MachineConfig) -> Self {
        let f = c.fus_per_cluster;
        Self {
            machine: MachineSection {
                name: c.name.clone(),
                clusters: c.clusters,
                lanes: c.lanes,
                word_bits: c.word_bits,
            },
            functional_units: FuSection {
                ntt: f.ntt,
                automorphism: f.automorphism,
                multiplier: f.multiplier,
                adder: f.adder,
                ntt_model: c.ntt_model,
                automorphism_model: c.automorphism_model,
            },
            latencies: c.fu_latencies,
            scratchpad: ScratchpadSection {
                bytes: c.scratchpad_bytes,
                banks: c.banks,
                bank_ports: c.bank_ports,
                xbar_ports_per_cluster: c.xbar_ports_per_cluster,
            },
            register_file: RegisterFileSection {
                vectors_per_cluster: c.rf_vectors_per_cluster,
                read_ports: c.rf_read_ports,
                write_ports: c.rf_write_ports,
            },
            memory: MemorySection {
                hbm_bytes_per_cycle: c.hbm_bytes_per_cycle,
                port_bytes: c.port_bytes,
                worst_case_latency: c.mem_worst_case_latency,
            },
        }
    }
}

impl From<ArchFile> for MachineConfig {
    fn from(a: ArchFile) -> Self {
        let f = a.functional_units;
        Self {
            name: a.machine.name,
            clusters: a.machine.clusters,
            lanes: a.machine.lanes,
            word_bits: a.machine.word_bits,
            fus_per_cluster: FuCounts {
                ntt: f.ntt,
                automorphism: f.automorphism,
                multiplier: f.multiplier,
                adder: f.adder,
            },
            fu_latencies: a.latencies,
            ntt_model: f.ntt_model,
            automorphism_model: f.automorphism_model,
            scratchpad_bytes: a.scratchpad.bytes,
            banks: a.scratchpad.banks,
            bank_ports: a.scratchpad.bank_ports,
            xbar_ports_per_cluster: a.scratchpad.xbar_ports_per_cluster,
            rf_vectors_per_cluster: a.register_file.vectors_per_cluster,
            rf_read_ports: a.register_file.read_ports,
            rf_write_ports: a.register_file.write_ports,
            hbm_bytes_per_cycle: a.memory.hbm_bytes_per_cycle,
            port_bytes: a.memory.port_bytes,
            mem_worst_case_latency: a.memory.worst_case_latency,
        }
    }
}

/// Parses and validates an architecture description.
pub fn parse_arch(text: &str) -> Result<MachineConfig, FormatError> {
    let arch: ArchFile = toml::from_str(text)?;
    let config = MachineConfig::from(arch);
    config.validate()?;
    Ok(config)
}

pub fn emit_arch(config: &MachineConfig) -> String {
    toml::to_string(&ArchFile::from(config)).expect("plain data serializes")
}

pub fn read_arch(path: &Path) -> Result<MachineConfig, FormatError> {
    parse_arch(&read_file(path)?)
}

// ---- compile artifacts ----

/// Everything `compile` produces plus what a functional run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub program: HomProgram,
    pub params: BgvParams,
    pub order: Vec<NodeId>,
    pub dfg: InstructionDfg,
    pub dms: DataMovementSchedule,
    pub schedule: CycleSchedule,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum DfgRecord {
    Header {
        n: usize,
        word_bits: u32,
        outputs: Vec<ObjId>,
        order: Vec<NodeId>,
    },
    Params(BgvParams),
    Program {
        text: String,
    },
    Object(DataObject),
    Instr(Instr),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum DmsRecord {
    Header { slots: usize, vector_bytes: u64 },
    Object(DataObject),
    Step { resident_bytes: u64 },
    Action(DmsAction),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum StreamRecord {
    Header {
        n: usize,
        slots: usize,
        total_cycles: u64,
        outputs: Vec<ObjId>,
    },
    Object(DataObject),
    Alias {
        load: InstrId,
        value: InstrId,
    },
    Stream {
        component: Component,
        start: u64,
    },
    /// Belongs to the preceding stream.
    Entry(StreamEntry),
}

fn write_records<T: Serialize>(path: &Path, records: impl Iterator<Item = T>) -> Result<(), FormatError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = io::BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(&r).expect("plain data serializes");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, FormatError> {
    let text = read_file(path)?;
    let file = path
        .file_name()
        .map_or_else(String::new, |f| f.to_string_lossy().into_owned());
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|r| (i + 1, r))
                .map_err(|e| FormatError::Parse {
                    file: file.clone(),
                    line: i + 1,
                    msg: e.to_string(),
                })
        })
        .collect()
}

fn invalid(file: &str, msg: impl Into<String>) -> FormatError {
    FormatError::Invalid {
        file: file.into(),
        msg: msg.into(),
    }
}

/// Writes exactly the three artifact files into `dir`, creating it.
pub fn write_artifacts(dir: &Path, a: &Artifacts) -> Result<(), FormatError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let program = emit_program(&a.program);
    let dfg = [
        DfgRecord::Header {
            n: a.dfg.n,
            word_bits: a.dfg.word_bits,
            outputs: a.dfg.outputs.clone(),
            order: a.order.clone(),
        },
        DfgRecord::Params(a.params.clone()),
    ]
    .into_iter()
    .chain(program.lines().map(|l| DfgRecord::Program { text: l.to_string() }))
    .chain(a.dfg.objects.iter().cloned().map(DfgRecord::Object))
    .chain(a.dfg.instrs.iter().cloned().map(DfgRecord::Instr));
    write_records(&dir.join(DFG_FILE), dfg)?;

    let dms = std::iter::once(DmsRecord::Header {
        slots: a.dms.slots,
        vector_bytes: a.dms.vector_bytes,
    })
    .chain(a.dms.objects.iter().cloned().map(DmsRecord::Object))
    .chain(
        a.dms
            .resident_bytes
            .iter()
            .map(|&b| DmsRecord::Step { resident_bytes: b }),
    )
    .chain(a.dms.actions.iter().cloned().map(DmsRecord::Action));
    write_records(&dir.join(DMS_FILE), dms)?;

    let s = &a.schedule;
    let streams = std::iter::once(StreamRecord::Header {
        n: s.n,
        slots: s.slots,
        total_cycles: s.total_cycles,
        outputs: s.outputs.clone(),
    })
    .chain(s.objects.iter().cloned().map(StreamRecord::Object))
    .chain(
        s.aliases
            .iter()
            .map(|&(load, value)| StreamRecord::Alias { load, value }),
    )
    .chain(s.streams.iter().flat_map(|st| {
        std::iter::once(StreamRecord::Stream {
            component: st.component,
            start: st.start,
        })
        .chain(st.entries.iter().copied().map(StreamRecord::Entry))
    }));
    write_records(&dir.join(STREAMS_FILE), streams)
}

pub fn read_artifacts(dir: &Path) -> Result<Artifacts, FormatError> {
    let mut header = None;
    let mut params = None;
    let mut program = String::new();
    let mut dfg = InstructionDfg::default();
    for (_, r) in read_records::<DfgRecord>(&dir.join(DFG_FILE))? {
        match r {
            DfgRecord::Header {
                n,
                word_bits,
                outputs,
                order,
            } => {
                dfg.n = n;
                dfg.word_bits = word_bits;
                dfg.outputs = outputs;
                header = Some(order);
            }
            DfgRecord::Params(p) => params = Some(p),
            DfgRecord::Program { text } => {
                program.push_str(&text);
                program.push('\n');
            }
            DfgRecord::Object(o) => dfg.objects.push(o),
            DfgRecord::Instr(i) => dfg.instrs.push(i),
        }
    }
    let order = header.ok_or_else(|| invalid(DFG_FILE, "missing header"))?;
    let params = params.ok_or_else(|| invalid(DFG_FILE, "missing params"))?;
    let program = parse_program(&program)?;
    dfg.check().map_err(|e| invalid(DFG_FILE, e.to_string()))?;

    let mut dms = DataMovementSchedule {
        slots: 0,
        vector_bytes: 0,
        actions: Vec::new(),
        objects: Vec::new(),
        resident_bytes: Vec::new(),
    };
    let mut seen_header = false;
    for (_, r) in read_records::<DmsRecord>(&dir.join(DMS_FILE))? {
        match r {
            DmsRecord::Header { slots, vector_bytes } => {
                dms.slots = slots;
                dms.vector_bytes = vector_bytes;
                seen_header = true;
            }
            DmsRecord::Object(o) => dms.objects.push(o),
            DmsRecord::Step { resident_bytes } => dms.resident_bytes.push(resident_bytes),
            DmsRecord::Action(a) => dms.actions.push(a),
        }
    }
    if !seen_header {
        return Err(invalid(DMS_FILE, "missing header"));
    }

    let mut head = None;
    let mut objects = Vec::new();
    let mut aliases = Vec::new();
    let mut events: Vec<TimedEvent> = Vec::new();
    let mut cursor: Option<u64> = None;
    for (line, r) in read_records::<StreamRecord>(&dir.join(STREAMS_FILE))? {
        match r {
            StreamRecord::Header {
                n,
                slots,
                total_cycles,
                outputs,
            } => head = Some((n, slots, total_cycles, outputs)),
            StreamRecord::Object(o) => objects.push(o),
            StreamRecord::Alias { load, value } => aliases.push((load, value)),
            StreamRecord::Stream { start, .. } => cursor = Some(start),
            StreamRecord::Entry(e) => {
                let t = cursor.ok_or_else(|| FormatError::Parse {
                    file: STREAMS_FILE.into(),
                    line,
                    msg: "entry outside a stream".into(),
                })?;
                events.push(TimedEvent {
                    cycle: t,
                    event: e.event,
                });
                cursor = Some(t + e.wait);
            }
        }
    }
    let (n, slots, total, outputs) = head.ok_or_else(|| invalid(STREAMS_FILE, "missing header"))?;
    let schedule = CycleSchedule::from_events(n, slots, total, objects, outputs, aliases, &events);
    Ok(Artifacts {
        program,
        params,
        order,
        dfg,
        dms,
        schedule,
    })
}

// ---- run report ----

/// One CSV row per (program, config).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub program: String,
    pub config: String,
    pub cycles: u64,
    pub ksh_bytes_compulsory: u64,
    pub ksh_bytes_noncompulsory: u64,
    pub io_bytes_compulsory: u64,
    pub io_bytes_noncompulsory: u64,
    pub intermediate_load_bytes: u64,
    pub intermediate_store_bytes: u64,
    pub fu_util_ntt: f64,
    pub fu_util_aut: f64,
    pub fu_util_mul: f64,
    pub fu_util_add: f64,
    pub peak_resident_bytes: u64,
}

impl RunRow {
    pub fn new(program: &str, config: &str, stats: &SimStats) -> Self {
        let t = &stats.traffic;
        let u = |k| (stats.fu_utilization(k) * 1e6).round() / 1e6;
        Self {
            program: program.into(),
            config: config.into(),
            cycles: stats.total_cycles,
            ksh_bytes_compulsory: t.ksh.compulsory,
            ksh_bytes_noncompulsory: t.ksh.non_compulsory,
            io_bytes_compulsory: t.io.compulsory,
            io_bytes_noncompulsory: t.io.non_compulsory,
            intermediate_load_bytes: t.intermediate_load,
            intermediate_store_bytes: t.intermediate_store,
            fu_util_ntt: u(FuKind::Ntt),
            fu_util_aut: u(FuKind::Automorphism),
            fu_util_mul: u(FuKind::Multiplier),
            fu_util_add: u(FuKind::Adder),
            peak_resident_bytes: stats.peak_resident_bytes,
        }
    }

    pub fn ksh_bytes(&self) -> u64 {
        self.ksh_bytes_compulsory + self.ksh_bytes_noncompulsory
    }
}

pub fn emit_report(rows: &[RunRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn parse_report(text: &str) -> Result<Vec<RunRow>, FormatError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{compile, Ordering};
    use crate::dsl::build_matvec;

    #[test]
    fn arch_round_trips() {
        let mut c = MachineConfig::desk(64, 8, 72);
        c.ntt_model = FuModel::LowThroughput;
        let text = emit_arch(&c);
        assert!(text.contains("[scratchpad]") && text.contains("[register_file]"));
        let back = parse_arch(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(emit_arch(&back), text);
        assert_eq!(
            parse_arch(&emit_arch(&MachineConfig::default())).unwrap(),
            MachineConfig::default()
        );
    }

    #[test]
    fn arch_errors() {
        let text = emit_arch(&MachineConfig::default());
        assert!(matches!(
            parse_arch(&text.replace("clusters = 16", "clusters = 0")),
            Err(FormatError::Config(_))
        ));
        assert!(matches!(parse_arch("[machine]\nname = 1"), Err(FormatError::Toml(_))));
        assert!(parse_arch(&format!("{text}\n[extra]\nx = 1\n")).is_err());
    }

    #[test]
    fn artifacts_round_trip() {
        let p = build_matvec(2, 64, 3).unwrap();
        let params = BgvParams::generate(64, 3, 30, 257, 0).unwrap();
        let config = MachineConfig::desk(64, 8, 72);
        let c = compile(&p, &params, &config, Ordering::HintReuse).unwrap();
        let a = Artifacts {
            program: p,
            params,
            order: c.order,
            dfg: c.dfg,
            dms: c.dms,
            schedule: c.schedule,
        };
        let dir = tempfile::tempdir().unwrap();
        write_artifacts(dir.path(), &a).unwrap();
        let mut names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names, ["dfg.jsonl", "dms.jsonl", "streams.jsonl"]);
        let back = read_artifacts(dir.path()).unwrap();
        assert_eq!(back.program, a.program);
        assert_eq!(back.params, a.params);
        assert_eq!(back.dfg, a.dfg);
        assert_eq!(back.dms, a.dms);
        assert_eq!(back.schedule, a.schedule);
        assert_eq!(back, a);
        let again = tempfile::tempdir().unwrap();
        write_artifacts(again.path(), &back).unwrap();
        for f in ARTIFACT_FILES {
            assert_eq!(
                fs::read(dir.path().join(f)).unwrap(),
                fs::read(again.path().join(f)).unwrap()
            );
        }
    }

    #[test]
    fn corrupt_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(DFG_FILE), "{\"record\":\"header\"\n").unwrap();
        match read_artifacts(dir.path()) {
            Err(FormatError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn report_round_trips() {
        let row = RunRow {
            program: "matvec".into(),
            config: "desk".into(),
            cycles: 10,
            ksh_bytes_compulsory: 1,
            ksh_bytes_noncompulsory: 2,
            io_bytes_compulsory: 3,
            io_bytes_noncompulsory: 0,
            intermediate_load_bytes: 0,
            intermediate_store_bytes: 0,
            fu_util_ntt: 0.25,
            fu_util_aut: 0.0,
            fu_util_mul: 0.5,
            fu_util_add: 1.0,
            peak_resident_bytes: 7,
        };
        let text = emit_report(&[row.clone(), row.clone()]);
        assert!(text.starts_with("program,config,cycles,ksh_bytes_compulsory,"));
        assert_eq!(parse_report(&text).unwrap(), vec![row.clone(), row]);
    }
}
