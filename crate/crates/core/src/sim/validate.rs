//! Replays a cycle schedule, checking every timing and resource rule
//! and optionally executing it on real data.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::{fu_timing, FuKind, MachineConfig};
use super::functional::{execute, MemoryImage};
use super::stats::{traffic_report, SimStats};
use crate::compiler::{Component, CycleSchedule, Event, InstrId, InstructionDfg, ObjectClass, ObjectKey, Op, Slot};
use crate::ring::{GridShape, ResidueVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Event or instruction malformed, missing or duplicated.
    Structure,
    /// Operand not fetched in time, result read before it is ready.
    Dependency,
    /// Slot overwritten while its value is still needed.
    Clobber,
    /// Two instructions on one functional unit at once.
    UnitConflict,
    /// Port, bank or HBM channel oversubscribed.
    PortOverflow,
    /// Scratchpad or register file over capacity.
    Capacity,
    /// Co-simulated data disagrees or cannot be computed.
    Functional,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub cycle: u64,
    pub component: Option<Component>,
    pub instr: Option<InstrId>,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cycle {}: {:?}", self.cycle, self.kind)?;
        if let Some(c) = self.component {
            write!(f, " on {c:?}")?;
        }
        if let Some(i) = self.instr {
            write!(f, " (instr {i})")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub stats: SimStats,
    pub violations: Vec<Violation>,
    /// Final off-chip memory when run functionally.
    pub memory: Option<MemoryImage>,
}

impl SimReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Res {
    Hbm,
    Bank(usize),
    XbarIn(usize),
    XbarOut(usize),
    RfRead(usize),
    RfWrite(usize),
    RfCap(usize),
    Unit(usize, FuKind, usize),
}

#[derive(Clone, Copy)]
struct Write {
    start: u64,
    end: u64,
    value: InstrId,
    last_read: u64,
}

struct Exec {
    cycle: u64,
    cluster: usize,
    issue: u64,
    lat: u64,
}

struct Checker<'a> {
    dfg: &'a InstructionDfg,
    schedule: &'a CycleSchedule,
    config: &'a MachineConfig,
    occ: u64,
    hbm_occ: u64,
    mem_lat: u64,
    aliases: HashMap<InstrId, InstrId>,
    usage: BTreeMap<Res, Vec<(u64, u64, u16, Option<InstrId>)>>,
    writes: Vec<Vec<Write>>,
    violations: Vec<Violation>,
}

impl Checker<'_> {
    fn flag(
        &mut self,
        cycle: u64,
        component: Option<Component>,
        instr: Option<InstrId>,
        kind: ViolationKind,
        detail: String,
    ) {
        self.violations.push(Violation {
            cycle,
            component,
            instr,
            kind,
            detail,
        });
    }

    fn resolve(&self, mut v: InstrId) -> InstrId {
        while let Some(&a) = self.aliases.get(&v) {
            v = a;
        }
        v
    }

    fn hold(&mut self, r: Res, start: u64, len: u64, amt: u16, instr: Option<InstrId>) {
        if len > 0 {
            self.usage.entry(r).or_default().push((start, start + len, amt, instr));
        }
    }

    fn bank(&self, slot: Slot) -> usize {
        slot % self.config.banks
    }

    fn limit(&self, r: Res) -> (u16, ViolationKind) {
        let c = self.config;
        let cap = |x: usize| (x.min(u16::MAX as usize) as u16, ViolationKind::PortOverflow);
        match r {
            Res::Hbm | Res::Unit(..) => (1, ViolationKind::PortOverflow),
            Res::Bank(_) => cap(c.bank_ports),
            Res::XbarIn(_) | Res::XbarOut(_) => cap(c.xbar_ports_per_cluster),
            Res::RfRead(_) => cap(c.rf_read_ports),
            Res::RfWrite(_) => cap(c.rf_write_ports),
            Res::RfCap(_) => (cap(c.rf_vectors_per_cluster).0, ViolationKind::Capacity),
        }
    }

    /// Checks that `slot` holds `value`, ready, for all of `[start, end)`.
    fn read(&mut self, slot: Slot, value: InstrId, start: u64, end: u64, who: Option<InstrId>, comp: Component) {
        let ws = &self.writes[slot];
        let idx = ws.partition_point(|w| w.start <= start);
        let Some(i) = idx.checked_sub(1) else {
            self.flag(
                start,
                Some(comp),
                who,
                ViolationKind::Dependency,
                format!("slot {slot} read before any write"),
            );
            return;
        };
        let w = ws[i];
        let next = ws.get(i + 1).map(|n| n.start);
        if w.value != value {
            self.flag(
                start,
                Some(comp),
                who,
                ViolationKind::Clobber,
                format!("slot {slot} holds value {} instead of {value}", w.value),
            );
        } else if w.end > start {
            self.flag(
                start,
                Some(comp),
                who,
                ViolationKind::Dependency,
                format!("value {value} read from slot {slot} before it is ready at {}", w.end),
            );
        }
        if let Some(n) = next.filter(|&n| n < end) {
            self.flag(
                n,
                Some(comp),
                who,
                ViolationKind::Clobber,
                format!("slot {slot} overwritten at {n} while value {value} is read until {end}"),
            );
        }
        let w = &mut self.writes[slot][i];
        w.last_read = w.last_read.max(end);
    }

    fn check_usage(&mut self) {
        let usage = std::mem::take(&mut self.usage);
        for (&r, spans) in &usage {
            let (limit, kind) = self.limit(r);
            let end = spans.iter().map(|s| s.1).max().unwrap_or(0) as usize;
            let mut diff = vec![0i64; end + 1];
            for &(s, e, a, _) in spans {
                diff[s as usize] += a as i64;
                diff[e as usize] -= a as i64;
            }
            let mut level = 0;
            let mut over = None;
            for (c, d) in diff.iter().enumerate() {
                level += d;
                if level > limit as i64 {
                    over = Some((c as u64, level));
                    break;
                }
            }
            if let Some((c, level)) = over {
                let who = spans.iter().find(|s| s.0 <= c && c < s.1).and_then(|s| s.3);
                let comp = match r {
                    Res::Hbm => Some(Component::Hbm),
                    Res::XbarIn(cluster) => Some(Component::XbarIn { cluster }),
                    Res::XbarOut(cluster) => Some(Component::XbarOut { cluster }),
                    Res::Unit(cluster, kind, unit) => Some(Component::Fu { cluster, kind, unit }),
                    _ => None,
                };
                let kind = if matches!(r, Res::Unit(..)) {
                    ViolationKind::UnitConflict
                } else {
                    kind
                };
                self.flag(c, comp, who, kind, format!("{r:?} needs {level} but allows {limit}"));
            }
        }
        self.usage = usage;
    }
}

/// Validates `schedule` against `config` and, with `memory`, executes it
/// on that off-chip image. Violations are collected, not fatal.
pub fn validate_and_run(
    schedule: &CycleSchedule,
    dfg: &InstructionDfg,
    config: &MachineConfig,
    memory: Option<&MemoryImage>,
) -> SimReport {
    let mut ck = Checker {
        dfg,
        schedule,
        config,
        occ: config.chunk_cycles(schedule.n.max(1)),
        hbm_occ: config.hbm_cycles(schedule.n.max(1)),
        mem_lat: config.mem_worst_case_latency,
        aliases: schedule.aliases.iter().copied().collect(),
        usage: BTreeMap::new(),
        writes: vec![Vec::new(); schedule.slots],
        violations: Vec::new(),
    };
    if let Err(e) = config.validate() {
        ck.flag(0, None, None, ViolationKind::Structure, e.to_string());
    }
    let events = schedule.events();
    let stats_only = |ck: Checker| SimReport {
        stats: empty_stats(schedule, config),
        violations: ck.violations,
        memory: None,
    };
    if dfg.n != schedule.n || config.check_n(schedule.n).is_err() && !events.is_empty() {
        ck.flag(
            0,
            None,
            None,
            ViolationKind::Structure,
            "ring dimension does not match".into(),
        );
        return stats_only(ck);
    }
    if schedule.slots > config.scratch_vectors(schedule.n.max(1)) {
        ck.flag(
            0,
            None,
            None,
            ViolationKind::Capacity,
            format!("{} slots exceed the scratchpad", schedule.slots),
        );
    }

    let occ = ck.occ;
    let h = ck.hbm_occ;
    let ml = ck.mem_lat;
    let mut execs: HashMap<InstrId, Exec> = HashMap::new();
    let mut fetched: HashMap<(InstrId, InstrId), (u64, usize)> = HashMap::new();
    let mut writebacks: HashMap<InstrId, (u64, usize)> = HashMap::new();
    let mut spill_end: HashMap<usize, u64> = HashMap::new();
    let mut stored: HashMap<(usize, usize), u64> = HashMap::new();
    let mut total = 0u64;

    // first pass: structure, resource holds and slot writes
    for te in &events {
        let c = te.cycle;
        let comp = te.event.component();
        let bad_slot = |s: Slot| s >= schedule.slots;
        match te.event {
            Event::Load { value, slot, obj, part } => {
                if bad_slot(slot) || value >= dfg.instrs.len() || obj >= schedule.objects.len() {
                    ck.flag(
                        c,
                        Some(comp),
                        None,
                        ViolationKind::Structure,
                        "load out of range".into(),
                    );
                    continue;
                }
                let ok = match dfg.instrs[value].op {
                    Op::Load { obj: o, part: p } => o == obj && p == part,
                    _ => schedule.objects[obj].key == ObjectKey::Spill { value } && part == 0,
                };
                if !ok {
                    ck.flag(
                        c,
                        Some(comp),
                        Some(value),
                        ViolationKind::Structure,
                        "load of the wrong object".into(),
                    );
                }
                ck.hold(Res::Hbm, c, h, 1, Some(value));
                ck.hold(Res::Bank(ck.bank(slot)), c + ml, h, 1, Some(value));
                ck.writes[slot].push(Write {
                    start: c + ml,
                    end: c + ml + h,
                    value,
                    last_read: 0,
                });
                total = total.max(c + ml + h);
            }
            Event::Store { value, slot, obj, part } => {
                if bad_slot(slot) || obj >= schedule.objects.len() {
                    ck.flag(
                        c,
                        Some(comp),
                        None,
                        ViolationKind::Structure,
                        "store out of range".into(),
                    );
                    continue;
                }
                ck.hold(Res::Hbm, c, h, 1, Some(value));
                ck.hold(Res::Bank(ck.bank(slot)), c, h, 1, Some(value));
                if schedule.objects[obj].class == ObjectClass::Intermediate {
                    spill_end.insert(obj, c + h);
                }
                stored.insert((obj, part), c + h);
                total = total.max(c + h);
            }
            Event::Fetch {
                value,
                slot,
                cluster,
                instr,
            } => {
                if bad_slot(slot) || cluster >= config.clusters || instr >= dfg.instrs.len() {
                    ck.flag(
                        c,
                        Some(comp),
                        None,
                        ViolationKind::Structure,
                        "fetch out of range".into(),
                    );
                    continue;
                }
                for r in [Res::XbarIn(cluster), Res::Bank(ck.bank(slot)), Res::RfWrite(cluster)] {
                    ck.hold(r, c, occ, 1, Some(instr));
                }
                if fetched.insert((instr, value), (c, cluster)).is_some() {
                    ck.flag(
                        c,
                        Some(comp),
                        Some(instr),
                        ViolationKind::Structure,
                        format!("value {value} fetched twice"),
                    );
                }
            }
            Event::Exec {
                instr,
                cluster,
                kind,
                unit,
            } => {
                let valid = instr < dfg.instrs.len()
                    && cluster < config.clusters
                    && dfg.instrs[instr].op.fu() == Some(kind)
                    && unit < config.fu_count(kind, schedule.n);
                if !valid {
                    ck.flag(
                        c,
                        Some(comp),
                        Some(instr),
                        ViolationKind::Structure,
                        "exec on a missing or wrong unit".into(),
                    );
                    continue;
                }
                let (issue, lat) = fu_timing(kind, schedule.n, config).expect("checked n");
                ck.hold(Res::Unit(cluster, kind, unit), c, issue, 1, Some(instr));
                if execs
                    .insert(
                        instr,
                        Exec {
                            cycle: c,
                            cluster,
                            issue,
                            lat,
                        },
                    )
                    .is_some()
                {
                    ck.flag(
                        c,
                        Some(comp),
                        Some(instr),
                        ViolationKind::Structure,
                        "executed twice".into(),
                    );
                }
                total = total.max(c + lat + issue);
            }
            Event::Writeback { value, slot, cluster } => {
                if bad_slot(slot) || cluster >= config.clusters {
                    ck.flag(
                        c,
                        Some(comp),
                        None,
                        ViolationKind::Structure,
                        "writeback out of range".into(),
                    );
                    continue;
                }
                for r in [Res::XbarOut(cluster), Res::Bank(ck.bank(slot)), Res::RfRead(cluster)] {
                    ck.hold(r, c, occ, 1, Some(value));
                }
                ck.writes[slot].push(Write {
                    start: c,
                    end: c + occ,
                    value,
                    last_read: 0,
                });
                if writebacks.insert(value, (c, cluster)).is_some() {
                    ck.flag(
                        c,
                        Some(comp),
                        Some(value),
                        ViolationKind::Structure,
                        "written back twice".into(),
                    );
                }
                total = total.max(c + occ);
            }
        }
    }
    for (slot, ws) in ck.writes.iter_mut().enumerate() {
        ws.sort_by_key(|w| w.start);
        for pair in ws.windows(2) {
            if pair[1].start < pair[0].end {
                let (c, v) = (pair[1].start, pair[1].value);
                ck.violations.push(Violation {
                    cycle: c,
                    component: None,
                    instr: Some(v),
                    kind: ViolationKind::Clobber,
                    detail: format!("slot {slot} written by {v} while still being filled"),
                });
            }
        }
    }

    let store_of: HashMap<(usize, usize), InstrId> = dfg
        .instrs
        .iter()
        .filter_map(|i| match i.op {
            Op::Store { obj, part } => Some(((obj, part), i.id)),
            _ => None,
        })
        .collect();
    // second pass: reads, operand dependences and register-file occupancy
    for te in &events {
        let c = te.cycle;
        let comp = te.event.component();
        match te.event {
            Event::Store { value, slot, obj, part } if slot < schedule.slots && obj < schedule.objects.len() => {
                ck.read(slot, value, c, c + h, Some(value), comp);
                let expected = match schedule.objects[obj].key {
                    ObjectKey::Spill { value: v } => Some(v),
                    _ => store_of
                        .get(&(obj, part))
                        .map(|&i| ck.resolve(dfg.instrs[i].operands[0])),
                };
                if expected != Some(value) {
                    ck.flag(
                        c,
                        Some(comp),
                        Some(value),
                        ViolationKind::Structure,
                        format!("store of object {obj} part {part} carries the wrong value"),
                    );
                }
            }
            Event::Load { value, obj, .. } if obj < schedule.objects.len() => {
                if schedule.objects[obj].class == ObjectClass::Intermediate {
                    match spill_end.get(&obj) {
                        Some(&e) if e <= c => {}
                        _ => ck.flag(
                            c,
                            Some(comp),
                            Some(value),
                            ViolationKind::Dependency,
                            format!("fill of object {obj} before its spill completes"),
                        ),
                    }
                }
            }
            Event::Fetch {
                value,
                slot,
                cluster,
                instr,
            } if slot < schedule.slots && instr < dfg.instrs.len() => {
                ck.read(slot, value, c, c + occ, Some(instr), comp);
                match execs.get(&instr) {
                    Some(e) if e.cluster == cluster => {
                        if c + occ > e.cycle {
                            ck.flag(
                                c,
                                Some(comp),
                                Some(instr),
                                ViolationKind::Dependency,
                                format!("operand {value} arrives after issue at {}", e.cycle),
                            );
                        }
                        ck.hold(
                            Res::RfCap(cluster),
                            c,
                            (e.cycle + occ).saturating_sub(c),
                            1,
                            Some(instr),
                        );
                    }
                    _ => ck.flag(
                        c,
                        Some(comp),
                        Some(instr),
                        ViolationKind::Structure,
                        "fetch for an instruction not executed on this cluster".into(),
                    ),
                }
                let ops: Vec<InstrId> = dfg.instrs[instr].operands.iter().map(|&o| ck.resolve(o)).collect();
                if !ops.contains(&value) {
                    ck.flag(
                        c,
                        Some(comp),
                        Some(instr),
                        ViolationKind::Structure,
                        format!("value {value} is not an operand"),
                    );
                }
            }
            _ => {}
        }
    }
    for ins in &dfg.instrs {
        match ins.op {
            Op::Load { .. } => {}
            Op::Store { obj, part } => {
                if !stored.contains_key(&(obj, part)) {
                    ck.flag(
                        0,
                        None,
                        Some(ins.id),
                        ViolationKind::Structure,
                        "store never performed".into(),
                    );
                }
            }
            _ => {
                let Some(e) = execs.get(&ins.id) else {
                    ck.flag(0, None, Some(ins.id), ViolationKind::Structure, "never executed".into());
                    continue;
                };
                let (s, cl) = (e.cycle, e.cluster);
                let out_at = s + e.lat + e.issue - occ;
                let complete = s + e.lat + e.issue;
                let mut ops: Vec<InstrId> = ins.operands.iter().map(|&o| ck.resolve(o)).collect();
                ops.sort_unstable();
                ops.dedup();
                for &o in &ops {
                    if !fetched.contains_key(&(ins.id, o)) {
                        ck.flag(
                            s,
                            None,
                            Some(ins.id),
                            ViolationKind::Dependency,
                            format!("operand {o} never fetched"),
                        );
                    }
                }
                ck.hold(Res::RfRead(cl), s, occ, ops.len() as u16, Some(ins.id));
                ck.hold(Res::RfWrite(cl), out_at, occ, 1, Some(ins.id));
                match writebacks.get(&ins.id) {
                    Some(&(w, wcl)) => {
                        if wcl != cl || w < complete {
                            ck.flag(
                                w,
                                Some(Component::XbarOut { cluster: wcl }),
                                Some(ins.id),
                                ViolationKind::Dependency,
                                format!("writeback before completion at {complete}"),
                            );
                        }
                        ck.hold(
                            Res::RfCap(cl),
                            out_at,
                            (w + occ).saturating_sub(out_at),
                            1,
                            Some(ins.id),
                        );
                    }
                    None => ck.hold(Res::RfCap(cl), out_at, occ, 1, Some(ins.id)),
                }
            }
        }
    }
    ck.check_usage();

    let stats = collect_stats(&ck, &execs, total);
    let memory = memory.map(|m| run_functional(&ck, &events, m));
    let mut violations = ck.violations;
    let memory = match memory {
        Some(Ok(m)) => Some(m),
        Some(Err(v)) => {
            violations.push(v);
            None
        }
        None => None,
    };
    violations.sort_by_key(|v| v.cycle);
    SimReport {
        stats,
        violations,
        memory,
    }
}

fn empty_stats(schedule: &CycleSchedule, config: &MachineConfig) -> SimStats {
    SimStats {
        total_cycles: 0,
        fu_busy: [0; 4],
        fu_units: [0; 4],
        traffic: traffic_report(schedule, config),
        bandwidth: Vec::new(),
        peak_resident_bytes: 0,
    }
}

fn collect_stats(ck: &Checker, execs: &HashMap<InstrId, Exec>, total: u64) -> SimStats {
    let (schedule, config) = (ck.schedule, ck.config);
    let n = schedule.n.max(1);
    let mut fu_busy = [0u64; 4];
    let mut fu_units = [0u64; 4];
    for (i, k) in FuKind::ALL.iter().enumerate() {
        fu_units[i] = (config.clusters * config.fu_count(*k, n)) as u64;
    }
    for (id, e) in execs {
        let kind = ck.dfg.instrs[*id].op.fu().expect("compute");
        let i = FuKind::ALL.iter().position(|&k| k == kind).expect("listed");
        fu_busy[i] += e.issue;
    }
    let vb = config.vector_bytes(n);
    let mut bandwidth = vec![0u32; total as usize];
    for &(s, _, _, _) in ck.usage.get(&Res::Hbm).map_or(&[][..], |v| &v[..]) {
        let mut left = vb;
        let mut c = s as usize;
        while left > 0 && c < bandwidth.len() {
            let b = left.min(config.hbm_bytes_per_cycle);
            bandwidth[c] += b as u32;
            left -= b;
            c += 1;
        }
    }
    let mut diff = vec![0i64; total as usize + 2];
    for w in ck.writes.iter().flatten() {
        let end = w.end.max(w.last_read).min(total + 1);
        diff[w.start.min(total) as usize] += 1;
        diff[end as usize] -= 1;
    }
    let mut live = 0i64;
    let mut peak = 0i64;
    for d in diff {
        live += d;
        peak = peak.max(live);
    }
    SimStats {
        total_cycles: total,
        fu_busy,
        fu_units,
        traffic: traffic_report(schedule, config),
        bandwidth,
        peak_resident_bytes: peak as u64 * vb,
    }
}

/// Replays data through slots and register files in cycle order. Reads
/// at a cycle see writes that started strictly earlier.
fn run_functional(
    ck: &Checker,
    events: &[crate::compiler::TimedEvent],
    image: &MemoryImage,
) -> Result<MemoryImage, Violation> {
    let (dfg, config) = (ck.dfg, ck.config);
    let n = ck.schedule.n;
    let mut mem = image.clone();
    if events.is_empty() {
        return Ok(mem);
    }
    let fail = |cycle: u64, instr: Option<InstrId>, detail: String| Violation {
        cycle,
        component: None,
        instr,
        kind: ViolationKind::Functional,
        detail,
    };
    let shape = GridShape::for_length(n, config.lanes).map_err(|e| fail(0, None, e.to_string()))?;
    // (time, phase, index): slot reads, then execution, then slot writes
    let mut effects: Vec<(u64, u8, usize)> = Vec::with_capacity(events.len());
    for (i, te) in events.iter().enumerate() {
        let key = match te.event {
            Event::Fetch { .. } | Event::Store { .. } => (te.cycle, 0),
            Event::Exec { .. } => (te.cycle, 1),
            Event::Load { .. } => (te.cycle + ck.mem_lat, 2),
            Event::Writeback { .. } => (te.cycle, 2),
        };
        effects.push((key.0, key.1, i));
    }
    effects.sort_unstable();
    let mut slots: Vec<Option<ResidueVector>> = vec![None; ck.schedule.slots];
    let mut rf: Vec<HashMap<InstrId, ResidueVector>> = vec![HashMap::new(); config.clusters];
    let mut results: HashMap<InstrId, ResidueVector> = HashMap::new();
    for (_, _, i) in effects {
        let c = events[i].cycle;
        match events[i].event {
            Event::Fetch {
                value,
                slot,
                cluster,
                instr,
            } => {
                let v = slots[slot]
                    .clone()
                    .ok_or_else(|| fail(c, Some(instr), format!("slot {slot} empty")))?;
                rf[cluster].insert(value, v);
            }
            Event::Store { slot, obj, part, value } => {
                let v = slots[slot]
                    .clone()
                    .ok_or_else(|| fail(c, Some(value), format!("slot {slot} empty")))?;
                mem.parts.insert((obj, part), v);
            }
            Event::Exec { instr, cluster, .. } => {
                let ins = &dfg.instrs[instr];
                let args = ins
                    .operands
                    .iter()
                    .map(|&o| {
                        let v = ck.resolve(o);
                        rf[cluster]
                            .get(&v)
                            .ok_or_else(|| fail(c, Some(instr), format!("operand {v} not in the register file")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let r = execute(&ins.op, ins.modulus, &args, &mem.basis, shape)
                    .map_err(|e| fail(c, Some(instr), e.to_string()))?;
                if r.q() != mem.basis.modulus(ins.modulus).q() {
                    return Err(fail(c, Some(instr), "result under the wrong modulus".into()));
                }
                results.insert(instr, r);
            }
            Event::Load { value, slot, obj, part } => {
                let v = mem
                    .parts
                    .get(&(obj, part))
                    .cloned()
                    .ok_or_else(|| fail(c, Some(value), format!("object {obj} part {part} not in memory")))?;
                slots[slot] = Some(v);
            }
            Event::Writeback { value, slot, .. } => {
                let v = results
                    .get(&value)
                    .cloned()
                    .ok_or_else(|| fail(c, Some(value), "no result to write back".into()))?;
                slots[slot] = Some(v);
            }
        }
    }
    Ok(mem)
}
