//! Phase 3: cycle-level scheduling onto clusters, ports and functional
//! units.
//!
//! Timing model, per residue vector of `N` words on `E` lanes with
//! `occ = N/E`:
//!
//! * HBM transfers hold the channel for `ceil(bytes / hbm_bytes_per_cycle)`
//!   cycles. A load writes its slot starting `mem_worst_case_latency`
//!   cycles later; a store reads its slot while it holds the channel.
//! * A fetch moves a vector from a scratchpad slot into a cluster's
//!   register file over `occ` cycles, using one crossbar-in port, one
//!   bank port and one register-file write port per cycle.
//! * An instruction starts once its operands are in the register file,
//!   reads them over `occ` cycles, holds its unit for the issue time and
//!   writes its result over `occ` cycles starting `latency` cycles after
//!   issue.
//! * A writeback returns the result to its slot through a crossbar-out
//!   port.

use serde::{Deserialize, Serialize};

use super::dfg::{DataObject, InstrId, InstructionDfg, ObjId, Op};
use super::offchip::{DataMovementSchedule, DmsAction, Slot};
use super::CompileError;
use crate::sim::{fu_timing, FuKind, MachineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "component", rename_all = "snake_case")]
pub enum Component {
    Hbm,
    XbarIn { cluster: usize },
    XbarOut { cluster: usize },
    Fu { cluster: usize, kind: FuKind, unit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Load {
        value: InstrId,
        slot: Slot,
        obj: ObjId,
        part: usize,
    },
    Store {
        value: InstrId,
        slot: Slot,
        obj: ObjId,
        part: usize,
    },
    /// Operand `value` of `instr`.
    Fetch {
        value: InstrId,
        slot: Slot,
        cluster: usize,
        instr: InstrId,
    },
    Exec {
        instr: InstrId,
        cluster: usize,
        kind: FuKind,
        unit: usize,
    },
    Writeback {
        value: InstrId,
        slot: Slot,
        cluster: usize,
    },
}

impl Event {
    pub fn component(&self) -> Component {
        match *self {
            Event::Load { .. } | Event::Store { .. } => Component::Hbm,
            Event::Fetch { cluster, .. } => Component::XbarIn { cluster },
            Event::Writeback { cluster, .. } => Component::XbarOut { cluster },
            Event::Exec {
                cluster, kind, unit, ..
            } => Component::Fu { cluster, kind, unit },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub cycle: u64,
    pub event: Event,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamEntry {
    pub event: Event,
    /// Cycles until this component's next entry.
    pub wait: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stream {
    pub component: Component,
    /// Cycle of the first entry.
    pub start: u64,
    pub entries: Vec<StreamEntry>,
}

impl Stream {
    pub fn timed(&self) -> impl Iterator<Item = TimedEvent> + '_ {
        self.entries.iter().scan(self.start, |t, e| {
            let cycle = *t;
            *t += e.wait;
            Some(TimedEvent { cycle, event: e.event })
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleSchedule {
    pub n: usize,
    pub slots: usize,
    pub total_cycles: u64,
    /// Objects referenced by loads and stores, spill objects included.
    pub objects: Vec<DataObject>,
    pub outputs: Vec<ObjId>,
    /// `(load, value)`: loads served by a value already on chip.
    pub aliases: Vec<(InstrId, InstrId)>,
    pub streams: Vec<Stream>,
}

impl CycleSchedule {
    /// Groups `events` per component.
    pub fn from_events(
        n: usize,
        slots: usize,
        total_cycles: u64,
        objects: Vec<DataObject>,
        outputs: Vec<ObjId>,
        aliases: Vec<(InstrId, InstrId)>,
        events: &[TimedEvent],
    ) -> Self {
        let mut by_comp: std::collections::BTreeMap<Component, Vec<TimedEvent>> = Default::default();
        for e in events {
            by_comp.entry(e.event.component()).or_default().push(*e);
        }
        let streams = by_comp
            .into_iter()
            .map(|(component, mut evs)| {
                evs.sort_by_key(|e| e.cycle);
                debug_assert!(!evs.is_empty());
                let entries = evs
                    .iter()
                    .enumerate()
                    .map(|(i, e)| StreamEntry {
                        event: e.event,
                        wait: evs.get(i + 1).map_or(0, |nx| nx.cycle - e.cycle),
                    })
                    .collect();
                Stream {
                    component,
                    start: evs[0].cycle,
                    entries,
                }
            })
            .collect();
        Self {
            n,
            slots,
            total_cycles,
            objects,
            outputs,
            aliases,
            streams,
        }
    }

    /// All events, by cycle then component.
    pub fn events(&self) -> Vec<TimedEvent> {
        let mut out: Vec<TimedEvent> = self.streams.iter().flat_map(|s| s.timed()).collect();
        out.sort_by_key(|e| (e.cycle, e.event.component()));
        out
    }
}

/// Per-cycle usage counter with a cap.
#[derive(Debug, Clone)]
struct Table {
    limit: u16,
    usage: Vec<u16>,
}

#[derive(Default)]
struct Tables {
    tabs: Vec<Table>,
    log: Vec<(usize, u64, u64, u16)>,
}

impl Tables {
    fn add(&mut self, limit: usize) -> usize {
        self.tabs.push(Table {
            limit: limit.min(u16::MAX as usize) as u16,
            usage: Vec::new(),
        });
        self.tabs.len() - 1
    }

    fn fits(&self, id: usize, start: u64, len: u64, amt: u16) -> bool {
        let t = &self.tabs[id];
        if amt > t.limit {
            return false;
        }
        (start..start + len).all(|c| t.usage.get(c as usize).map_or(0, |&u| u) + amt <= t.limit)
    }

    fn reserve(&mut self, id: usize, start: u64, len: u64, amt: u16) {
        let t = &mut self.tabs[id];
        let end = (start + len) as usize;
        if t.usage.len() < end {
            t.usage.resize(end, 0);
        }
        for c in start as usize..end {
            t.usage[c] += amt;
        }
        self.log.push((id, start, len, amt));
    }

    fn mark(&self) -> usize {
        self.log.len()
    }

    fn undo_to(&mut self, mark: usize) {
        while self.log.len() > mark {
            let (id, start, len, amt) = self.log.pop().expect("non-empty");
            for c in start..start + len {
                self.tabs[id].usage[c as usize] -= amt;
            }
        }
    }

    /// First cycle `>= lb` at which every `(table, offset, len, amt)` fits.
    fn earliest(&self, lb: u64, reqs: &[(usize, u64, u64, u16)]) -> u64 {
        let mut t = lb;
        loop {
            if reqs.iter().all(|&(id, off, len, amt)| self.fits(id, t + off, len, amt)) {
                return t;
            }
            t += 1;
        }
    }

    fn commit(&mut self) {
        self.log.clear();
    }
}

struct ClusterTables {
    xin: usize,
    xout: usize,
    rf_read: usize,
    rf_write: usize,
    rf_cap: usize,
    /// Unit tables per kind.
    units: [Vec<usize>; 4],
}

fn kind_index(kind: FuKind) -> usize {
    match kind {
        FuKind::Ntt => 0,
        FuKind::Automorphism => 1,
        FuKind::Multiplier => 2,
        FuKind::Adder => 3,
    }
}

struct Plan {
    end: u64,
    events: Vec<TimedEvent>,
    result_ready: Option<u64>,
    write_end: Option<u64>,
    reads: Vec<(Slot, u64)>,
    rf_overflow: bool,
}

struct Scheduler<'a> {
    dfg: &'a InstructionDfg,
    config: &'a MachineConfig,
    occ: u64,
    hbm_occ: u64,
    mem_lat: u64,
    tables: Tables,
    hbm: usize,
    banks: Vec<usize>,
    clusters: Vec<ClusterTables>,
    /// Cycle each value becomes readable in its current slot.
    ready: Vec<u64>,
    /// Latest read end and write end per slot.
    slot_read_end: Vec<u64>,
    slot_write_end: Vec<u64>,
    /// Cycle each spill object is complete in memory.
    spill_done: std::collections::HashMap<ObjId, u64>,
    events: Vec<TimedEvent>,
    total: u64,
    rr: usize,
}

impl Scheduler<'_> {
    fn bank(&self, slot: Slot) -> usize {
        self.banks[slot % self.banks.len()]
    }

    fn slot_free(&self, slot: Slot) -> u64 {
        self.slot_read_end[slot].max(self.slot_write_end[slot])
    }

    fn hbm_in(&mut self, value: InstrId, slot: Slot, obj: ObjId, part: usize, lb: u64) {
        let lb = lb.max(self.slot_free(slot).saturating_sub(self.mem_lat));
        let bank = self.bank(slot);
        let reqs = [(self.hbm, 0, self.hbm_occ, 1), (bank, self.mem_lat, self.hbm_occ, 1)];
        let h = self.tables.earliest(lb, &reqs);
        for (id, off, len, amt) in reqs {
            self.tables.reserve(id, h + off, len, amt);
        }
        self.tables.commit();
        let done = h + self.mem_lat + self.hbm_occ;
        self.ready[value] = done;
        self.slot_write_end[slot] = done;
        self.total = self.total.max(done);
        self.events.push(TimedEvent {
            cycle: h,
            event: Event::Load { value, slot, obj, part },
        });
    }

    fn hbm_out(&mut self, value: InstrId, slot: Slot, obj: ObjId, part: usize) -> u64 {
        let bank = self.bank(slot);
        let reqs = [(self.hbm, 0, self.hbm_occ, 1), (bank, 0, self.hbm_occ, 1)];
        let h = self.tables.earliest(self.ready[value], &reqs);
        for (id, off, len, amt) in reqs {
            self.tables.reserve(id, h + off, len, amt);
        }
        self.tables.commit();
        let end = h + self.hbm_occ;
        self.slot_read_end[slot] = self.slot_read_end[slot].max(end);
        self.total = self.total.max(end);
        self.events.push(TimedEvent {
            cycle: h,
            event: Event::Store { value, slot, obj, part },
        });
        end
    }

    /// Reserves one compute instruction on `cluster` with fetches no
    /// earlier than `fetch_lb`. Reservations stay in the log.
    fn plan(
        &mut self,
        instr: InstrId,
        operands: &[(InstrId, Slot)],
        result_slot: Option<Slot>,
        cluster: usize,
        fetch_lb: u64,
    ) -> Plan {
        let occ = self.occ;
        let ins = &self.dfg.instrs[instr];
        let kind = ins.op.fu().expect("compute instruction");
        let (issue, lat) = fu_timing(kind, self.dfg.n, self.config).expect("checked n");
        let ct = &self.clusters[cluster];
        let (xin, xout, rfr, rfw, rfcap) = (ct.xin, ct.xout, ct.rf_read, ct.rf_write, ct.rf_cap);
        let units = ct.units[kind_index(kind)].clone();
        let mut events = Vec::new();
        let mut distinct: Vec<(InstrId, Slot)> = Vec::new();
        for &o in operands {
            if !distinct.contains(&o) {
                distinct.push(o);
            }
        }
        let mut fetch_end = 0;
        let mut fetch_starts = Vec::new();
        let mut reads = Vec::new();
        for &(value, slot) in &distinct {
            let bank = self.bank(slot);
            let reqs = [(xin, 0, occ, 1), (bank, 0, occ, 1), (rfw, 0, occ, 1)];
            let t = self.tables.earliest(self.ready[value].max(fetch_lb), &reqs);
            for (id, off, len, amt) in reqs {
                self.tables.reserve(id, t + off, len, amt);
            }
            fetch_end = fetch_end.max(t + occ);
            fetch_starts.push(t);
            reads.push((slot, t + occ));
            events.push(TimedEvent {
                cycle: t,
                event: Event::Fetch {
                    value,
                    slot,
                    cluster,
                    instr,
                },
            });
        }
        let nread = distinct.len() as u16;
        let mut best: Option<(u64, usize)> = None;
        for (u, &tab) in units.iter().enumerate() {
            let reqs = [
                (tab, 0, issue, 1),
                (rfr, 0, occ, nread),
                (rfw, lat + issue - occ, occ, 1),
            ];
            let s = self.tables.earliest(fetch_end, &reqs);
            if best.is_none_or(|(bs, _)| s < bs) {
                best = Some((s, u));
            }
        }
        let (s, unit) = best.expect("at least one unit");
        let out_at = lat + issue - occ;
        for (id, off, len, amt) in [(units[unit], 0, issue, 1), (rfr, 0, occ, nread), (rfw, out_at, occ, 1)] {
            self.tables.reserve(id, s + off, len, amt);
        }
        events.push(TimedEvent {
            cycle: s,
            event: Event::Exec {
                instr,
                cluster,
                kind,
                unit,
            },
        });
        let mut rf_spans = Vec::new();
        for &t in &fetch_starts {
            rf_spans.push((t, s + occ - t));
        }
        let complete = s + lat + issue;
        let (end, result_ready, write_end) = match result_slot {
            Some(slot) => {
                let bank = self.bank(slot);
                let reqs = [(xout, 0, occ, 1), (bank, 0, occ, 1), (rfr, 0, occ, 1)];
                let w = self.tables.earliest(complete.max(self.slot_free(slot)), &reqs);
                for (id, off, len, amt) in reqs {
                    self.tables.reserve(id, w + off, len, amt);
                }
                rf_spans.push((s + out_at, w + occ - (s + out_at)));
                events.push(TimedEvent {
                    cycle: w,
                    event: Event::Writeback {
                        value: instr,
                        slot,
                        cluster,
                    },
                });
                (w + occ, Some(w + occ), Some(w + occ))
            }
            None => {
                rf_spans.push((s + out_at, occ));
                (complete, None, None)
            }
        };
        for &(start, len) in &rf_spans {
            self.tables.reserve(rfcap, start, len, 1);
        }
        let cap = &self.tables.tabs[rfcap];
        let rf_overflow = rf_spans
            .iter()
            .any(|&(start, len)| (start..start + len).any(|c| cap.usage[c as usize] > cap.limit));
        Plan {
            end: end.max(s + issue),
            events,
            result_ready,
            write_end,
            reads,
            rf_overflow,
        }
    }

    /// Plans on `cluster`, moving fetches just ahead of the issue cycle and
    /// backing off when the register file would overflow.
    fn best_plan(
        &mut self,
        instr: InstrId,
        operands: &[(InstrId, Slot)],
        result_slot: Option<Slot>,
        cluster: usize,
    ) -> Plan {
        let mark = self.tables.mark();
        let first = self.plan(instr, operands, result_slot, cluster, 0);
        let issue_at = first
            .events
            .iter()
            .find_map(|e| matches!(e.event, Event::Exec { .. }).then_some(e.cycle))
            .expect("exec event");
        self.tables.undo_to(mark);
        let mut lb = issue_at.saturating_sub(self.occ);
        loop {
            let p = self.plan(instr, operands, result_slot, cluster, lb);
            if !p.rf_overflow {
                return p;
            }
            self.tables.undo_to(mark);
            lb += self.occ.max(1);
        }
    }

    fn compute(&mut self, instr: InstrId, operands: &[(InstrId, Slot)], result_slot: Option<Slot>) {
        let nc = self.clusters.len();
        let mut best: Option<(u64, usize)> = None;
        for i in 0..nc {
            let c = (self.rr + i) % nc;
            let mark = self.tables.mark();
            let p = self.best_plan(instr, operands, result_slot, c);
            self.tables.undo_to(mark);
            if best.is_none_or(|(e, _)| p.end < e) {
                best = Some((p.end, c));
            }
        }
        let (_, cluster) = best.expect("at least one cluster");
        self.rr = (cluster + 1) % nc;
        let p = self.best_plan(instr, operands, result_slot, cluster);
        self.tables.commit();
        for (slot, end) in p.reads {
            self.slot_read_end[slot] = self.slot_read_end[slot].max(end);
        }
        if let (Some(slot), Some(ready), Some(we)) = (result_slot, p.result_ready, p.write_end) {
            self.ready[instr] = ready;
            self.slot_write_end[slot] = we;
        }
        self.total = self.total.max(p.end);
        self.events.extend(p.events);
    }
}

/// Assigns every phase-2 action the earliest cycle at which its resources
/// are free, in phase-2 order. Loads may move ahead of earlier actions.
pub fn schedule_cycles(
    dms: &DataMovementSchedule,
    dfg: &InstructionDfg,
    config: &MachineConfig,
) -> Result<CycleSchedule, CompileError> {
    config.validate()?;
    if dfg.instrs.is_empty() {
        return Ok(CycleSchedule::from_events(
            dfg.n,
            dms.slots,
            0,
            dms.objects.clone(),
            dfg.outputs.clone(),
            Vec::new(),
            &[],
        ));
    }
    config.check_n(dfg.n)?;
    let mut tables = Tables::default();
    let hbm = tables.add(1);
    let banks = (0..config.banks).map(|_| tables.add(config.bank_ports)).collect();
    let clusters = (0..config.clusters)
        .map(|_| {
            let xin = tables.add(config.xbar_ports_per_cluster);
            let xout = tables.add(config.xbar_ports_per_cluster);
            let rf_read = tables.add(config.rf_read_ports);
            let rf_write = tables.add(config.rf_write_ports);
            let rf_cap = tables.add(config.rf_vectors_per_cluster);
            let units = FuKind::ALL.map(|k| (0..config.fu_count(k, dfg.n)).map(|_| tables.add(1)).collect());
            ClusterTables {
                xin,
                xout,
                rf_read,
                rf_write,
                rf_cap,
                units,
            }
        })
        .collect();
    let mut s = Scheduler {
        dfg,
        config,
        occ: config.chunk_cycles(dfg.n),
        hbm_occ: config.hbm_cycles(dfg.n),
        mem_lat: config.mem_worst_case_latency,
        tables,
        hbm,
        banks,
        clusters,
        ready: vec![0; dfg.instrs.len()],
        slot_read_end: vec![0; dms.slots],
        slot_write_end: vec![0; dms.slots],
        spill_done: Default::default(),
        events: Vec::new(),
        total: 0,
        rr: 0,
    };
    for action in &dms.actions {
        match *action {
            DmsAction::Load { instr, slot } => {
                let Op::Load { obj, part } = dfg.instrs[instr].op else {
                    unreachable!("load action on a load")
                };
                s.hbm_in(instr, slot, obj, part, 0);
            }
            DmsAction::Hit { .. } => {}
            DmsAction::Fill { value, slot, obj, part } => {
                let lb = s.spill_done.get(&obj).copied().unwrap_or(0);
                s.hbm_in(value, slot, obj, part, lb);
            }
            DmsAction::Spill { value, slot, obj } => {
                let end = s.hbm_out(value, slot, obj, 0);
                s.spill_done.insert(obj, end);
            }
            DmsAction::Issue {
                instr,
                ref operands,
                result_slot,
            } => match dfg.instrs[instr].op {
                Op::Store { obj, part } => {
                    let (value, slot) = operands[0];
                    s.hbm_out(value, slot, obj, part);
                }
                _ => s.compute(instr, operands, result_slot),
            },
        }
    }
    let events = std::mem::take(&mut s.events);
    let aliases = dms
        .actions
        .iter()
        .filter_map(|a| match *a {
            DmsAction::Hit { instr, value } => Some((instr, value)),
            _ => None,
        })
        .collect();
    Ok(CycleSchedule::from_events(
        dfg.n,
        dms.slots,
        s.total,
        dms.objects.clone(),
        dfg.outputs.clone(),
        aliases,
        &events,
    ))
}
