//! Phase 2: scratchpad allocation and off-chip transfer scheduling.
//!
//! Every functional unit is treated as attached directly to the
//! scratchpad. Each step issues at most one off-chip fetch and one compute
//! instruction. Instruction ids double as priorities: a smaller id is used
//! sooner. Prefetches only take free slots or slots of dead values; a live
//! value is evicted only for the operand of the lowest unissued
//! instruction, and then the one used furthest in the future goes.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::dfg::{DataObject, InstrId, InstructionDfg, ObjId, ObjectClass, ObjectKey, Op};
use super::CompileError;
use crate::sim::MachineConfig;

pub type Slot = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum DmsAction {
    /// Fetch the object part named by load `instr` into `slot`.
    Load { instr: InstrId, slot: Slot },
    /// Load `instr` is served by resident (or pending) `value`.
    Hit { instr: InstrId, value: InstrId },
    /// Refetch an evicted value from `obj`.
    Fill {
        value: InstrId,
        slot: Slot,
        obj: ObjId,
        part: usize,
    },
    /// Write a dirty value to `obj` before its slot is reused.
    Spill { value: InstrId, slot: Slot, obj: ObjId },
    Issue {
        instr: InstrId,
        /// `(value, slot)` per operand.
        operands: Vec<(InstrId, Slot)>,
        result_slot: Option<Slot>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataMovementSchedule {
    pub slots: usize,
    pub vector_bytes: u64,
    pub actions: Vec<DmsAction>,
    /// DFG objects followed by spill objects.
    pub objects: Vec<DataObject>,
    /// Resident bytes at the end of every step.
    pub resident_bytes: Vec<u64>,
}

impl DataMovementSchedule {
    pub fn peak_resident_bytes(&self) -> u64 {
        self.resident_bytes.iter().copied().max().unwrap_or(0)
    }

    /// Off-chip fetches (loads and fills).
    pub fn fetches(&self) -> impl Iterator<Item = &DmsAction> {
        self.actions
            .iter()
            .filter(|a| matches!(a, DmsAction::Load { .. } | DmsAction::Fill { .. }))
    }
}

#[derive(Debug, Clone, Default)]
struct Val {
    slot: Option<Slot>,
    users: BTreeSet<InstrId>,
    /// Off-chip copy, if any.
    backing: Option<(ObjId, usize)>,
    last_touch: u64,
    produced: bool,
}

struct State<'a> {
    dfg: &'a InstructionDfg,
    users: Vec<Vec<InstrId>>,
    vals: Vec<Val>,
    /// Load instr -> value it resolved to.
    alias: Vec<Option<InstrId>>,
    slots: Vec<Option<InstrId>>,
    /// `(step freed, slot)`; the longest-free slot is reused first so
    /// phase 3 sees few false dependences.
    free: BTreeSet<(u64, Slot)>,
    freed_at: Vec<u64>,
    /// Values with unissued users tied to an object part.
    by_part: HashMap<(ObjId, usize), InstrId>,
    /// `(next use, instr)` of unprocessed loads.
    pending_loads: BTreeSet<(InstrId, InstrId)>,
    /// `(next use, value)` of evicted values still needed.
    pending_fills: BTreeSet<(InstrId, InstrId)>,
    issued: Vec<bool>,
    lowest_unissued: usize,
    lowest_compute: usize,
    /// Position of each instruction's homomorphic op in expansion order.
    rank: Vec<usize>,
    /// First instruction of each rank.
    rank_start: Vec<InstrId>,
    remaining: usize,
    objects: Vec<DataObject>,
    actions: Vec<DmsAction>,
    step: u64,
}

impl State<'_> {
    fn next_use(&self, v: InstrId) -> Option<InstrId> {
        self.vals[v].users.first().copied()
    }

    fn resident(&self) -> usize {
        self.slots.len() - self.free.len()
    }

    fn place(&mut self, v: InstrId, slot: Slot) {
        self.free.remove(&(self.freed_at[slot], slot));
        self.slots[slot] = Some(v);
        self.vals[v].slot = Some(slot);
        self.vals[v].last_touch = self.step;
    }

    fn release(&mut self, v: InstrId) {
        if let Some(slot) = self.vals[v].slot.take() {
            self.slots[slot] = None;
            self.freed_at[slot] = self.step;
            self.free.insert((self.step, slot));
        }
    }

    /// Lowest unissued instruction that is not a load.
    fn demand(&mut self) -> InstrId {
        while self.lowest_compute < self.issued.len()
            && (self.issued[self.lowest_compute] || matches!(self.dfg.instrs[self.lowest_compute].op, Op::Load { .. }))
        {
            self.lowest_compute += 1;
        }
        self.lowest_compute
    }

    /// First instruction past the homomorphic op after the current one;
    /// traffic and issue look no further.
    fn horizon(&mut self) -> InstrId {
        let d = self.demand();
        match self.rank.get(d) {
            Some(&r) => self.rank_start.get(r + 2).copied().unwrap_or(self.issued.len()),
            None => self.issued.len(),
        }
    }

    /// Picks a slot, evicting if needed. Live victims must be used after
    /// `limit` and not be in `keep`; `allow_live` false allows dead ones only.
    fn make_room(&mut self, limit: Option<InstrId>, keep: &[InstrId], allow_live: bool) -> Option<Slot> {
        if let Some(&(_, s)) = self.free.first() {
            return Some(s);
        }
        let mut dead: Option<(u64, Slot)> = None;
        let mut live: Option<(InstrId, Slot)> = None;
        for (slot, occ) in self.slots.iter().enumerate() {
            let v = occ.expect("no free slot");
            if keep.contains(&v) {
                continue;
            }
            match self.next_use(v) {
                None => {
                    let key = (self.vals[v].last_touch, slot);
                    if dead.is_none_or(|d| key < d) {
                        dead = Some(key);
                    }
                }
                Some(u) => {
                    if !allow_live || limit.is_some_and(|l| u <= l) {
                        continue;
                    }
                    if live.is_none_or(|(lu, ls)| (u, std::cmp::Reverse(slot)) > (lu, std::cmp::Reverse(ls))) {
                        live = Some((u, slot));
                    }
                }
            }
        }
        let slot = match (dead, live) {
            (Some((_, s)), _) => s,
            (None, Some((_, s))) => s,
            (None, None) => return None,
        };
        let v = self.slots[slot].expect("occupied");
        match self.next_use(v) {
            None => {
                if let Some(part) = self.vals[v].backing {
                    if self.by_part.get(&part) == Some(&v) {
                        self.by_part.remove(&part);
                    }
                }
            }
            Some(u) => {
                if self.vals[v].backing.is_none() {
                    let obj = self.objects.len();
                    self.objects.push(DataObject {
                        id: obj,
                        class: ObjectClass::Intermediate,
                        key: ObjectKey::Spill { value: v },
                        part_moduli: vec![self.dfg.instrs[v].modulus],
                        vector_bytes: self.dfg.vector_bytes(),
                    });
                    self.actions.push(DmsAction::Spill { value: v, slot, obj });
                    self.vals[v].backing = Some((obj, 0));
                }
                self.pending_fills.insert((u, v));
            }
        }
        self.release(v);
        Some(slot)
    }

    /// Fetches or resolves loads until one off-chip transfer is issued or
    /// none can be.
    fn traffic(&mut self) -> bool {
        let mut progress = false;
        loop {
            let load = self.pending_loads.first().copied();
            let fill = self.pending_fills.first().copied();
            let take_load = match (load, fill) {
                (None, None) => return progress,
                (Some(l), Some(f)) => l.0 <= f.0,
                (Some(_), None) => true,
                (None, Some(_)) => false,
            };
            let next = if take_load {
                load.expect("checked").0
            } else {
                fill.expect("checked").0
            };
            if next >= self.horizon() {
                return progress;
            }
            if take_load {
                let (next, instr) = load.expect("checked");
                let Op::Load { obj, part } = self.dfg.instrs[instr].op else {
                    unreachable!("pending loads hold loads")
                };
                if let Some(&v) = self.by_part.get(&(obj, part)) {
                    self.pending_loads.remove(&(next, instr));
                    self.alias[instr] = Some(v);
                    self.issued[instr] = true;
                    self.remaining -= 1;
                    if self.vals[v].slot.is_none() {
                        let old = self.next_use(v).expect("pending fill is live");
                        self.pending_fills.remove(&(old, v));
                    }
                    let users = self.users[instr].clone();
                    self.vals[v].users.extend(users);
                    if self.vals[v].slot.is_none() {
                        let u = self.next_use(v).expect("just added users");
                        self.pending_fills.insert((u, v));
                    } else {
                        self.vals[v].last_touch = self.step;
                    }
                    self.actions.push(DmsAction::Hit { instr, value: v });
                    progress = true;
                    continue;
                }
                let demand = next <= self.demand();
                let Some(slot) = self.make_room(Some(next), &[], demand) else {
                    return progress;
                };
                self.pending_loads.remove(&(next, instr));
                self.issued[instr] = true;
                self.remaining -= 1;
                self.alias[instr] = Some(instr);
                self.vals[instr].users = self.users[instr].iter().copied().collect();
                self.vals[instr].backing = Some((obj, part));
                self.vals[instr].produced = true;
                self.by_part.insert((obj, part), instr);
                self.place(instr, slot);
                self.actions.push(DmsAction::Load { instr, slot });
                return true;
            } else {
                let (next, v) = fill.expect("checked");
                let demand = next <= self.demand();
                let Some(slot) = self.make_room(Some(next), &[], demand) else {
                    return progress;
                };
                self.pending_fills.remove(&(next, v));
                let (obj, part) = self.vals[v].backing.expect("evicted live values are backed");
                self.place(v, slot);
                self.actions.push(DmsAction::Fill {
                    value: v,
                    slot,
                    obj,
                    part,
                });
                return true;
            }
        }
    }

    fn operand_values(&self, instr: InstrId) -> Option<Vec<InstrId>> {
        self.dfg.instrs[instr]
            .operands
            .iter()
            .map(|&o| {
                let v = if matches!(self.dfg.instrs[o].op, Op::Load { .. }) {
                    self.alias[o]?
                } else {
                    o
                };
                (self.vals[v].produced && self.vals[v].slot.is_some()).then_some(v)
            })
            .collect()
    }

    fn compute(&mut self) -> bool {
        while self.lowest_unissued < self.issued.len() && self.issued[self.lowest_unissued] {
            self.lowest_unissued += 1;
        }
        let horizon = self.horizon();
        let found = (self.lowest_unissued..horizon).find_map(|i| {
            if self.issued[i] || matches!(self.dfg.instrs[i].op, Op::Load { .. }) {
                return None;
            }
            self.operand_values(i).map(|ops| (i, ops))
        });
        let Some((instr, ops)) = found else { return false };
        let produces = self.dfg.instrs[instr].op.produces_value();
        let result_slot = if produces {
            match self.make_room(None, &ops, true) {
                Some(s) => Some(s),
                None => return false,
            }
        } else {
            None
        };
        let operands: Vec<(InstrId, Slot)> = ops
            .iter()
            .map(|&v| (v, self.vals[v].slot.expect("operands resident")))
            .collect();
        self.issued[instr] = true;
        self.remaining -= 1;
        for &v in &ops {
            self.vals[v].users.remove(&instr);
            self.vals[v].last_touch = self.step;
            if self.vals[v].users.is_empty() && self.vals[v].backing.is_none() {
                self.release(v);
            }
        }
        if let Some(slot) = result_slot {
            self.vals[instr].users = self.users[instr].iter().copied().collect();
            self.vals[instr].produced = true;
            if self.vals[instr].users.is_empty() {
                // nothing reads it; the slot is free again after the write
                self.actions.push(DmsAction::Issue {
                    instr,
                    operands,
                    result_slot: Some(slot),
                });
                return true;
            }
            self.place(instr, slot);
        }
        self.actions.push(DmsAction::Issue {
            instr,
            operands,
            result_slot,
        });
        true
    }
}

/// Greedy one-instruction-at-a-time data-movement schedule of `dfg` on a
/// scratchpad of `config.scratch_vectors(n)` residue vectors.
pub fn schedule_offchip(dfg: &InstructionDfg, config: &MachineConfig) -> Result<DataMovementSchedule, CompileError> {
    let slots = if dfg.n == 0 { 0 } else { config.scratch_vectors(dfg.n) };
    schedule_offchip_slots(dfg, slots)
}

/// As [`schedule_offchip`] with an explicit slot count.
pub fn schedule_offchip_slots(dfg: &InstructionDfg, slots: usize) -> Result<DataMovementSchedule, CompileError> {
    let n = dfg.instrs.len();
    let need = dfg
        .instrs
        .iter()
        .map(|i| i.operands.len() + usize::from(i.op.produces_value()))
        .max()
        .unwrap_or(0);
    if n > 0 && slots < need {
        return Err(CompileError::Infeasible {
            needed: need,
            slots,
            step: 0,
        });
    }
    let users = dfg.users();
    let mut issued = vec![false; n];
    let mut remaining = n;
    let mut pending_loads = BTreeSet::new();
    for i in dfg.instrs.iter().filter(|i| matches!(i.op, Op::Load { .. })) {
        match users[i.id].first() {
            Some(&u) => {
                pending_loads.insert((u, i.id));
            }
            None => {
                issued[i.id] = true;
                remaining -= 1;
            }
        }
    }
    let mut rank = Vec::with_capacity(n);
    let mut rank_start = Vec::new();
    for (i, ins) in dfg.instrs.iter().enumerate() {
        if i == 0 || ins.homop != dfg.instrs[i - 1].homop {
            rank_start.push(i);
        }
        rank.push(rank_start.len() - 1);
    }
    let mut st = State {
        dfg,
        users,
        vals: vec![Val::default(); n],
        alias: vec![None; n],
        slots: vec![None; slots],
        free: (0..slots).map(|s| (0, s)).collect(),
        freed_at: vec![0; slots],
        by_part: HashMap::new(),
        pending_loads,
        pending_fills: BTreeSet::new(),
        issued,
        lowest_unissued: 0,
        lowest_compute: 0,
        rank,
        rank_start,
        remaining,
        objects: dfg.objects.clone(),
        actions: Vec::new(),
        step: 0,
    };
    let mut resident_bytes = Vec::new();
    let vb = dfg.vector_bytes();
    // each compute instruction can be refetched and evicted a bounded
    // number of times; anything beyond signals livelock
    let step_cap = 16 * (n as u64 + 1) * (slots as u64 + 1);
    while st.remaining > 0 {
        st.step += 1;
        let moved = st.traffic();
        let issued = st.compute();
        resident_bytes.push(st.resident() as u64 * vb);
        if !(moved || issued) || st.step > step_cap {
            return Err(CompileError::Infeasible {
                needed: need,
                slots,
                step: st.step,
            });
        }
    }
    Ok(DataMovementSchedule {
        slots,
        vector_bytes: vb,
        actions: st.actions,
        objects: st.objects,
        resident_bytes,
    })
}
