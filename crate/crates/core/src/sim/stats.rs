use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::config::{FuKind, MachineConfig};
use crate::compiler::{CycleSchedule, Event, ObjectClass};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficSplit {
    pub compulsory: u64,
    pub non_compulsory: u64,
}

impl TrafficSplit {
    pub fn total(&self) -> u64 {
        self.compulsory + self.non_compulsory
    }
}

/// Off-chip bytes by object class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Traffic {
    pub ksh: TrafficSplit,
    pub io: TrafficSplit,
    /// Spill fills; always non-compulsory.
    pub intermediate_load: u64,
    /// Spills; always non-compulsory.
    pub intermediate_store: u64,
    /// Every byte moved, for reconciliation.
    pub total: u64,
}

impl Traffic {
    pub fn intermediate(&self) -> TrafficSplit {
        TrafficSplit {
            compulsory: 0,
            non_compulsory: self.intermediate_load + self.intermediate_store,
        }
    }

    pub fn classified_total(&self) -> u64 {
        self.ksh.total() + self.io.total() + self.intermediate().total()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub total_cycles: u64,
    /// Busy unit-cycles per kind in [`FuKind::ALL`] order.
    pub fu_busy: [u64; 4],
    /// Units per kind across all clusters.
    pub fu_units: [u64; 4],
    pub traffic: Traffic,
    /// Off-chip bytes moved in each cycle.
    pub bandwidth: Vec<u32>,
    pub peak_resident_bytes: u64,
}

impl SimStats {
    /// Fraction of available unit-cycles spent busy.
    pub fn fu_utilization(&self, kind: FuKind) -> f64 {
        let i = FuKind::ALL.iter().position(|&k| k == kind).expect("listed");
        let avail = self.fu_units[i] * self.total_cycles;
        if avail == 0 {
            0.0
        } else {
            self.fu_busy[i] as f64 / avail as f64
        }
    }
}

/// Classifies every off-chip transfer. The first load of an object part
/// is compulsory and repeats are not; output stores are compulsory.
pub fn traffic_report(schedule: &CycleSchedule, config: &MachineConfig) -> Traffic {
    let vb = config.vector_bytes(schedule.n);
    let mut t = Traffic::default();
    let mut seen = HashSet::new();
    for e in schedule.events() {
        match e.event {
            Event::Load { obj, part, .. } => {
                t.total += vb;
                let first = seen.insert((obj, part));
                let split = match schedule.objects[obj].class {
                    ObjectClass::KshRow => &mut t.ksh,
                    ObjectClass::Input | ObjectClass::Output => &mut t.io,
                    ObjectClass::Intermediate => {
                        t.intermediate_load += vb;
                        continue;
                    }
                };
                if first {
                    split.compulsory += vb;
                } else {
                    split.non_compulsory += vb;
                }
            }
            Event::Store { obj, part, .. } => {
                t.total += vb;
                match schedule.objects[obj].class {
                    ObjectClass::Intermediate => t.intermediate_store += vb,
                    _ => {
                        if seen.insert((obj, part)) {
                            t.io.compulsory += vb;
                        } else {
                            t.io.non_compulsory += vb;
                        }
                    }
                }
            }
            _ => {}
        }
    }
    t
}
