//! Three-phase static compiler: hint-reuse ordering and translation,
//! off-chip data-movement scheduling, and cycle-level scheduling.

mod cycles;
mod dfg;
mod offchip;
mod order;
mod translate;

pub use cycles::{schedule_cycles, Component, CycleSchedule, Event, Stream, StreamEntry, TimedEvent};
pub use dfg::{DataObject, DfgError, Instr, InstrId, InstructionDfg, ObjId, ObjectClass, ObjectKey, Op};
pub use offchip::{schedule_offchip, schedule_offchip_slots, DataMovementSchedule, DmsAction, Slot};
pub use order::{hint_transitions, naive_order, order_homops};
pub use translate::{choose_keyswitch_variant, keyswitch_cost, translate, KeySwitchCost, KeySwitchVariant};

use thiserror::Error;

use crate::bgv::BgvParams;
use crate::dsl::{HomProgram, NodeId};
use crate::sim::{ConfigError, MachineConfig};

#[derive(Debug, Error, PartialEq)]
pub enum CompileError {
    #[error("program has N = {program} but parameters have N = {params}")]
    DimensionMismatch { program: usize, params: usize },
    #[error("program uses level {0}, above the parameter set")]
    LevelTooHigh(usize),
    #[error("order is not a topological permutation of the program (node {0})")]
    BadOrder(NodeId),
    #[error("unknown key-switch variant {0}")]
    UnknownVariant(u32),
    #[error("scratchpad of {slots} vectors cannot make progress (needs at least {needed}; stuck at step {step})")]
    Infeasible { needed: usize, slots: usize, step: u64 },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Which phase-1 order to compile with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    #[default]
    HintReuse,
    Program,
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub order: Vec<NodeId>,
    pub dfg: InstructionDfg,
    pub dms: DataMovementSchedule,
    pub schedule: CycleSchedule,
}

/// Runs all three phases.
pub fn compile(
    program: &HomProgram,
    params: &BgvParams,
    config: &MachineConfig,
    ordering: Ordering,
) -> Result<Compiled, CompileError> {
    config.validate()?;
    config.check_n(program.n())?;
    let order = match ordering {
        Ordering::HintReuse => order_homops(program),
        Ordering::Program => naive_order(program),
    };
    let dfg = translate(program, &order, params)?;
    let dms = schedule_offchip(&dfg, config)?;
    let schedule = schedule_cycles(&dms, &dfg, config)?;
    Ok(Compiled {
        order,
        dfg,
        dms,
        schedule,
    })
}
