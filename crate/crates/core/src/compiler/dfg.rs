//! Residue-vector instruction graph.

use serde::{Deserialize, Serialize};

use crate::dsl::{HintId, NodeId};
use crate::sim::FuKind;

pub type InstrId = usize;
pub type ObjId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    KshRow,
    Input,
    Output,
    Intermediate,
}

/// What an off-chip object holds. Ciphertext parts are `a_0..a_{L-1}`
/// then `b_0..b_{L-1}`; hint rows are `ksh0[row][..]` then `ksh1[row][..]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKey {
    KshRow {
        hint: HintId,
        row: usize,
    },
    Cipher {
        node: NodeId,
    },
    Plain {
        node: NodeId,
    },
    Output {
        node: NodeId,
    },
    /// Spilled copy of a computed value.
    Spill {
        value: InstrId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataObject {
    pub id: ObjId,
    pub class: ObjectClass,
    pub key: ObjectKey,
    /// RNS index of each part.
    pub part_moduli: Vec<usize>,
    pub vector_bytes: u64,
}

impl DataObject {
    pub fn parts(&self) -> usize {
        self.part_moduli.len()
    }

    pub fn bytes(&self) -> u64 {
        self.parts() as u64 * self.vector_bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Op {
    /// One operand copies it; two add.
    VecAdd,
    VecMul,
    VecMulScalar {
        scalar: u64,
    },
    /// Forward transform into this instruction's modulus of a
    /// coefficient-domain operand held mod `src`, lifted centered.
    Ntt {
        src: usize,
    },
    Intt,
    Automorphism {
        k: u64,
    },
    Load {
        obj: ObjId,
        part: usize,
    },
    Store {
        obj: ObjId,
        part: usize,
    },
}

impl Op {
    pub fn fu(&self) -> Option<FuKind> {
        match self {
            Op::VecAdd => Some(FuKind::Adder),
            Op::VecMul | Op::VecMulScalar { .. } => Some(FuKind::Multiplier),
            Op::Ntt { .. } | Op::Intt => Some(FuKind::Ntt),
            Op::Automorphism { .. } => Some(FuKind::Automorphism),
            Op::Load { .. } | Op::Store { .. } => None,
        }
    }

    pub fn is_transform(&self) -> bool {
        matches!(self, Op::Ntt { .. } | Op::Intt)
    }

    pub fn produces_value(&self) -> bool {
        !matches!(self, Op::Store { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instr {
    pub id: InstrId,
    pub op: Op,
    pub operands: Vec<InstrId>,
    /// RNS index of the result (of the operand for a store).
    pub modulus: usize,
    /// Larger is more urgent; decreasing in expansion order.
    pub priority: u64,
    /// Homomorphic op this instruction was expanded from.
    pub homop: NodeId,
    /// Part of a key-switch expansion.
    pub keyswitch: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionDfg {
    pub n: usize,
    pub word_bits: u32,
    pub instrs: Vec<Instr>,
    pub objects: Vec<DataObject>,
    /// One `Output` object per program output, in output order.
    pub outputs: Vec<ObjId>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DfgError {
    #[error("instruction {0} is out of place")]
    BadId(InstrId),
    #[error("instruction {instr} uses {operand}, which is not an earlier value")]
    BadOperand { instr: InstrId, operand: InstrId },
    #[error("instruction {0} has the wrong operand count")]
    Arity(InstrId),
    #[error("instruction {0} refers to a missing object part")]
    BadObject(InstrId),
    #[error("priorities are not decreasing at instruction {0}")]
    Priority(InstrId),
}

impl InstructionDfg {
    pub fn vector_bytes(&self) -> u64 {
        (self.n * self.word_bits as usize / 8) as u64
    }

    /// Users of every instruction, in increasing id order.
    pub fn users(&self) -> Vec<Vec<InstrId>> {
        let mut users = vec![Vec::new(); self.instrs.len()];
        for ins in &self.instrs {
            for &o in &ins.operands {
                if !users[o].contains(&ins.id) {
                    users[o].push(ins.id);
                }
            }
        }
        users
    }

    pub fn count(&self, f: impl Fn(&Op) -> bool) -> usize {
        self.instrs.iter().filter(|i| f(&i.op)).count()
    }

    /// Structural checks: ids dense, operands earlier values, arity,
    /// object references and priority order.
    pub fn check(&self) -> Result<(), DfgError> {
        for (idx, ins) in self.instrs.iter().enumerate() {
            if ins.id != idx {
                return Err(DfgError::BadId(idx));
            }
            for &o in &ins.operands {
                if o >= idx || !self.instrs[o].op.produces_value() {
                    return Err(DfgError::BadOperand { instr: idx, operand: o });
                }
            }
            let arity_ok = match ins.op {
                Op::Load { .. } => ins.operands.is_empty(),
                Op::VecAdd => matches!(ins.operands.len(), 1 | 2),
                Op::VecMul => ins.operands.len() == 2,
                _ => ins.operands.len() == 1,
            };
            if !arity_ok {
                return Err(DfgError::Arity(idx));
            }
            if let Op::Load { obj, part } | Op::Store { obj, part } = ins.op {
                if self.objects.get(obj).is_none_or(|o| part >= o.parts()) {
                    return Err(DfgError::BadObject(idx));
                }
            }
            if idx > 0 && ins.priority >= self.instrs[idx - 1].priority {
                return Err(DfgError::Priority(idx));
            }
        }
        Ok(())
    }
}
