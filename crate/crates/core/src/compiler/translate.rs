//! Expansion of homomorphic ops into residue-vector instructions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::dfg::{DataObject, Instr, InstrId, InstructionDfg, ObjId, ObjectClass, ObjectKey, Op};
use super::CompileError;
use crate::bgv::{hint_bytes, mod_switch_constants, BgvParams};
use crate::dsl::{HintId, HomOpKind, HomProgram, NodeId};
use crate::rns::mod_inv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KeySwitchVariant {
    /// Per-residue decomposition: `L` INTTs, `L(L−1)` NTTs, `2L²` hint
    /// products.
    Listing1,
}

impl KeySwitchVariant {
    pub fn id(&self) -> u32 {
        match self {
            KeySwitchVariant::Listing1 => 1,
        }
    }

    pub fn from_id(id: u32) -> Result<Self, CompileError> {
        match id {
            1 => Ok(KeySwitchVariant::Listing1),
            _ => Err(CompileError::UnknownVariant(id)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeySwitchCost {
    pub transforms: u64,
    /// Element-wise multiplies.
    pub word_ops: u64,
    pub hint_bytes: u64,
}

pub fn keyswitch_cost(variant: KeySwitchVariant, level: usize, n: usize, word_bits: u32) -> KeySwitchCost {
    match variant {
        KeySwitchVariant::Listing1 => {
            let l2 = (level * level) as u64;
            KeySwitchCost {
                transforms: l2,
                word_ops: 2 * l2 * n as u64,
                hint_bytes: hint_bytes(level, n, word_bits),
            }
        }
    }
}

/// Picks a key-switch algorithm given how often its hint is reused and
/// how busy the functional units are. Only one variant exists.
pub fn choose_keyswitch_variant(_level: usize, _reuse_estimate: f64, _fu_load_estimate: f64) -> KeySwitchVariant {
    KeySwitchVariant::Listing1
}

struct Translator<'a> {
    program: &'a HomProgram,
    params: &'a BgvParams,
    vector_bytes: u64,
    instrs: Vec<Instr>,
    objects: Vec<DataObject>,
    by_key: HashMap<ObjectKey, ObjId>,
    values: Vec<Option<Vec<InstrId>>>,
    homop: NodeId,
    in_keyswitch: bool,
    /// Loads already made by the current homop.
    local: HashMap<(ObjId, usize), InstrId>,
}

impl Translator<'_> {
    fn push(&mut self, op: Op, operands: Vec<InstrId>, modulus: usize) -> InstrId {
        let id = self.instrs.len();
        self.instrs.push(Instr {
            id,
            op,
            operands,
            modulus,
            priority: 0,
            homop: self.homop,
            keyswitch: self.in_keyswitch,
        });
        id
    }

    fn object(&mut self, key: ObjectKey, class: ObjectClass, part_moduli: Vec<usize>) -> ObjId {
        if let Some(&id) = self.by_key.get(&key) {
            return id;
        }
        let id = self.objects.len();
        self.objects.push(DataObject {
            id,
            class,
            key,
            part_moduli,
            vector_bytes: self.vector_bytes,
        });
        self.by_key.insert(key, id);
        id
    }

    fn load(&mut self, obj: ObjId, part: usize) -> InstrId {
        if let Some(&v) = self.local.get(&(obj, part)) {
            return v;
        }
        let modulus = self.objects[obj].part_moduli[part];
        let v = self.push(Op::Load { obj, part }, vec![], modulus);
        self.local.insert((obj, part), v);
        v
    }

    /// `2ℓ` values of a ciphertext operand used at `level`.
    fn cipher(&mut self, node: NodeId) -> Vec<InstrId> {
        if let Some(v) = &self.values[node] {
            return v.clone();
        }
        let level = self.program.node(node).level;
        let obj = self.object(ObjectKey::Cipher { node }, ObjectClass::Input, two_copies(level));
        (0..2 * level).map(|p| self.load(obj, p)).collect()
    }

    fn plain(&mut self, node: NodeId, level: usize) -> Vec<InstrId> {
        let own = self.program.node(node).level;
        let obj = self.object(ObjectKey::Plain { node }, ObjectClass::Input, (0..own).collect());
        (0..level).map(|p| self.load(obj, p)).collect()
    }

    fn add(&mut self, a: InstrId, b: InstrId, j: usize) -> InstrId {
        self.push(Op::VecAdd, vec![a, b], j)
    }

    fn mul(&mut self, a: InstrId, b: InstrId, j: usize) -> InstrId {
        self.push(Op::VecMul, vec![a, b], j)
    }

    /// Returns `(u0, u1)`.
    fn keyswitch(&mut self, x: &[InstrId], hint: HintId) -> (Vec<InstrId>, Vec<InstrId>) {
        let l = x.len();
        self.in_keyswitch = true;
        let mut u0: Vec<Option<InstrId>> = vec![None; l];
        let mut u1: Vec<Option<InstrId>> = vec![None; l];
        for i in 0..l {
            let row = self.object(ObjectKey::KshRow { hint, row: i }, ObjectClass::KshRow, two_copies(l));
            let y = self.push(Op::Intt, vec![x[i]], i);
            for j in 0..l {
                let xq = if i == j {
                    x[i]
                } else {
                    self.push(Op::Ntt { src: i }, vec![y], j)
                };
                let k0 = self.load(row, j);
                let p0 = self.mul(xq, k0, j);
                let k1 = self.load(row, l + j);
                let p1 = self.mul(xq, k1, j);
                for (acc, p) in [(&mut u0[j], p0), (&mut u1[j], p1)] {
                    *acc = Some(match *acc {
                        None => self.push(Op::VecAdd, vec![p], j),
                        Some(a) => self.push(Op::VecAdd, vec![a, p], j),
                    });
                }
            }
        }
        self.in_keyswitch = false;
        let done = |v: Vec<Option<InstrId>>| v.into_iter().map(|x| x.expect("l >= 1")).collect();
        (done(u0), done(u1))
    }

    fn mod_switch(&mut self, c: &[InstrId]) -> Vec<InstrId> {
        let big_l = c.len();
        let last = big_l - 1;
        let basis = &self.params.basis;
        let lm = *basis.modulus(last);
        let t = self.params.t;
        let t_inv = mod_inv(t % lm.q(), lm.q());
        let y = self.push(Op::Intt, vec![c[last]], last);
        let w = self.push(Op::VecMulScalar { scalar: t_inv }, vec![y], last);
        (0..last)
            .map(|j| {
                let (ql_inv, neg_t_ql_inv) = mod_switch_constants(&lm, basis.modulus(j), t);
                let x = self.push(Op::Ntt { src: last }, vec![w], j);
                let x = self.push(Op::VecMulScalar { scalar: neg_t_ql_inv }, vec![x], j);
                let cj = self.push(Op::VecMulScalar { scalar: ql_inv }, vec![c[j]], j);
                self.add(cj, x, j)
            })
            .collect()
    }

    fn homop(&mut self, id: NodeId) {
        self.homop = id;
        self.local.clear();
        let node = self.program.node(id).clone();
        let l = node.level;
        let ops = &node.operands;
        let out = match node.kind {
            HomOpKind::Input => {
                if self.program.outputs().contains(&id) {
                    Some(self.cipher(id))
                } else {
                    None
                }
            }
            HomOpKind::PlainInput => None,
            HomOpKind::Add => {
                let (a, b) = (self.cipher(ops[0]), self.cipher(ops[1]));
                Some((0..2 * l).map(|p| self.add(a[p], b[p], p % l)).collect())
            }
            HomOpKind::Mul => {
                let (x, y) = (self.cipher(ops[0]), self.cipher(ops[1]));
                let (a0, b0, a1, b1) = (&x[..l], &x[l..], &y[..l], &y[l..]);
                let mut l2 = Vec::with_capacity(l);
                let mut l1 = Vec::with_capacity(l);
                let mut l0 = Vec::with_capacity(l);
                for j in 0..l {
                    l2.push(self.mul(a0[j], a1[j], j));
                    let m1 = self.mul(a0[j], b1[j], j);
                    let m2 = self.mul(a1[j], b0[j], j);
                    l1.push(self.add(m1, m2, j));
                    l0.push(self.mul(b0[j], b1[j], j));
                }
                let (u0, u1) = self.keyswitch(&l2, node.hint.expect("mul carries a hint"));
                let a: Vec<_> = (0..l).map(|j| self.add(l1[j], u1[j], j)).collect();
                let b: Vec<_> = (0..l).map(|j| self.add(l0[j], u0[j], j)).collect();
                Some([a, b].concat())
            }
            HomOpKind::Rotate { k, .. } => {
                let x = self.cipher(ops[0]);
                let s: Vec<_> = (0..2 * l)
                    .map(|p| self.push(Op::Automorphism { k }, vec![x[p]], p % l))
                    .collect();
                let (u0, u1) = self.keyswitch(&s[..l], node.hint.expect("rotate carries a hint"));
                let b: Vec<_> = (0..l).map(|j| self.add(s[l + j], u0[j], j)).collect();
                Some([u1, b].concat())
            }
            HomOpKind::ModSwitch => {
                let x = self.cipher(ops[0]);
                let hi = x.len() / 2;
                let a = self.mod_switch(&x[..hi]);
                let b = self.mod_switch(&x[hi..]);
                Some([a, b].concat())
            }
            HomOpKind::AddPlain => {
                let x = self.cipher(ops[0]);
                let p = self.plain(ops[1], l);
                let b: Vec<_> = (0..l).map(|j| self.add(x[l + j], p[j], j)).collect();
                Some([x[..l].to_vec(), b].concat())
            }
            HomOpKind::MulPlain => {
                let x = self.cipher(ops[0]);
                let p = self.plain(ops[1], l);
                Some((0..2 * l).map(|q| self.mul(x[q], p[q % l], q % l)).collect())
            }
        };
        let Some(vals) = out else { return };
        if self.program.outputs().contains(&id) {
            let obj = self.object(ObjectKey::Output { node: id }, ObjectClass::Output, two_copies(l));
            for (part, &v) in vals.iter().enumerate() {
                self.push(Op::Store { obj, part }, vec![v], part % l);
            }
        }
        if node.kind != HomOpKind::Input {
            self.values[id] = Some(vals);
        }
    }
}

fn two_copies(level: usize) -> Vec<usize> {
    (0..level).chain(0..level).collect()
}

/// Expands `program` in `order` into a residue-vector dataflow graph.
pub fn translate(program: &HomProgram, order: &[NodeId], params: &BgvParams) -> Result<InstructionDfg, CompileError> {
    if program.n() != params.n {
        return Err(CompileError::DimensionMismatch {
            program: program.n(),
            params: params.n,
        });
    }
    if program.max_level() > params.max_level() {
        return Err(CompileError::LevelTooHigh(program.max_level()));
    }
    check_order(program, order)?;
    let word_bits = params.basis.word_bits();
    let mut tr = Translator {
        program,
        params,
        vector_bytes: (program.n() * word_bits as usize / 8) as u64,
        instrs: Vec::new(),
        objects: Vec::new(),
        by_key: HashMap::new(),
        values: vec![None; program.nodes().len()],
        homop: 0,
        in_keyswitch: false,
        local: HashMap::new(),
    };
    for &id in order {
        tr.homop(id);
    }
    let count = tr.instrs.len() as u64;
    for ins in &mut tr.instrs {
        ins.priority = count - ins.id as u64;
    }
    let outputs = program
        .outputs()
        .iter()
        .map(|&node| tr.by_key[&ObjectKey::Output { node }])
        .collect();
    let dfg = InstructionDfg {
        n: program.n(),
        word_bits,
        instrs: tr.instrs,
        objects: tr.objects,
        outputs,
    };
    debug_assert_eq!(dfg.check(), Ok(()));
    Ok(dfg)
}

fn check_order(program: &HomProgram, order: &[NodeId]) -> Result<(), CompileError> {
    let mut pos = vec![usize::MAX; program.nodes().len()];
    for (i, &id) in order.iter().enumerate() {
        if id >= pos.len() || pos[id] != usize::MAX {
            return Err(CompileError::BadOrder(id));
        }
        pos[id] = i;
    }
    for n in program.nodes() {
        if pos[n.id] == usize::MAX {
            return Err(CompileError::BadOrder(n.id));
        }
        if let Some(&o) = n.operands.iter().find(|&&o| pos[o] > pos[n.id]) {
            return Err(CompileError::BadOrder(o));
        }
    }
    Ok(())
}
