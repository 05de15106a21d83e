//! Program builder producing a homomorphic-operation dataflow graph.
//!
//! Levels are tracked at build time. Every `Mul` runs one level below its
//! operands, so a `ModSwitch` is inserted in front of it; operands of
//! `Add` at different levels are aligned by switching the higher one down.
//! Plaintext operands are used at the ciphertext's level by dropping
//! residues, which needs no node.

mod gen;
mod text;

pub use gen::{build_matvec, random_program, RandomProgramConfig};
pub use text::{emit_program, parse_program, ParseError};

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bgv::{self, hint_bytes, BgvError, BgvParams, Ciphertext, HintTarget, KeySwitchHint, Plaintext, SecretKey};

pub type NodeId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum DslError {
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
    #[error("node {0} is a plaintext and cannot be used here")]
    PlaintextOperand(NodeId),
    #[error("node {0} is not a plaintext")]
    NotPlaintext(NodeId),
    #[error("multiplication of node {node} would leave level {level}; the noise budget is exhausted")]
    LevelUnderflow { node: NodeId, level: usize },
    #[error("level {0} is invalid")]
    BadLevel(usize),
    #[error("ring dimension {0} must be a power of two >= 2")]
    BadDimension(usize),
    #[error("expected {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("rotation by {0} is out of range")]
    BadRotation(u64),
    #[error(transparent)]
    Bgv(#[from] BgvError),
    #[error("no hint available for {0}")]
    MissingHint(HintId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HomOpKind {
    Input,
    PlainInput,
    Add,
    Mul,
    /// Rotation by `amount`, implemented by `σ_k` with `k = 5^amount mod 2N`.
    Rotate {
        amount: u64,
        k: u64,
    },
    ModSwitch,
    AddPlain,
    MulPlain,
}

impl HomOpKind {
    pub fn name(&self) -> &'static str {
        match self {
            HomOpKind::Input => "input",
            HomOpKind::PlainInput => "plain_input",
            HomOpKind::Add => "add",
            HomOpKind::Mul => "mul",
            HomOpKind::Rotate { .. } => "rotate",
            HomOpKind::ModSwitch => "mod_switch",
            HomOpKind::AddPlain => "add_plain",
            HomOpKind::MulPlain => "mul_plain",
        }
    }

    pub fn is_input(&self) -> bool {
        matches!(self, HomOpKind::Input | HomOpKind::PlainInput)
    }
}

/// Identity of one key-switch hint: the source secret and the level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HintId {
    pub target: HintTarget,
    pub level: usize,
}

impl fmt::Display for HintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.target {
            HintTarget::Relinearize => write!(f, "relin@{}", self.level),
            HintTarget::Automorphism(k) => write!(f, "galois{}@{}", k, self.level),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomOpNode {
    pub id: NodeId,
    pub kind: HomOpKind,
    pub operands: Vec<NodeId>,
    pub level: usize,
    pub hint: Option<HintId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomProgram {
    n: usize,
    nodes: Vec<HomOpNode>,
    outputs: Vec<NodeId>,
    #[serde(skip)]
    switch_memo: HashMap<(NodeId, usize), NodeId>,
}

impl PartialEq for HomProgram {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.nodes == other.nodes && self.outputs == other.outputs
    }
}

impl Eq for HomProgram {}

/// `5^r mod 2N`.
pub fn galois_for_rotation(amount: u64, n: usize) -> u64 {
    crate::rns::mod_pow(5, amount, 2 * n as u64)
}

impl HomProgram {
    pub fn new(n: usize) -> Result<Self, DslError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(DslError::BadDimension(n));
        }
        Ok(Self {
            n,
            nodes: Vec::new(),
            outputs: Vec::new(),
            switch_memo: HashMap::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[HomOpNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &HomOpNode {
        &self.nodes[id]
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }

    /// Inputs (encrypted and plain) in creation order.
    pub fn inputs(&self) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.kind.is_input()).map(|n| n.id).collect()
    }

    pub fn max_level(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    fn push(&mut self, kind: HomOpKind, operands: Vec<NodeId>, level: usize, hint: Option<HintId>) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(HomOpNode {
            id,
            kind,
            operands,
            level,
            hint,
        });
        id
    }

    fn get(&self, id: NodeId) -> Result<&HomOpNode, DslError> {
        self.nodes.get(id).ok_or(DslError::UnknownNode(id))
    }

    fn cipher(&self, id: NodeId) -> Result<usize, DslError> {
        let node = self.get(id)?;
        if node.kind == HomOpKind::PlainInput {
            return Err(DslError::PlaintextOperand(id));
        }
        Ok(node.level)
    }

    fn plain(&self, id: NodeId) -> Result<usize, DslError> {
        let node = self.get(id)?;
        if node.kind != HomOpKind::PlainInput {
            return Err(DslError::NotPlaintext(id));
        }
        Ok(node.level)
    }

    pub fn input(&mut self, level: usize) -> Result<NodeId, DslError> {
        if level == 0 {
            return Err(DslError::BadLevel(level));
        }
        Ok(self.push(HomOpKind::Input, vec![], level, None))
    }

    pub fn plain_input(&mut self, level: usize) -> Result<NodeId, DslError> {
        if level == 0 {
            return Err(DslError::BadLevel(level));
        }
        Ok(self.push(HomOpKind::PlainInput, vec![], level, None))
    }

    /// `id` switched down to `level`, reusing earlier switches.
    pub fn switch_to(&mut self, id: NodeId, level: usize) -> Result<NodeId, DslError> {
        let mut cur_level = self.cipher(id)?;
        if level == 0 || level > cur_level {
            return Err(DslError::BadLevel(level));
        }
        let mut cur = id;
        while cur_level > level {
            let next = cur_level - 1;
            cur = match self.switch_memo.get(&(id, next)) {
                Some(&s) => s,
                None => {
                    let s = self.push(HomOpKind::ModSwitch, vec![cur], next, None);
                    self.switch_memo.insert((id, next), s);
                    s
                }
            };
            cur_level = next;
        }
        Ok(cur)
    }

    fn align(&mut self, a: NodeId, b: NodeId, level: usize) -> Result<(NodeId, NodeId), DslError> {
        Ok((self.switch_to(a, level)?, self.switch_to(b, level)?))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, DslError> {
        let level = self.cipher(a)?.min(self.cipher(b)?);
        let (a, b) = self.align(a, b, level)?;
        Ok(self.push(HomOpKind::Add, vec![a, b], level, None))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, DslError> {
        let min = self.cipher(a)?.min(self.cipher(b)?);
        if min < 2 {
            return Err(DslError::LevelUnderflow {
                node: self.nodes.len(),
                level: min.saturating_sub(1),
            });
        }
        let level = min - 1;
        let (a, b) = self.align(a, b, level)?;
        let hint = HintId {
            target: HintTarget::Relinearize,
            level,
        };
        Ok(self.push(HomOpKind::Mul, vec![a, b], level, Some(hint)))
    }

    pub fn rotate(&mut self, x: NodeId, amount: u64) -> Result<NodeId, DslError> {
        let level = self.cipher(x)?;
        if amount > self.n as u64 / 2 {
            return Err(DslError::BadRotation(amount));
        }
        let k = galois_for_rotation(amount, self.n);
        let hint = HintId {
            target: HintTarget::Automorphism(k),
            level,
        };
        Ok(self.push(HomOpKind::Rotate { amount, k }, vec![x], level, Some(hint)))
    }

    fn with_plain(&mut self, kind: HomOpKind, ct: NodeId, pt: NodeId) -> Result<NodeId, DslError> {
        let level = self.cipher(ct)?;
        if self.plain(pt)? < level {
            return Err(DslError::BadLevel(level));
        }
        Ok(self.push(kind, vec![ct, pt], level, None))
    }

    pub fn add_plain(&mut self, ct: NodeId, pt: NodeId) -> Result<NodeId, DslError> {
        self.with_plain(HomOpKind::AddPlain, ct, pt)
    }

    pub fn mul_plain(&mut self, ct: NodeId, pt: NodeId) -> Result<NodeId, DslError> {
        self.with_plain(HomOpKind::MulPlain, ct, pt)
    }

    pub fn output(&mut self, id: NodeId) -> Result<(), DslError> {
        self.cipher(id)?;
        self.outputs.push(id);
        Ok(())
    }

    /// Distinct hints, in `HintId` order.
    pub fn hint_ids(&self) -> BTreeSet<HintId> {
        self.nodes.iter().filter_map(|n| n.hint).collect()
    }

    /// Bytes of all distinct hints at the levels they are used.
    pub fn hint_bytes_total(&self, word_bits: u32) -> u64 {
        self.hint_ids()
            .iter()
            .map(|h| hint_bytes(h.level, self.n, word_bits))
            .sum()
    }

    /// Users of every node, in program order.
    pub fn users(&self) -> Vec<Vec<NodeId>> {
        let mut users = vec![Vec::new(); self.nodes.len()];
        for n in &self.nodes {
            for &o in &n.operands {
                if !users[o].contains(&n.id) {
                    users[o].push(n.id);
                }
            }
        }
        users
    }

    /// Mirrors the builder's checks on a graph assembled elsewhere.
    pub(crate) fn from_parts(n: usize, nodes: Vec<HomOpNode>, outputs: Vec<NodeId>) -> Result<Self, DslError> {
        let mut p = Self::new(n)?;
        for (i, node) in nodes.iter().enumerate() {
            if node.id != i {
                return Err(DslError::UnknownNode(node.id));
            }
            if let Some(&bad) = node.operands.iter().find(|&&o| o >= i) {
                return Err(DslError::UnknownNode(bad));
            }
            if node.level == 0 {
                return Err(DslError::BadLevel(0));
            }
            let lvl = |k: usize| nodes[node.operands[k]].level;
            let plain = |k: usize| nodes[node.operands[k]].kind == HomOpKind::PlainInput;
            let consistent = match node.kind {
                HomOpKind::Input | HomOpKind::PlainInput => true,
                HomOpKind::ModSwitch => lvl(0) == node.level + 1 && !plain(0),
                HomOpKind::Rotate { .. } => lvl(0) == node.level && !plain(0),
                HomOpKind::Add | HomOpKind::Mul => {
                    lvl(0) == node.level && lvl(1) == node.level && !plain(0) && !plain(1)
                }
                HomOpKind::AddPlain | HomOpKind::MulPlain => {
                    lvl(0) == node.level && !plain(0) && plain(1) && lvl(1) >= node.level
                }
            };
            if !consistent {
                return Err(DslError::BadLevel(node.level));
            }
        }
        p.nodes = nodes;
        for o in outputs {
            p.output(o)?;
        }
        Ok(p)
    }
}

fn check_arity(program: &HomProgram, got: usize) -> Result<Vec<NodeId>, DslError> {
    let inputs = program.inputs();
    if inputs.len() != got {
        return Err(DslError::Arity {
            expected: inputs.len(),
            got,
        });
    }
    Ok(inputs)
}

/// Evaluates over `R_t`; one plaintext per input, in creation order.
pub fn eval_plain(program: &HomProgram, inputs: &[Plaintext]) -> Result<Vec<Plaintext>, DslError> {
    let ids = check_arity(program, inputs.len())?;
    let mut vals: Vec<Option<Plaintext>> = vec![None; program.nodes.len()];
    for (id, pt) in ids.into_iter().zip(inputs) {
        vals[id] = Some(pt.clone());
    }
    for node in &program.nodes {
        let arg = |i: usize| vals[node.operands[i]].clone().expect("operands precede users");
        let v = match node.kind {
            HomOpKind::Input | HomOpKind::PlainInput => continue,
            HomOpKind::Add | HomOpKind::AddPlain => arg(0).add(&arg(1)),
            HomOpKind::Mul | HomOpKind::MulPlain => arg(0).mul(&arg(1)),
            HomOpKind::Rotate { k, .. } => arg(0).automorphism(k),
            HomOpKind::ModSwitch => arg(0),
        };
        vals[node.id] = Some(v);
    }
    Ok(program
        .outputs
        .iter()
        .map(|&o| vals[o].clone().expect("evaluated"))
        .collect())
}

/// Hints for every identity `program` uses.
pub fn generate_hints(
    params: &BgvParams,
    sk: &SecretKey,
    program: &HomProgram,
    rng: &mut impl Rng,
) -> Result<HashMap<HintId, KeySwitchHint>, DslError> {
    program
        .hint_ids()
        .into_iter()
        .map(|h| Ok((h, bgv::keyswitch_hintgen(params, sk, h.target, h.level, rng)?)))
        .collect()
}

/// Values fed to an encrypted run: ciphertexts for `Input`, plaintexts for
/// `PlainInput`.
#[derive(Debug, Clone)]
pub enum EncryptedInput {
    Cipher(Ciphertext),
    Plain(Plaintext),
}

/// Encrypts `inputs` at each input node's level.
pub fn encrypt_inputs(
    params: &BgvParams,
    sk: &SecretKey,
    program: &HomProgram,
    inputs: &[Plaintext],
    rng: &mut impl Rng,
) -> Result<Vec<EncryptedInput>, DslError> {
    let ids = check_arity(program, inputs.len())?;
    ids.into_iter()
        .zip(inputs)
        .map(|(id, pt)| {
            let node = program.node(id);
            Ok(match node.kind {
                HomOpKind::Input => EncryptedInput::Cipher(bgv::encrypt(params, pt, sk, node.level, rng)?),
                _ => EncryptedInput::Plain(pt.clone()),
            })
        })
        .collect()
}

pub fn eval_encrypted(
    params: &BgvParams,
    program: &HomProgram,
    inputs: &[EncryptedInput],
    hints: &HashMap<HintId, KeySwitchHint>,
) -> Result<Vec<Ciphertext>, DslError> {
    let ids = check_arity(program, inputs.len())?;
    let mut cts: Vec<Option<Ciphertext>> = vec![None; program.nodes.len()];
    let mut pts: HashMap<NodeId, Plaintext> = HashMap::new();
    for (id, v) in ids.into_iter().zip(inputs) {
        match v {
            EncryptedInput::Cipher(c) => cts[id] = Some(c.clone()),
            EncryptedInput::Plain(p) => {
                pts.insert(id, p.clone());
            }
        }
    }
    let hint = |node: &HomOpNode| -> Result<&KeySwitchHint, DslError> {
        let h = node.hint.expect("key-switching node carries a hint");
        hints.get(&h).ok_or(DslError::MissingHint(h))
    };
    for node in &program.nodes {
        let ct = |i: usize| cts[node.operands[i]].as_ref().expect("operands precede users");
        let v = match node.kind {
            HomOpKind::Input | HomOpKind::PlainInput => continue,
            HomOpKind::Add => bgv::hom_add(ct(0), ct(1))?,
            HomOpKind::Mul => bgv::hom_mul(ct(0), ct(1), hint(node)?)?,
            HomOpKind::Rotate { k, .. } => bgv::rotate(ct(0), k, hint(node)?)?,
            HomOpKind::ModSwitch => bgv::mod_switch(ct(0), params.t)?,
            HomOpKind::AddPlain => bgv::add_plain(params, ct(0), &pts[&node.operands[1]])?,
            HomOpKind::MulPlain => bgv::mul_plain(params, ct(0), &pts[&node.operands[1]])?,
        };
        cts[node.id] = Some(v);
    }
    Ok(program
        .outputs
        .iter()
        .map(|&o| cts[o].clone().expect("evaluated"))
        .collect())
}
