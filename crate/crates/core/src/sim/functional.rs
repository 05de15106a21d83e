//! Off-chip memory images for functional co-simulation.

use std::collections::HashMap;

use thiserror::Error;

use crate::bgv::{
    decrypt, keygen, plain_poly, BgvError, BgvParams, Ciphertext, KeySwitchHint, Plaintext, Provenance, RnsPoly,
};
use crate::compiler::{CycleSchedule, DataObject, InstructionDfg, ObjId, ObjectKey, Op};
use crate::dsl::{
    encrypt_inputs, eval_encrypted, eval_plain, generate_hints, DslError, EncryptedInput, HintId, HomProgram,
};
use crate::ring::{automorphism_vectorized, ntt_four_step, Direction, GridShape, ResidueVector, RingError};
use crate::rns::RnsBasis;

use super::config::MachineConfig;
use super::validate::{validate_and_run, SimReport};

#[derive(Debug, Error)]
pub enum FunctionalError {
    #[error("no input value for object {0}")]
    MissingInput(ObjId),
    #[error("no hint {0}")]
    MissingHint(HintId),
    #[error("input {node} has the wrong kind or level")]
    BadInput { node: usize },
    #[error("output object {0} was never fully written")]
    MissingOutput(ObjId),
    #[error(transparent)]
    Bgv(#[from] BgvError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Dsl(#[from] DslError),
}

/// Contents of off-chip memory, one residue vector per object part.
#[derive(Debug, Clone)]
pub struct MemoryImage {
    pub basis: RnsBasis,
    pub parts: HashMap<(ObjId, usize), ResidueVector>,
}

impl MemoryImage {
    /// Lays out ciphertexts, plaintexts and hint rows for every input-side
    /// object in `objects`. `inputs` follow the program's input order.
    pub fn from_bgv(
        objects: &[DataObject],
        params: &BgvParams,
        program: &HomProgram,
        inputs: &[EncryptedInput],
        hints: &HashMap<HintId, KeySwitchHint>,
    ) -> Result<Self, FunctionalError> {
        let by_node: HashMap<usize, &EncryptedInput> = program.inputs().into_iter().zip(inputs).collect();
        let mut parts = HashMap::new();
        for obj in objects {
            let vectors: Vec<ResidueVector> = match obj.key {
                ObjectKey::Cipher { node } => match by_node.get(&node) {
                    Some(EncryptedInput::Cipher(ct)) if ct.level() == obj.parts() / 2 => {
                        ct.a.residues().iter().chain(ct.b.residues()).cloned().collect()
                    }
                    Some(_) => return Err(FunctionalError::BadInput { node }),
                    None => return Err(FunctionalError::MissingInput(obj.id)),
                },
                ObjectKey::Plain { node } => match by_node.get(&node) {
                    Some(EncryptedInput::Plain(pt)) => plain_poly(params, pt, obj.parts())?.into_residues(),
                    Some(_) => return Err(FunctionalError::BadInput { node }),
                    None => return Err(FunctionalError::MissingInput(obj.id)),
                },
                ObjectKey::KshRow { hint, row } => {
                    let h = hints.get(&hint).ok_or(FunctionalError::MissingHint(hint))?;
                    h.ksh0[row].iter().chain(&h.ksh1[row]).cloned().collect()
                }
                ObjectKey::Output { .. } | ObjectKey::Spill { .. } => continue,
            };
            for (p, v) in vectors.into_iter().enumerate() {
                parts.insert((obj.id, p), v);
            }
        }
        Ok(Self {
            basis: params.basis.clone(),
            parts,
        })
    }

    /// Reassembles output objects into ciphertexts.
    pub fn ciphertexts(&self, objects: &[DataObject], outputs: &[ObjId]) -> Result<Vec<Ciphertext>, FunctionalError> {
        outputs
            .iter()
            .map(|&o| {
                let n = objects[o].parts();
                let get = |p: usize| {
                    self.parts
                        .get(&(o, p))
                        .cloned()
                        .ok_or(FunctionalError::MissingOutput(o))
                };
                let a = (0..n / 2).map(get).collect::<Result<Vec<_>, _>>()?;
                let b = (n / 2..n).map(get).collect::<Result<Vec<_>, _>>()?;
                Ok(Ciphertext::new(RnsPoly::new(a), RnsPoly::new(b), Provenance::Derived)?)
            })
            .collect()
    }
}

/// Outcome of a seeded end-to-end run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FunctionalVerdict {
    /// Simulated outputs equal the reference evaluator's, bit for bit.
    pub bit_exact: bool,
    /// Simulated outputs decrypt to the plaintext evaluation.
    pub decrypts: bool,
    /// The reference outputs decrypt; false means the parameters ran out
    /// of noise budget, not that the schedule is wrong.
    pub reference_decrypts: bool,
}

impl FunctionalVerdict {
    pub fn passed(&self) -> bool {
        self.bit_exact && self.decrypts
    }
}

/// Generates keys, inputs and hints from `seed`, replays `schedule` on
/// them and checks the outputs. The verdict is `None` when replay failed.
pub fn functional_run(
    program: &HomProgram,
    params: &BgvParams,
    dfg: &InstructionDfg,
    schedule: &CycleSchedule,
    config: &MachineConfig,
    seed: u64,
) -> Result<(SimReport, Option<FunctionalVerdict>), FunctionalError> {
    let params = BgvParams { seed, ..params.clone() };
    let sk = keygen(&params);
    let mut rng = params.rng(1);
    let plain: Vec<Plaintext> = program
        .inputs()
        .iter()
        .map(|_| Plaintext::random(params.n, params.t, &mut rng))
        .collect();
    let inputs = encrypt_inputs(&params, &sk, program, &plain, &mut rng)?;
    let hints = generate_hints(&params, &sk, program, &mut rng)?;
    let image = MemoryImage::from_bgv(&schedule.objects, &params, program, &inputs, &hints)?;
    let report = validate_and_run(schedule, dfg, config, Some(&image));
    let Some(mem) = report.memory.as_ref().filter(|_| report.passed()) else {
        return Ok((report, None));
    };
    let got = mem.ciphertexts(&schedule.objects, &schedule.outputs)?;
    let reference = eval_encrypted(&params, program, &inputs, &hints)?;
    let expected = eval_plain(program, &plain)?;
    let decrypts_to = |cts: &[Ciphertext]| -> Result<bool, FunctionalError> {
        for (ct, e) in cts.iter().zip(&expected) {
            if decrypt(ct, &sk, params.t)? != *e {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let verdict = FunctionalVerdict {
        bit_exact: got.len() == reference.len() && got.iter().zip(&reference).all(|(a, b)| a.a == b.a && a.b == b.b),
        decrypts: decrypts_to(&got)?,
        reference_decrypts: decrypts_to(&reference)?,
    };
    Ok((report, Some(verdict)))
}

/// Executes one compute op on lane-shaped hardware.
pub(crate) fn execute(
    op: &Op,
    modulus: usize,
    args: &[&ResidueVector],
    basis: &RnsBasis,
    shape: GridShape,
) -> Result<ResidueVector, RingError> {
    Ok(match *op {
        Op::VecAdd => match args {
            [a] => (*a).clone(),
            [a, b, ..] => a.add(b)?,
            [] => unreachable!("checked arity"),
        },
        Op::VecMul => args[0].pointwise_mul(args[1])?,
        Op::VecMulScalar { scalar } => args[0].scalar_mul(scalar),
        Op::Ntt { .. } => {
            let target = *basis.modulus(modulus);
            let x = if args[0].q() == target.q() {
                args[0].clone()
            } else {
                args[0].lift_to(target)
            };
            ntt_four_step(&x, shape, Direction::Forward)?
        }
        Op::Intt => ntt_four_step(args[0], shape, Direction::Inverse)?,
        Op::Automorphism { k } => automorphism_vectorized(args[0], k, shape)?,
        Op::Load { .. } | Op::Store { .. } => unreachable!("not a compute op"),
    })
}
