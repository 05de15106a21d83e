#![allow(dead_code)]

use std::collections::HashMap;

use fhesched::bgv::{decrypt, keygen, BgvParams, KeySwitchHint, Plaintext, SecretKey};
use fhesched::compiler::{compile, Compiled, Ordering};
use fhesched::dsl::{encrypt_inputs, eval_encrypted, eval_plain, generate_hints, EncryptedInput, HintId, HomProgram};
use fhesched::sim::{MachineConfig, MemoryImage};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Everything needed to run a program functionally.
pub struct Setup {
    pub params: BgvParams,
    pub sk: SecretKey,
    pub plain: Vec<Plaintext>,
    pub inputs: Vec<EncryptedInput>,
    pub hints: HashMap<HintId, KeySwitchHint>,
}

impl Setup {
    pub fn new(program: &HomProgram, levels: usize, seed: u64) -> Self {
        let params = BgvParams::generate(program.n(), levels, 30, 257, seed).unwrap();
        let sk = keygen(&params);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let plain: Vec<Plaintext> = program
            .inputs()
            .iter()
            .map(|_| Plaintext::random(program.n(), params.t, &mut rng))
            .collect();
        let inputs = encrypt_inputs(&params, &sk, program, &plain, &mut rng).unwrap();
        let hints = generate_hints(&params, &sk, program, &mut rng).unwrap();
        Self {
            params,
            sk,
            plain,
            inputs,
            hints,
        }
    }

    pub fn image(&self, program: &HomProgram, compiled: &Compiled) -> MemoryImage {
        MemoryImage::from_bgv(
            &compiled.schedule.objects,
            &self.params,
            program,
            &self.inputs,
            &self.hints,
        )
        .unwrap()
    }

    /// Decrypts the outputs left in `memory` and compares with plaintext
    /// evaluation.
    pub fn outputs_match(&self, program: &HomProgram, compiled: &Compiled, memory: &MemoryImage) -> bool {
        let cts = memory
            .ciphertexts(&compiled.schedule.objects, &compiled.schedule.outputs)
            .unwrap();
        let expected = eval_plain(program, &self.plain).unwrap();
        cts.iter()
            .zip(&expected)
            .all(|(ct, e)| decrypt(ct, &self.sk, self.params.t).unwrap() == *e)
    }
}

pub fn compile_desk(program: &HomProgram, setup: &Setup, slots: usize) -> (Compiled, MachineConfig) {
    let config = MachineConfig::desk(program.n(), 8, slots);
    let c = compile(program, &setup.params, &config, Ordering::HintReuse).unwrap();
    (c, config)
}

impl Setup {
    /// Bit-exact comparison with the reference evaluator.
    pub fn outputs_equal_reference(&self, program: &HomProgram, compiled: &Compiled, memory: &MemoryImage) -> bool {
        let cts = memory
            .ciphertexts(&compiled.schedule.objects, &compiled.schedule.outputs)
            .unwrap();
        let reference = eval_encrypted(&self.params, program, &self.inputs, &self.hints).unwrap();
        cts.iter().zip(&reference).all(|(a, b)| a.a == b.a && a.b == b.b)
    }

    pub fn reference_decrypts(&self, program: &HomProgram) -> bool {
        let reference = eval_encrypted(&self.params, program, &self.inputs, &self.hints).unwrap();
        let expected = eval_plain(program, &self.plain).unwrap();
        reference
            .iter()
            .zip(&expected)
            .all(|(ct, e)| decrypt(ct, &self.sk, self.params.t).unwrap() == *e)
    }
}
