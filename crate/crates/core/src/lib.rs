//! Compiler and cycle-level simulator for a statically scheduled vector
//! accelerator running BGV homomorphic encryption.
//!
//! The crate is layered bottom-up:
//!
//! * [`rns`]: NTT-friendly primes, scalar modular arithmetic and the
//!   restricted-modulus Montgomery multiplier.
//! * [`ring`]: residue vectors, negacyclic NTTs (reference and four-step),
//!   automorphisms and the quadrant-swap transpose.
//! * [`bgv`]: the BGV scheme on top of RNS/NTT residues.
//! * [`dsl`]: a program builder producing homomorphic dataflow graphs.
//! * [`compiler`]: hint-reuse ordering, translation to vector instructions,
//!   off-chip data-movement scheduling and cycle-level scheduling.
//! * [`sim`]: machine description, schedule replay/validation, functional
//!   co-simulation and traffic statistics.
//! * [`formats`]: structured-text file formats used by the CLI.
//! * [`bench`]: desk-scale benchmark suites.

pub mod bench;
pub mod bgv;
pub mod compiler;
pub mod dsl;
pub mod formats;
pub mod ring;
pub mod rns;
pub mod sim;
