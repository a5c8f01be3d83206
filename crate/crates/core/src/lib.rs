//! Synthesis and verification of optimal probabilistically resilient
//! schedulers for Markov decision processes with repair.
//!
//! The pipeline works on a cost-annotated copy of the input model
//! ([`transform`]), collects end components with locally optimal
//! average-resilient schedulers ([`components`]), and glues them together
//! with a transient scheduler obtained from a reachability LP over an
//! auxiliary goal MDP ([`synth`]). Every produced scheduler is re-checked
//! exactly by [`analyze`].
//!
//! All arithmetic is exact. The crate is `no_std` and only needs `alloc`.
#![no_std]
// exact rationals make errors and outcomes carrying values large
#![allow(clippy::result_large_err, clippy::large_enum_variant)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analyze;
pub mod components;
pub mod graph;
pub mod lp;
pub mod mdp;
pub mod model;
pub mod rational;
pub mod synth;
pub mod transform;

pub use model::{MdpWithRepair, StateKind};
pub use rational::Rational;
pub use synth::{synthesize, SynthesisOutcome};
pub use transform::TransformedMdp;
