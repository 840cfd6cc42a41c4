//! A workbench for propositional counting principles: formula families and
//! their matrices, partial-injection and partial-partition decision trees,
//! k-evaluations, Nullstellensatz certificates over finite rings, the
//! certificate compilers, witness-level reductions, and independent
//! brute-force oracles.

pub mod compile;
pub mod eval;
pub mod formula;
pub mod gcp;
pub mod oracle;
pub mod partial;
pub mod poly;
pub mod principles;
pub mod reduce;
pub mod tree;
