//! Optimal multi-agent path finding with vertex capacities.
//!
//! Two solvers share one cost semantics: an eager solver that posts every
//! movement and capacity constraint into a single CNF per cost bound, and a
//! lazy solver that starts from a relaxed CNF and adds conflict-elimination
//! clauses as candidate plans violate the rules.

pub mod bench;
pub mod cnf;
pub mod encoder;
pub mod instance;
pub mod lit;
pub mod mdd;
pub mod pathcalc;
pub mod plan;
pub mod satcore;
pub mod solvers;
pub mod verify;
