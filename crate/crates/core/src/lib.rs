//! Contract-monitoring runtime for ljc, a small JavaScript-like calculus.
//!
//! The crate is organized along the pipeline: [`parser`] turns source text
//! into [`syntax`] trees, [`canon`] normalizes contract expressions into
//! their canonical immediate/delayed form, [`interp`] evaluates programs
//! while recording monitoring [`constraints`], and blame is decided by the
//! least fixpoint of those constraints over the [`b4`] lattice.

pub mod b4;
pub mod canon;
pub mod constraints;
pub mod interp;
pub mod parser;
pub mod syntax;

pub use b4::B4Value;
pub use constraints::{blame_state, solve, BlameState, Constraint, ConstraintSet, Party, Solution};
pub use interp::{Behavior, Env, Exn, ExnKind, Machine, MachineConfig, Value};
pub use parser::parse_program;
pub use syntax::{BlameId, ContractExpr, Expression};
