//! Decision pipeline for finite digraphs with permutation-group symmetry:
//! either exhibit an edge inside a vertex orbit, or constructively emit a
//! verified definition script producing the class blow-up of an OR-relation
//! over a proper equivalence on the class quotient.
//!
//! The crate is organised around the objects of that pipeline:
//!
//! * [`digraph`] — digraphs, binary-relation algebra, fences, linkedness;
//! * [`perm`] — permutation groups, orbits, quotients, reductionistic sets;
//! * [`paths`] — orbit-labelled paths and properly separated pairs;
//! * [`finitise`] — the finitising refinement of the orbit partition;
//! * [`ppengine`] — primitive positive formulas, evaluation, scripts;
//! * [`pipeline`] — the master induction and certificate verification;
//! * [`polymorphism`] — brute-force polymorphism search and identity checks.

pub mod bitset;
pub mod corpus;
pub mod digraph;
pub mod error;
pub mod finitise;
pub mod fixtures;
pub mod paths;
pub mod perm;
pub mod pipeline;
pub mod polymorphism;
pub mod ppengine;

pub use error::{Error, Result};
