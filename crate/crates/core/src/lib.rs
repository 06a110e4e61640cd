//! Sequencing reliability growth tasks with a ranking-model surrogate.
//!
//! The expected utility of a task ordering is expensive to evaluate over all
//! `J!` orderings. This crate fits a Benter (multistage Plackett-Luce) model
//! whose log-likelihood, treated as a function of the ordering, tracks the
//! logit expected utility, and then spends the remaining evaluation budget on
//! the orderings the surrogate ranks highest.
//!
//! Module map:
//! - [`perm`]: permutations, Kendall distance, Mahonian counts, Benter sampling.
//! - [`relmodel`]: concerns, efficacy matrix, expected reliability and its
//!   rare-event Normal approximation.
//! - [`utility`]: stop-at-target stage plans and expected utility.
//! - [`emulator`]: surrogate evaluation, correlation fitting, cubic
//!   adjustment, candidate proposal.
//! - [`theory`]: probability that the optimum lands in the surrogate's top `M`.
//! - [`harness`]: scenario files, exhaustive search, the optimize pipeline,
//!   diagnostics export and simulation studies.

// `!(x > y)` is used on purpose so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod emulator;
pub mod error;
pub mod harness;
pub mod perm;
pub mod relmodel;
pub mod rng;
pub mod theory;
pub mod utility;

pub use error::{Error, Result};
pub use perm::Permutation;

/// Version tag written into every JSON/CSV output.
pub const FORMAT_VERSION: u32 = 1;
