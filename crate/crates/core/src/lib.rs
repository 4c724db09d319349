//! Exact and sampled statistics for the EPRB experiment, its "sideways"
//! single-photon analogue (SEPRB), and the input-controlled SEPRB variant,
//! together with the causal-structure machinery used to ask which DAGs can
//! explain those statistics without fine-tuning.
//!
//! Module map:
//!
//! - [`corestats`]: closed-form joints, Malus-law marginals, correlators and
//!   the EPRB/SEPRB operational-equivalence check.
//! - [`sampler`]: seeded, chunk-parallel Monte Carlo event generation,
//!   including the hidden-input demon.
//! - [`inference`]: contingency tables, G-test conditional independence,
//!   correlation estimates and CHSH.
//! - [`causal`]: DAGs, d-separation, enumeration, Markov/faithfulness
//!   classification, local deterministic strategies, CPT models and the
//!   perturbation-based fine-tuning detector.

pub mod causal;
pub mod corestats;
pub mod error;
pub mod inference;
pub mod sampler;

pub use error::{Error, Result};

/// Tolerance used for every closed-form (non-sampled) comparison.
pub const EXACT_TOL: f64 = 1e-12;
