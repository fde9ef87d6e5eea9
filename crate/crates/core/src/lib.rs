//! Desk-scale laboratory for multi-expert learning-to-defer.
//!
//! The crate provides:
//!
//! - [`numkit`]: stable elementwise primitives, power-iteration eigenvalue and
//!   operator-norm estimators, and finite-difference oracles used to validate
//!   every analytic derivative in the crate.
//! - [`surrogates`]: six samplewise surrogate losses (additive CE, PiCCE,
//!   Mao25, A-SM, OvA, decoupled) with analytic gradients and Hessians.
//! - [`bayes`]: the Bayes routing rule, conditional risks, and exact
//!   defer-regret evaluation from analytic ground truth.
//! - [`suites`]: four synthetic benchmark generators whose Bayes solutions
//!   are known in closed form.
//! - [`trainer`]: linear models for both head layouts, first-order
//!   optimizers, and a training loop with validation-based checkpointing.
//! - [`eval`]: per-surrogate routing rules, system-level metrics, and
//!   surrogate-regret transfer constants.
//! - [`geom`]: logit-space geometry probes (curvature vs. overlap,
//!   starvation signs, class-expert coupling norms).

pub mod bayes;
pub mod eval;
pub mod geom;
pub mod numkit;
pub mod suites;
pub mod surrogates;
pub mod textio;
pub mod trainer;
