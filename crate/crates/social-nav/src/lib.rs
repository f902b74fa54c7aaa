//! Uncertainty-aware social robot navigation, end to end and fully seeded:
//!
//! * a crowd simulator with scripted pedestrians and controlled perturbations
//!   ([`sim`]),
//! * reciprocal collision avoidance for the pedestrians and for the safety
//!   fallback ([`orca`]),
//! * a recurrent Gaussian policy whose action variance is predicted from the
//!   observation ([`policy`]),
//! * a PPO trainer for that policy with an annealed variance regularizer
//!   ([`trainer`]),
//! * aleatoric / epistemic / feature uncertainty estimators over Monte-Carlo
//!   dropout samples or deep-ensemble members ([`uncertainty`]),
//! * an uncertainty-gated safe action selector ([`safety`]), and
//! * an evaluation harness that runs episodes, perturbation sweeps, and gated
//!   versus ungated comparisons, emitting CSV tables and SVG plots
//!   ([`harness`]).
//!
//! Every entry point takes explicit seeds; identical inputs reproduce
//! identical episodes, training curves, and output files byte for byte.
//!
//! The `examples/` directory is the intended starting point — each example
//! exercises one capability end to end (`cargo run --example <name>`).

pub mod harness;
pub mod orca;
pub mod policy;
pub mod safety;
pub mod sim;
pub mod trainer;
pub mod uncertainty;
pub mod vec2;
