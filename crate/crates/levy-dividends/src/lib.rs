//! Optimal periodic dividends with forced capital injections for spectrally
//! negative Lévy processes.
//!
//! The surplus of a firm follows a spectrally negative Lévy process with
//! phase-type losses.  Dividend decisions are only allowed at the event times
//! of an independent Poisson clock with rate `r`; whenever the surplus is
//! negative, capital must be injected immediately and each unit injected
//! costs `beta > 1`.  Payouts and injections are discounted at `q > 0`, and
//! the firm maximizes expected discounted dividends minus `beta` times
//! injections.
//!
//! The optimal strategy is a periodic barrier policy: at each Poisson
//! observation pay the excess over a level `b*`.  This crate computes the
//! ingredients of that solution and verifies them numerically:
//!
//! * [`phase_type`] — phase-type jump laws (density, transforms, sampling);
//! * [`model`] — the Lévy model, its Laplace exponent `psi` and inverse `phi`;
//! * [`scale`] — `q`-scale functions `W`, `Z` and relatives via
//!   partial-fraction inversion of `1 / (psi - q)`, plus the convolution
//!   identities that build two-sided reflection quantities;
//! * [`solver`] — the slope function `g`, the optimal barrier `b*`, the
//!   candidate value function and its verification through the generator and
//!   the variational inequality;
//! * [`simulate`] — an event-driven Monte Carlo simulator of the reflected,
//!   periodically skimmed surplus, used as an independent check of the
//!   analytic value function;
//! * [`config`] — TOML ingestion and the two bundled example models.

pub mod config;
pub mod error;
mod exp_sum;
pub mod model;
pub mod phase_type;
pub mod poly;
pub mod quad;
pub mod scale;
pub mod simulate;
pub mod solver;

pub use config::ProblemConfig;
pub use error::{Error, Result};
pub use model::{LevyModel, ModelDiagnostics, PathVariation};
pub use phase_type::PhaseTypeDistribution;
pub use scale::{ConvolvedScales, ScaleEngine, ScalePair};
pub use simulate::{EstimateResult, PathRecord, SimConfig};
pub use solver::{BarrierProblem, BarrierSolution, GeneratorTarget, ValueFunction};
