//! Bayesian inference for discrete hidden Markov models with missing
//! observations.
//!
//! The centerpiece is [`collapsed`], a Gibbs sampler whose latent sweep only
//! visits observed positions: missing emissions and the latent states behind
//! them are integrated out analytically through powers of the transition
//! matrix (see [`linalg::PowerCache`]). The [`baseline`] module carries the
//! data-augmentation and partially-collapsed samplers plus an EM fit for
//! comparison, and [`diagnostics`] scores traces (ESS, label-aligned MSE,
//! majority-vote latent accuracy).
//!
//! ```
//! use phmm::{simulation, Priors, SamplerConfig, HmmParams, RngStream};
//!
//! let truth = HmmParams::reference_three_state();
//! let mut rng = RngStream::new(7, 0);
//! let (complete, _) = simulation::generate(&truth, 50, 20, &mut rng).unwrap();
//! let data = simulation::apply_random_missing(&complete, 0.5, &mut RngStream::new(7, 1)).unwrap();
//! let config = SamplerConfig { iterations: 20, burn_in: 10, ..SamplerConfig::default() };
//! let trace = phmm::collapsed::run_collapsed_gibbs(&data, &Priors::flat(3, 3), &config, None).unwrap();
//! assert_eq!(trace.draws.len(), 10);
//! ```

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod collapsed;
pub mod diagnostics;
pub mod dirichlet;
pub mod em;
pub mod enumerate;
mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod prediction;
mod rng;
pub mod sampler;
pub mod simulation;

pub use error::{Error, Result};
pub use linalg::PowerCache;
pub use model::{validate_params, Dataset, HmmParams, ObservedSequence, Priors, RawParams, Simplex, StochasticMatrix, Violation};
pub use rng::RngStream;
pub use sampler::{ChainTrace, Draw, SamplerConfig, SamplerKind};
