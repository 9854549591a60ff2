//! Sampling from and tracking of log-concave distributions `∝ e^{−s(x)}` on
//! a convex body `K`, using a lazy Metropolis random walk whose Gaussian
//! proposals are shaped by the Hessian of a self-concordant barrier for `K`
//! (a Dikin walk).
//!
//! The crate is organized around the pipeline:
//!
//! * [`barriers`] — convex bodies presented through self-concordant barriers
//!   (polytopes, quadratics, sums), local metric and analytic center;
//! * [`potentials`] — convex potentials `s`, their step-size conditions and
//!   pairwise change bounds;
//! * [`walker`] — the lazy Metropolis Dikin walk itself;
//! * [`tracker`] — per-round schedule arithmetic (`β`, `α`, `Δ`, `τ`, `u`)
//!   for following a time-varying sequence of targets;
//! * [`applications`] — drivers for streaming posteriors, drifting truncated
//!   targets and mixtures, simulated-annealing linear optimization, and
//!   regret-minimizing prediction;
//! * [`diagnostics`] — grid oracles, total-variation distances and
//!   self-concordance/detailed-balance checks.
//!
//! ```
//! use dikin::barriers::{analytic_center, Barrier, PolytopeBarrier};
//! use dikin::potentials::Potential;
//! use dikin::walker::{run, ChainParams, ChainState};
//!
//! let body = PolytopeBarrier::hypercube(2, 1.0).unwrap();
//! let target = Potential::uniform(); // s ≡ 0
//! let params = ChainParams::new(0.5, 42).unwrap();
//! let start = analytic_center(&body, 1e-8).unwrap();
//! let mut chain = ChainState::new(&body, &params, start).unwrap();
//! run(&body, &target, &params, &mut chain, 1_000).unwrap();
//! assert!(body.contains(chain.current()));
//! ```

pub mod applications;
pub mod barriers;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod potentials;
pub mod presets;
pub mod report;
pub mod tracker;
pub mod walker;

pub use error::{Error, Result};
