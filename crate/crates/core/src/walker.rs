//! The lazy Metropolis Dikin walk.
//!
//! One step from `x` targeting the density `∝ e^{−s}` on `K`:
//!
//! 1. with probability 1/2 stay at `x` (lazy coin);
//! 2. otherwise propose `z` from the Gaussian `G^r_x` with density
//!    `∝ exp(−d‖x−z‖²_x/r² + V(x))`, i.e. `z = x + (r/√(2d))·L⁻ᵀ g` where
//!    `D²F(x) = LLᵀ` and `g` is a standard Gaussian vector;
//! 3. if `z ∉ K` stay at `x`;
//! 4. otherwise move to `z` with probability
//!    `min(1, G^r_z(x)·e^{s(x)} / (G^r_x(z)·e^{s(z)}))`.
//!
//! # RNG contract
//!
//! Chains draw from a seeded counter-based generator (ChaCha8) and the
//! per-step draw order is frozen: one uniform for the lazy coin; if walking,
//! `d` standard normals for the proposal; if the proposal landed inside `K`,
//! one uniform for the accept decision. Trajectories are bit-reproducible
//! for a given `(seed, stream)` across runs and platforms.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::barriers::{Barrier, LocalMetric};
use crate::error::{Error, Result};
use crate::potentials::Potential;

/// Step size and seeding for one chain. The laziness is fixed at 1/2.
#[derive(Clone, Debug)]
pub struct ChainParams {
    pub r: f64,
    pub seed: u64,
    pub stream: u64,
}

impl ChainParams {
    pub fn new(r: f64, seed: u64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Config(format!("step size r must be positive and finite, got {r}")));
        }
        Ok(Self { r, seed, stream: 0 })
    }

    /// Selects an independent substream of the generator; distinct streams
    /// under one seed give independent chains.
    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }
}

/// Mutable state of one chain: current point, counters, generator.
///
/// Single-owner: one chain must be stepped sequentially. Distinct chains
/// (with their own states and seeds) may run fully in parallel against the
/// same barrier and potential.
#[derive(Clone, Debug)]
pub struct ChainState {
    x: DVector<f64>,
    pub step_count: u64,
    pub proposal_count: u64,
    pub accept_count: u64,
    rng: ChaCha8Rng,
}

impl ChainState {
    /// Starts a chain at a strictly interior point. Checks `r ≤ 1/d`.
    pub fn new(barrier: &dyn Barrier, params: &ChainParams, x0: DVector<f64>) -> Result<Self> {
        if !barrier.contains(&x0) {
            return Err(Error::NotInterior);
        }
        let max_r = 1.0 / barrier.dim() as f64;
        if params.r > max_r + 1e-15 {
            return Err(Error::Config(format!(
                "step size r = {} exceeds 1/d = {max_r}",
                params.r
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(params.stream);
        Ok(Self { x: x0, step_count: 0, proposal_count: 0, accept_count: 0, rng })
    }

    /// Starts from the analytic center of the body.
    pub fn from_center(barrier: &dyn Barrier, params: &ChainParams) -> Result<Self> {
        let center = crate::barriers::analytic_center(barrier, 1e-8)?;
        Self::new(barrier, params, center)
    }

    pub fn current(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposal_count == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.proposal_count as f64
        }
    }

    /// Fraction of steps resolved by the lazy coin alone.
    pub fn lazy_fraction(&self) -> f64 {
        if self.step_count == 0 {
            0.0
        } else {
            (self.step_count - self.proposal_count) as f64 / self.step_count as f64
        }
    }
}

/// Draws `z ~ G^r_x`; the increment `z − x` has covariance
/// `(r²/(2d))·D²F(x)⁻¹`, so `E‖z−x‖²_x = r²/2`.
pub fn propose<R: Rng + ?Sized>(
    barrier: &dyn Barrier,
    x: &DVector<f64>,
    r: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let metric = LocalMetric::at(barrier, x)?;
    propose_with_metric(&metric, barrier.dim(), x, r, rng)
}

fn propose_with_metric<R: Rng + ?Sized>(
    metric: &LocalMetric,
    d: usize,
    x: &DVector<f64>,
    r: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let step = metric.whitened(&g)?;
    Ok(x + step * (r / (2.0 * d as f64).sqrt()))
}

/// Log of the Metropolis ratio `G^r_z(x)·e^{s(x)} / (G^r_x(z)·e^{s(z)})`
/// before truncation at zero, evaluated entirely in the log domain. The
/// Gaussian normalizers cancel; only `V(z) − V(x)` enters.
pub fn log_accept(
    barrier: &dyn Barrier,
    s: &Potential,
    x: &DVector<f64>,
    z: &DVector<f64>,
    r: f64,
) -> Result<f64> {
    let metric_x = LocalMetric::at(barrier, x)?;
    let metric_z = LocalMetric::at(barrier, z)?;
    let d = barrier.dim() as f64;
    let diff = z - x;
    let to = -(d / (r * r)) * metric_z.norm(&diff).powi(2) + metric_z.log_det_half();
    let from = -(d / (r * r)) * metric_x.norm(&diff).powi(2) + metric_x.log_det_half();
    Ok(to - from + s.eval(x) - s.eval(z))
}

/// One transition of the lazy walk. Counters: every call bumps
/// `step_count`; non-lazy steps bump `proposal_count`; accepted moves bump
/// `accept_count`.
pub fn step(
    barrier: &dyn Barrier,
    s: &Potential,
    params: &ChainParams,
    state: &mut ChainState,
) -> Result<()> {
    state.step_count += 1;
    let lazy: f64 = state.rng.random();
    if lazy < 0.5 {
        return Ok(());
    }
    let metric = LocalMetric::at(barrier, &state.x)?;
    let z = propose_with_metric(&metric, barrier.dim(), &state.x, params.r, &mut state.rng)?;
    state.proposal_count += 1;
    if !barrier.contains(&z) {
        return Ok(());
    }
    let la = log_accept(barrier, s, &state.x, &z, params.r)?;
    let u: f64 = state.rng.random();
    if u.ln() < la {
        state.x = z;
        state.accept_count += 1;
    }
    Ok(())
}

/// Runs `n` steps.
pub fn run(
    barrier: &dyn Barrier,
    s: &Potential,
    params: &ChainParams,
    state: &mut ChainState,
    n: u64,
) -> Result<()> {
    for _ in 0..n {
        step(barrier, s, params, state)?;
    }
    Ok(())
}

/// Runs `n` steps, handing the state to `sink` after every step.
pub fn run_with_sink<F>(
    barrier: &dyn Barrier,
    s: &Potential,
    params: &ChainParams,
    state: &mut ChainState,
    n: u64,
    mut sink: F,
) -> Result<()>
where
    F: FnMut(&ChainState),
{
    for _ in 0..n {
        step(barrier, s, params, state)?;
        sink(state);
    }
    Ok(())
}
