//! Tracking a drifting truncated Gaussian `∝ exp(−½‖x − c_t‖²)` on `K`.
//!
//! Per round the driver measures the drift `δ_t = ‖c_t − c_{t−1}‖`, bounds
//! the density-ratio change in closed form, and either takes a single step
//! (when the one-step condition holds) or schedules the accuracy formula.

use std::sync::Arc;

use nalgebra::DVector;

use crate::barriers::Barrier;
use crate::error::{Error, Result};
use crate::potentials::{Potential, PotentialPair};
use crate::tracker::{
    advance, beta_from_sup, delta, fixed_point_u, initial_burn_in, EpsSchedule, Mode, Policy,
    RoundReport, TrackerConfig, TrackerState,
};
use crate::walker::{run, ChainParams, ChainState};

/// Scheduling policy of the drift driver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriftPolicy {
    /// One walk step per round once the one-step condition engages.
    OneStep,
    /// Fixed per-round accuracy ε through the multi-step formula.
    Accuracy,
}

/// Knobs of a drift-tracking run.
#[derive(Clone, Debug)]
pub struct DriftOptions {
    pub policy: DriftPolicy,
    /// Per-round accuracy ε (also the fallback target under `OneStep`).
    pub eps: f64,
    /// Declared radius of the ball the centers drift within.
    pub drift_radius: f64,
    /// Declared per-round drift cap; under `OneStep` the burn-in contracts
    /// the chain to the corresponding fixed point so single steps engage
    /// from the first round.
    pub max_drift: Option<f64>,
    pub seed: u64,
    pub c: f64,
    pub warm_bound: f64,
}

impl DriftOptions {
    pub fn new(policy: DriftPolicy, eps: f64, drift_radius: f64) -> Self {
        Self { policy, eps, drift_radius, max_drift: None, seed: 0, c: 1.0, warm_bound: 100.0 }
    }
}

/// Tracked chain over a stream of drifting centers.
pub struct DriftTracker {
    barrier: Arc<dyn Barrier>,
    opts: DriftOptions,
    cfg: TrackerConfig,
    tracker: TrackerState,
    chain: ChainState,
    potential: Potential,
    center: DVector<f64>,
    r: f64,
    burn_in_steps: u64,
}

impl DriftTracker {
    pub fn new(barrier: Arc<dyn Barrier>, initial_center: DVector<f64>, opts: DriftOptions) -> Result<Self> {
        let d = barrier.dim();
        if initial_center.len() != d {
            return Err(Error::Config("center dimension does not match the body".into()));
        }
        check_center(&initial_center, opts.drift_radius)?;
        // The potential is (R_K + R)-Lipschitz on K, which caps the step.
        let lipschitz = barrier.enclosing_radius() + opts.drift_radius;
        let r = (1.0 / d as f64).min(1.0 / lipschitz);
        let policy = match opts.policy {
            DriftPolicy::OneStep => Policy::OneStep,
            DriftPolicy::Accuracy => Policy::Accuracy,
        };
        let cfg = TrackerConfig::new(d, barrier.nu(), Mode::SupNorm, EpsSchedule::Constant(opts.eps))?
            .with_constant(opts.c)?
            .with_policy(policy);

        let dlt = delta(r, d, barrier.nu(), opts.c);
        let u0_target = match (opts.policy, opts.max_drift) {
            (DriftPolicy::OneStep, Some(max_drift)) => {
                // Floor of the first round's fixed point: a full max_drift
                // step changes the potential by at least δ·2R_K, so starting
                // at this fixed point lets single steps engage immediately.
                let sup = max_drift * 2.0 * barrier.enclosing_radius();
                opts.eps.min(fixed_point_u(beta_from_sup(sup), dlt))
            }
            _ => opts.eps,
        };
        let potential = Potential::gaussian(initial_center.clone()).with_lipschitz(lipschitz);
        let params = ChainParams::new(r, opts.seed)?;
        let mut chain = ChainState::from_center(barrier.as_ref(), &params)?;
        let burn = initial_burn_in(dlt, opts.warm_bound, u0_target);
        run(barrier.as_ref(), &potential, &params, &mut chain, burn)?;
        Ok(Self {
            barrier,
            opts,
            cfg,
            tracker: TrackerState::new(u0_target),
            chain,
            potential,
            center: initial_center,
            r,
            burn_in_steps: burn,
        })
    }

    pub fn burn_in_steps(&self) -> u64 {
        self.burn_in_steps
    }

    pub fn step_size(&self) -> f64 {
        self.r
    }

    pub fn current(&self) -> &DVector<f64> {
        self.chain.current()
    }

    pub fn error_bound(&self) -> f64 {
        self.tracker.u
    }

    /// Moves the target to the next center, advances the chain for the
    /// scheduled steps, and emits one sample plus the round report.
    pub fn advance_to(&mut self, next_center: DVector<f64>) -> Result<(DVector<f64>, RoundReport)> {
        if next_center.len() != self.barrier.dim() {
            return Err(Error::Config("center dimension does not match the body".into()));
        }
        check_center(&next_center, self.opts.drift_radius)?;
        let lipschitz = self.barrier.enclosing_radius() + self.opts.drift_radius;
        let next = Potential::gaussian(next_center.clone()).with_lipschitz(lipschitz);
        let pair = PotentialPair::new(self.potential.clone(), next.clone());
        let report = advance(&self.cfg, &mut self.tracker, &pair, self.r, self.barrier.as_ref())?;
        let params = ChainParams::new(self.r, self.opts.seed)?;
        run(self.barrier.as_ref(), &next, &params, &mut self.chain, report.tau)?;
        self.potential = next;
        self.center = next_center;
        Ok((self.chain.current().clone(), report))
    }

    /// Drift of the next center relative to the current one.
    pub fn drift_to(&self, next_center: &DVector<f64>) -> f64 {
        (next_center - &self.center).norm()
    }
}

fn check_center(center: &DVector<f64>, radius: f64) -> Result<()> {
    if center.norm() > radius + 1e-12 {
        return Err(Error::Domain(format!(
            "center at distance {} lies outside the declared drift radius {radius}",
            center.norm()
        )));
    }
    Ok(())
}

/// Runs a whole center stream, returning one sample and one report per
/// round.
pub fn drift_track<I>(
    barrier: Arc<dyn Barrier>,
    mut centers: I,
    opts: DriftOptions,
) -> Result<Vec<(DVector<f64>, RoundReport)>>
where
    I: Iterator<Item = DVector<f64>>,
{
    let first = centers
        .next()
        .ok_or_else(|| Error::Config("drift tracking needs at least one center".into()))?;
    let mut tracker = DriftTracker::new(barrier, first, opts)?;
    centers.map(|c| tracker.advance_to(c)).collect()
}
