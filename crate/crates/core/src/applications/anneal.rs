//! Simulated annealing for linear optimization over `K`.
//!
//! The schedule sharpens the potential geometrically,
//! `s_t = (1 − d^{−1/2})^{−t}·⟨ℓ, x⟩` for `t = 1..k` with
//! `k = ⌈√d·log(d/ε)⌉`, which drives the temperature to `ε/d`; a sample at
//! that temperature is `ε`-suboptimal in expectation (suboptimality at
//! temperature `T` is at most `d·T`).

use nalgebra::DVector;

use crate::barriers::Barrier;
use crate::error::{Error, Result};
use crate::potentials::{Potential, PotentialPair};
use crate::tracker::{
    advance, delta, initial_burn_in, EpsSchedule, Mode, RoundReport, TrackerConfig, TrackerState,
};
use crate::walker::{run, ChainParams, ChainState};

/// The geometric sharpening schedule.
#[derive(Clone, Debug)]
pub struct AnnealSchedule {
    /// Unit objective direction ℓ.
    pub direction: DVector<f64>,
    /// Target accuracy ε.
    pub eps: f64,
    /// Number of sharpening phases `k = ⌈√d·log(d/ε)⌉` (0 when the target
    /// is coarser than the initial temperature).
    pub phases: u64,
    /// Per-phase sharpening rate `δ = d^{−1/2}`.
    pub delta: f64,
    /// Per-phase accuracy `ε·(√d·log(d/ε))^{−1}`.
    pub eps_phase: f64,
}

impl AnnealSchedule {
    pub fn new(dim: usize, direction: DVector<f64>, eps: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Domain("the annealing schedule needs d ≥ 2".into()));
        }
        if direction.len() != dim {
            return Err(Error::Config("objective dimension does not match the body".into()));
        }
        if (direction.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Domain("objective direction must be a unit vector".into()));
        }
        if !(eps > 0.0) {
            return Err(Error::Domain("target accuracy must be positive".into()));
        }
        let d = dim as f64;
        let raw = d.sqrt() * (d / eps).ln();
        let (phases, eps_phase) = if raw > 0.0 {
            (raw.ceil() as u64, eps / raw)
        } else {
            (0, eps)
        };
        Ok(Self { direction, eps, phases, delta: d.sqrt().recip(), eps_phase })
    }

    /// Final temperature `(1 − δ)^k`, as the iterated product the phases use.
    pub fn final_temperature(&self) -> f64 {
        let mut t = 1.0;
        for _ in 0..self.phases {
            t *= 1.0 - self.delta;
        }
        t
    }
}

#[derive(Clone, Debug)]
pub struct AnnealOptions {
    pub seed: u64,
    pub c: f64,
    /// Warm-start L2 bound contracted by the uniform-phase burn-in.
    pub warm_bound: f64,
}

impl Default for AnnealOptions {
    fn default() -> Self {
        Self { seed: 0, c: 1.0, warm_bound: 100.0 }
    }
}

/// Outcome of one annealing run.
#[derive(Clone, Debug, serde::Serialize)]
pub struct AnnealReport {
    pub minimizer: Vec<f64>,
    pub value: f64,
    pub phases: u64,
    pub total_steps: u64,
    pub temperature: f64,
    /// `d·T`: bound on the expected suboptimality at the final temperature.
    pub suboptimality_certificate: f64,
    /// Accumulated total-variation budget `Σ ε_s`.
    pub tv_bound: f64,
    #[serde(skip)]
    pub rounds: Vec<RoundReport>,
}

/// Minimizes `⟨ℓ, x⟩` over the body by annealing; returns the final iterate
/// and the schedule bookkeeping.
pub fn anneal_minimize(
    barrier: &dyn Barrier,
    direction: DVector<f64>,
    eps: f64,
    opts: &AnnealOptions,
) -> Result<AnnealReport> {
    let d = barrier.dim();
    let schedule = AnnealSchedule::new(d, direction, eps)?;
    let r = 1.0 / d as f64; // linear potentials
    let cfg = TrackerConfig::new(d, barrier.nu(), Mode::L2, EpsSchedule::Constant(schedule.eps_phase))?
        .with_constant(opts.c)?;
    let mut tracker = TrackerState::new(schedule.eps_phase);
    let params = ChainParams::new(r, opts.seed)?;
    let mut chain = ChainState::from_center(barrier, &params)?;

    // Uniform phase: burn in from the analytic center.
    let dlt = delta(r, d, barrier.nu(), opts.c);
    let mut potential = Potential::linear(DVector::zeros(d), 0.0);
    let burn = initial_burn_in(dlt, opts.warm_bound, schedule.eps_phase);
    run(barrier, &potential, &params, &mut chain, burn)?;
    let mut total_steps = burn;

    // Geometric schedule: phase t targets (1−δ)^{−t}·⟨ℓ, x⟩.
    let mut rounds = Vec::with_capacity(schedule.phases as usize);
    let mut temperature = 1.0;
    if schedule.phases > 0 {
        potential = Potential::linear(schedule.direction.clone(), 0.0);
        for _ in 1..=schedule.phases {
            let pair = PotentialPair::annealing(potential, schedule.delta)?;
            let report = advance(&cfg, &mut tracker, &pair, r, barrier)?;
            run(barrier, &pair.next, &params, &mut chain, report.tau)?;
            total_steps += report.tau;
            rounds.push(report);
            potential = pair.next;
            temperature *= 1.0 - schedule.delta;
        }
    }

    let minimizer = chain.current().clone();
    let value = schedule.direction.dot(&minimizer);
    Ok(AnnealReport {
        minimizer: minimizer.iter().copied().collect(),
        value,
        phases: schedule.phases,
        total_steps,
        temperature,
        suboptimality_certificate: d as f64 * temperature,
        tv_bound: tracker.tv_budget,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::PolytopeBarrier;
    use approx::assert_relative_eq;

    #[test]
    fn phase_counts_match_the_schedule_formula() {
        let ell4 = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let s = AnnealSchedule::new(4, ell4, 0.1).unwrap();
        assert_eq!(s.phases, 8);
        assert_relative_eq!(s.delta, 0.5);

        let ell2 = DVector::from_vec(vec![0.0, 1.0]);
        assert_eq!(AnnealSchedule::new(2, ell2.clone(), 0.1).unwrap().phases, 5);
        let ell3 = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        assert_eq!(AnnealSchedule::new(3, ell3, 0.1).unwrap().phases, 6);

        // Degenerate target coarser than the initial temperature.
        let s = AnnealSchedule::new(2, ell2, 2.5).unwrap();
        assert!(s.phases <= 1);
    }

    #[test]
    fn final_temperature_beats_eps_over_d() {
        for (d, eps) in [(2usize, 0.1f64), (3, 0.1), (5, 0.05), (16, 0.2)] {
            let mut ell = DVector::zeros(d);
            ell[0] = 1.0;
            let s = AnnealSchedule::new(d, ell, eps).unwrap();
            assert!(
                s.final_temperature() <= eps / d as f64 + 1e-12,
                "temperature {} at d={d}, eps={eps}",
                s.final_temperature()
            );
        }
    }

    #[test]
    fn schedule_rejects_bad_inputs() {
        assert!(AnnealSchedule::new(1, DVector::from_vec(vec![1.0]), 0.1).is_err());
        assert!(AnnealSchedule::new(2, DVector::from_vec(vec![2.0, 0.0]), 0.1).is_err());
        assert!(AnnealSchedule::new(2, DVector::from_vec(vec![1.0, 0.0]), 0.0).is_err());
    }

    #[test]
    fn iterated_scaling_keeps_the_exact_ratio() {
        // s_{t+1} = (1−δ)⁻¹·s_t exactly: coefficients relate by one float
        // multiplication per phase.
        let delta: f64 = 2.0_f64.sqrt().recip();
        let inv = 1.0 / (1.0 - delta);
        let mut p = Potential::linear(DVector::from_vec(vec![1.0, 0.0]), 0.0);
        for _ in 0..6 {
            let pair = PotentialPair::annealing(p.clone(), delta).unwrap();
            let (prev_b, next_b) = match (p.kind(), pair.next.kind()) {
                (
                    crate::potentials::PotentialKind::Linear { b: pb, .. },
                    crate::potentials::PotentialKind::Linear { b: nb, .. },
                ) => (pb.clone(), nb.clone()),
                _ => unreachable!("annealing keeps linear structure"),
            };
            for i in 0..2 {
                assert_eq!(next_b[i], prev_b[i] * inv);
            }
            p = pair.next;
        }
    }

    #[test]
    fn annealing_descends_on_a_small_box() {
        let b = PolytopeBarrier::hypercube(2, 1.0).unwrap();
        let ell = DVector::from_vec(vec![1.0, 0.0]);
        let report = anneal_minimize(&b, ell, 0.25, &AnnealOptions::default()).unwrap();
        assert_eq!(report.phases, 3); // ⌈√2·log(2/0.25)⌉
        assert!(report.value < -0.5, "value {}", report.value);
        assert!(report.total_steps > 0);
        assert!(report.suboptimality_certificate <= 0.25 + 1e-12);
    }
}
