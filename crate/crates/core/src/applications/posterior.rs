//! Streaming posterior sampling for exponential families with a conjugate
//! prior.
//!
//! With natural parameter `x ∈ K`, sufficient statistic `T` and log
//! partition `A`, the posterior after `t` observations has potential
//! `s_t(x) = −⟨x, κ₁ + Σ T(y_i)⟩ + (t + κ₂)·A(x)`. Each arriving
//! observation shifts the target by `−⟨x, T(y_t)⟩ + A(x)`, and the chain is
//! advanced for the scheduled number of steps.

use std::sync::Arc;

use nalgebra::DVector;

use crate::barriers::Barrier;
use crate::error::{Error, Result};
use crate::potentials::{sup_diff_bound_with, Potential, PotentialPair, SupDiffOptions};
use crate::tracker::{
    advance, delta, initial_burn_in, EpsSchedule, Mode, RoundReport, TrackerConfig, TrackerState,
};
use crate::walker::{run, ChainParams, ChainState};

type VecFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// Exponential-family model `p(y|x) ∝ exp(⟨x, T(y)⟩ − A(x))` with conjugate
/// prior `∝ exp(⟨x, κ₁⟩ − κ₂·A(x))`.
#[derive(Clone)]
pub struct ExpFamilyModel {
    suff_stat: VecFn,
    log_partition: ScalarFn,
    /// Euclidean Lipschitz constant of `A` on `K`, when known.
    pub lipschitz: Option<f64>,
    /// Largest eigenvalue of the smoothness matrix of `A`, when known.
    pub lambda_max: Option<f64>,
    pub kappa1: DVector<f64>,
    pub kappa2: f64,
}

impl ExpFamilyModel {
    pub fn new<T, A>(suff_stat: T, log_partition: A, kappa1: DVector<f64>, kappa2: f64) -> Result<Self>
    where
        T: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        A: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        if !(kappa2 >= 0.0) {
            return Err(Error::Config("κ₂ must be nonnegative".into()));
        }
        Ok(Self {
            suff_stat: Arc::new(suff_stat),
            log_partition: Arc::new(log_partition),
            lipschitz: None,
            lambda_max: None,
            kappa1,
            kappa2,
        })
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_lambda_max(mut self, lambda: f64) -> Self {
        self.lambda_max = Some(lambda);
        self
    }

    /// Gaussian natural-parameter family: `T(y) = y`, `A(x) = ‖x‖²/2`
    /// (smoothness matrix `I`, so `λ_max = 1`), flat prior `κ₁ = 0`.
    pub fn gaussian_natural(d: usize, kappa2: f64) -> Result<Self> {
        Self::new(
            |y: &DVector<f64>| y.clone(),
            |x: &DVector<f64>| 0.5 * x.norm_squared(),
            DVector::zeros(d),
            kappa2,
        )
        .map(|m| m.with_lambda_max(1.0))
    }

    /// Posterior potential after `t` observations with statistic sum; the
    /// round's step size doubles as the declared `r*`.
    fn potential_at(&self, t: u64, stat_sum: &DVector<f64>, r_star: f64) -> Potential {
        let coeff = &self.kappa1 + stat_sum;
        let weight = t as f64 + self.kappa2;
        let a = self.log_partition.clone();
        Potential::custom(move |x: &DVector<f64>| -coeff.dot(x) + weight * a(x), r_star)
    }
}

/// Knobs of a posterior run.
#[derive(Clone, Debug)]
pub struct PosteriorOptions {
    /// Constant per-round accuracy ε.
    pub eps: f64,
    pub seed: u64,
    /// Tracker constant C.
    pub c: f64,
    /// Warm-start L2 bound contracted during the initial burn-in.
    pub warm_bound: f64,
    /// Probe count for the data-dependent sup bound on the potential change.
    pub sup_samples: usize,
}

impl Default for PosteriorOptions {
    fn default() -> Self {
        Self { eps: 0.1, seed: 0, c: 1.0, warm_bound: 100.0, sup_samples: 2_048 }
    }
}

/// Tracked chain over the stream of posteriors.
pub struct PosteriorTracker {
    barrier: Arc<dyn Barrier>,
    model: ExpFamilyModel,
    opts: PosteriorOptions,
    cfg: TrackerConfig,
    tracker: TrackerState,
    chain: ChainState,
    potential: Potential,
    stat_sum: DVector<f64>,
    t: u64,
    burn_in_steps: u64,
}

impl PosteriorTracker {
    pub fn new(barrier: Arc<dyn Barrier>, model: ExpFamilyModel, opts: PosteriorOptions) -> Result<Self> {
        let d = barrier.dim();
        if model.kappa1.len() != d {
            return Err(Error::Config("κ₁ dimension does not match the body".into()));
        }
        let cfg = TrackerConfig::new(d, barrier.nu(), Mode::SupNorm, EpsSchedule::Constant(opts.eps))?
            .with_constant(opts.c)?;
        let stat_sum = DVector::zeros(d);
        let r0 = step_size_for(&model, d, 0)?;
        let potential = model.potential_at(0, &stat_sum, r0);
        let params = ChainParams::new(r0, opts.seed)?;
        let mut chain = ChainState::from_center(barrier.as_ref(), &params)?;
        let burn = initial_burn_in(delta(r0, d, barrier.nu(), opts.c), opts.warm_bound, opts.eps);
        run(barrier.as_ref(), &potential, &params, &mut chain, burn)?;
        let tracker = TrackerState::new(opts.eps);
        Ok(Self {
            barrier,
            model,
            opts,
            cfg,
            tracker,
            chain,
            potential,
            stat_sum,
            t: 0,
            burn_in_steps: burn,
        })
    }

    pub fn observations(&self) -> u64 {
        self.t
    }

    pub fn burn_in_steps(&self) -> u64 {
        self.burn_in_steps
    }

    pub fn current(&self) -> &DVector<f64> {
        self.chain.current()
    }

    /// Step size scheduled for round `t` (after `t` observations).
    pub fn step_size_at(&self, t: u64) -> Result<f64> {
        step_size_for(&self.model, self.barrier.dim(), t)
    }

    /// Folds one observation into the posterior and advances the chain for
    /// the scheduled number of steps.
    pub fn ingest(&mut self, y: &DVector<f64>) -> Result<RoundReport> {
        let stat = (self.model.suff_stat)(y);
        if stat.len() != self.barrier.dim() {
            return Err(Error::Config("sufficient statistic dimension does not match the body".into()));
        }
        self.t += 1;
        self.stat_sum += stat;
        let r = step_size_for(&self.model, self.barrier.dim(), self.t)?;
        let next = self.model.potential_at(self.t, &self.stat_sum, r);

        // Data-dependent β from the change −⟨x, T(y_t)⟩ + A(x); no closed
        // form in general, so the flagged sampling bound is used.
        let sup = sup_diff_bound_with(
            &self.potential,
            &next,
            self.barrier.as_ref(),
            &SupDiffOptions { samples: self.opts.sup_samples, inflation: 2.0 },
        )?;
        let pair = PotentialPair::new(self.potential.clone(), next.clone()).with_sup(sup);
        let report = advance(&self.cfg, &mut self.tracker, &pair, r, self.barrier.as_ref())?;

        let params = ChainParams::new(r, self.opts.seed)?;
        run(self.barrier.as_ref(), &next, &params, &mut self.chain, report.tau)?;
        self.potential = next;
        Ok(report)
    }
}

/// Smooth path `min(1/d, 1/√((t+κ₂)·λ_max))` when the smoothness of `A` is
/// declared, otherwise the Lipschitz path `min(1/d, 1/((t+κ₂)·L))`.
fn step_size_for(model: &ExpFamilyModel, d: usize, t: u64) -> Result<f64> {
    let inv_d = 1.0 / d as f64;
    let weight = t as f64 + model.kappa2;
    match (model.lambda_max, model.lipschitz) {
        (Some(lambda), _) => {
            let denom = (weight * lambda).sqrt();
            Ok(if denom > 0.0 { inv_d.min(1.0 / denom) } else { inv_d })
        }
        (None, Some(l)) => {
            let denom = weight * l;
            Ok(if denom > 0.0 { inv_d.min(1.0 / denom) } else { inv_d })
        }
        (None, None) => Err(Error::Config(
            "exponential-family model needs either λ_max or the Lipschitz constant of A".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::QuadraticBarrier;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ball2() -> Arc<dyn Barrier> {
        Arc::new(QuadraticBarrier::unit_ball(2).unwrap())
    }

    #[test]
    fn smooth_path_step_sizes() {
        let model = ExpFamilyModel::gaussian_natural(2, 1.0).unwrap();
        for t in [0u64, 1, 3, 15, 99] {
            let r = step_size_for(&model, 2, t).unwrap();
            let expect = (0.5_f64).min(1.0 / ((t as f64 + 1.0).sqrt()));
            assert_relative_eq!(r, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn missing_constants_are_a_config_error() {
        let model = ExpFamilyModel::new(
            |y: &DVector<f64>| y.clone(),
            |x: &DVector<f64>| x.norm_squared(),
            DVector::zeros(2),
            0.0,
        )
        .unwrap();
        assert!(matches!(
            PosteriorTracker::new(ball2(), model, PosteriorOptions::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_observation_beta_comes_from_the_log_partition_alone() {
        // T(y) = 0 leaves the change at A(x); on the unit ball
        // sup |A| = 1/2, so the inflated heuristic bound sits near 1.
        let model = ExpFamilyModel::gaussian_natural(2, 0.0).unwrap();
        let mut tracker = PosteriorTracker::new(
            ball2(),
            model,
            PosteriorOptions { eps: 0.2, ..Default::default() },
        )
        .unwrap();
        let report = tracker.ingest(&DVector::zeros(2)).unwrap();
        assert!(report.heuristic);
        let sup = report.beta.unwrap().ln() / 2.0;
        assert!(sup > 0.85 && sup <= 1.0, "sup bound {sup}");
    }

    #[test]
    fn posterior_potentials_are_midpoint_convex() {
        let barrier = ball2();
        let model = ExpFamilyModel::gaussian_natural(2, 1.0).unwrap();
        let mut stat_sum = DVector::zeros(2);
        stat_sum += DVector::from_vec(vec![0.4, -0.2]);
        let s = model.potential_at(3, &stat_sum, 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sampler = crate::barriers::InteriorSampler::new(barrier.as_ref()).unwrap();
        for _ in 0..200 {
            let x = sampler.sample(&mut rng, 0.05);
            let h = crate::barriers::random_unit(&mut rng, 2) * rng.random_range(1e-3..0.05);
            if barrier.contains(&(&x + &h)) && barrier.contains(&(&x - &h)) {
                let second =
                    (s.eval(&(&x + &h)) - 2.0 * s.eval(&x) + s.eval(&(&x - &h))) / h.norm_squared();
                assert!(second >= -1e-8, "second difference {second}");
            }
        }
    }

    #[test]
    fn scheduled_steps_grow_linearly_on_the_smooth_path() {
        let model = ExpFamilyModel::gaussian_natural(2, 1.0).unwrap();
        let opts = PosteriorOptions { eps: 0.25, seed: 4, sup_samples: 512, ..Default::default() };
        let mut tracker = PosteriorTracker::new(ball2(), model, opts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut taus = Vec::new();
        for _ in 0..200 {
            let y = DVector::from_fn(2, |_, _| rng.random_range(-0.5..0.5));
            let report = tracker.ingest(&y).unwrap();
            taus.push(report.tau as f64);
        }
        // τ grows like t on the smooth path: doubling t at most ~doubles τ.
        for t in [60usize, 80, 100] {
            let ratio = taus[2 * t - 1] / taus[t - 1];
            assert!(ratio <= 2.2, "tau ratio {ratio} at t = {t}");
        }
        assert!(body_contains(&tracker));
    }

    fn body_contains(tracker: &PosteriorTracker) -> bool {
        tracker.barrier.contains(tracker.chain.current())
    }
}
