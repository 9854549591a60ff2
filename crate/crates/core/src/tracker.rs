//! Per-round schedule arithmetic for tracking a time-varying sequence of
//! targets `μ_1, μ_2, …`.
//!
//! Round `t` switches the chain to the next potential and runs it for `τ_t`
//! steps. The contraction surrogate is `Δ_t = r_t²/(C·d·ν²)`; the change
//! between consecutive targets is measured either by the sup-norm ratio
//! bound `β_t` (with a running L2-error bound `u_t`) or by the L2 ratio
//! `α_t` (with a running total-variation budget `Σ ε_s`). The universal
//! constant `C` is a configuration knob: real mixing is typically far better
//! than the bound, so users calibrate `C` against the grid oracle at small
//! dimension.

use serde::Serialize;

use crate::barriers::Barrier;
use crate::error::{Error, Result};
use crate::potentials::PotentialPair;

/// Which change measure drives the schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Sup-norm density-ratio bounds `β_t` and the error recurrence on `u_t`.
    SupNorm,
    /// L2 ratios `α_t` and the additive total-variation budget.
    L2,
}

/// How `τ_t` is chosen each round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Always schedule through the accuracy formula for the mode.
    Accuracy,
    /// Take a single step whenever the one-step condition holds (and the
    /// running bound sits at or below its fixed point); otherwise fall back
    /// to the accuracy formula.
    OneStep,
}

/// Per-round accuracy targets `ε_t`, indexed from round 0.
#[derive(Clone, Debug)]
pub enum EpsSchedule {
    Constant(f64),
    Sequence(Vec<f64>),
}

impl EpsSchedule {
    pub fn eps_for(&self, t: u64) -> f64 {
        match self {
            EpsSchedule::Constant(e) => *e,
            EpsSchedule::Sequence(v) => {
                let idx = (t as usize).min(v.len().saturating_sub(1));
                v[idx]
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            EpsSchedule::Constant(e) => *e > 0.0,
            EpsSchedule::Sequence(v) => !v.is_empty() && v.iter().all(|e| *e > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("accuracy targets must be positive (and nonempty)".into()))
        }
    }
}

/// Static knobs of a tracked run.
#[derive(Clone, Debug)]
pub struct TrackerConfig {
    /// Conductance constant `C` in `Δ = r²/(C·d·ν²)`. Default 1.0.
    pub c: f64,
    pub dim: usize,
    pub nu: f64,
    pub mode: Mode,
    pub eps: EpsSchedule,
    pub policy: Policy,
    /// Also apply the alternative recurrence
    /// `(1−Δ)^τ(√β·u + √(β−1))` and keep the pointwise minimum of the two
    /// bounds. Off by default so `u` follows the primary recurrence exactly.
    pub alt_recurrence: bool,
}

impl TrackerConfig {
    pub fn new(dim: usize, nu: f64, mode: Mode, eps: EpsSchedule) -> Result<Self> {
        eps.validate()?;
        if dim == 0 || !(nu >= 1.0) {
            return Err(Error::Config("tracker needs d ≥ 1 and ν ≥ 1".into()));
        }
        Ok(Self { c: 1.0, dim, nu, mode, eps, policy: Policy::Accuracy, alt_recurrence: false })
    }

    pub fn with_constant(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Config("constant C must be positive".into()));
        }
        self.c = c;
        Ok(self)
    }

    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_alt_recurrence(mut self, on: bool) -> Self {
        self.alt_recurrence = on;
        self
    }
}

/// Evolving quantities of a tracked run.
#[derive(Clone, Debug)]
pub struct TrackerState {
    /// Round index; round 0 is the initial chain.
    pub t: u64,
    /// Running upper bound `u_t` on the L2 error (sup-norm mode).
    pub u: f64,
    /// Running total-variation budget `Σ ε_s` (L2 mode).
    pub tv_budget: f64,
}

impl TrackerState {
    /// Starts at round 0 with the supplied bound `u_0` (sup-norm mode) or
    /// initial TV budget `ε_0` (L2 mode).
    pub fn new(initial: f64) -> Self {
        Self { t: 0, u: initial, tv_budget: initial }
    }
}

/// One line of the round report.
#[derive(Clone, Debug, Serialize)]
pub struct RoundReport {
    pub t: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub delta: f64,
    pub tau: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_bound: Option<f64>,
    pub heuristic: bool,
}

impl RoundReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("round report serializes")
    }
}

/// Contraction surrogate `Δ = r²/(C·d·ν²)`, clamped to 1/2.
pub fn delta(r: f64, d: usize, nu: f64, c: f64) -> f64 {
    (r * r / (c * d as f64 * nu * nu)).min(0.5)
}

/// `β = exp(2·sup_K |s_t − s_{t+1}|)`.
pub fn beta_from_sup(sup_diff: f64) -> f64 {
    (2.0 * sup_diff).exp()
}

/// L2 ratio bound `(1 + δ²/(1−2δ))^{d/2}` for the sharpening step
/// `s' = (1−δ)⁻¹ s`. Requires `0 < δ < 1/2`.
pub fn alpha_anneal(delta_sched: f64, d: usize) -> Result<f64> {
    if !(delta_sched > 0.0 && delta_sched < 0.5) {
        return Err(Error::Domain(format!(
            "annealing rate must lie in (0, 1/2), got {delta_sched}"
        )));
    }
    Ok((1.0 + delta_sched * delta_sched / (1.0 - 2.0 * delta_sched)).powf(d as f64 / 2.0))
}

/// Primary error recurrence: `(1−Δ)^τ (β^{3/2} u + √β(β−1))`.
pub fn u_update(u_prev: f64, beta: f64, delta: f64, tau: u64) -> f64 {
    (1.0 - delta).powf(tau as f64) * (beta.powf(1.5) * u_prev + beta.sqrt() * (beta - 1.0))
}

/// Alternative recurrence `(1−Δ)^τ (√β u + √(β−1))`; tighter for large `β`,
/// looser near `β = 1`.
pub fn u_update_alt(u_prev: f64, beta: f64, delta: f64, tau: u64) -> f64 {
    (1.0 - delta).powf(tau as f64) * (beta.sqrt() * u_prev + (beta - 1.0).sqrt())
}

/// Steps needed to bring the bound from `ε_prev` to `ε_t`:
/// `⌈(1/Δ)·log(β^{3/2}·ε_prev/ε_t + √β(β−1)/ε_t)⌉`, floored at 1.
pub fn tau_multistep(delta: f64, beta: f64, eps_prev: f64, eps_t: f64) -> u64 {
    let arg = beta.powf(1.5) * eps_prev / eps_t + beta.sqrt() * (beta - 1.0) / eps_t;
    if arg <= 1.0 {
        return 1;
    }
    ((arg.ln() / delta).ceil() as u64).max(1)
}

/// L2-mode schedule `⌈(1/Δ)·log(α/ε)⌉`, floored at 1.
pub fn tau_l2(delta: f64, alpha: f64, eps_t: f64) -> u64 {
    let arg = alpha / eps_t;
    if arg <= 1.0 {
        return 1;
    }
    ((arg.ln() / delta).ceil() as u64).max(1)
}

/// One-step trackability: `β^{3/2} ≤ 1 + Δ²/(1−Δ)`.
pub fn one_step_ok(beta: f64, delta: f64) -> bool {
    beta.powf(1.5) <= 1.0 + delta * delta / (1.0 - delta)
}

/// Sufficient (cruder) one-step check: `β − 1 ≤ 0.4·Δ²`.
pub fn one_step_sufficient(beta: f64, delta: f64) -> bool {
    beta - 1.0 <= 0.4 * delta * delta
}

/// Fixed point `√β(β−1)/Δ` preserved by single steps under
/// [`one_step_ok`].
pub fn fixed_point_u(beta: f64, delta: f64) -> f64 {
    beta.sqrt() * (beta - 1.0) / delta
}

/// Steps of chain 0 needed to contract a warm-start L2 bound below the
/// target: `⌈(1/Δ₀)·log(warm/target)⌉`, or 0 if already there.
pub fn initial_burn_in(delta0: f64, warm_bound: f64, target: f64) -> u64 {
    if warm_bound <= target {
        return 0;
    }
    ((warm_bound / target).ln() / delta0).ceil() as u64
}

/// Advances the tracker by one round: computes the change measure and `Δ`,
/// schedules `τ` under the configured mode and policy, and updates the
/// running bound. The caller then runs the chain for the reported `τ` steps
/// under the pair's `next` potential.
pub fn advance(
    config: &TrackerConfig,
    state: &mut TrackerState,
    pair: &PotentialPair,
    r_next: f64,
    barrier: &dyn Barrier,
) -> Result<RoundReport> {
    let t_next = state.t + 1;
    let dlt = delta(r_next, config.dim, config.nu, config.c);
    let eps_t = config.eps.eps_for(t_next);
    let report = match config.mode {
        Mode::SupNorm => {
            let sup = pair.sup_bound(barrier)?;
            let beta = beta_from_sup(sup.value);
            let eps_prev = config.eps.eps_for(t_next - 1);
            let tau = match config.policy {
                Policy::OneStep
                    if one_step_ok(beta, dlt) && state.u <= fixed_point_u(beta, dlt) + 1e-12 =>
                {
                    1
                }
                _ => tau_multistep(dlt, beta, eps_prev, eps_t),
            };
            let mut u_next = u_update(state.u, beta, dlt, tau);
            if config.alt_recurrence {
                u_next = u_next.min(u_update_alt(state.u, beta, dlt, tau));
            }
            state.u = u_next;
            RoundReport {
                t: t_next,
                beta: Some(beta),
                alpha: None,
                delta: dlt,
                tau,
                u: Some(u_next),
                tv_bound: None,
                heuristic: sup.heuristic,
            }
        }
        Mode::L2 => {
            let sched = pair.scale_delta().ok_or_else(|| {
                Error::Config("L2 mode needs an annealing pair with a sharpening rate".into())
            })?;
            // The closed-form L2 bound needs δ < 1/2; the d ≤ 4 annealing
            // schedules exceed that, where the bound's small-δ constant is
            // reused.
            let alpha = if sched < 0.5 { alpha_anneal(sched, config.dim)? } else { 5.0 };
            let tau = tau_l2(dlt, alpha, eps_t);
            state.tv_budget += eps_t;
            RoundReport {
                t: t_next,
                beta: None,
                alpha: Some(alpha),
                delta: dlt,
                tau,
                u: None,
                tv_bound: Some(state.tv_budget),
                heuristic: false,
            }
        }
    };
    state.t = t_next;
    Ok(report)
}
