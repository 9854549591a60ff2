//! Convex potentials `s` on a body `K`, their step-size conditions and
//! pairwise change bounds.
//!
//! A [`Potential`] couples an evaluator with the metadata that drives the
//! walk's step size: a kind tag, an optional Euclidean Lipschitz constant
//! `L`, an optional gradient-Lipschitz (smoothness) constant `σ`, and an
//! optional user-declared step bound `r*` for potentials that are within a
//! constant of linear at scale `r*`.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use crate::barriers::{Barrier, InteriorSampler};
use crate::error::{Error, Result};

type EvalFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// Structural tag of a potential; structured kinds keep their coefficients
/// so change bounds can be computed in closed form.
#[derive(Clone)]
pub enum PotentialKind {
    /// `s(x) = ⟨b, x⟩ + c`.
    Linear { b: DVector<f64>, c: f64 },
    /// `s(x) = (weight/2)·‖x − center‖²`.
    Quadratic { center: DVector<f64>, weight: f64 },
    /// Euclidean-Lipschitz potential with declared constant.
    Lipschitz,
    /// Potential with Lipschitz-continuous gradients.
    Smooth,
    /// Anything else; relies on a declared `r*` for its step size.
    Custom,
}

/// A convex potential with step-size metadata. Immutable and cheap to clone.
#[derive(Clone)]
pub struct Potential {
    kind: PotentialKind,
    eval: EvalFn,
    lipschitz: Option<f64>,
    smoothness: Option<f64>,
    linear_part: Option<DVector<f64>>,
    r_star: Option<f64>,
}

impl Potential {
    /// The flat potential `s ≡ 0` (uniform target).
    pub fn uniform() -> Self {
        Self {
            kind: PotentialKind::Linear { b: DVector::zeros(0), c: 0.0 },
            eval: Arc::new(|_| 0.0),
            lipschitz: Some(0.0),
            smoothness: Some(0.0),
            linear_part: None,
            r_star: None,
        }
    }

    /// `s(x) = ⟨b, x⟩ + c`; the Lipschitz constant is `‖b‖`.
    pub fn linear(b: DVector<f64>, c: f64) -> Self {
        let lip = b.norm();
        let coeff = b.clone();
        Self {
            kind: PotentialKind::Linear { b, c },
            eval: Arc::new(move |x| coeff.dot(x) + c),
            lipschitz: Some(lip),
            smoothness: Some(0.0),
            linear_part: None,
            r_star: None,
        }
    }

    /// `s(x) = ½‖x − center‖²`, the potential of a truncated standard
    /// Gaussian centered at `center`.
    pub fn gaussian(center: DVector<f64>) -> Self {
        Self::gaussian_weighted(center, 1.0)
    }

    /// `s(x) = (weight/2)·‖x − center‖²`.
    pub fn gaussian_weighted(center: DVector<f64>, weight: f64) -> Self {
        let c = center.clone();
        Self {
            kind: PotentialKind::Quadratic { center, weight },
            eval: Arc::new(move |x| 0.5 * weight * (x - &c).norm_squared()),
            lipschitz: None,
            smoothness: Some(weight),
            linear_part: None,
            r_star: None,
        }
    }

    /// Black-box `L`-Lipschitz potential.
    pub fn lipschitz<F>(f: F, l: f64) -> Self
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: PotentialKind::Lipschitz,
            eval: Arc::new(f),
            lipschitz: Some(l),
            smoothness: None,
            linear_part: None,
            r_star: None,
        }
    }

    /// Black-box potential with `σ`-Lipschitz gradients.
    pub fn smooth<F>(f: F, sigma: f64) -> Self
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: PotentialKind::Smooth,
            eval: Arc::new(f),
            lipschitz: None,
            smoothness: Some(sigma),
            linear_part: None,
            r_star: None,
        }
    }

    /// Black-box potential with a user-declared step bound `r*` (the
    /// potential is within a constant of some linear `⟨g, ·⟩` over
    /// `O(r*)`-sized local neighborhoods).
    pub fn custom<F>(f: F, r_star: f64) -> Self
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: PotentialKind::Custom,
            eval: Arc::new(f),
            lipschitz: None,
            smoothness: None,
            linear_part: None,
            r_star: Some(r_star),
        }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_smoothness(mut self, sigma: f64) -> Self {
        self.smoothness = Some(sigma);
        self
    }

    /// Declares the linear witness `g` of the general step-size condition.
    pub fn with_linear_part(mut self, g: DVector<f64>) -> Self {
        self.linear_part = Some(g);
        self
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        (self.eval)(x)
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn lipschitz_const(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn smoothness_const(&self) -> Option<f64> {
        self.smoothness
    }

    pub fn linear_part(&self) -> Option<&DVector<f64>> {
        self.linear_part.as_ref()
    }

    pub fn r_star(&self) -> Option<f64> {
        self.r_star
    }

    /// The potential `x ↦ factor·s(x)` with metadata rescaled: `L` and `σ`
    /// scale with the factor, `r*` scales inversely.
    pub fn scale(&self, factor: f64) -> Self {
        if factor == 1.0 {
            return self.clone();
        }
        let kind = match &self.kind {
            PotentialKind::Linear { b, c } => PotentialKind::Linear { b: b * factor, c: c * factor },
            PotentialKind::Quadratic { center, weight } => PotentialKind::Quadratic {
                center: center.clone(),
                weight: weight * factor,
            },
            other => other.clone(),
        };
        let eval: EvalFn = match &kind {
            PotentialKind::Linear { b, c } => {
                let coeff = b.clone();
                let c = *c;
                Arc::new(move |x| coeff.dot(x) + c)
            }
            PotentialKind::Quadratic { center, weight } => {
                let c = center.clone();
                let w = *weight;
                Arc::new(move |x| 0.5 * w * (x - &c).norm_squared())
            }
            _ => {
                let inner = self.eval.clone();
                Arc::new(move |x| factor * inner(x))
            }
        };
        Self {
            kind,
            eval,
            lipschitz: self.lipschitz.map(|l| l * factor),
            smoothness: self.smoothness.map(|s| s * factor),
            linear_part: self.linear_part.as_ref().map(|g| g * factor),
            r_star: self.r_star.map(|r| r / factor),
        }
    }

    fn same_evaluator(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.eval, &other.eval)
    }
}

/// Step size for the walk under the kind-appropriate condition. Never
/// exceeds `1/d`.
pub fn step_size(p: &Potential, d: usize) -> Result<f64> {
    let inv_d = 1.0 / d as f64;
    let r = match p.kind() {
        PotentialKind::Linear { .. } => inv_d,
        PotentialKind::Quadratic { .. } => match (p.lipschitz, p.smoothness) {
            (Some(l), _) => inv_d.min(safe_inv(l)),
            (None, Some(sigma)) => inv_d.min(safe_inv(sigma.sqrt())),
            (None, None) => inv_d,
        },
        PotentialKind::Lipschitz => {
            let l = p
                .lipschitz
                .ok_or_else(|| Error::Config("lipschitz potential needs its constant L".into()))?;
            inv_d.min(safe_inv(l))
        }
        PotentialKind::Smooth => {
            let sigma = p
                .smoothness
                .ok_or_else(|| Error::Config("smooth potential needs its constant σ".into()))?;
            inv_d.min(safe_inv(sigma.sqrt()))
        }
        PotentialKind::Custom => {
            let r_star = p
                .r_star
                .ok_or_else(|| Error::Config("custom potential needs a declared r*".into()))?;
            inv_d.min(r_star)
        }
    };
    Ok(r)
}

fn safe_inv(v: f64) -> f64 {
    if v <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / v
    }
}

/// An upper bound on `sup_K |s − s'|`, flagged when it came from the
/// sampling heuristic rather than a closed form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupBound {
    pub value: f64,
    pub heuristic: bool,
}

impl SupBound {
    pub fn exact(value: f64) -> Self {
        Self { value, heuristic: false }
    }

    pub fn heuristic(value: f64) -> Self {
        Self { value, heuristic: true }
    }
}

/// Knobs of the sampling fallback in [`sup_diff_bound_with`].
#[derive(Clone, Copy, Debug)]
pub struct SupDiffOptions {
    /// Number of interior probe points.
    pub samples: usize,
    /// Multiplier applied to the sampled supremum.
    pub inflation: f64,
}

impl Default for SupDiffOptions {
    fn default() -> Self {
        Self { samples: 10_000, inflation: 2.0 }
    }
}

/// Upper bound on `sup_K |s_prev − s_next|`.
///
/// Closed forms cover linear–linear pairs (`‖Δb‖·R_K + |Δc|`) and
/// equal-weight drifting Gaussians (`w·δ·(2R_K + ‖c + c'‖)` with drift
/// `δ = ‖c − c'‖`). Everything else falls back to maximizing `|Δs|` over
/// quasi-random interior points and inflating the result; such bounds carry
/// the heuristic flag.
pub fn sup_diff_bound(prev: &Potential, next: &Potential, barrier: &dyn Barrier) -> Result<SupBound> {
    sup_diff_bound_with(prev, next, barrier, &SupDiffOptions::default())
}

/// [`sup_diff_bound`] with explicit heuristic options.
pub fn sup_diff_bound_with(
    prev: &Potential,
    next: &Potential,
    barrier: &dyn Barrier,
    opts: &SupDiffOptions,
) -> Result<SupBound> {
    let radius = barrier.enclosing_radius();
    match (prev.kind(), next.kind()) {
        (PotentialKind::Linear { b: b1, c: c1 }, PotentialKind::Linear { b: b2, c: c2 }) => {
            let db = linear_coeff_diff(b1, b2, barrier.dim());
            Ok(SupBound::exact(db * radius + (c1 - c2).abs()))
        }
        (
            PotentialKind::Quadratic { center: c1, weight: w1 },
            PotentialKind::Quadratic { center: c2, weight: w2 },
        ) if w1 == w2 => {
            let drift = (c1 - c2).norm();
            Ok(SupBound::exact(w1 * drift * (2.0 * radius + (c1 + c2).norm())))
        }
        _ if prev.same_evaluator(next) => Ok(SupBound::exact(0.0)),
        _ => {
            let sup = sampled_sup_diff(prev, next, barrier, opts)?;
            Ok(SupBound::heuristic(sup * opts.inflation))
        }
    }
}

/// `‖b1 − b2‖`, tolerating the dimensionless zero vector of
/// [`Potential::uniform`].
fn linear_coeff_diff(b1: &DVector<f64>, b2: &DVector<f64>, d: usize) -> f64 {
    let expand = |b: &DVector<f64>| -> DVector<f64> {
        if b.len() == d {
            b.clone()
        } else {
            DVector::zeros(d)
        }
    };
    (expand(b1) - expand(b2)).norm()
}

fn sampled_sup_diff(
    prev: &Potential,
    next: &Potential,
    barrier: &dyn Barrier,
    opts: &SupDiffOptions,
) -> Result<f64> {
    if opts.samples == 0 {
        return Err(Error::Config("sup estimation needs at least one sample".into()));
    }
    let sampler = InteriorSampler::new(barrier)?;
    // Fixed internal seed: the estimate is deterministic and symmetric in
    // the two potentials.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5d1f_fb0d);
    let mut sup: f64 = (prev.eval(sampler.center()) - next.eval(sampler.center())).abs();
    for _ in 0..opts.samples {
        let x = sampler.sample(&mut rng, 1e-3);
        sup = sup.max((prev.eval(&x) - next.eval(&x)).abs());
    }
    Ok(sup)
}

/// A consecutive pair of potentials plus whatever change information is
/// available for it.
#[derive(Clone)]
pub struct PotentialPair {
    pub prev: Potential,
    pub next: Potential,
    declared_sup: Option<SupBound>,
    scale_delta: Option<f64>,
}

impl PotentialPair {
    pub fn new(prev: Potential, next: Potential) -> Self {
        Self { prev, next, declared_sup: None, scale_delta: None }
    }

    /// Attaches a caller-supplied bound on `sup_K |s_prev − s_next|`.
    pub fn with_sup(mut self, bound: SupBound) -> Self {
        self.declared_sup = Some(bound);
        self
    }

    /// Annealing pair `s_next = (1 − delta)⁻¹ · s_prev`.
    pub fn annealing(prev: Potential, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!("annealing delta must lie in (0,1), got {delta}")));
        }
        let next = prev.scale(1.0 / (1.0 - delta));
        Ok(Self { prev, next, declared_sup: None, scale_delta: Some(delta) })
    }

    /// The sharpening rate of an annealing pair, if this is one.
    pub fn scale_delta(&self) -> Option<f64> {
        self.scale_delta
    }

    /// Declared sup bound if present, otherwise computed via
    /// [`sup_diff_bound`].
    pub fn sup_bound(&self, barrier: &dyn Barrier) -> Result<SupBound> {
        match self.declared_sup {
            Some(b) => Ok(b),
            None => sup_diff_bound(&self.prev, &self.next, barrier),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::{PolytopeBarrier, QuadraticBarrier};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn vec1(x: f64) -> DVector<f64> {
        DVector::from_vec(vec![x])
    }

    #[test]
    fn step_sizes_by_condition() {
        let lin = Potential::linear(DVector::from_vec(vec![3.0; 10]), 0.0);
        assert_relative_eq!(step_size(&lin, 10).unwrap(), 0.1);

        let lip = Potential::lipschitz(|_x| 0.0, 25.0);
        assert_relative_eq!(step_size(&lip, 10).unwrap(), 0.04);

        let smo = Potential::smooth(|_x| 0.0, 400.0);
        assert_relative_eq!(step_size(&smo, 10).unwrap(), 0.05);

        let cus = Potential::custom(|_x| 0.0, 0.02);
        assert_relative_eq!(step_size(&cus, 10).unwrap(), 0.02);
    }

    #[test]
    fn step_size_requires_constants() {
        let broken = Potential {
            kind: PotentialKind::Lipschitz,
            eval: Arc::new(|_| 0.0),
            lipschitz: None,
            smoothness: None,
            linear_part: None,
            r_star: None,
        };
        assert!(matches!(step_size(&broken, 4), Err(Error::Config(_))));
    }

    #[test]
    fn sup_diff_identical_potentials_is_zero() {
        let b = PolytopeBarrier::hypercube(1, 1.0).unwrap();
        let p = Potential::custom(|x: &DVector<f64>| x[0].powi(4), 0.5);
        let bound = sup_diff_bound(&p, &p, &b).unwrap();
        assert_eq!(bound.value, 0.0);
        assert!(!bound.heuristic);
    }

    #[test]
    fn sup_diff_linear_pair() {
        let b = PolytopeBarrier::hypercube(1, 1.0).unwrap();
        let p1 = Potential::linear(vec1(0.1), 0.0);
        let p2 = Potential::linear(vec1(0.3), 0.0);
        let bound = sup_diff_bound(&p1, &p2, &b).unwrap();
        assert_relative_eq!(bound.value, 0.2, max_relative = 1e-12);
        assert!(!bound.heuristic);
    }

    #[test]
    fn sup_diff_drifting_gaussians() {
        let b = QuadraticBarrier::unit_ball(2).unwrap();
        let p1 = Potential::gaussian(DVector::from_vec(vec![0.0, 0.0]));
        let p2 = Potential::gaussian(DVector::from_vec(vec![0.1, 0.0]));
        let bound = sup_diff_bound(&p1, &p2, &b).unwrap();
        assert_relative_eq!(bound.value, 0.1 * 2.1, max_relative = 1e-12);
        assert!(!bound.heuristic);
    }

    #[test]
    fn sup_diff_heuristic_is_flagged_and_conservative() {
        let b = PolytopeBarrier::hypercube(1, 1.0).unwrap();
        let p1 = Potential::custom(|x: &DVector<f64>| x[0].powi(2), 1.0);
        let p2 = Potential::custom(|_x: &DVector<f64>| 0.0, 1.0);
        let bound = sup_diff_bound(&p1, &p2, &b).unwrap();
        assert!(bound.heuristic);
        // True sup over [−1,1] is 1; samples stay strictly inside but the
        // 2× inflation must dominate it.
        assert!(bound.value > 1.0 && bound.value <= 2.0);
    }

    #[test]
    fn scale_examples() {
        let p = Potential::linear(vec1(2.0), 1.0);
        let doubled = p.scale(2.0);
        assert_relative_eq!(doubled.eval(&vec1(0.5)), 4.0);
        assert_relative_eq!(doubled.lipschitz_const().unwrap(), 4.0);

        // Annealing schedule factor at d = 4, t = 1.
        let d: f64 = 4.0;
        let factor = (1.0 - d.powf(-0.5)).recip();
        assert_relative_eq!(factor, 2.0);
        let sharpened = p.scale(factor);
        assert_relative_eq!(sharpened.eval(&vec1(1.0)), 2.0 * p.eval(&vec1(1.0)));
    }

    #[test]
    fn scale_by_one_is_identity() {
        let p = Potential::gaussian(vec1(0.3));
        let q = p.scale(1.0);
        assert!(p.same_evaluator(&q));
    }

    #[test]
    fn linear_pair_bound_dominates_density_ratio() {
        // exp(2·bound) must dominate both directions of the density ratio;
        // in 1D the normalizers are computable by quadrature.
        let b = PolytopeBarrier::hypercube(1, 1.0).unwrap();
        let p1 = Potential::linear(vec1(0.4), 0.0);
        let p2 = Potential::linear(vec1(-0.25), 0.1);
        let bound = sup_diff_bound(&p1, &p2, &b).unwrap();

        let n = 10_000;
        let quad = |p: &Potential| -> f64 {
            (0..n)
                .map(|i| {
                    let x = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
                    (-p.eval(&vec1(x))).exp()
                })
                .sum::<f64>()
        };
        let (z1, z2) = (quad(&p1), quad(&p2));
        let mut worst = 0.0_f64;
        for i in 0..n {
            let x = vec1(-1.0 + 2.0 * (i as f64 + 0.5) / n as f64);
            let r = ((-p1.eval(&x)).exp() / z1) / ((-p2.eval(&x)).exp() / z2);
            worst = worst.max(r).max(1.0 / r);
        }
        assert!((2.0 * bound.value).exp() >= worst);
    }

    #[test]
    fn declared_lipschitz_constant_dominates_differences() {
        let b = PolytopeBarrier::hypercube(2, 1.0).unwrap();
        let p = Potential::linear(DVector::from_vec(vec![0.7, -1.2]), 0.3);
        let l = p.lipschitz_const().unwrap();
        let sampler = InteriorSampler::new(&b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let x = sampler.sample(&mut rng, 1e-3);
            let y = sampler.sample(&mut rng, 1e-3);
            assert!((p.eval(&x) - p.eval(&y)).abs() <= l * (&x - &y).norm() + 1e-9);
        }
    }

    #[test]
    fn declared_smoothness_bounds_gradient_variation() {
        // s = ½w‖x−c‖² has w-Lipschitz gradients; finite-difference
        // gradients along random segments vary by at most w·‖x−y‖.
        let b = PolytopeBarrier::hypercube(1, 1.0).unwrap();
        let p = Potential::gaussian_weighted(vec1(0.2), 3.0);
        let sigma = p.smoothness_const().unwrap();
        let sampler = InteriorSampler::new(&b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = 1e-6;
        let fd_grad = |x: f64| (p.eval(&vec1(x + h)) - p.eval(&vec1(x - h))) / (2.0 * h);
        for _ in 0..500 {
            let x = sampler.sample(&mut rng, 0.05)[0];
            let y = sampler.sample(&mut rng, 0.05)[0];
            assert!((fd_grad(x) - fd_grad(y)).abs() <= sigma * (x - y).abs() + 1e-6);
        }
    }

    proptest! {
        #[test]
        fn step_size_never_exceeds_inverse_dimension(
            d in 1usize..40,
            l in 0.0f64..50.0,
            sigma in 0.0f64..2500.0,
            r_star in 1e-6f64..10.0,
        ) {
            let candidates = vec![
                Potential::linear(DVector::from_element(d, 1.0), 0.0),
                Potential::lipschitz(|_x| 0.0, l),
                Potential::smooth(|_x| 0.0, sigma),
                Potential::custom(|_x| 0.0, r_star),
            ];
            for p in candidates {
                let r = step_size(&p, d).unwrap();
                prop_assert!(r <= 1.0 / d as f64 + 1e-15);
                prop_assert!(r > 0.0);
            }
        }

        #[test]
        fn sup_diff_is_symmetric(b1 in -3.0f64..3.0, b2 in -3.0f64..3.0, c1 in -1.0f64..1.0, c2 in -1.0f64..1.0) {
            let body = PolytopeBarrier::hypercube(1, 1.0).unwrap();
            let p = Potential::linear(vec1(b1), c1);
            let q = Potential::linear(vec1(b2), c2);
            let fw = sup_diff_bound(&p, &q, &body).unwrap().value;
            let bw = sup_diff_bound(&q, &p, &body).unwrap().value;
            prop_assert_eq!(fw, bw);
        }
    }
}
