//! Self-concordant barriers for convex bodies.
//!
//! A barrier presents a convex body `K` through a function `F` that diverges
//! at the boundary. Its Hessian defines the local norm
//! `‖v‖_x = sqrt(vᵀ D²F(x) v)` whose unit ball (the Dikin ellipsoid) is
//! always contained in `K`; the walk in [`crate::walker`] shapes its Gaussian
//! proposals with this metric.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Iteration cap for the damped Newton iteration in [`analytic_center`].
const MAX_NEWTON_ITERS: usize = 200;

/// A convex body presented through a self-concordant barrier.
///
/// Implementations are immutable after construction; every method is a pure
/// function and safe to call concurrently from any number of threads.
pub trait Barrier: Send + Sync {
    /// Ambient dimension `d`.
    fn dim(&self) -> usize;

    /// Self-concordance parameter `ν` of the barrier.
    fn nu(&self) -> f64;

    /// Radius of a Euclidean ball centered at the origin that contains `K`.
    ///
    /// Supplied at construction; consumed by the change-bound plumbing, not
    /// by the walk itself.
    fn enclosing_radius(&self) -> f64;

    /// Barrier value `F(x)`; `+∞` outside the strict interior.
    fn value(&self, x: &DVector<f64>) -> f64;

    /// Gradient `∇F(x)`. Only meaningful on the strict interior.
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Hessian `D²F(x)`, symmetric positive definite on the interior.
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Strict interior membership: every defining constraint must hold
    /// strictly in floating point. Boundary points are outside.
    fn contains(&self, x: &DVector<f64>) -> bool;

    /// A strictly interior point usable to start Newton iterations, when the
    /// barrier knows how to produce one.
    fn interior_hint(&self) -> Option<DVector<f64>> {
        None
    }
}

/// Cholesky view of the local metric `D²F(x)` at a fixed interior point.
///
/// Bundles the pieces the walk needs per step: local norms, the
/// log-determinant term `V(x) = ½ ln det D²F(x)`, and whitened Gaussian
/// steps distributed as `N(0, D²F(x)⁻¹)`.
pub struct LocalMetric {
    /// Upper factor `Lᵀ` of `D²F(x) = LLᵀ`, positive diagonal.
    lt: DMatrix<f64>,
}

impl LocalMetric {
    pub fn at(barrier: &dyn Barrier, x: &DVector<f64>) -> Result<Self> {
        if !barrier.contains(x) {
            return Err(Error::NotInterior);
        }
        let chol: Cholesky<f64, Dyn> = Cholesky::new(barrier.hessian(x))
            .ok_or_else(|| Error::Numeric("Hessian factorization failed".into()))?;
        Ok(Self {
            lt: chol.l().transpose(),
        })
    }

    /// Local norm `‖v‖_x = ‖Lᵀv‖₂`.
    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        (&self.lt * v).norm()
    }

    /// `V(x) = ½ ln det D²F(x) = Σ ln (Lᵀ)_{ii}`.
    pub fn log_det_half(&self) -> f64 {
        self.lt.diagonal().iter().map(|d| d.ln()).sum()
    }

    /// Solves `Lᵀ w = g`; for standard Gaussian `g` the result has
    /// covariance `D²F(x)⁻¹`.
    pub fn whitened(&self, g: &DVector<f64>) -> Result<DVector<f64>> {
        self.lt
            .solve_upper_triangular(g)
            .ok_or_else(|| Error::Numeric("triangular solve failed".into()))
    }

    /// Solves `L w = g` (the other half of the factorization).
    pub fn solve_lower(&self, g: &DVector<f64>) -> Result<DVector<f64>> {
        self.lt
            .tr_solve_upper_triangular(g)
            .ok_or_else(|| Error::Numeric("triangular solve failed".into()))
    }
}

/// Local norm `‖v‖_x = sqrt(vᵀ D²F(x) v)` at an interior point.
pub fn local_norm(barrier: &dyn Barrier, x: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    Ok(LocalMetric::at(barrier, x)?.norm(v))
}

/// `½ ln det D²F(x)`, computed through a triangular factorization.
pub fn log_det_half(barrier: &dyn Barrier, x: &DVector<f64>) -> Result<f64> {
    Ok(LocalMetric::at(barrier, x)?.log_det_half())
}

/// Minimizes `F` by damped Newton steps from the barrier's interior hint.
///
/// Stops once the Newton decrement `‖∇F(x)‖_{x,*}` drops to `tol`.
pub fn analytic_center(barrier: &dyn Barrier, tol: f64) -> Result<DVector<f64>> {
    let x0 = barrier.interior_hint().ok_or_else(|| {
        Error::Config("barrier has no interior starting point; supply one".into())
    })?;
    analytic_center_from(barrier, x0, tol)
}

/// Same as [`analytic_center`] but from a caller-supplied interior start.
pub fn analytic_center_from(
    barrier: &dyn Barrier,
    mut x: DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>> {
    if !barrier.contains(&x) {
        return Err(Error::NotInterior);
    }
    let mut decrement = f64::INFINITY;
    for _ in 0..MAX_NEWTON_ITERS {
        let grad = barrier.gradient(&x);
        let chol = Cholesky::new(barrier.hessian(&x))
            .ok_or_else(|| Error::Numeric("Hessian factorization failed".into()))?;
        let dir = chol.solve(&grad);
        decrement = grad.dot(&dir).max(0.0).sqrt();
        if decrement <= tol {
            return Ok(x);
        }
        // Damped step of length 1/(1+λ) keeps the iterate inside the body.
        x -= dir * (1.0 / (1.0 + decrement));
        if !barrier.contains(&x) {
            return Err(Error::Numeric("Newton step left the interior".into()));
        }
    }
    Err(Error::Convergence(format!(
        "analytic center: decrement {decrement:.3e} above tol {tol:.3e} after {MAX_NEWTON_ITERS} iterations"
    )))
}

/// Distance `t` to the boundary along `dir`, via doubling plus bisection on
/// the membership predicate. The returned `x + t·dir` is still inside.
pub fn ray_to_boundary(barrier: &dyn Barrier, x: &DVector<f64>, dir: &DVector<f64>) -> Result<f64> {
    if !barrier.contains(x) {
        return Err(Error::NotInterior);
    }
    let scale = dir.norm();
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Domain("ray direction must be finite and nonzero".into()));
    }
    // K sits inside the enclosing ball, so this t is certainly outside.
    let mut hi = (2.0 * barrier.enclosing_radius() + x.norm() + 1.0) / scale;
    if barrier.contains(&(x + dir * hi)) {
        return Err(Error::Domain("body appears unbounded along the ray".into()));
    }
    let mut lo = 0.0_f64;
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if barrier.contains(&(x + dir * mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Draws spread-out interior points by shooting rays from the analytic
/// center. Coverage-oriented plumbing for property checks and sup
/// estimation, not an exact-distribution sampler.
pub struct InteriorSampler<'a> {
    barrier: &'a dyn Barrier,
    center: DVector<f64>,
}

impl<'a> InteriorSampler<'a> {
    pub fn new(barrier: &'a dyn Barrier) -> Result<Self> {
        let center = analytic_center(barrier, 1e-8)?;
        Ok(Self { barrier, center })
    }

    pub fn with_center(barrier: &'a dyn Barrier, center: DVector<f64>) -> Result<Self> {
        if !barrier.contains(&center) {
            return Err(Error::NotInterior);
        }
        Ok(Self { barrier, center })
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    /// One point at a uniform fraction of a random ray, staying a
    /// `boundary_margin` fraction short of the boundary.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, boundary_margin: f64) -> DVector<f64> {
        let dir = random_unit(rng, self.barrier.dim());
        let t = ray_to_boundary(self.barrier, &self.center, &dir)
            .expect("center is interior by construction");
        let u: f64 = rng.random();
        &self.center + dir * (u * (1.0 - boundary_margin) * t)
    }
}

/// Uniform direction on the unit sphere.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<f64> {
    loop {
        let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = g.norm();
        if n > 1e-12 {
            return g / n;
        }
    }
}

/// Polytope `{x : ⟨a_j, x⟩ ≤ b_j, j = 1..m}` with the log barrier
/// `F(x) = −Σ log(b_j − ⟨a_j, x⟩)`, parameter `ν = m`.
#[derive(Clone, Debug)]
pub struct PolytopeBarrier {
    /// Constraint rows, one per inequality (m × d).
    a: DMatrix<f64>,
    b: DVector<f64>,
    radius: f64,
    start: Option<DVector<f64>>,
}

impl PolytopeBarrier {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, enclosing_radius: f64) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::Config("polytope needs at least one row and one column".into()));
        }
        if a.nrows() != b.len() {
            return Err(Error::Config(format!(
                "constraint matrix has {} rows but {} offsets",
                a.nrows(),
                b.len()
            )));
        }
        if !(enclosing_radius > 0.0) || !enclosing_radius.is_finite() {
            return Err(Error::Config("enclosing_radius must be positive and finite".into()));
        }
        Ok(Self { a, b, radius: enclosing_radius, start: None })
    }

    /// Registers a known strictly feasible starting point.
    pub fn with_start(mut self, x0: DVector<f64>) -> Result<Self> {
        if !self.contains(&x0) {
            return Err(Error::NotInterior);
        }
        self.start = Some(x0);
        Ok(self)
    }

    /// Axis-aligned box `Π [lower_i, upper_i]`.
    pub fn from_bounds(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Config("bounds must be nonempty and of equal length".into()));
        }
        let d = lower.len();
        let mut a = DMatrix::zeros(2 * d, d);
        let mut b = DVector::zeros(2 * d);
        for i in 0..d {
            if !(lower[i] < upper[i]) {
                return Err(Error::Config(format!("bounds[{i}] are empty: [{}, {}]", lower[i], upper[i])));
            }
            a[(2 * i, i)] = 1.0;
            b[2 * i] = upper[i];
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -lower[i];
        }
        let radius = (0..d)
            .map(|i| lower[i].powi(2).max(upper[i].powi(2)))
            .sum::<f64>()
            .sqrt();
        let start = DVector::from_fn(d, |i, _| 0.5 * (lower[i] + upper[i]));
        let mut out = Self::new(a, b, radius)?;
        out.start = Some(start);
        Ok(out)
    }

    /// Hypercube `[−half_width, half_width]^d`.
    pub fn hypercube(d: usize, half_width: f64) -> Result<Self> {
        Self::from_bounds(&vec![-half_width; d], &vec![half_width; d])
    }

    /// Standard simplex `{x ≥ 0, Σ x_i ≤ 1}`.
    pub fn simplex(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("simplex needs d ≥ 1".into()));
        }
        let mut a = DMatrix::zeros(d + 1, d);
        let mut b = DVector::zeros(d + 1);
        for i in 0..d {
            a[(i, i)] = -1.0;
        }
        for j in 0..d {
            a[(d, j)] = 1.0;
        }
        b[d] = 1.0;
        let start = DVector::from_element(d, 1.0 / (d as f64 + 1.0));
        let mut out = Self::new(a, b, 1.0)?;
        out.start = Some(start);
        Ok(out)
    }

    pub fn num_constraints(&self) -> usize {
        self.a.nrows()
    }

    pub fn rows(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.a, &self.b)
    }

    fn slacks(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.b - &self.a * x
    }

    /// Agmon-style relaxation toward uniformly positive slacks. Cheap
    /// feasibility heuristic; gives up (returns None) on hard instances.
    fn relaxation_start(&self) -> Option<DVector<f64>> {
        let d = self.a.ncols();
        let gamma = 1e-3 * (1.0 + self.b.amax());
        let mut x = DVector::zeros(d);
        for _ in 0..500 * self.a.nrows() {
            let s = self.slacks(&x);
            let (j, worst) = s
                .iter()
                .enumerate()
                .min_by(|l, r| l.1.partial_cmp(r.1).expect("finite slacks"))
                .map(|(j, v)| (j, *v))?;
            if worst >= gamma {
                return Some(x);
            }
            let row = self.a.row(j).transpose();
            let nn = row.norm_squared();
            if nn == 0.0 {
                return None; // vacuous violated row: infeasible as stated
            }
            // Moving against the worst row raises its slack to 2γ.
            x -= row * ((2.0 * gamma - worst) / nn);
        }
        None
    }
}

impl Barrier for PolytopeBarrier {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn nu(&self) -> f64 {
        self.a.nrows() as f64
    }

    fn enclosing_radius(&self) -> f64 {
        self.radius
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let s = self.slacks(x);
        if s.iter().any(|v| !(*v > 0.0)) {
            return f64::INFINITY;
        }
        -s.iter().map(|v| v.ln()).sum::<f64>()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let s = self.slacks(x);
        let w = DVector::from_fn(s.len(), |j, _| 1.0 / s[j]);
        self.a.tr_mul(&w)
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let s = self.slacks(x);
        let mut scaled = self.a.clone();
        for j in 0..scaled.nrows() {
            let inv = 1.0 / s[j];
            scaled.row_mut(j).scale_mut(inv);
        }
        scaled.tr_mul(&scaled)
    }

    fn contains(&self, x: &DVector<f64>) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        self.slacks(x).iter().all(|v| *v > 0.0)
    }

    fn interior_hint(&self) -> Option<DVector<f64>> {
        if let Some(x) = &self.start {
            return Some(x.clone());
        }
        let origin = DVector::zeros(self.dim());
        if self.contains(&origin) {
            return Some(origin);
        }
        self.relaxation_start().filter(|x| self.contains(x))
    }
}

/// One convex quadratic constraint `f(x) = xᵀQx + ⟨p, x⟩ + c ≤ 0`.
#[derive(Clone, Debug)]
pub struct QuadConstraint {
    pub q: DMatrix<f64>,
    pub p: DVector<f64>,
    pub c: f64,
}

impl QuadConstraint {
    fn eval(&self, x: &DVector<f64>) -> f64 {
        (&self.q * x).dot(x) + self.p.dot(x) + self.c
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x * 2.0 + &self.p
    }
}

/// Body `{x : f_j(x) ≤ 0}` for convex quadratics, with barrier
/// `F(x) = −Σ log(−f_j(x))` and parameter `ν = m`.
#[derive(Clone, Debug)]
pub struct QuadraticBarrier {
    constraints: Vec<QuadConstraint>,
    dim: usize,
    radius: f64,
    start: Option<DVector<f64>>,
}

impl QuadraticBarrier {
    pub fn new(constraints: Vec<QuadConstraint>, enclosing_radius: f64) -> Result<Self> {
        let dim = constraints
            .first()
            .map(|c| c.p.len())
            .ok_or_else(|| Error::Config("quadratic barrier needs at least one constraint".into()))?;
        for (j, con) in constraints.iter().enumerate() {
            if con.q.nrows() != dim || con.q.ncols() != dim || con.p.len() != dim {
                return Err(Error::Config(format!("constraint {j} has inconsistent dimensions")));
            }
            let asym = (&con.q - con.q.transpose()).amax();
            if asym > 1e-9 * (1.0 + con.q.amax()) {
                return Err(Error::Config(format!("constraint {j}: Q must be symmetric")));
            }
        }
        if !(enclosing_radius > 0.0) || !enclosing_radius.is_finite() {
            return Err(Error::Config("enclosing_radius must be positive and finite".into()));
        }
        Ok(Self { constraints, dim, radius: enclosing_radius, start: None })
    }

    pub fn with_start(mut self, x0: DVector<f64>) -> Result<Self> {
        if !self.contains(&x0) {
            return Err(Error::NotInterior);
        }
        self.start = Some(x0);
        Ok(self)
    }

    /// Unit Euclidean ball `{‖x‖² ≤ 1}`, `ν = 1`.
    pub fn unit_ball(d: usize) -> Result<Self> {
        Self::ball(DVector::zeros(d), 1.0)
    }

    /// Euclidean ball of the given center and radius.
    pub fn ball(center: DVector<f64>, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::Config("ball radius must be positive".into()));
        }
        let d = center.len();
        let con = QuadConstraint {
            q: DMatrix::identity(d, d),
            p: -&center * 2.0,
            c: center.norm_squared() - r * r,
        };
        let enclosing = center.norm() + r;
        let mut out = Self::new(vec![con], enclosing)?;
        out.start = Some(center);
        Ok(out)
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }
}

impl Barrier for QuadraticBarrier {
    fn dim(&self) -> usize {
        self.dim
    }

    fn nu(&self) -> f64 {
        self.constraints.len() as f64
    }

    fn enclosing_radius(&self) -> f64 {
        self.radius
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for con in &self.constraints {
            let g = -con.eval(x);
            if !(g > 0.0) {
                return f64::INFINITY;
            }
            total -= g.ln();
        }
        total
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for con in &self.constraints {
            let g = -con.eval(x);
            out += con.grad(x) / g;
        }
        out
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for con in &self.constraints {
            let g = -con.eval(x);
            let grad = con.grad(x);
            out += &con.q * (2.0 / g);
            out += &grad * grad.transpose() / (g * g);
        }
        out
    }

    fn contains(&self, x: &DVector<f64>) -> bool {
        if x.len() != self.dim {
            return false;
        }
        self.constraints.iter().all(|con| con.eval(x) < 0.0)
    }

    fn interior_hint(&self) -> Option<DVector<f64>> {
        if let Some(x) = &self.start {
            return Some(x.clone());
        }
        let origin = DVector::zeros(self.dim);
        if self.contains(&origin) {
            return Some(origin);
        }
        // Try the unconstrained minimizer of the first constraint.
        let con = &self.constraints[0];
        let chol = Cholesky::new(con.q.clone() * 2.0)?;
        let cand = chol.solve(&(-&con.p));
        self.contains(&cand).then_some(cand)
    }
}

/// Barrier for an intersection: component values, gradients and Hessians are
/// summed, and `ν = Σ ν_j`.
pub struct SumBarrier {
    parts: Vec<Arc<dyn Barrier>>,
    dim: usize,
    nu: f64,
    radius: f64,
}

impl SumBarrier {
    pub fn new(parts: Vec<Arc<dyn Barrier>>) -> Result<Self> {
        let dim = parts
            .first()
            .map(|p| p.dim())
            .ok_or_else(|| Error::Config("sum barrier needs at least one part".into()))?;
        if parts.iter().any(|p| p.dim() != dim) {
            return Err(Error::Config("sum barrier parts must share the ambient dimension".into()));
        }
        let nu = parts.iter().map(|p| p.nu()).sum();
        let radius = parts
            .iter()
            .map(|p| p.enclosing_radius())
            .fold(f64::INFINITY, f64::min);
        Ok(Self { parts, dim, nu, radius })
    }

    pub fn parts(&self) -> &[Arc<dyn Barrier>] {
        &self.parts
    }
}

impl Barrier for SumBarrier {
    fn dim(&self) -> usize {
        self.dim
    }

    fn nu(&self) -> f64 {
        self.nu
    }

    fn enclosing_radius(&self) -> f64 {
        self.radius
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.parts.iter().map(|p| p.value(x)).sum()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for p in &self.parts {
            out += p.gradient(x);
        }
        out
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for p in &self.parts {
            out += p.hessian(x);
        }
        out
    }

    fn contains(&self, x: &DVector<f64>) -> bool {
        self.parts.iter().all(|p| p.contains(x))
    }

    fn interior_hint(&self) -> Option<DVector<f64>> {
        self.parts
            .iter()
            .filter_map(|p| p.interior_hint())
            .find(|x| self.contains(x))
    }
}
