//! Ground-truth oracles and property harnesses.
//!
//! The [`GridOracle`] discretizes a target density on a 1D/2D body and
//! serves as total-variation ground truth for desk-scale checks; the
//! detailed-balance and self-concordance harnesses exercise the algebraic
//! identities the walk and the barriers must satisfy at any dimension.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::barriers::{
    local_norm, random_unit, ray_to_boundary, Barrier, InteriorSampler, LocalMetric,
};
use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::walker::{log_accept, propose};

/// Brute-force discretization of `e^{−s}/Z` on a 1D or 2D body.
///
/// Cells live on a regular grid over the enclosing box `[−R, R]^d`; cells
/// whose center falls outside `K` are masked out and carry zero mass.
#[derive(Clone, Debug)]
pub struct GridOracle {
    dim: usize,
    lo: [f64; 2],
    width: [f64; 2],
    n: [usize; 2],
    probs: Vec<f64>,
    mask: Vec<bool>,
    cum: Vec<f64>,
}

impl GridOracle {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> usize {
        self.probs.len()
    }

    pub fn cells_per_axis(&self) -> [usize; 2] {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn masked_cells(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Center of the linear cell index.
    pub fn center(&self, idx: usize) -> DVector<f64> {
        let (i, j) = (idx / self.n[1], idx % self.n[1]);
        let mut out = DVector::zeros(self.dim);
        out[0] = self.lo[0] + (i as f64 + 0.5) * self.width[0];
        if self.dim == 2 {
            out[1] = self.lo[1] + (j as f64 + 0.5) * self.width[1];
        }
        out
    }

    /// Linear cell index of a point, or `None` when it lies outside the
    /// bounding box (the sink).
    pub fn cell_index(&self, x: &DVector<f64>) -> Option<usize> {
        let mut coords = [0usize; 2];
        for axis in 0..self.dim {
            let rel = (x[axis] - self.lo[axis]) / self.width[axis];
            if !(rel >= 0.0) || !rel.is_finite() {
                return None;
            }
            let i = rel as usize;
            if i >= self.n[axis] {
                return None;
            }
            coords[axis] = i;
        }
        Some(coords[0] * self.n[1] + coords[1])
    }

    /// Mean of the discretized distribution.
    pub fn mean(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for (idx, p) in self.probs.iter().enumerate() {
            if *p > 0.0 {
                out += self.center(idx) * *p;
            }
        }
        out
    }

    /// Aggregates `factor` cells per axis into one.
    pub fn coarsen(&self, factor: usize) -> Result<GridOracle> {
        if factor == 0 {
            return Err(Error::Config("coarsening factor must be ≥ 1".into()));
        }
        let n0 = self.n[0].div_ceil(factor);
        let n1 = if self.dim == 2 { self.n[1].div_ceil(factor) } else { 1 };
        let mut probs = vec![0.0; n0 * n1];
        let mut mask = vec![false; n0 * n1];
        for idx in 0..self.probs.len() {
            let (i, j) = (idx / self.n[1], idx % self.n[1]);
            let coarse = (i / factor) * n1 + if self.dim == 2 { j / factor } else { 0 };
            probs[coarse] += self.probs[idx];
            mask[coarse] |= self.mask[idx];
        }
        let cum = cumulative(&probs);
        Ok(GridOracle {
            dim: self.dim,
            lo: self.lo,
            width: [
                self.width[0] * factor as f64,
                if self.dim == 2 { self.width[1] * factor as f64 } else { self.width[1] },
            ],
            n: [n0, n1],
            probs,
            mask,
            cum,
        })
    }

    /// Total variation against another oracle on the identical grid.
    pub fn tv_to(&self, other: &GridOracle) -> Result<f64> {
        if self.n != other.n || self.dim != other.dim {
            return Err(Error::Config("oracles live on different grids".into()));
        }
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>())
    }

    /// Writes the oracle table as CSV (`x_1[,x_2],prob`), masked cells
    /// only, for external plotting.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        let cols: Vec<String> = (1..=self.dim).map(|i| format!("x_{i}")).collect();
        writeln!(w, "{},prob", cols.join(","))?;
        for idx in 0..self.probs.len() {
            if !self.mask[idx] {
                continue;
            }
            let center = self.center(idx);
            let coords: Vec<String> = center.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{},{}", coords.join(","), self.probs[idx])?;
        }
        Ok(())
    }

    /// Draws a cell center with the oracle's probabilities.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let u: f64 = rng.random();
        let idx = match self.cum.binary_search_by(|c| c.partial_cmp(&u).expect("finite")) {
            Ok(i) => i + 1,
            Err(i) => i,
        };
        self.center(idx.min(self.probs.len() - 1))
    }
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

/// Discretizes `e^{−s}/Z` with cells of size at most `h` per axis.
pub fn grid_density(barrier: &dyn Barrier, s: &Potential, h: f64) -> Result<GridOracle> {
    if !(h > 0.0) {
        return Err(Error::Config("cell size must be positive".into()));
    }
    let side = 2.0 * barrier.enclosing_radius();
    let cells = (side / h).ceil() as usize;
    grid_density_cells(barrier, s, cells.max(1))
}

/// Discretizes with an explicit per-axis cell count (handy for building
/// alignable refinements).
pub fn grid_density_cells(
    barrier: &dyn Barrier,
    s: &Potential,
    cells_per_axis: usize,
) -> Result<GridOracle> {
    let dim = barrier.dim();
    if dim > 2 {
        return Err(Error::Unsupported(format!(
            "grid oracle supports d ≤ 2, got d = {dim}"
        )));
    }
    if cells_per_axis == 0 {
        return Err(Error::Config("need at least one cell per axis".into()));
    }
    let r = barrier.enclosing_radius();
    let n = [cells_per_axis, if dim == 2 { cells_per_axis } else { 1 }];
    let lo = [-r, -r];
    let width = [2.0 * r / n[0] as f64, 2.0 * r / n[1] as f64];
    let total_cells = n[0] * n[1];

    let mut mask = vec![false; total_cells];
    let mut log_w = vec![f64::NEG_INFINITY; total_cells];
    let mut max_log = f64::NEG_INFINITY;
    let mut any = false;
    for i in 0..n[0] {
        for j in 0..n[1] {
            let idx = i * n[1] + j;
            let mut c = DVector::zeros(dim);
            c[0] = lo[0] + (i as f64 + 0.5) * width[0];
            if dim == 2 {
                c[1] = lo[1] + (j as f64 + 0.5) * width[1];
            }
            if barrier.contains(&c) {
                mask[idx] = true;
                any = true;
                let lw = -s.eval(&c);
                log_w[idx] = lw;
                max_log = max_log.max(lw);
            }
        }
    }
    if !any {
        return Err(Error::Config("no cell center falls inside the body; refine h".into()));
    }
    let mut probs: Vec<f64> = log_w
        .iter()
        .map(|lw| if lw.is_finite() { (lw - max_log).exp() } else { 0.0 })
        .collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    let cum = cumulative(&probs);
    Ok(GridOracle { dim, lo, width, n, probs, mask, cum })
}

/// Total variation `½ Σ |empirical − oracle|` of a sample list against the
/// oracle. Samples outside the bounding box land in a sink cell that counts
/// fully toward the distance.
pub fn tv_distance(oracle: &GridOracle, samples: &[DVector<f64>]) -> Result<f64> {
    tv_distance_with_sink(oracle, samples).map(|(tv, _)| tv)
}

/// [`tv_distance`] that also reports how many samples hit the sink.
pub fn tv_distance_with_sink(
    oracle: &GridOracle,
    samples: &[DVector<f64>],
) -> Result<(f64, u64)> {
    if samples.len() < 1_000 {
        return Err(Error::Domain(format!(
            "total variation needs at least 10³ samples, got {}",
            samples.len()
        )));
    }
    let mut counts = vec![0u64; oracle.cells()];
    let mut sink = 0u64;
    for x in samples {
        match oracle.cell_index(x) {
            Some(idx) => counts[idx] += 1,
            None => sink += 1,
        }
    }
    let n = samples.len() as f64;
    let mut acc = sink as f64 / n;
    for (count, p) in counts.iter().zip(oracle.probs()) {
        acc += (*count as f64 / n - p).abs();
    }
    Ok((0.5 * acc, sink))
}

/// Maximum relative violation of the detailed-balance identity
/// `e^{−s(x)}·G^r_x(z)·min(1, A(x,z)) = e^{−s(z)}·G^r_z(x)·min(1, A(z,x))`
/// over random interior pairs, with `z` drawn from the proposal at `x`.
pub fn detailed_balance_check(
    barrier: &dyn Barrier,
    s: &Potential,
    r: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let sampler = InteriorSampler::new(barrier)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = barrier.dim() as f64;
    let mut worst = 0.0_f64;
    let mut done = 0usize;
    while done < trials {
        // A slack margin on x and a range guard on z keep the exponent
        // magnitudes moderate, so the comparison measures the identity
        // rather than f64 cancellation (which grows as 1e−16 × magnitude
        // and would swamp the 1e−10 scale for near-boundary proposals).
        let x = sampler.sample(&mut rng, 0.05);
        let z = propose(barrier, &x, r, &mut rng)?;
        if !barrier.contains(&z) {
            continue;
        }
        let diff = &z - &x;
        let scale = d / (r * r);
        let exp_zx = scale * local_norm(barrier, &z, &diff)?.powi(2);
        if exp_zx > 1e3 {
            continue; // z outside any reasonable proposal range
        }
        let la_xz = log_accept(barrier, s, &x, &z, r)?;
        let la_zx = log_accept(barrier, s, &z, &x, r)?;
        // log G up to the shared normalizer, which cancels in the ratio.
        let log_g_xz = -scale * local_norm(barrier, &x, &diff)?.powi(2)
            + crate::barriers::log_det_half(barrier, &x)?;
        let log_g_zx = -exp_zx + crate::barriers::log_det_half(barrier, &z)?;
        let log_lhs = -s.eval(&x) + log_g_xz + la_xz.min(0.0);
        let log_rhs = -s.eval(&z) + log_g_zx + la_zx.min(0.0);
        worst = worst.max((log_lhs - log_rhs).exp_m1().abs());
        done += 1;
    }
    Ok(worst)
}

/// Worst-case ratios observed by the self-concordance harness. Thresholds
/// are applied by the caller; third derivatives come from central finite
/// differences of the Hessian quadratic form.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SelfConcordanceReport {
    pub trials: usize,
    /// `D³F[h,h,h] / (2·(D²F[h,h])^{3/2})`; at most 1 up to FD noise.
    pub worst_aligned_third: f64,
    /// `|D³F[h₁,h₂,h₃]| / (2·‖h₁‖ₓ‖h₂‖ₓ‖h₃‖ₓ)`; at most 1 up to FD noise.
    pub worst_trilinear: f64,
    /// `⟨∇F, h⟩² / (ν·D²F[h,h])`; at most 1.
    pub worst_gradient_sq: f64,
    /// Smallest eigenvalue ratio `λ_min(M)/(1−δ)²` of the Hessian
    /// similarity sandwich; at least 1 up to numerical slack.
    pub sandwich_lower: f64,
    /// Largest ratio `λ_max(M)·(1−δ)²`; at most 1 up to numerical slack.
    pub sandwich_upper: f64,
    /// Points `x + 0.999·h`, `‖h‖_x = 1`, found outside the body.
    pub dikin_violations: u64,
}

/// Exercises the differential inequalities, the Hessian similarity sandwich
/// and Dikin containment at random interior points and directions.
pub fn self_concordance_check(
    barrier: &dyn Barrier,
    trials: usize,
    seed: u64,
) -> Result<SelfConcordanceReport> {
    let sampler = InteriorSampler::new(barrier)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = barrier.dim();
    let nu = barrier.nu();
    let mut report = SelfConcordanceReport {
        trials,
        worst_aligned_third: f64::NEG_INFINITY,
        worst_trilinear: 0.0,
        worst_gradient_sq: 0.0,
        sandwich_lower: f64::INFINITY,
        sandwich_upper: 0.0,
        dikin_violations: 0,
    };
    for _ in 0..trials {
        let x = sampler.sample(&mut rng, 0.05);
        let h = unit_local_direction(barrier, &x, &mut rng)?;
        let hess = barrier.hessian(&x);
        let quad = (&hess * &h).dot(&h); // ≈ 1 by normalization

        // Gradient bound: the barrier value is ν-Lipschitz in the local norm.
        let grad_h = barrier.gradient(&x).dot(&h);
        report.worst_gradient_sq = report.worst_gradient_sq.max(grad_h * grad_h / (nu * quad));

        // Aligned third derivative along h, by central differences of the
        // Hessian form. Step scaled by the slack along ±h.
        let fd_step = fd_step_along(barrier, &x, &h)?;
        let third = third_difference(barrier, &x, &h, &h, &h, fd_step);
        report.worst_aligned_third =
            report.worst_aligned_third.max(third / (2.0 * quad.powf(1.5)));

        // Trilinear bound with independent directions.
        let h2 = unit_local_direction(barrier, &x, &mut rng)?;
        let h3 = unit_local_direction(barrier, &x, &mut rng)?;
        let fd3 = fd_step_along(barrier, &x, &h3)?;
        let tri = third_difference(barrier, &x, &h, &h2, &h3, fd3).abs();
        let norms = local_norm(barrier, &x, &h)?
            * local_norm(barrier, &x, &h2)?
            * local_norm(barrier, &x, &h3)?;
        report.worst_trilinear = report.worst_trilinear.max(tri / (2.0 * norms));

        // Hessian similarity sandwich at displacement δ·h, δ ≤ 1/2.
        let dlt: f64 = rng.random_range(0.01..=0.5);
        let y = &x + &h * dlt;
        if barrier.contains(&y) {
            let metric = LocalMetric::at(barrier, &x)?;
            let (lambda_min, lambda_max) = similarity_eigen_range(&metric, &barrier.hessian(&y), d)?;
            let lo_bound = (1.0 - dlt) * (1.0 - dlt);
            report.sandwich_lower = report.sandwich_lower.min(lambda_min / lo_bound);
            report.sandwich_upper = report.sandwich_upper.max(lambda_max * lo_bound);
        }

        // Dikin containment just inside the unit ellipsoid.
        if !barrier.contains(&(&x + &h * 0.999)) {
            report.dikin_violations += 1;
        }
    }
    Ok(report)
}

/// Direction with `‖h‖_x = 1`.
fn unit_local_direction<R: Rng + ?Sized>(
    barrier: &dyn Barrier,
    x: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let dir = random_unit(rng, barrier.dim());
    let n = local_norm(barrier, x, &dir)?;
    Ok(dir / n)
}

fn fd_step_along(barrier: &dyn Barrier, x: &DVector<f64>, h: &DVector<f64>) -> Result<f64> {
    let fwd = ray_to_boundary(barrier, x, h)?;
    let bwd = ray_to_boundary(barrier, x, &(-h))?;
    Ok(1e-4 * fwd.min(bwd).min(1.0))
}

/// `D³F(x)[h₁, h₂, h₃]` by a central difference of the Hessian bilinear
/// form along `h₃`.
fn third_difference(
    barrier: &dyn Barrier,
    x: &DVector<f64>,
    h1: &DVector<f64>,
    h2: &DVector<f64>,
    h3: &DVector<f64>,
    eps: f64,
) -> f64 {
    let plus = (&barrier.hessian(&(x + h3 * eps)) * h1).dot(h2);
    let minus = (&barrier.hessian(&(x - h3 * eps)) * h1).dot(h2);
    (plus - minus) / (2.0 * eps)
}

/// Eigenvalue range of `L⁻¹ H' L⁻ᵀ` where `LLᵀ` factors the Hessian at the
/// base point.
fn similarity_eigen_range(
    metric_at_x: &LocalMetric,
    hess_at_y: &DMatrix<f64>,
    d: usize,
) -> Result<(f64, f64)> {
    // Column-wise whitening: first pass gives L⁻¹H', transposing and
    // repeating gives M = L⁻¹H'L⁻ᵀ.
    let mut m = DMatrix::zeros(d, d);
    for j in 0..d {
        let col = hess_at_y.column(j).into_owned();
        m.set_column(j, &metric_at_x.solve_lower(&col)?);
    }
    let mt = m.transpose();
    let mut w = DMatrix::zeros(d, d);
    for j in 0..d {
        let col = mt.column(j).into_owned();
        w.set_column(j, &metric_at_x.solve_lower(&col)?);
    }
    let sym = (&w + w.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((min, max))
}

/// Minimizer of a linear objective over the oracle grid's masked cell
/// centers; desk-scale ground truth for comparators.
pub fn grid_minimize_linear(
    barrier: &dyn Barrier,
    coeff: &DVector<f64>,
    cells_per_axis: usize,
) -> Result<(DVector<f64>, f64)> {
    let oracle = grid_density_cells(barrier, &Potential::uniform(), cells_per_axis)?;
    let mut best: Option<(DVector<f64>, f64)> = None;
    for idx in 0..oracle.cells() {
        if !oracle.mask[idx] {
            continue;
        }
        let center = oracle.center(idx);
        let v = coeff.dot(&center);
        if best.as_ref().map_or(true, |(_, bv)| v < *bv) {
            best = Some((center, v));
        }
    }
    best.ok_or_else(|| Error::Config("no masked cells on the grid".into()))
}

/// Sample mean and unbiased covariance.
pub fn empirical_moments(samples: &[DVector<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if samples.len() < 2 {
        return Err(Error::Domain("moments need at least two samples".into()));
    }
    let d = samples[0].len();
    let n = samples.len() as f64;
    let mut mean = DVector::zeros(d);
    for x in samples {
        mean += x;
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for x in samples {
        let c = x - &mean;
        cov += &c * c.transpose();
    }
    cov /= n - 1.0;
    Ok((mean, cov))
}

/// Finite-difference helpers shared by the property harnesses.
pub mod fd {
    use nalgebra::{DMatrix, DVector};

    /// Central-difference gradient of `f`.
    pub fn central_gradient<F>(f: F, x: &DVector<f64>, step: f64) -> DVector<f64>
    where
        F: Fn(&DVector<f64>) -> f64,
    {
        let d = x.len();
        DVector::from_fn(d, |i, _| {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[i] += step;
            lo[i] -= step;
            (f(&hi) - f(&lo)) / (2.0 * step)
        })
    }

    /// Central-difference Hessian of `f`.
    pub fn central_hessian<F>(f: F, x: &DVector<f64>, step: f64) -> DMatrix<f64>
    where
        F: Fn(&DVector<f64>) -> f64,
    {
        let d = x.len();
        let mut out = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let mut pp = x.clone();
                let mut pm = x.clone();
                let mut mp = x.clone();
                let mut mm = x.clone();
                pp[i] += step;
                pp[j] += step;
                pm[i] += step;
                pm[j] -= step;
                mp[i] -= step;
                mp[j] += step;
                mm[i] -= step;
                mm[j] -= step;
                let v = (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * step * step);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::PolytopeBarrier;
    use approx::assert_relative_eq;

    fn box1() -> PolytopeBarrier {
        PolytopeBarrier::hypercube(1, 1.0).unwrap()
    }

    #[test]
    fn uniform_oracle_is_flat_on_masked_cells() {
        let b = box1();
        let oracle = grid_density(&b, &Potential::uniform(), 0.01).unwrap();
        let m = oracle.masked_cells();
        assert_eq!(m, 200);
        let expect = 1.0 / m as f64;
        for (idx, p) in oracle.probs().iter().enumerate() {
            if *p > 0.0 {
                assert_relative_eq!(*p, expect, max_relative = 1e-12);
            } else {
                let _ = idx;
            }
        }
        let total: f64 = oracle.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_target_mean_matches_quadrature() {
        // s(x) = x on [−1,1]: mean = coth(1) − 1 up to discretization.
        let b = box1();
        let s = Potential::linear(DVector::from_vec(vec![1.0]), 0.0);
        let oracle = grid_density(&b, &s, 1e-3).unwrap();
        assert_relative_eq!(oracle.mean()[0], -0.31303528549933146, epsilon = 1e-6);
    }

    #[test]
    fn oracle_is_invariant_to_constant_shifts() {
        let b = box1();
        let s = Potential::linear(DVector::from_vec(vec![0.7]), 0.0);
        let shifted = Potential::linear(DVector::from_vec(vec![0.7]), 123.0);
        let o1 = grid_density_cells(&b, &s, 100).unwrap();
        let o2 = grid_density_cells(&b, &shifted, 100).unwrap();
        assert!(o1.tv_to(&o2).unwrap() < 1e-12);
    }

    #[test]
    fn refinement_self_convergence() {
        let b = box1();
        let s = Potential::gaussian(DVector::from_vec(vec![0.3]));
        let coarse = grid_density_cells(&b, &s, 500).unwrap();
        let fine = grid_density_cells(&b, &s, 1000).unwrap().coarsen(2).unwrap();
        assert!(coarse.tv_to(&fine).unwrap() <= 0.01);
    }

    #[test]
    fn tv_of_oracle_draws_is_small() {
        let b = box1();
        let s = Potential::linear(DVector::from_vec(vec![0.5]), 0.0);
        let oracle = grid_density_cells(&b, &s, 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let samples: Vec<_> = (0..100_000).map(|_| oracle.sample(&mut rng)).collect();
        let tv = tv_distance(&oracle, &samples).unwrap();
        assert!(tv <= 0.03, "tv {tv}");
    }

    #[test]
    fn tv_decreases_with_sample_size() {
        let b = box1();
        let oracle = grid_density_cells(&b, &Potential::uniform(), 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut last = f64::INFINITY;
        for n in [1_000usize, 10_000, 100_000] {
            let samples: Vec<_> = (0..n).map(|_| oracle.sample(&mut rng)).collect();
            let tv = tv_distance(&oracle, &samples).unwrap();
            assert!(tv < last, "tv {tv} did not improve on {last} at n = {n}");
            last = tv;
        }
    }

    #[test]
    fn concentrated_samples_against_uniform_oracle() {
        let b = box1();
        let oracle = grid_density_cells(&b, &Potential::uniform(), 100).unwrap();
        let cell = oracle.center(50);
        let samples: Vec<_> = (0..1000).map(|_| cell.clone()).collect();
        let tv = tv_distance(&oracle, &samples).unwrap();
        assert_relative_eq!(tv, 0.99, max_relative = 1e-9);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let b = box1();
        let oracle = grid_density_cells(&b, &Potential::uniform(), 10).unwrap();
        assert!(matches!(tv_distance(&oracle, &[]), Err(Error::Domain(_))));
    }

    #[test]
    fn sink_counts_points_outside_the_box() {
        let b = box1();
        let oracle = grid_density_cells(&b, &Potential::uniform(), 10).unwrap();
        let mut samples: Vec<_> = (0..1000).map(|i| DVector::from_vec(vec![-1.0 + 2.0 * (i as f64 + 0.5) / 1000.0])).collect();
        samples.push(DVector::from_vec(vec![5.0]));
        let (_, sink) = tv_distance_with_sink(&oracle, &samples).unwrap();
        assert_eq!(sink, 1);
    }

    #[test]
    fn oracle_exports_its_table_as_csv() {
        let b = box1();
        let oracle = grid_density_cells(&b, &Potential::uniform(), 4).unwrap();
        let mut buf = Vec::new();
        oracle.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x_1,prob");
        assert_eq!(lines.len(), 1 + oracle.masked_cells());
        assert!(lines[1].contains("0.25"));
    }

    #[test]
    fn oracle_rejects_high_dimension() {
        let b = PolytopeBarrier::hypercube(3, 1.0).unwrap();
        assert!(matches!(
            grid_density(&b, &Potential::uniform(), 0.1),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn detailed_balance_on_a_box_with_linear_target() {
        let b = PolytopeBarrier::hypercube(2, 1.0).unwrap();
        let s = Potential::linear(DVector::from_vec(vec![0.8, -0.3]), 0.0);
        let worst = detailed_balance_check(&b, &s, 0.5, 10_000, 3).unwrap();
        assert!(worst <= 1e-10, "violation {worst}");
    }

    #[test]
    fn detailed_balance_ignores_constant_shifts() {
        let b = box1();
        let s = Potential::linear(DVector::from_vec(vec![0.4]), 0.0);
        let shifted = Potential::linear(DVector::from_vec(vec![0.4]), 55.0);
        let w1 = detailed_balance_check(&b, &s, 0.5, 500, 9).unwrap();
        let w2 = detailed_balance_check(&b, &shifted, 0.5, 500, 9).unwrap();
        assert!(w1 <= 1e-10 && w2 <= 1e-10);
    }

    #[test]
    fn self_concordance_on_the_interval() {
        let b = box1();
        let report = self_concordance_check(&b, 300, 7).unwrap();
        assert!(report.worst_gradient_sq <= 1.0 + 1e-9, "gradient-bound ratio {}", report.worst_gradient_sq);
        assert!(report.worst_aligned_third <= 1.05, "third-derivative ratio {}", report.worst_aligned_third);
        assert!(report.worst_trilinear <= 1.05, "trilinear ratio {}", report.worst_trilinear);
        assert!(report.sandwich_lower >= 1.0 - 1e-6, "sandwich low {}", report.sandwich_lower);
        assert!(report.sandwich_upper <= 1.0 + 1e-6, "sandwich high {}", report.sandwich_upper);
        assert_eq!(report.dikin_violations, 0);
    }

    #[test]
    fn third_difference_scaling_is_homogeneous() {
        // Scaling h ↦ 2h scales D³[h,h,h] and (D²[h,h])^{3/2} by the same 8.
        let b = box1();
        let x = DVector::from_vec(vec![0.2]);
        let h = DVector::from_vec(vec![0.5]);
        let eps = 1e-5;
        let d3 = third_difference(&b, &x, &h, &h, &h, eps);
        let d3_scaled = third_difference(&b, &x, &(&h * 2.0), &(&h * 2.0), &(&h * 2.0), eps);
        assert_relative_eq!(d3_scaled, 8.0 * d3, max_relative = 1e-6);
    }

    #[test]
    fn moments_of_uniform_samples() {
        let b = box1();
        let oracle = grid_density_cells(&b, &Potential::uniform(), 200).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let samples: Vec<_> = (0..100_000).map(|_| oracle.sample(&mut rng)).collect();
        let (mean, cov) = empirical_moments(&samples).unwrap();
        assert!(mean[0].abs() < 0.01);
        assert!((cov[(0, 0)] - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn moments_of_a_repeated_point_are_degenerate() {
        let x = DVector::from_vec(vec![0.4, -0.1]);
        let samples = vec![x.clone(), x.clone(), x];
        let (_, cov) = empirical_moments(&samples).unwrap();
        assert!(cov.amax() < 1e-30);
        assert!(empirical_moments(&samples[..1]).is_err());
    }
}
