//! Sampling from a fitted mixture of log-concave components: pick a
//! component by its weight, then advance that component's chain and report
//! its point. Component chains never interact, so they can also be stepped
//! in parallel by the caller between draws.

use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;

use crate::barriers::Barrier;
use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::walker::{run, ChainParams, ChainState};

/// One mixture component: a weight and a tracked chain on its potential.
pub struct MixtureComponent {
    pub weight: f64,
    pub potential: Potential,
    pub params: ChainParams,
    pub chain: ChainState,
    /// Walk steps taken on the component per draw it serves.
    pub steps_per_draw: u64,
}

impl MixtureComponent {
    pub fn new(
        weight: f64,
        potential: Potential,
        params: ChainParams,
        chain: ChainState,
        steps_per_draw: u64,
    ) -> Self {
        Self { weight, potential, params, chain, steps_per_draw }
    }
}

/// A weighted mixture over shared support.
pub struct Mixture {
    barrier: Arc<dyn Barrier>,
    components: Vec<MixtureComponent>,
}

impl Mixture {
    /// Weights must be positive and sum to 1 within 1e−9.
    pub fn new(barrier: Arc<dyn Barrier>, components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("mixture needs at least one component".into()));
        }
        if components.iter().any(|c| !(c.weight > 0.0)) {
            return Err(Error::Config("mixture weights must be positive".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(Self { barrier, components })
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    /// Draws a component index proportional to the weights, advances that
    /// chain by its per-draw schedule and returns its current point.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<DVector<f64>> {
        self.sample_indexed(rng).map(|(_, x)| x)
    }

    /// [`Mixture::sample`] that also reveals which component served the draw.
    pub fn sample_indexed<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(usize, DVector<f64>)> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut idx = self.components.len() - 1;
        for (i, comp) in self.components.iter().enumerate() {
            acc += comp.weight;
            if u < acc {
                idx = i;
                break;
            }
        }
        let comp = &mut self.components[idx];
        run(self.barrier.as_ref(), &comp.potential, &comp.params, &mut comp.chain, comp.steps_per_draw)?;
        Ok((idx, comp.chain.current().clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::PolytopeBarrier;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn component(
        barrier: &dyn Barrier,
        weight: f64,
        center: f64,
        stream: u64,
        steps: u64,
    ) -> MixtureComponent {
        let potential = Potential::gaussian(DVector::from_vec(vec![center]));
        let params = ChainParams::new(0.5, 99).unwrap().with_stream(stream);
        let chain = ChainState::from_center(barrier, &params).unwrap();
        MixtureComponent::new(weight, potential, params, chain, steps)
    }

    #[test]
    fn weights_must_sum_to_one() {
        let b: Arc<dyn Barrier> = Arc::new(PolytopeBarrier::hypercube(1, 1.0).unwrap());
        let comps = vec![component(b.as_ref(), 0.6, 0.0, 0, 1), component(b.as_ref(), 0.5, 0.1, 1, 1)];
        assert!(matches!(Mixture::new(b, comps), Err(Error::Config(_))));
    }

    #[test]
    fn single_component_delegates_entirely() {
        let b: Arc<dyn Barrier> = Arc::new(PolytopeBarrier::hypercube(1, 1.0).unwrap());
        let comps = vec![component(b.as_ref(), 1.0, 0.3, 0, 5)];
        let mut mix = Mixture::new(b, comps).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (idx, x) = mix.sample_indexed(&mut rng).unwrap();
            assert_eq!(idx, 0);
            assert!(x[0].abs() < 1.0);
        }
    }

    #[test]
    fn mixture_histogram_matches_the_oracle_mixture() {
        // Two symmetric truncated Gaussians: equal component normalizers,
        // so the mixture density is proportional to e^{−s₁} + e^{−s₂} and a
        // single custom potential can serve as the oracle target.
        let b: Arc<dyn Barrier> = Arc::new(PolytopeBarrier::hypercube(1, 1.0).unwrap());
        let comps = vec![
            component(b.as_ref(), 0.5, -0.6, 0, 25),
            component(b.as_ref(), 0.5, 0.6, 1, 25),
        ];
        let mut mix = Mixture::new(Arc::clone(&b), comps).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws: Vec<_> = (0..40_000).map(|_| mix.sample(&mut rng).unwrap()).collect();

        let mix_potential = Potential::custom(
            |x: &DVector<f64>| {
                let s1 = 0.5 * (x[0] + 0.6) * (x[0] + 0.6);
                let s2 = 0.5 * (x[0] - 0.6) * (x[0] - 0.6);
                -(0.5 * (-s1).exp() + 0.5 * (-s2).exp()).ln()
            },
            1.0,
        );
        let oracle = crate::diagnostics::grid_density_cells(b.as_ref(), &mix_potential, 200)
            .unwrap()
            .coarsen(4)
            .unwrap();
        let tv = crate::diagnostics::tv_distance(&oracle, &draws).unwrap();
        assert!(tv <= 0.07, "mixture TV {tv}");
    }

    #[test]
    fn component_counts_concentrate_at_the_weights() {
        let b: Arc<dyn Barrier> = Arc::new(PolytopeBarrier::hypercube(1, 1.0).unwrap());
        let comps = vec![
            component(b.as_ref(), 0.5, -0.5, 0, 1),
            component(b.as_ref(), 0.5, 0.5, 1, 1),
        ];
        let mut mix = Mixture::new(b, comps).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut first = 0u64;
        for _ in 0..100_000 {
            let (idx, _) = mix.sample_indexed(&mut rng).unwrap();
            if idx == 0 {
                first += 1;
            }
        }
        assert!((first as i64 - 50_000).unsigned_abs() < 500, "count {first}");
    }
}
