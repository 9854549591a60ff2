//! Ready-made bodies covering the barrier families the crate ships:
//! boxes, a simplex, balls, an ellipse, and a box–ball intersection.
//! Used by the `diagnose` command and the property suites.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::barriers::{Barrier, PolytopeBarrier, QuadConstraint, QuadraticBarrier, SumBarrier};

/// A barrier with a stable name for reports.
pub struct NamedBarrier {
    pub name: &'static str,
    pub barrier: Arc<dyn Barrier>,
}

/// Every shipped barrier family at desk scale.
pub fn shipped() -> Vec<NamedBarrier> {
    let interval = PolytopeBarrier::hypercube(1, 1.0).expect("interval");
    let unit_interval = PolytopeBarrier::from_bounds(&[0.0], &[1.0]).expect("unit interval");
    let box2 = PolytopeBarrier::hypercube(2, 1.0).expect("box2");
    let box3 = PolytopeBarrier::hypercube(3, 1.0).expect("box3");
    let simplex2 = PolytopeBarrier::simplex(2).expect("simplex2");
    let ball2 = QuadraticBarrier::unit_ball(2).expect("ball2");
    let ellipse = QuadraticBarrier::new(
        vec![QuadConstraint {
            q: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.25])),
            p: DVector::zeros(2),
            c: -1.0,
        }],
        2.0,
    )
    .expect("ellipse");
    let box_ball = SumBarrier::new(vec![
        Arc::new(PolytopeBarrier::hypercube(2, 1.0).expect("box2")) as Arc<dyn Barrier>,
        Arc::new(QuadraticBarrier::ball(DVector::from_vec(vec![0.2, 0.0]), 1.1).expect("ball"))
            as Arc<dyn Barrier>,
    ])
    .expect("box-ball intersection");

    vec![
        NamedBarrier { name: "interval", barrier: Arc::new(interval) },
        NamedBarrier { name: "unit_interval", barrier: Arc::new(unit_interval) },
        NamedBarrier { name: "box2", barrier: Arc::new(box2) },
        NamedBarrier { name: "box3", barrier: Arc::new(box3) },
        NamedBarrier { name: "simplex2", barrier: Arc::new(simplex2) },
        NamedBarrier { name: "ball2", barrier: Arc::new(ball2) },
        NamedBarrier { name: "ellipse2", barrier: Arc::new(ellipse) },
        NamedBarrier { name: "box_ball2", barrier: Arc::new(box_ball) },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_barriers_have_usable_centers() {
        for named in shipped() {
            let c = crate::barriers::analytic_center(named.barrier.as_ref(), 1e-8)
                .unwrap_or_else(|e| panic!("{}: {e}", named.name));
            assert!(named.barrier.contains(&c), "{}", named.name);
            assert!(named.barrier.nu() >= 1.0);
        }
    }
}
