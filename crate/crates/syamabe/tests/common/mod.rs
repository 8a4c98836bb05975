#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use syamabe::collar_geometry::FourierTerm;
use syamabe::GeometrySpec;

/// Torus collar with random low-frequency coefficient fields at every order
/// in `r`. The `order = 1` part is non-umbilic by construction.
pub fn random_torus(seed: u64, grid: usize) -> GeometrySpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = [0.03, 0.15, 0.1, 0.08, 0.05];
    let mut terms = Vec::new();
    for (order, a) in amp.iter().enumerate() {
        for _ in 0..4 {
            let i = rng.random_range(0..3);
            let j = rng.random_range(0..3);
            let k = [
                rng.random_range(-1..=1),
                rng.random_range(-1..=1),
                rng.random_range(-1..=1),
            ];
            terms.push(FourierTerm {
                order,
                ij: [i, j],
                k,
                cos: a * rng.random_range(-1.0..1.0),
                sin: a * rng.random_range(-1.0..1.0),
            });
        }
    }
    // constant anisotropic shape operator keeps |L̊| away from zero
    terms.push(FourierTerm {
        order: 1,
        ij: [0, 0],
        k: [0, 0, 0],
        cos: 0.3,
        sin: 0.0,
    });
    terms.push(FourierTerm {
        order: 1,
        ij: [1, 1],
        k: [0, 0, 0],
        cos: -0.2,
        sin: 0.0,
    });
    GeometrySpec::torus(grid, 0.2, terms)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Number of parameters consumed by [`jet_point`].
pub const JET_PARAMS: usize = 46;

/// A boundary jet point from free parameters in `[-1, 1]`; the values need
/// not come from any metric.
pub fn jet_point(x: &[f64]) -> syamabe::collar_geometry::JetPoint {
    use nalgebra::Matrix3;
    let sym = |s: &[f64]| Matrix3::new(s[0], s[1], s[2], s[1], s[3], s[4], s[2], s[4], s[5]);
    let h = Matrix3::identity() + 0.2 * sym(&x[0..6]);
    syamabe::collar_geometry::JetPoint::assemble(
        h,
        sym(&x[6..12]),
        sym(&x[12..18]),
        sym(&x[18..24]),
        sym(&x[24..30]),
        sym(&x[30..36]),
        [[[0.0; 3]; 3]; 3],
        sym(&x[36..42]),
        x[42],
        x[43],
        x[44],
        x[45],
    )
}

/// Torus collar whose shape operator is the constant `diag(a, −a, 0)`.
pub fn constant_shape_torus(a: f64) -> GeometrySpec {
    let term = |ij: [usize; 2], cos: f64| FourierTerm {
        order: 1,
        ij,
        k: [0, 0, 0],
        cos,
        sin: 0.0,
    };
    GeometrySpec::torus(8, 0.2, vec![term([0, 0], -2.0 * a), term([1, 1], 2.0 * a)])
}
