use rand::{Rng, SeedableRng};
use syamabe::collar_geometry::*;
use syamabe::expansion_engine::{expansion, Problem};
use syamabe::radial_solver::*;

fn metric(spec: &GeometrySpec) -> CollarMetric {
    build_geometry(spec).expect("geometry builds")
}

fn warped_ball() -> GeometrySpec {
    GeometrySpec::warped_ball(1.0, [vec![0.2, 0.1], vec![-0.1], vec![0.05, -0.05]])
}

fn umbilic_ball() -> GeometrySpec {
    GeometrySpec::warped_ball(1.0, [vec![0.15], vec![0.25, -0.2, 0.1], vec![0.05, 0.2, -0.1]])
}

fn warped_interval() -> GeometrySpec {
    GeometrySpec::warped_interval(1.0, [1.0, 1.2, 0.9], [vec![0.1], vec![], vec![-0.05]])
}

const BOTH: [Problem; 2] = [Problem::Yamabe, Problem::Sigma2];

#[test]
fn exact_ball_closed_form() {
    let sol = exact_hyperbolic_ball();
    assert!((sol.u_at(0.5) - 0.375).abs() < 1e-15);
    assert!(sol.residual_norm < 1e-10, "{}", sol.residual_norm);
    for (r, u) in sol.r.iter().zip(&sol.u) {
        assert!((u - (r - r * r / 2.0)).abs() < 1e-15);
    }
}

#[test]
fn exact_ball_solves_both_problems() {
    let profile = Profile::Ball { radius: 1.0 };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let r: f64 = rng.random_range(0.01..0.99);
        for k in BOTH {
            assert!(equation_residual(&profile, k, r, [-0.5, 0.0, 0.0]).abs() < 1e-12);
        }
        let [s1, s2] = cone(&profile, r, [-0.5, 0.0, 0.0]);
        assert!((s1 - 2.0).abs() < 1e-12 && (s2 - 1.5).abs() < 1e-12);
    }
}

/// Scalar curvature of `u⁻²δ` on ℝ⁴ for radial `u(s)`, from the conformal
/// change of the flat metric.
fn scalar_curvature_flat(u: f64, du: f64, ddu: f64, s: f64) -> f64 {
    let lap = ddu + 3.0 * du / s;
    6.0 * u * lap - 12.0 * du * du
}

#[test]
fn exact_ball_has_scalar_curvature_minus_twelve() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let s: f64 = rng.random_range(0.05..0.95);
        let u = 0.5 * (1.0 - s * s);
        assert!((scalar_curvature_flat(u, -s, -1.0, s) + 12.0).abs() < 1e-12);
    }
}

#[test]
fn solver_recovers_the_ball() {
    let m = metric(&GeometrySpec::ball(1.0));
    for k in BOTH {
        let opts = SolveOptions {
            initial_phi: Some(vec![-0.3; 129]),
            ..SolveOptions::default()
        };
        let sol = solve_radial_with(&m, k, &opts).unwrap();
        for (r, u) in sol.r.iter().zip(&sol.u) {
            assert!((u - (r - r * r / 2.0)).abs() < 1e-10, "{k:?}");
        }
        assert!(sol.residual_norm < 1e-9);
    }
}

#[test]
fn product_solution_is_symmetric_and_matches_the_expansion() {
    let m = metric(&GeometrySpec::product(1.0, 1.0));
    let sol = solve_radial(&m, Problem::Yamabe).unwrap();
    let n = sol.grid.len() - 1;
    assert!(sol.du[n].abs() < 1e-12);
    let f = sol.boundary_coefficients();
    assert!(f[0].abs() < 1e-7 && (f[1] - 1.0 / 6.0).abs() < 1e-7, "{f:?}");
    assert!(sol.residual_norm < 1e-9);
    assert!(sol.u.iter().skip(1).all(|&u| u > 0.0));
}

#[test]
fn boundary_coefficients_match_the_expansion() {
    for (spec, ks) in [
        (warped_ball(), &BOTH[..]),
        (umbilic_ball(), &BOTH[..]),
        (warped_interval(), &BOTH[..1]),
    ] {
        let m = metric(&spec);
        let jet = boundary_jet(&m).unwrap();
        for &k in ks {
            let sol = solve_radial(&m, k).unwrap();
            let formal = expansion(&jet.points[0], k);
            let f = sol.boundary_coefficients();
            for i in 0..3 {
                assert!((f[i] - formal[i]).abs() < 1e-6, "{k:?} f{i}: {} vs {}", f[i], formal[i]);
            }
            assert!(sol.residual_norm < 1e-9, "{k:?}: {}", sol.residual_norm);
            assert!(sol.off_grid_residual(&m.radial().unwrap().profile) < 1e-8);
        }
    }
}

#[test]
fn refinement_changes_little() {
    for spec in [warped_ball(), GeometrySpec::product(1.0, 1.0)] {
        let m = metric(&spec);
        let coarse = solve_radial_with(&m, Problem::Yamabe, &SolveOptions { degree: 96, ..Default::default() }).unwrap();
        let fine = solve_radial_with(&m, Problem::Yamabe, &SolveOptions { degree: 128, ..Default::default() }).unwrap();
        let diff = fine
            .r
            .iter()
            .zip(&fine.u)
            .map(|(&r, &u)| (coarse.u_at(r) - u).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff:e}");
    }
}

#[test]
fn perturbed_starts_return_the_same_solution() {
    for spec in [warped_ball(), GeometrySpec::product(1.0, 1.0)] {
        let m = metric(&spec);
        let base = solve_radial(&m, Problem::Yamabe).unwrap();
        for scale in [0.8, 1.2] {
            let opts = SolveOptions {
                initial_phi: Some(base.phi.iter().map(|p| p * scale + 0.2 * (scale - 1.0)).collect()),
                ..Default::default()
            };
            let other = solve_radial_with(&m, Problem::Yamabe, &opts).unwrap();
            let diff = base.u.iter().zip(&other.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-9, "{diff:e}");
        }
    }
}

#[test]
fn sigma2_solutions_stay_admissible() {
    for spec in [warped_ball(), umbilic_ball()] {
        let m = metric(&spec);
        let sol = solve_radial(&m, Problem::Sigma2).unwrap();
        let d = diagnostics(&m, &sol).unwrap();
        assert!(d.min_cone[0] > 0.0 && d.min_cone[1] > 0.0, "{d:?}");
    }
}

#[test]
fn problems_agree_only_on_the_einstein_ball() {
    let ball = metric(&GeometrySpec::ball(1.0));
    let a = solve_radial(&ball, Problem::Yamabe).unwrap();
    let b = solve_radial(&ball, Problem::Sigma2).unwrap();
    assert!(a.u.iter().zip(&b.u).all(|(x, y)| (x - y).abs() < 1e-12));
    assert!(diagnostics(&ball, &a).unwrap().einstein_defect < 1e-10);
    let m = metric(&umbilic_ball());
    assert!(boundary_jet(&m).unwrap().is_umbilic());
    let a = solve_radial(&m, Problem::Yamabe).unwrap();
    let b = solve_radial(&m, Problem::Sigma2).unwrap();
    let diff = a.u.iter().zip(&b.u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff > 1e-6, "{diff:e}");
    assert!(diagnostics(&m, &a).unwrap().einstein_defect > 1e-4);
}

#[test]
fn sigma2_has_no_symmetric_solution_on_the_round_product() {
    let m = metric(&GeometrySpec::product(1.0, 1.0));
    assert!(solve_radial(&m, Problem::Sigma2).is_err());
}

#[test]
fn collars_without_interior_are_rejected() {
    let m = metric(&GeometrySpec::catalog(CatalogEntry::PoincareBallGeodesic));
    assert!(matches!(solve_radial(&m, Problem::Yamabe), Err(SolverError::NotRadial(_))));
    let m = metric(&GeometrySpec::catalog(CatalogEntry::FlatCollar));
    assert!(matches!(solve_radial(&m, Problem::Yamabe), Err(SolverError::NotRadial(_))));
}

#[test]
fn csv_is_deterministic() {
    let m = metric(&warped_ball());
    let write = || {
        let sol = solve_radial(&m, Problem::Yamabe).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        buf
    };
    let a = write();
    assert_eq!(a, write());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("node,r,u,du,residual\n"));
    let row = text.lines().nth(10).unwrap();
    let u: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    let sol = solve_radial(&m, Problem::Yamabe).unwrap();
    assert_eq!(u, sol.u[9]);
}
