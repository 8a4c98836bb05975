mod common;

use std::f64::consts::PI;

use common::random_torus;
use syamabe::collar_geometry::*;
use syamabe::expansion_engine::{energy_functional, Problem};
use syamabe::numeric::{geomspace, Real, DD};
use syamabe::radial_solver::{exact_hyperbolic_ball, solve_radial, RadialSolution};
use syamabe::renormalizer::*;

const PI2: f64 = PI * PI;

fn metric(spec: &GeometrySpec) -> CollarMetric {
    build_geometry(spec).expect("geometry builds")
}

fn warped_ball() -> GeometrySpec {
    GeometrySpec::warped_ball(1.0, [vec![0.2, 0.1], vec![-0.1], vec![0.05, -0.05]])
}

fn umbilic_ball() -> GeometrySpec {
    GeometrySpec::warped_ball(1.0, [vec![0.15], vec![0.25, -0.2, 0.1], vec![0.05, 0.2, -0.1]])
}

/// `Vol({r > ε})` of the hyperbolic unit ball from the antiderivative of
/// `16s³(1 − s²)⁻⁴`, in the variable `t = 2ε − ε²`.
fn ball_volume_above(eps: DD) -> DD {
    let t = DD::new(2.0) * eps - eps * eps;
    let pi2 = DD::pi() * DD::pi();
    DD::new(32.0) * pi2 * (DD::ONE / DD::new(12.0) + t.powi(-3) / DD::new(6.0) - t.powi(-2) / DD::new(4.0))
}

/// Composite Simpson rule; plenty for the smooth integrands away from the boundary.
fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn direct_volume(m: &CollarMetric, sol: &RadialSolution, eps: f64) -> f64 {
    let rm = m.radial().unwrap();
    let slice = 2.0 * PI2 * rm.components as f64;
    simpson(eps, rm.r_max, 20_000, |r| rm.jacobian(r) / sol.u_at(r).powi(4) * slice)
}

#[test]
fn ball_ladder_matches_the_antiderivative() {
    let m = metric(&GeometrySpec::ball(1.0));
    let sol = exact_hyperbolic_ball();
    let eps = [0.1, 0.01, 1e-3, 1e-4];
    let ladder = volume_ladder(&m, &sol, &eps).unwrap();
    for (e, v) in eps.iter().zip(&ladder.values) {
        let exact = ball_volume_above(DD::new(*e));
        assert!(((*v - exact) / exact).to_f64().abs() < 1e-20, "{e}");
    }
}

#[test]
fn ball_ladder_decreases() {
    let m = metric(&GeometrySpec::ball(1.0));
    let sol = solve_radial(&m, Problem::Yamabe).unwrap();
    let ladder = volume_ladder(&m, &sol, &default_epsilons()).unwrap();
    let mut pairs: Vec<(f64, f64)> = ladder.epsilons.iter().zip(&ladder.values).map(|(e, v)| (*e, v.to_f64())).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!(pairs.windows(2).all(|w| w[1].1 < w[0].1));
}

#[test]
fn ladder_agrees_with_direct_quadrature_at_half_depth() {
    for spec in [GeometrySpec::ball(1.0), warped_ball(), GeometrySpec::product(1.0, 1.0)] {
        let m = metric(&spec);
        let sol = solve_radial(&m, Problem::Yamabe).unwrap();
        let e = m.collar_depth() / 2.0;
        let ladder = volume_ladder(&m, &sol, &[e]).unwrap();
        let direct = direct_volume(&m, &sol, e);
        let v = ladder.values[0].to_f64();
        assert!((v - direct).abs() < 1e-10 * direct.abs().max(1.0), "{v} vs {direct}");
    }
}

#[test]
fn synthetic_coefficients_are_recovered() {
    let truth = [2.0, -1.0, 0.5, 0.25, 7.0];
    let eps = default_epsilons();
    let values = eps
        .iter()
        .map(|&e| {
            let e = DD::new(e);
            Basis::Volume
                .principal()
                .iter()
                .zip(truth)
                .fold(DD::ZERO, |acc, (t, c)| acc + t.eval(e) * DD::new(c))
        })
        .collect();
    let fit = fit_finite_part(&Ladder { epsilons: eps, values }, Basis::Volume).unwrap();
    for (c, t) in fit.coefficients.iter().zip(truth) {
        assert!((c - t).abs() < 1e-12, "{c} vs {t}");
    }
    assert!(fit.residual_accepted() && fit.is_stable());
    assert_eq!(fit.terms[..5], Basis::Volume.principal()[..]);
}

#[test]
fn solved_ball_renormalizes_to_two_pi_squared() {
    let m = metric(&GeometrySpec::ball(1.0));
    for k in [Problem::Yamabe, Problem::Sigma2] {
        let sol = solve_radial(&m, k).unwrap();
        let rv = renormalized_volume(&m, &sol).unwrap();
        let expected = [2.0 * PI2 / 3.0, -PI2, -PI2];
        for (c, e) in rv.c.iter().zip(expected) {
            assert!((c - e).abs() < 1e-6, "{k:?}: {c} vs {e}");
        }
        assert!(rv.energy.abs() < 1e-6);
        assert!((rv.volume - 2.0 * PI2).abs() < 1e-6, "{k:?}: {}", rv.volume);
        assert!(rv.fit.residual_accepted() && rv.fit.is_stable());
    }
}

#[test]
fn ball_has_no_einstein_integral() {
    let m = metric(&GeometrySpec::ball(1.0));
    let sol = solve_radial(&m, Problem::Yamabe).unwrap();
    let e = fp_einstein(&m, &sol).unwrap();
    assert!(e.a.abs() < 1e-10 && e.f.abs() < 1e-10 && e.fp.abs() < 1e-10, "{e:?}");
}

#[test]
fn einstein_fit_is_refused_for_sigma2() {
    let m = metric(&GeometrySpec::ball(1.0));
    let sol = solve_radial(&m, Problem::Sigma2).unwrap();
    assert!(matches!(fp_einstein(&m, &sol), Err(RenormError::Unsupported(_))));
}

#[test]
fn product_has_no_log_term_and_a_convergent_einstein_integral() {
    let m = metric(&GeometrySpec::product(1.0, 1.0));
    let sol = solve_radial(&m, Problem::Yamabe).unwrap();
    let rv = renormalized_volume(&m, &sol).unwrap();
    assert!(rv.energy.abs() < 1e-8 && rv.analytic.energy.abs() < 1e-12);
    let e = fp_einstein(&m, &sol).unwrap();
    assert!(e.a.abs() < 1e-8 && e.f.abs() < 1e-8, "{e:?}");
    let rm = m.radial().unwrap();
    let slice = 2.0 * PI2 * rm.components as f64;
    let direct = simpson(1e-9, rm.r_max, 20_000, |r| einstein_norm(&m, &sol, r).unwrap().powi(2) * slice);
    assert!((e.fp - direct).abs() < 1e-6 * direct, "{} vs {direct}", e.fp);
}

/// `4∫|L̊|² dv_h` of a warped ball, from the warp coefficients alone.
fn traceless_shape_energy(c: &[Vec<f64>; 3]) -> f64 {
    let a: Vec<f64> = c.iter().map(|ci| 1.0 + ci.iter().sum::<f64>()).collect();
    let da: Vec<f64> = c
        .iter()
        .map(|ci| 1.0 + ci.iter().enumerate().map(|(m, x)| x * (2 * m + 3) as f64).sum::<f64>())
        .collect();
    let kappa: Vec<f64> = (0..3).map(|i| da[i] / a[i]).collect();
    let mean = kappa.iter().sum::<f64>() / 3.0;
    let sq: f64 = kappa.iter().map(|k| (k - mean).powi(2)).sum();
    4.0 * sq * a.iter().product::<f64>() * 2.0 * PI2
}

#[test]
fn warped_ball_einstein_divergence_is_the_shape_energy() {
    let spec = warped_ball();
    let m = metric(&spec);
    let sol = solve_radial(&m, Problem::Yamabe).unwrap();
    let e = fp_einstein(&m, &sol).unwrap();
    let GeometryKind::WarpedRadial(w) = &spec.geometry else { unreachable!() };
    let expected = traceless_shape_energy(&w.coefficients);
    assert!((e.a - expected).abs() < 1e-5 * expected, "{} vs {expected}", e.a);
    assert!(e.fit.is_stable());
}

#[test]
fn torus_einstein_divergence_is_the_shape_energy() {
    let m = metric(&random_torus(11, 16));
    let weights = m.boundary_measure();
    let expected: f64 = (0..m.boundary_points())
        .map(|p| {
            let h = m.h(p);
            let hinv = h.try_inverse().unwrap();
            let l = -0.5 * m.h_jets(p)[0];
            let mean = (hinv * l).trace() / 3.0;
            let lo = l - mean * h;
            let s = hinv * lo;
            4.0 * (s * s).trace() * weights[p]
        })
        .sum();
    let e = collar_einstein_fit(&m).unwrap();
    assert!((e.a - expected).abs() < 1e-5 * expected, "{} vs {expected}", e.a);
}

#[test]
fn log_coefficient_does_not_depend_on_the_exhaustion() {
    for (spec, k) in [
        (warped_ball(), Problem::Yamabe),
        (warped_ball(), Problem::Sigma2),
        (umbilic_ball(), Problem::Yamabe),
    ] {
        let m = metric(&spec);
        let sol = solve_radial(&m, k).unwrap();
        let by_r = renormalized_volume(&m, &sol).unwrap();
        let by_u = volume_fit_by_u(&m, &sol).unwrap();
        assert!((by_r.energy - by_u.log_coefficient()).abs() < 1e-6, "{k:?}");
        assert!((by_r.energy - by_r.analytic.energy).abs() < 1e-8 * by_r.analytic.energy.abs().max(1.0));
    }
}

#[test]
fn sigma2_volume_has_no_log_term() {
    for spec in [warped_ball(), umbilic_ball(), GeometrySpec::ball(1.0)] {
        let m = metric(&spec);
        let sol = solve_radial(&m, Problem::Sigma2).unwrap();
        assert!(renormalized_volume(&m, &sol).unwrap().energy.abs() < 1e-8);
        assert!(volume_fit_by_u(&m, &sol).unwrap().log_coefficient().abs() < 1e-8);
        assert!(energy_functional(&m, Problem::Sigma2).unwrap().energy.abs() < 1e-12);
    }
}

#[test]
fn constant_rescaling_shifts_by_the_log_coefficient() {
    let m = metric(&warped_ball());
    let sol = solve_radial(&m, Problem::Yamabe).unwrap();
    let base = renormalized_volume(&m, &sol).unwrap();
    assert!(base.energy.abs() > 1.0);
    for c in [0.3, -0.3] {
        let scaled = renormalized_volume_rescaled(&m, &sol, &RadialOmega::constant(c)).unwrap();
        let shift = scaled.volume - base.volume;
        assert!((shift - base.energy * c).abs() < 1e-6, "{c}: {shift} vs {}", base.energy * c);
    }
}

#[test]
fn collar_fits_see_the_same_divergences() {
    let m = metric(&warped_ball());
    let sol = solve_radial(&m, Problem::Yamabe).unwrap();
    let global = renormalized_volume(&m, &sol).unwrap();
    let collar = collar_volume_fit(&m, Problem::Yamabe, &Exhaustion::Distance).unwrap();
    for (a, b) in global.c.iter().zip(collar.divergent()) {
        assert!((a - b).abs() < 1e-6 * a.abs().max(1.0));
    }
    assert!((global.energy - collar.log_coefficient()).abs() < 1e-6);
}

#[test]
fn einstein_norm_stays_bounded_only_on_umbilic_boundaries() {
    let eps = geomspace(1e-4, 1e-2, 12);
    let m = metric(&umbilic_ball());
    let sol = solve_radial(&m, Problem::Yamabe).unwrap();
    assert!(einstein_growth(&m, &sol, &eps).unwrap().slope.abs() < 0.05);
    let m = metric(&warped_ball());
    let sol = solve_radial(&m, Problem::Yamabe).unwrap();
    assert!(einstein_growth(&m, &sol, &eps).unwrap().slope > 0.5);
}

#[test]
fn rank_deficient_ladders_are_ill_conditioned() {
    let epsilons: Vec<f64> = (0..26).map(|i| if i % 2 == 0 { 1e-4 } else { 1e-2 }).collect();
    let values = epsilons.iter().map(|&e| DD::new(1.0 / e)).collect();
    let err = fit_finite_part(&Ladder { epsilons, values }, Basis::Volume).unwrap_err();
    assert!(matches!(err, RenormError::IllConditioned { .. }), "{err}");
}

#[test]
fn short_or_narrow_ladders_are_rejected() {
    let values = |eps: &[f64]| eps.iter().map(|&e| DD::new(e)).collect::<Vec<_>>();
    let few = geomspace(1e-4, 1e-1, 10);
    let narrow = geomspace(1e-3, 1e-2, 40);
    for eps in [few, narrow] {
        let ladder = Ladder {
            values: values(&eps),
            epsilons: eps,
        };
        assert!(matches!(fit_finite_part(&ladder, Basis::Volume), Err(RenormError::BadLadder(_))));
    }
    let ladder = Ladder {
        epsilons: default_epsilons(),
        values: vec![DD::ONE; 3],
    };
    assert!(matches!(fit_finite_part(&ladder, Basis::Volume), Err(RenormError::BadLadder(_))));
}

#[test]
fn cuts_beyond_the_centre_are_rejected() {
    let m = metric(&GeometrySpec::ball(1.0));
    let sol = exact_hyperbolic_ball();
    assert!(matches!(volume_ladder(&m, &sol, &[1.5]), Err(RenormError::BadLadder(_))));
    let torus = metric(&random_torus(1, 6));
    assert!(matches!(volume_ladder(&torus, &sol, &[0.1]), Err(RenormError::Unsupported(_))));
}

#[test]
fn csv_output_is_deterministic() {
    let m = metric(&warped_ball());
    let run = || {
        let sol = solve_radial(&m, Problem::Yamabe).unwrap();
        let ladder = volume_ladder(&m, &sol, &default_epsilons()).unwrap();
        let fit = fit_finite_part(&ladder, Basis::Volume).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        ladder.write_csv(&mut a).unwrap();
        fit.write_csv(&mut b).unwrap();
        (a, b, ladder)
    };
    let (a1, b1, ladder) = run();
    let (a2, b2, _) = run();
    assert_eq!(a1, a2);
    assert_eq!(b1, b2);
    let text = String::from_utf8(a1).unwrap();
    assert!(text.starts_with("epsilon,value,value_lo\n"));
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row[0], ladder.epsilons[0]);
    assert_eq!(DD::new(row[1]) + DD::new(row[2]), ladder.values[0]);
    assert!(String::from_utf8(b1).unwrap().starts_with("term,coefficient\neps^-3,"));
}
