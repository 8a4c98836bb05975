mod common;

use common::{constant_shape_torus, jet_point, random_torus, JET_PARAMS};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;
use syamabe::collar_geometry::*;
use syamabe::expansion_engine::*;

fn geometry(spec: &GeometrySpec) -> (CollarMetric, BoundaryJet) {
    let m = build_geometry(spec).expect("geometry builds");
    let j = boundary_jet(&m).expect("jet");
    (m, j)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

const BOTH: [Problem; 2] = [Problem::Yamabe, Problem::Sigma2];

#[test]
fn unit_ball_coefficients() {
    let (_, j) = geometry(&GeometrySpec::ball(1.0));
    for k in BOTH {
        let prof = integrand_ladder(&j, k);
        assert!(prof.umbilic);
        let c = &prof.points[0];
        assert!(max_diff(&c.f, &[-0.5, 0.0, 0.0]) < 1e-12, "{:?}", c.f);
        assert!(max_diff(&c.v, &[1.0, -1.0, -0.5, 0.0]) < 1e-12, "{:?}", c.v);
        assert!(max_diff(&c.d, &[-3.0, 3.0, -1.0]) < 1e-12);
        assert!(max_diff(&c.i, &[1.5, 0.0, -0.5]) < 1e-12, "{:?}", c.i);
        assert!(max_diff(&c.b, &[1.0, -1.5, -1.5, 3.0]) < 1e-12, "{:?}", c.b);
        assert!((c.s - 4.0).abs() < 1e-12);
        assert!((c.bterm + 2.0).abs() < 1e-12);
        assert!(c.div_remainder.abs() < 1e-12);
    }
}

#[test]
fn product_coefficients() {
    // u'' u − 2u'² + u² + 2 = 0 order by order gives f = (0, 1/6, 0)
    let (_, j) = geometry(&GeometrySpec::product(1.0, 1.0));
    let (f0, f1, f2) = yamabe_expansion(&j.points[0], 3).unwrap();
    assert!(f0.abs() < 1e-14 && (f1 - 1.0 / 6.0).abs() < 1e-14 && f2.unwrap().abs() < 1e-13);
    for k in BOTH {
        let prof = integrand_ladder(&j, k);
        assert!(prof.umbilic);
        assert!(prof.points[0].bterm.abs() < 1e-13);
    }
}

#[test]
fn flat_collar_coefficients() {
    let (_, j) = geometry(&GeometrySpec::catalog(CatalogEntry::FlatCollar));
    for k in BOTH {
        for c in &integrand_ladder(&j, k).points {
            assert!(c.f.iter().all(|x| x.abs() < 1e-15));
        }
    }
}

#[test]
fn poincare_einstein_boundary_term_vanishes() {
    let (_, j) = geometry(&GeometrySpec::catalog(CatalogEntry::PoincareBallGeodesic));
    for k in BOTH {
        let c = &integrand_ladder(&j, k).points[0];
        assert!(c.bterm.abs() < 1e-12, "{}", c.bterm);
        // u = r exactly
        assert!(c.f.iter().all(|x| x.abs() < 1e-12), "{:?}", c.f);
    }
}

#[test]
fn general_dimension_leading_coefficients() {
    let (_, j) = geometry(&GeometrySpec::ball(1.0));
    let p = &j.points[0];
    let (f0, _, f2) = yamabe_expansion(p, 5).unwrap();
    assert_eq!(f0, -0.3);
    assert!(f2.is_none());
    assert!(matches!(yamabe_expansion(p, 1), Err(ExpansionError::DimensionUnsupported { n: 1 })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn composition_matches_printed_ladders(x in prop::collection::vec(-1.0f64..1.0, JET_PARAMS)) {
        let p = jet_point(&x);
        for k in BOTH {
            let composed = compose(integrand_coefficients(&p, k), determinant_coefficients(&p));
            let printed = ladder_closed_form(&p, k);
            for j in 0..4 {
                prop_assert!((composed[j] - printed[j]).abs() < 1e-12, "k {:?} j {} {} {}", k, j, composed[j], printed[j]);
            }
        }
    }

    #[test]
    fn boundary_integrand_expansion(x in prop::collection::vec(-1.0f64..1.0, JET_PARAMS)) {
        let p = jet_point(&x);
        for k in BOTH {
            let c = point_coefficients(&p, k, false);
            let lhs = 12.0 * (c.s - 2.0 * c.b[3]);
            prop_assert!((lhs - sb_expanded(&p, k)).abs() < 1e-11, "{:?}: {} vs {}", k, lhs, sb_expanded(&p, k));
        }
    }

    #[test]
    fn first_coefficients_differ_by_invariant(x in prop::collection::vec(-1.0f64..1.0, JET_PARAMS)) {
        let p = jet_point(&x);
        let a = expansion(&p, Problem::Yamabe);
        let b = expansion(&p, Problem::Sigma2);
        prop_assert_eq!(a[0], b[0]);
        prop_assert!((b[1] - a[1] - p.norm_lring2 / 18.0).abs() < 1e-14);
        let va = volume_coefficients(&p, Problem::Yamabe);
        let vb = volume_coefficients(&p, Problem::Sigma2);
        prop_assert!((va[2] - vb[2] - 2.0 / 9.0 * p.norm_lring2).abs() < 1e-14);
        prop_assert_eq!(va[0], 1.0);
    }

    #[test]
    fn umbilic_jets_share_boundary_term(x in prop::collection::vec(-1.0f64..1.0, JET_PARAMS)) {
        let p = jet_point(&x);
        prop_assert_eq!(bterm(&p, Problem::Yamabe, true), bterm(&p, Problem::Sigma2, true));
    }
}

#[test]
fn short_boundary_term_is_the_umbilic_limit() {
    // a genuinely umbilic random jet: L proportional to h
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut x: Vec<f64> = (0..JET_PARAMS).map(|_| rng.random_range(-1.0..1.0)).collect();
    let p0 = jet_point(&x);
    let h1 = -0.7 * p0.h;
    x[6..12].copy_from_slice(&[h1[(0, 0)], h1[(0, 1)], h1[(0, 2)], h1[(1, 1)], h1[(1, 2)], h1[(2, 2)]]);
    let p = jet_point(&x);
    assert!(p.norm_lring2 < 1e-28);
    for k in BOTH {
        assert!((bterm(&p, k, true) - bterm(&p, k, false)).abs() < 1e-13);
    }
}

#[test]
fn boundary_term_differs_by_divergence() {
    for seed in [1, 2, 3] {
        let (_, j) = geometry(&random_torus(seed, 16));
        assert!(j.max_abs(|p| p.bianchi_residual()) < 1e-12);
        for k in BOTH {
            let prof = integrand_ladder(&j, k);
            assert!(!prof.umbilic);
            let worst = prof.points.iter().map(|c| (c.div_remainder - c.div_terms).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-11, "seed {seed} {k:?}: {worst:e}");
            // the divergence integrates to zero over the closed boundary
            assert!(prof.integrate(|c| c.div_terms).abs() < 1e-10);
        }
    }
}

#[test]
fn energies_on_the_ball() {
    let (m, _) = geometry(&GeometrySpec::ball(1.0));
    for k in BOTH {
        let e = energy_functional(&m, k).unwrap();
        let pi2 = PI * PI;
        assert!(max_diff(&e.c, &[2.0 * pi2 / 3.0, -pi2, -pi2]) < 1e-12, "{e:?}");
        assert!(e.energy.abs() < 1e-14);
    }
}

#[test]
fn energies_on_random_tori() {
    for seed in [1, 2, 3] {
        let (m, j) = geometry(&random_torus(seed, 16));
        let e1 = energy_functional(&m, Problem::Yamabe).unwrap();
        let direct = j.integrate(|p| 2.0 / 3.0 * (p.tr_lring3 + p.lring_w()));
        assert!((e1.energy - direct).abs() < 1e-10, "{} {}", e1.energy, direct);
        assert!(direct.abs() > 1e-3);
        let e2 = energy_functional(&m, Problem::Sigma2).unwrap();
        assert!(e2.energy.abs() < 1e-10);
        let lead = einstein_leading(&j, 3).unwrap();
        assert!((lead.f.unwrap() - 12.0 * e1.energy).abs() < 1e-9);
    }
}

#[test]
fn umbilic_energy_vanishes() {
    let (m, _) = geometry(&GeometrySpec::product(1.0, 1.0));
    assert!(energy_functional(&m, Problem::Yamabe).unwrap().energy.abs() < 1e-14);
}

#[test]
fn einstein_leading_terms() {
    let (_, j) = geometry(&GeometrySpec::ball(1.0));
    let lead = einstein_leading(&j, 3).unwrap();
    assert!(lead.leading[0].abs().max() < 1e-14);
    assert_eq!((lead.a, lead.f), (Some(0.0), Some(0.0)));

    let a = 0.15;
    let (_, j) = geometry(&constant_shape_torus(a));
    let lead = einstein_leading(&j, 3).unwrap();
    let vol = 8.0 * PI.powi(3);
    assert!((lead.a.unwrap() - 8.0 * a * a * vol).abs() < 1e-10);
    assert!((lead.leading[0][(0, 0)] + 2.0 * a).abs() < 1e-14);
    let lead5 = einstein_leading(&j, 5).unwrap();
    assert!((lead5.leading[0][(1, 1)] - 4.0 * a).abs() < 1e-14);
    assert!(lead5.a.is_none());
}

#[test]
fn divergent_terms_cancel() {
    let mut cases = vec![
        ("ball", GeometrySpec::ball(1.0), 1e-10),
        ("product", GeometrySpec::product(1.0, 1.0), 1e-10),
        ("warped ball", GeometrySpec::warped_ball(1.0, [vec![0.2], vec![-0.1], vec![0.05]]), 1e-10),
    ];
    for seed in [1, 2, 3] {
        cases.push(("torus", random_torus(seed, 16), 1e-6));
    }
    for (name, spec, tol) in cases {
        let m = build_geometry(&spec).unwrap();
        for k in BOTH {
            let c = divergence_cancellation(&m, k).unwrap();
            assert!(c.max_abs() < tol, "{name} {k:?}: {:?}", c.residuals);
        }
    }
}

#[test]
fn jet_energy_is_conformally_invariant() {
    let (m, j) = geometry(&random_torus(4, 16));
    let sp = m.torus().unwrap().spectral.clone();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let c: Vec<f64> = (0..8).map(|_| 0.2 * rng.random_range(-1.0..1.0)).collect();
    let fields: [Vec<f64>; 4] = std::array::from_fn(|m| {
        (0..sp.len())
            .map(|p| {
                let x = sp.point(p);
                c[2 * m] * x[0].cos() + c[2 * m + 1] * (x[1] + x[2]).sin() + 0.1
            })
            .collect()
    });
    let hat = jet_conformal_transform(&j, &ConformalFactorJet::from_grid(&sp, fields).unwrap()).unwrap();
    let e = energy_from_profile(&ExpansionProfile::new(&j, Problem::Yamabe)).energy;
    let eh = energy_from_profile(&ExpansionProfile::new(&hat, Problem::Yamabe)).energy;
    assert!((e - eh).abs() < 1e-8, "{e} {eh}");
    assert!(e.abs() > 1e-3);
}

#[test]
fn profile_csv_is_deterministic() {
    let (_, j) = geometry(&random_torus(5, 16));
    let prof = integrand_ladder(&j, Problem::Sigma2);
    let mut a = Vec::new();
    let mut b = Vec::new();
    prof.write_csv(&mut a).unwrap();
    integrand_ladder(&j, Problem::Sigma2).write_csv(&mut b).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 16 * 16 * 16);
    let row: Vec<&str> = text.lines().nth(7).unwrap().split(',').collect();
    assert_eq!(row.len(), ExpansionProfile::CSV_HEADER.len());
    // round-trip floats
    let f1: f64 = row[3].parse().unwrap();
    assert_eq!(f1, prof.points[6].f[1]);
}

#[test]
fn indicial_roots_are_integers() {
    for k in 1..=4 {
        let r = indicial_roots(k, 3).unwrap();
        assert_eq!(r.gamma_plus, (4, 1));
        assert_eq!(r.gamma_minus, (-1, 1));
        assert_eq!(r.u_roots, [0, 5]);
    }
    let r = indicial_roots(2, 3).unwrap();
    assert_eq!((r.c, r.beta), ((3, 2), (3, 2)));
    for n in 1..=10 {
        for k in 1..=n + 1 {
            let r = indicial_roots(k, n).unwrap();
            assert_eq!(r.u_roots, [0, n as i128 + 2]);
        }
    }
    assert!(matches!(indicial_roots(0, 3), Err(ExpansionError::ParameterOutOfRange { .. })));
    assert!(matches!(indicial_roots(5, 3), Err(ExpansionError::ParameterOutOfRange { .. })));
}

#[test]
fn ric_identity_on_slices() {
    let (m, _) = geometry(&random_torus(6, 16));
    for r in [0.0, 0.05, 0.15] {
        let s = curvature_slice(&m, r).unwrap();
        let id = sigma2_ric_identity(&s);
        assert!(id.ric_form < 1e-10 && id.scalar_form < 1e-10, "{id:?}");
    }
    // hyperbolic: −P = g/2 and −Ric = 3g
    let id: [[f64; 4]; 4] = std::array::from_fn(|a| std::array::from_fn(|b| (a == b) as u8 as f64));
    let mut riem = [[[[0.0; 4]; 4]; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    riem[a][b][c][d] = -(id[d][b] * id[c][a] - id[c][b] * id[d][a]);
                }
            }
        }
    }
    let sp = SlicePoint::from_riemann(id, id, riem);
    let neg = |t: &[[f64; 4]; 4]| nalgebra::Matrix4::from_fn(|a, b| -t[a][b]);
    let s2 = |m: nalgebra::Matrix4<f64>| 0.5 * (m.trace().powi(2) - (m * m).trace());
    assert!((s2(neg(&sp.schouten)) - 1.5).abs() < 1e-14);
    assert!((s2(neg(&sp.ricci)) - 54.0).abs() < 1e-12);
    let slice = CurvatureSlice { r: 0.0, points: vec![sp] };
    assert!(sigma2_ric_identity(&slice).ric_form < 1e-12);
}
