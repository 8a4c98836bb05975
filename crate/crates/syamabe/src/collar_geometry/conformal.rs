use nalgebra::{Matrix3, Vector3};

use crate::numeric::{Dual, GaussLegendre, Real, DD};

use super::jet::{contract, grid_div_tensor, grid_divergence, grid_laplacian, BoundaryJet, Chart, JetPoint, Tensor3};
use super::torus::{Spectral3, SYM};
use super::{CollarMetric, GeometryError, Model};

/// Radial conformal factor `ω(r) = Σ_m c_m (r − centre)^{2m}`.
///
/// Even in the distance to the centre, hence smooth on the ball and
/// symmetric on the interval.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialOmega {
    pub coefficients: Vec<f64>,
    pub centre: f64,
}

impl RadialOmega {
    pub fn constant(c: f64) -> Self {
        RadialOmega {
            coefficients: vec![c],
            centre: 0.0,
        }
    }

    /// A factor adapted to the metric's centre or mid-slice.
    pub fn for_metric(metric: &CollarMetric, coefficients: Vec<f64>) -> Result<Self, GeometryError> {
        let m = metric
            .radial()
            .filter(|m| m.topology.is_some())
            .ok_or_else(|| GeometryError::UnsupportedGeometry("radial factors need a radial metric".into()))?;
        Ok(RadialOmega {
            coefficients,
            centre: m.r_max,
        })
    }

    pub fn eval<T: Real>(&self, r: T) -> T {
        let q = (r - T::from_f64(self.centre)) * (r - T::from_f64(self.centre));
        let mut acc = T::zero();
        for &c in self.coefficients.iter().rev() {
            acc = acc * q + T::from_f64(c);
        }
        acc
    }

    /// `∂_r^j ω` at `r` for `j = 0..=3`.
    pub fn jet(&self, r: f64) -> [f64; 4] {
        let x = Dual::new(
            Dual::new(Dual::variable(r), Dual::constant(1.0)),
            Dual::new(Dual::constant(1.0), Dual::constant(0.0)),
        );
        let w = self.eval(x);
        [w.v.v.v, w.v.v.d, w.v.d.d, w.d.d.d]
    }

    pub fn scaled(&self, t: f64) -> Self {
        RadialOmega {
            coefficients: self.coefficients.iter().map(|c| c * t).collect(),
            centre: self.centre,
        }
    }

    /// Largest `|ω|` over `[0, r_max]`, by sampling.
    pub fn sup_norm(&self, r_max: f64) -> f64 {
        (0..=2000)
            .map(|i| self.eval(r_max * i as f64 / 2000.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Normal jet of a conformal factor along the `ḡ` collar coordinate, with
/// tangential derivatives on the boundary chart.
#[derive(Clone, Debug)]
pub struct ConformalFactorJet {
    pub omega0: Vec<f64>,
    pub omega_nu: Vec<f64>,
    pub omega_nunu: Vec<f64>,
    pub omega_nu3: Vec<f64>,
    /// Coordinate gradient and Hessian of `ω|_{∂M}`.
    pub grad: Vec<Vector3<f64>>,
    pub hess: Vec<Matrix3<f64>>,
    /// Coordinate gradient and Hessian of `∂_ν ω|_{∂M}`.
    pub grad_nu: Vec<Vector3<f64>>,
    pub hess_nu: Vec<Matrix3<f64>>,
    pub radial: Option<RadialOmega>,
}

impl ConformalFactorJet {
    pub fn zero(points: usize) -> Self {
        Self::homogeneous(points, [0.0; 4], None)
    }

    fn homogeneous(points: usize, w: [f64; 4], radial: Option<RadialOmega>) -> Self {
        ConformalFactorJet {
            omega0: vec![w[0]; points],
            omega_nu: vec![w[1]; points],
            omega_nunu: vec![w[2]; points],
            omega_nu3: vec![w[3]; points],
            grad: vec![Vector3::zeros(); points],
            hess: vec![Matrix3::zeros(); points],
            grad_nu: vec![Vector3::zeros(); points],
            hess_nu: vec![Matrix3::zeros(); points],
            radial,
        }
    }

    pub fn constant(points: usize, c: f64) -> Self {
        Self::homogeneous(points, [c, 0.0, 0.0, 0.0], Some(RadialOmega::constant(c)))
    }

    pub fn radial(metric: &CollarMetric, omega: &RadialOmega) -> Self {
        Self::homogeneous(metric.boundary_points(), omega.jet(0.0), Some(omega.clone()))
    }

    /// From grid values of `∂_r^j ω` at `r = 0`, `j = 0..=3`.
    pub fn from_grid(sp: &Spectral3, normal: [Vec<f64>; 4]) -> Result<Self, GeometryError> {
        for (j, f) in normal.iter().take(2).enumerate() {
            sp.check_resolved(&format!("omega r-derivative {j}"), f, super::torus::TAIL_TOL)?;
        }
        let derivs = |f: &[f64]| {
            let g = sp.gradient(f);
            let h: [Vec<f64>; 6] = std::array::from_fn(|q| sp.derivative(&g[SYM[q].0], SYM[q].1, 1));
            let n = f.len();
            let grad: Vec<Vector3<f64>> = (0..n).map(|p| Vector3::new(g[0][p], g[1][p], g[2][p])).collect();
            let hess: Vec<Matrix3<f64>> = (0..n)
                .map(|p| Matrix3::from_fn(|i, j| h[super::torus::sym_index(i, j)][p]))
                .collect();
            (grad, hess)
        };
        let (grad, hess) = derivs(&normal[0]);
        let (grad_nu, hess_nu) = derivs(&normal[1]);
        let [omega0, omega_nu, omega_nunu, omega_nu3] = normal;
        Ok(ConformalFactorJet {
            omega0,
            omega_nu,
            omega_nunu,
            omega_nu3,
            grad,
            hess,
            grad_nu,
            hess_nu,
            radial: None,
        })
    }

    pub fn len(&self) -> usize {
        self.omega0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega0.is_empty()
    }
}

fn grid_christoffel(sp: &Spectral3, h: &[Matrix3<f64>], h_inv: &[Matrix3<f64>]) -> Vec<Tensor3> {
    let comps: [Vec<f64>; 6] = std::array::from_fn(|c| h.iter().map(|m| m[SYM[c]]).collect());
    let d: Vec<[Vec<f64>; 3]> = comps.iter().map(|f| sp.gradient(f)).collect();
    (0..h.len())
        .map(|p| {
            let dh = |k: usize, i: usize, j: usize| d[super::torus::sym_index(i, j)][k][p];
            std::array::from_fn(|k| {
                std::array::from_fn(|i| {
                    std::array::from_fn(|j| {
                        let mut v = 0.0;
                        for l in 0..3 {
                            v += h_inv[p][(k, l)] * (dh(i, l, j) + dh(j, l, i) - dh(l, i, j));
                        }
                        0.5 * v
                    })
                })
            })
        })
        .collect()
}

fn hessian_h(gamma: &Tensor3, grad: &Vector3<f64>, hess: &Matrix3<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| {
        let mut v = hess[(i, j)];
        for k in 0..3 {
            v -= gamma[k][i][j] * grad[k];
        }
        v
    })
}

/// Boundary jet of `ĝ = e^{2ω} ḡ` from the jet of `ḡ` and the normal jet of `ω`.
///
/// `ĥ‴` is not determined by boundary data alone; the returned jet carries
/// the pure-trace tensor with the correct `tr_ĥ ĥ‴`.
pub fn jet_conformal_transform(jet: &BoundaryJet, om: &ConformalFactorJet) -> Result<BoundaryJet, GeometryError> {
    let n = jet.points.len();
    if om.len() != n {
        return Err(GeometryError::BadSpec(format!(
            "conformal factor has {} points, jet has {n}",
            om.len()
        )));
    }
    let h: Vec<Matrix3<f64>> = jet.points.iter().map(|p| p.h).collect();
    let h_inv: Vec<Matrix3<f64>> = jet.points.iter().map(|p| p.h_inv).collect();
    let (gammas, div_l, d_mean) = match &jet.chart {
        Chart::Homogeneous { .. } => (
            vec![[[[0.0; 3]; 3]; 3]; n],
            vec![Vector3::zeros(); n],
            vec![Vector3::zeros(); n],
        ),
        Chart::Torus(sp) => {
            let gam = grid_christoffel(sp, &h, &h_inv);
            let ls: Vec<Matrix3<f64>> = jet.points.iter().map(|p| p.l).collect();
            let dl = grid_div_tensor(sp, &h_inv, &gam, &ls);
            let mean: Vec<f64> = jet.points.iter().map(|p| p.mean).collect();
            let dm = sp.gradient(&mean);
            (
                gam,
                (0..n).map(|p| Vector3::new(dl[0][p], dl[1][p], dl[2][p])).collect(),
                (0..n).map(|p| Vector3::new(dm[0][p], dm[1][p], dm[2][p])).collect(),
            )
        }
    };
    struct Partial {
        h: Matrix3<f64>,
        h1: Matrix3<f64>,
        h2: Matrix3<f64>,
        h3: Matrix3<f64>,
        r0i0j: Matrix3<f64>,
        rij: Matrix3<f64>,
        r0ijk: Tensor3,
        ric_h: Matrix3<f64>,
        dnu_r: f64,
        r00_0: f64,
        l: Matrix3<f64>,
    }
    let mut parts = Vec::with_capacity(n);
    for p in 0..n {
        let j = &jet.points[p];
        let hi = j.h_inv;
        let (w0, w1, w2, w3) = (om.omega0[p], om.omega_nu[p], om.omega_nunu[p], om.omega_nu3[p]);
        let dw = om.grad[p];
        let dw_up = hi * dw;
        let hess0 = hessian_h(&gammas[p], &dw, &om.hess[p]);
        let lapl0 = (hi * hess0).trace();
        let grad0_sq = dw.dot(&dw_up);
        let hess1 = hessian_h(&gammas[p], &om.grad_nu[p], &om.hess_nu[p]);
        let lapl1 = (hi * hess1).trace();
        // ambient Hessian of ω at r = 0
        let hb00 = w2;
        let hb0: Vector3<f64> = om.grad_nu[p] + j.l * dw_up;
        let hbij = hess0 - w1 * j.l;
        let lapbar = w2 + lapl0 - j.mean * w1;
        let dw2 = w1 * w1 + grad0_sq;
        let p00 = 0.5 * (j.rbar00 - j.rbar / 6.0);
        let p0: Vector3<f64> = 0.5 * j.rbar0i;
        let pij = 0.5 * (j.rbar_ij - (j.rbar / 6.0) * j.h);
        let ph00 = p00 - hb00 + w1 * w1 - 0.5 * dw2;
        let ph0: Vector3<f64> = p0 - hb0 + w1 * dw;
        let phij = pij - hbij + dw * dw.transpose() - 0.5 * dw2 * j.h;
        let e = w0.exp();
        let hh = e * e * j.h;
        let lh = e * (j.l - w1 * j.h);
        let r0i0j = j.w0i0j + ph00 * j.h + phij;
        let mut r0ijk = [[[0.0; 3]; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let w = j.rbar0ijk[a][b][c] - (p0[b] * j.h[(a, c)] - p0[c] * j.h[(a, b)]);
                    r0ijk[a][b][c] = e * (w + ph0[b] * j.h[(a, c)] - ph0[c] * j.h[(a, b)]);
                }
            }
        }
        let rij = j.rbar_ij - 2.0 * (hbij - dw * dw.transpose()) - (lapbar + 2.0 * dw2) * j.h;
        let ric_h = j.ric_h - (hess0 - dw * dw.transpose()) - (lapl0 + grad0_sq) * j.h;
        let scal_bracket = j.rbar - 6.0 * lapbar - 6.0 * dw2;
        // normal derivatives
        let m1 = hi * j.h1;
        let m2 = hi * j.h2;
        let d_mean_r = -0.5 * (m2.trace() - (m1 * m1).trace());
        let delta_lap = -contract(&hi, &j.h1, &hess0) - (-2.0 * div_l[p] + d_mean[p]).dot(&dw_up);
        let d_lapbar = w3 - d_mean_r * w1 - j.mean * w2 + lapl1 + delta_lap;
        let d_dw2 = 2.0 * w1 * w2 + 2.0 * dw_up.dot(&(j.l * dw_up)) + 2.0 * om.grad_nu[p].dot(&dw_up);
        let d_scal = (-2.0 * w1 * scal_bracket + j.dnu_rbar - 6.0 * d_lapbar - 6.0 * d_dw2) / (e * e);
        let dnu_r = d_scal / e;
        let ric00 = j.rbar00 - 2.0 * (w2 - w1 * w1) - (lapbar + 2.0 * dw2);
        let ric0k: Vector3<f64> = j.rbar0i - 2.0 * (hb0 - w1 * dw);
        let d_ric00 = j.rbar00_0 - 2.0 * (w3 - 2.0 * w1 * w2) - d_lapbar - 2.0 * d_dw2;
        let r00_0 = (d_ric00 - 2.0 * w1 * ric00 + 2.0 * dw_up.dot(&ric0k)) / (e * e * e);
        let hh_inv = hh.try_inverse().expect("positive definite");
        let h1 = -2.0 * lh;
        let h2 = 2.0 * (lh * hh_inv * lh - r0i0j);
        let tr_h3 = -2.0 * r00_0 + 8.0 * contract(&hh_inv, &lh, &r0i0j);
        let h3 = (tr_h3 / 3.0) * hh;
        parts.push(Partial {
            h: hh,
            h1,
            h2,
            h3,
            r0i0j,
            rij,
            r0ijk,
            ric_h,
            dnu_r,
            r00_0,
            l: lh,
        });
    }
    let (lapl_h, divdiv_l) = match &jet.chart {
        Chart::Homogeneous { .. } => (vec![0.0; n], vec![0.0; n]),
        Chart::Torus(sp) => {
            let hh: Vec<Matrix3<f64>> = parts.iter().map(|x| x.h).collect();
            let hh_inv: Vec<Matrix3<f64>> = hh.iter().map(|m| m.try_inverse().unwrap()).collect();
            let gam = grid_christoffel(sp, &hh, &hh_inv);
            let mean: Vec<f64> = parts
                .iter()
                .zip(&hh_inv)
                .map(|(x, hi)| (hi * x.l).trace())
                .collect();
            sp.check_resolved("transformed H", &mean, super::torus::TAIL_TOL)?;
            let ls: Vec<Matrix3<f64>> = parts.iter().map(|x| x.l).collect();
            let dl = grid_div_tensor(sp, &hh_inv, &gam, &ls);
            (
                grid_laplacian(sp, &hh_inv, &gam, &mean),
                grid_divergence(sp, &hh_inv, &gam, &dl),
            )
        }
    };
    let points: Vec<JetPoint> = parts
        .into_iter()
        .enumerate()
        .map(|(p, x)| {
            JetPoint::assemble(
                x.h, x.h1, x.h2, x.h3, x.r0i0j, x.rij, x.r0ijk, x.ric_h, x.dnu_r, x.r00_0, lapl_h[p], divdiv_l[p],
            )
        })
        .collect();
    let weights = jet
        .weights
        .iter()
        .zip(&om.omega0)
        .map(|(w, o)| w * (3.0 * o).exp())
        .collect();
    Ok(BoundaryJet {
        points,
        weights,
        chart: jet.chart.clone(),
    })
}

/// Distance to the boundary for `e^{2ω} ḡ` along radial geodesics,
/// `r̂(r) = ∫_0^r e^{ω}`, tabulated in double-double.
#[derive(Clone, Debug)]
pub struct DistanceProfile {
    pub omega: RadialOmega,
    pub r_max: f64,
    edges: Vec<DD>,
    cumulative: Vec<DD>,
    rule: GaussLegendre<DD>,
}

const DISTANCE_PANELS: usize = 64;

impl DistanceProfile {
    /// `r̂(r)` for `0 ≤ r ≤ r_max`.
    pub fn r_hat(&self, r: DD) -> DD {
        let h = DD::new(self.r_max) / DD::new(DISTANCE_PANELS as f64);
        let k = ((r / h).to_f64().floor() as usize).min(DISTANCE_PANELS - 1);
        let base = self.cumulative[k];
        let om = &self.omega;
        base + self.rule.integrate(self.edges[k], r, |t| om.eval(t).exp())
    }

    pub fn r_hat_f64(&self, r: f64) -> f64 {
        self.r_hat(DD::new(r)).to_f64()
    }

    /// Inverse map: the `r` with `r̂(r) = target`, by Newton in double-double.
    pub fn r_of(&self, target: DD) -> DD {
        let mut r = target / self.omega.eval(DD::ZERO).exp();
        for _ in 0..60 {
            let f = self.r_hat(r) - target;
            let step = f / self.omega.eval(r).exp();
            r -= step;
            if step.to_f64().abs() <= 1e-32 * (1.0 + r.to_f64().abs()) {
                break;
            }
        }
        r
    }
}

/// Distance profile of `e^{2ω} ḡ` on a radial metric.
pub fn rescaled_distance(metric: &CollarMetric, omega: &RadialOmega) -> Result<DistanceProfile, GeometryError> {
    let r_max = match &metric.model {
        Model::Radial(m) if m.topology.is_some() => m.r_max,
        Model::Radial(m) => m.r_max,
        Model::Torus(_) => {
            return Err(GeometryError::UnsupportedGeometry(
                "rescaled distance needs a radial metric".into(),
            ))
        }
    };
    let rule = GaussLegendre::<DD>::new(20);
    let edges: Vec<DD> = (0..=DISTANCE_PANELS)
        .map(|i| DD::new(r_max) * DD::new(i as f64) / DD::new(DISTANCE_PANELS as f64))
        .collect();
    let mut cumulative = vec![DD::ZERO];
    for w in edges.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + rule.integrate(w[0], w[1], |t| omega.eval(t).exp()));
    }
    Ok(DistanceProfile {
        omega: omega.clone(),
        r_max,
        edges,
        cumulative,
        rule,
    })
}
