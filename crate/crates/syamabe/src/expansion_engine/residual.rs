use nalgebra::Matrix4;
use serde::Serialize;

use super::{expansion, ExpansionError, Problem};
use crate::collar_geometry::{
    boundary_jet, coord_curvature, radial_riemann, ricci_scalar, CollarMetric, CurvatureSlice, Model,
    Profile, RadialModel, Spectral3, TorusModel,
};
use crate::numeric::{geomspace, Dual, Jet2, Real};

/// A scalar function on the chart of [`pdiv_residual`], given the chart
/// coordinates and the `ḡ`-distance to the boundary.
pub trait ScalarField {
    fn eval<T: Real>(&self, x: [T; 4], r: T) -> T;
}

/// `c + b·x + xᵀAx` in chart coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    pub constant: f64,
    pub linear: [f64; 4],
    pub quadratic: [[f64; 4]; 4],
}

impl ScalarField for Polynomial {
    fn eval<T: Real>(&self, x: [T; 4], _r: T) -> T {
        let mut acc = T::from_f64(self.constant);
        for a in 0..4 {
            acc += x[a].scale(self.linear[a]);
            for b in 0..4 {
                acc += (x[a] * x[b]).scale(self.quadratic[a][b]);
            }
        }
        acc
    }
}

/// `Σ_m c_m r^m` in the boundary distance.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialSeries(pub Vec<f64>);

impl ScalarField for RadialSeries {
    fn eval<T: Real>(&self, _x: [T; 4], r: T) -> T {
        self.0.iter().rev().fold(T::zero(), |acc, &c| acc * r + T::from_f64(c))
    }
}

/// Global coordinates used by [`pdiv_residual`].
enum Chart4<'a> {
    /// Cartesian coordinates on a Euclidean ball centred at the origin.
    Euclidean { radius: f64 },
    /// Collar coordinates `(r, x¹, x², x³)` on a torus collar.
    Collar(&'a TorusModel),
}

impl Chart4<'_> {
    fn of(metric: &CollarMetric) -> Result<Chart4<'_>, ExpansionError> {
        match &metric.model {
            Model::Radial(RadialModel {
                profile: Profile::Ball { radius },
                ..
            }) => Ok(Chart4::Euclidean { radius: *radius }),
            Model::Torus(t) => Ok(Chart4::Collar(t)),
            Model::Radial(_) => Err(ExpansionError::Unsupported(
                "pointwise divergence checks need a Euclidean ball or a torus collar".into(),
            )),
        }
    }

    fn metric<T: Real>(&self, x: [T; 4]) -> [[T; 4]; 4] {
        let mut g = [[T::zero(); 4]; 4];
        match self {
            Chart4::Euclidean { .. } => {
                for (a, row) in g.iter_mut().enumerate() {
                    row[a] = T::one();
                }
            }
            Chart4::Collar(t) => {
                g[0][0] = T::one();
                let h = t.metric_at(x[0], [x[1], x[2], x[3]]);
                for i in 0..3 {
                    for j in 0..3 {
                        g[i + 1][j + 1] = h[i][j];
                    }
                }
            }
        }
        g
    }

    fn distance<T: Real>(&self, x: [T; 4]) -> T {
        match self {
            Chart4::Euclidean { radius } => {
                T::from_f64(*radius) - (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]).sqrt()
            }
            Chart4::Collar(_) => x[0],
        }
    }
}

fn mat4<T: Copy>(m: &[[T; 4]; 4], f: impl Fn(T) -> f64) -> Matrix4<f64> {
    Matrix4::from_fn(|a, b| f(m[a][b]))
}

fn sigma2_4(m: &Matrix4<f64>) -> f64 {
    let t = m.trace();
    0.5 * (t * t - (m * m).trace())
}

/// `ḡ⁻¹P̄` from Ricci and scalar curvature.
fn schouten_endo(ginv: &Matrix4<f64>, g: &Matrix4<f64>, ric: &Matrix4<f64>, scal: f64) -> Matrix4<f64> {
    ginv * (0.5 * (ric - (scal / 6.0) * g))
}

/// The vector field under the divergence in the `σ₂` transformation law.
#[allow(clippy::too_many_arguments)]
fn pdiv_field<T: Real>(
    ginv: &[[T; 4]; 4],
    gam: &[[[T; 4]; 4]; 4],
    ric: &[[T; 4]; 4],
    scal: T,
    u: T,
    du: [T; 4],
    ddu: [[T; 4]; 4],
) -> [T; 4] {
    let mut hess = ddu;
    for a in 0..4 {
        for b in 0..4 {
            for e in 0..4 {
                hess[a][b] -= gam[e][a][b] * du[e];
            }
        }
    }
    let mut up = [T::zero(); 4];
    let mut norm2 = T::zero();
    let mut lap = T::zero();
    for a in 0..4 {
        for b in 0..4 {
            up[a] += ginv[a][b] * du[b];
            lap += ginv[a][b] * hess[a][b];
        }
    }
    for a in 0..4 {
        norm2 += up[a] * du[a];
    }
    let ui = u.recip();
    std::array::from_fn(|b| {
        let mut hu = T::zero();
        let mut ru = T::zero();
        for c in 0..4 {
            hu += hess[b][c] * up[c];
            ru += ric[b][c] * up[c];
        }
        ui.powi(3) * norm2 * du[b] - ui * ui * lap * du[b] + ui * ui * hu + ui * ru
            - (ui * scal * du[b]).scale(0.5)
    })
}

/// Residual of the divergence form of the `σ₂` transformation law at a chart
/// point: `4σ₂(ḡ⁻¹P̄) − 4u⁻⁴σ₂(g⁻¹P) − 2∇̄^α V_α` with `g = u⁻²ḡ`.
///
/// Chart coordinates are Cartesian on a Euclidean ball and `(r, x)` on a
/// torus collar. `σ₂(g⁻¹P)` comes from the curvature of `g` itself.
pub fn pdiv_residual<F: ScalarField>(metric: &CollarMetric, u: &F, x: [f64; 4]) -> Result<f64, ExpansionError> {
    let chart = Chart4::of(metric)?;
    let xj = Jet2::point(x);
    let gbar = chart.metric(xj);
    let cb = coord_curvature(&gbar);
    let ginv = mat4(&cb.inverse, |v| v);
    let gm = mat4(&cb.metric, |v| v);
    let sig_bar = sigma2_4(&schouten_endo(&ginv, &gm, &mat4(&cb.ricci, |v| v), cb.scalar));

    let uj = u.eval(xj, chart.distance(xj));
    if uj.v <= 0.0 {
        return Err(ExpansionError::Unsupported(format!("u = {} is not positive at {x:?}", uj.v)));
    }
    let w = uj.powi(-2);
    let g: [[Jet2<f64>; 4]; 4] = gbar.map(|row| row.map(|e| e * w));
    let cg = coord_curvature(&g);
    let sig = sigma2_4(&schouten_endo(
        &mat4(&cg.inverse, |v| v),
        &mat4(&cg.metric, |v| v),
        &mat4(&cg.ricci, |v| v),
        cg.scalar,
    ));

    // ∂_c V_b from one dual direction per coordinate
    let mut v = [0.0; 4];
    let mut dv = [[0.0; 4]; 4];
    for c in 0..4 {
        let xd: [Jet2<Dual<f64>>; 4] = std::array::from_fn(|a| {
            Jet2::variable(Dual::new(x[a], if a == c { 1.0 } else { 0.0 }), a)
        });
        let cc = coord_curvature(&chart.metric(xd));
        let ud = u.eval(xd, chart.distance(xd));
        let field = pdiv_field(
            &cc.inverse,
            &cc.christoffel,
            &cc.ricci,
            cc.scalar,
            ud.v,
            ud.g,
            ud.h,
        );
        for b in 0..4 {
            v[b] = field[b].v;
            dv[c][b] = field[b].d;
        }
    }
    let mut div = 0.0;
    for b in 0..4 {
        for c in 0..4 {
            let mut cov = dv[c][b];
            for e in 0..4 {
                cov -= cb.christoffel[e][c][b] * v[e];
            }
            div += cb.inverse[b][c] * cov;
        }
    }
    let u4 = uj.v.powi(4);
    Ok(4.0 * sig_bar - (4.0 * sig / u4 + 2.0 * div))
}

/// `u = r + f₀r² + f₁r³ + f₂r⁴` per boundary point, truncated at `order`
/// coefficients.
#[derive(Clone, Debug)]
pub struct TruncatedU {
    pub k: Problem,
    pub f: Vec<[f64; 3]>,
    /// Tangential gradient and Hessian of each `f_m` on torus grids.
    tangential: Option<[Tangential; 3]>,
}

impl TruncatedU {
    /// Coefficients of problem `k` at every boundary point, keeping the first
    /// `order` of `(f₀, f₁, f₂)`.
    pub fn new(metric: &CollarMetric, k: Problem, order: usize) -> Result<Self, ExpansionError> {
        let jet = boundary_jet(metric)?;
        let f: Vec<[f64; 3]> = jet
            .points
            .iter()
            .map(|p| {
                let full = expansion(p, k);
                std::array::from_fn(|m| if m < order { full[m] } else { 0.0 })
            })
            .collect();
        let tangential = metric.torus().map(|t| tangential_derivatives(&t.spectral, &f));
        Ok(TruncatedU { k, f, tangential })
    }

    /// `(u, ∂u, ∂²u)` in collar coordinates at a grid point.
    fn coordinate_jet(&self, idx: usize, r: f64) -> (f64, [f64; 4], [[f64; 4]; 4]) {
        let f = self.f[idx];
        let mut u = r;
        let mut du = [0.0; 4];
        let mut ddu = [[0.0; 4]; 4];
        du[0] = 1.0;
        for (m, &fm) in f.iter().enumerate() {
            let p = (m + 2) as i32;
            u += fm * r.powi(p);
            du[0] += p as f64 * fm * r.powi(p - 1);
            ddu[0][0] += (p * (p - 1)) as f64 * fm * r.powi(p - 2);
            if let Some(t) = &self.tangential {
                let (g, h) = (&t[m].0[idx], &t[m].1[idx]);
                for i in 0..3 {
                    du[i + 1] += g[i] * r.powi(p);
                    ddu[0][i + 1] += p as f64 * g[i] * r.powi(p - 1);
                    ddu[i + 1][0] = ddu[0][i + 1];
                    for j in 0..3 {
                        ddu[i + 1][j + 1] += h[i][j] * r.powi(p);
                    }
                }
            }
        }
        (u, du, ddu)
    }
}

/// Grid gradient and Hessian of one coefficient field.
type Tangential = (Vec<[f64; 3]>, Vec<[[f64; 3]; 3]>);

fn tangential_derivatives(sp: &Spectral3, f: &[[f64; 3]]) -> [Tangential; 3] {
    std::array::from_fn(|m| {
        let field: Vec<f64> = f.iter().map(|x| x[m]).collect();
        let g = sp.gradient(&field);
        let h: [[Vec<f64>; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| sp.derivative(&g[i], j, 1)));
        let n = field.len();
        (
            (0..n).map(|p| [g[0][p], g[1][p], g[2][p]]).collect(),
            (0..n)
                .map(|p| std::array::from_fn(|i| std::array::from_fn(|j| h[i][j][p])))
                .collect(),
        )
    })
}

/// Scalar equation residuals at one point, each divided by `r` so that a
/// truncation through `f₂` leaves `O(r³)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PdeResidualPoint {
    /// `(R_g + 12)/(6r)`.
    pub yamabe: f64,
    /// `(2u⁴σ₂(ḡ⁻¹P̄) − right-hand side)/r` of the expanded `σ₂` equation.
    pub sigma2: f64,
    /// `(2σ₂(g⁻¹P) − 3)/r` from `g⁻¹P = ḡ⁻¹(u²P̄ + u∇̄²u − ½|du|²ḡ)`.
    pub sigma2_schouten: f64,
    /// `σ₁(−g⁻¹P)` and `σ₂(−g⁻¹P)`.
    pub cone: [f64; 2],
}

struct Ambient {
    g: Matrix4<f64>,
    ginv: Matrix4<f64>,
    ric: Matrix4<f64>,
    scal: f64,
}

fn evaluate(amb: &Ambient, r: f64, u: f64, du: [f64; 4], hess: Matrix4<f64>) -> PdeResidualPoint {
    let du = nalgebra::Vector4::from(du);
    let up = amb.ginv * du;
    let norm2 = du.dot(&up);
    let pbar = 0.5 * (amb.ric - (amb.scal / 6.0) * amb.g);
    let a = u * u * pbar + u * hess - 0.5 * norm2 * amb.g;
    let b = amb.ginv * a;
    let s1 = b.trace();
    let s2 = sigma2_4(&b);
    let lap = (amb.ginv * hess).trace();
    let hup = amb.ginv * hess * amb.ginv;
    let hess2 = (hup * hess).trace();
    let ric_hess = (amb.ginv * amb.ric * amb.ginv * hess).trace();
    let lhs = 2.0 * u.powi(4) * sigma2_4(&(amb.ginv * pbar));
    let rhs = 3.0 * (1.0 - norm2 * norm2) + 3.0 * u * norm2 * lap + u * u * hess2 - u * u * lap * lap
        + 0.5 * u * u * amb.scal * norm2
        + u.powi(3) * ric_hess
        - 0.5 * u.powi(3) * amb.scal * lap;
    PdeResidualPoint {
        yamabe: (s1 + 2.0) / r,
        sigma2: (lhs - rhs) / r,
        sigma2_schouten: (2.0 * s2 - 3.0) / r,
        cone: [-s1, s2],
    }
}

/// Ambient curvature and the `ḡ`-Hessian of the truncated `u` at a point.
fn local_data(metric: &CollarMetric, u: &TruncatedU, r: f64, idx: usize) -> (Ambient, f64, [f64; 4], Matrix4<f64>) {
    match &metric.model {
        Model::Radial(m) => {
            let [a, da, _] = m.profile.jet2(r);
            let (ric, scal) = ricci_scalar(&radial_riemann(&m.profile, r));
            let f = u.f[idx];
            let uu = r + f[0] * r * r + f[1] * r.powi(3) + f[2] * r.powi(4);
            let d1 = 1.0 + 2.0 * f[0] * r + 3.0 * f[1] * r * r + 4.0 * f[2] * r.powi(3);
            let d2 = 2.0 * f[0] + 6.0 * f[1] * r + 12.0 * f[2] * r * r;
            let mut hess = Matrix4::zeros();
            hess[(0, 0)] = d2;
            for i in 0..3 {
                hess[(i + 1, i + 1)] = da[i] / a[i] * d1;
            }
            let amb = Ambient {
                g: Matrix4::identity(),
                ginv: Matrix4::identity(),
                ric: mat4(&ric, |v| v),
                scal,
            };
            (amb, uu, [d1, 0.0, 0.0, 0.0], hess)
        }
        Model::Torus(t) => {
            let jet = t.collar_jet(idx, r);
            let plain = jet.map(|row| {
                row.map(|e| {
                    let mut x = Jet2::<f64>::constant(e.v.v);
                    for a in 0..4 {
                        x.g[a] = e.g[a].v;
                        for b in 0..4 {
                            x.h[a][b] = e.h[a][b].v;
                        }
                    }
                    x
                })
            });
            let cc = coord_curvature(&plain);
            let (uu, du, ddu) = u.coordinate_jet(idx, r);
            let hess = Matrix4::from_fn(|a, b| {
                let mut v = ddu[a][b];
                for e in 0..4 {
                    v -= cc.christoffel[e][a][b] * du[e];
                }
                v
            });
            let amb = Ambient {
                g: mat4(&cc.metric, |v| v),
                ginv: mat4(&cc.inverse, |v| v),
                ric: mat4(&cc.ricci, |v| v),
                scal: cc.scalar,
            };
            (amb, uu, du, hess)
        }
    }
}

/// Residuals of both scalar equations for the truncated `u` at collar
/// coordinate `r` and boundary point `idx`.
pub fn pde_pointwise(metric: &CollarMetric, u: &TruncatedU, r: f64, idx: usize) -> PdeResidualPoint {
    let (amb, uu, du, hess) = local_data(metric, u, r, idx);
    evaluate(&amb, r, uu, du, hess)
}

/// `|E|²_ḡ √det ḡ` for `g = u⁻²ḡ` and the truncated `u`, the density of
/// `∫|E|²_g dv_g = ∫|E|²_ḡ dv_ḡ` against `dr dx`.
///
/// `E = 2u⁻² tf(A)` with `A = u²P̄ + u∇̄²u − ½|du|²ḡ`.
pub fn einstein_density(metric: &CollarMetric, u: &TruncatedU, r: f64, idx: usize) -> f64 {
    let (amb, uu, du, hess) = local_data(metric, u, r, idx);
    let du = nalgebra::Vector4::from(du);
    let norm2 = du.dot(&(amb.ginv * du));
    let pbar = 0.5 * (amb.ric - (amb.scal / 6.0) * amb.g);
    let a = uu * uu * pbar + uu * hess - 0.5 * norm2 * amb.g;
    let tf = a - 0.25 * (amb.ginv * a).trace() * amb.g;
    let mixed = amb.ginv * tf;
    4.0 * (mixed * mixed).trace() / uu.powi(4) * amb.g.determinant().sqrt()
}

/// Log-log decay fit of the equation residual along an `r`-ladder.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub radii: Vec<f64>,
    /// Largest residual over the boundary at each radius.
    pub residuals: Vec<f64>,
    /// `f64::INFINITY` when the residual sits at rounding level throughout.
    pub exponent: f64,
    pub exact: bool,
}

/// Residuals this small are rounding noise.
const NOISE_FLOOR: f64 = 1e-11;

/// Fits the decay exponent of the scalar-equation residual of the truncated
/// `u` (the `σ₂` equation in expanded form for `k = 2`).
pub fn pde_residual(metric: &CollarMetric, k: Problem, u: &TruncatedU) -> Result<DecayFit, ExpansionError> {
    let hi = (0.1f64).min(metric.collar_depth() / 2.0);
    let radii = geomspace(hi / 100.0, hi, 16);
    decay_fit(metric, k, u, radii)
}

pub fn decay_fit(metric: &CollarMetric, k: Problem, u: &TruncatedU, radii: Vec<f64>) -> Result<DecayFit, ExpansionError> {
    let residuals: Vec<f64> = radii
        .iter()
        .map(|&r| {
            (0..u.f.len())
                .map(|idx| {
                    let p = pde_pointwise(metric, u, r, idx);
                    match k {
                        Problem::Yamabe => p.yamabe.abs(),
                        Problem::Sigma2 => p.sigma2.abs(),
                    }
                })
                .fold(0.0, f64::max)
        })
        .collect();
    if residuals.iter().all(|&x| x < NOISE_FLOOR) {
        return Ok(DecayFit {
            radii,
            residuals,
            exponent: f64::INFINITY,
            exact: true,
        });
    }
    let usable: Vec<(f64, f64)> = radii
        .iter()
        .zip(&residuals)
        .filter(|(_, &v)| v >= NOISE_FLOOR)
        .map(|(&r, &v)| (r.ln(), v.ln()))
        .collect();
    let span = usable.last().map_or(0.0, |l| l.0) - usable.first().map_or(0.0, |f| f.0);
    if usable.len() < 4 || span < 1.0 {
        return Err(ExpansionError::FitUnstable(format!(
            "{} usable radii spanning {span:.2} in log r",
            usable.len()
        )));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(DecayFit {
        radii,
        residuals,
        exponent: sxy / sxx,
        exact: false,
    })
}

/// Residuals of the algebraic `σ₂` identities on a curvature slice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RicIdentity {
    /// `max |4σ₂(g⁻¹P) − (σ₂(g⁻¹Ric) − 4|E|²)/9|`.
    pub ric_form: f64,
    /// `max |4σ₂(g⁻¹P) − (R²/24 − |E|²/2)|`.
    pub scalar_form: f64,
}

pub fn sigma2_ric_identity(slice: &CurvatureSlice) -> RicIdentity {
    let mut out = RicIdentity {
        ric_form: 0.0,
        scalar_form: 0.0,
    };
    for p in &slice.points {
        let ginv = mat4(&p.inverse, |v| v);
        let sp = sigma2_4(&(ginv * mat4(&p.schouten, |v| v)));
        let sr = sigma2_4(&(ginv * mat4(&p.ricci, |v| v)));
        let e = ginv * mat4(&p.einstein_tf, |v| v);
        let e2 = (e * e).trace();
        out.ric_form = out.ric_form.max((4.0 * sp - (sr - 4.0 * e2) / 9.0).abs());
        out.scalar_form = out
            .scalar_form
            .max((4.0 * sp - (p.scalar * p.scalar / 24.0 - 0.5 * e2)).abs());
    }
    out
}
