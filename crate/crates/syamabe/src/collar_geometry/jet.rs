use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::numeric::{Dual, Jet2};

use super::coord::coord_curvature;
use super::radial::{radial_riemann, ricci_scalar, Profile};
use super::torus::{Spectral3, TorusModel, TAIL_TOL};
use super::{CollarMetric, GeometryError, Model};

pub type Tensor3 = [[[f64; 3]; 3]; 3];

/// Boundary data at one point, tangential tensors with lower indices in the
/// boundary chart (coordinate basis on the torus, `σ_i` coframe on spheres).
#[derive(Clone, Debug, PartialEq)]
pub struct JetPoint {
    pub h: Matrix3<f64>,
    pub h_inv: Matrix3<f64>,
    /// `∂_r h_r`, `∂_r² h_r`, `∂_r³ h_r` at `r = 0`.
    pub h1: Matrix3<f64>,
    pub h2: Matrix3<f64>,
    pub h3: Matrix3<f64>,
    pub l: Matrix3<f64>,
    pub lring: Matrix3<f64>,
    pub mean: f64,
    pub norm_l2: f64,
    pub norm_lring2: f64,
    pub tr_l3: f64,
    pub tr_lring3: f64,
    pub rbar: f64,
    pub rbar00: f64,
    pub rbar0i: Vector3<f64>,
    pub rbar_ij: Matrix3<f64>,
    pub rbar0i0j: Matrix3<f64>,
    /// `R̄_{0ijk}`.
    pub rbar0ijk: Tensor3,
    pub w0i0j: Matrix3<f64>,
    pub ric_h: Matrix3<f64>,
    pub scal_h: f64,
    pub dnu_rbar: f64,
    pub rbar00_0: f64,
    pub lapl_h: f64,
    pub divdiv_l: f64,
    pub divdiv_lring: f64,
}

/// How tangential derivatives are taken on the boundary chart.
#[derive(Clone, Debug)]
pub enum Chart {
    /// Homogeneous sphere boundary: every field is constant in the chart.
    Homogeneous { components: usize },
    /// Periodic grid on `T³`.
    Torus(Spectral3),
}

/// Boundary jet over all quadrature points of `∂M`.
#[derive(Clone, Debug)]
pub struct BoundaryJet {
    pub points: Vec<JetPoint>,
    /// `dv_h` weights, so `∫ f dv_h = Σ w_p f_p`.
    pub weights: Vec<f64>,
    pub chart: Chart,
}

/// Jets with `|L̊|` below this are treated as umbilic.
pub const UMBILIC_TOL: f64 = 1e-12;

/// `A^{ij} B_{ij}` with indices raised by `h`.
pub fn contract(h_inv: &Matrix3<f64>, a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    (h_inv * a * h_inv * b.transpose()).trace()
}

impl JetPoint {
    /// `A^{ij} B_{ij}`.
    pub fn dot(&self, a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
        contract(&self.h_inv, a, b)
    }

    /// `tr_h A`.
    pub fn tr(&self, a: &Matrix3<f64>) -> f64 {
        (self.h_inv * a).trace()
    }

    /// `L^{ij} R̄_{0i0j}`.
    pub fn l_r0i0j(&self) -> f64 {
        self.dot(&self.l, &self.rbar0i0j)
    }

    /// `L^{ij} R̄_{ij}`.
    pub fn l_rij(&self) -> f64 {
        self.dot(&self.l, &self.rbar_ij)
    }

    /// `L̊^{ij} W̄_{0i0j}`.
    pub fn lring_w(&self) -> f64 {
        self.dot(&self.lring, &self.w0i0j)
    }

    /// `L̊^{ij} R̄_{ij}`.
    pub fn lring_rij(&self) -> f64 {
        self.dot(&self.lring, &self.rbar_ij)
    }

    pub fn sqrt_det_h(&self) -> f64 {
        self.h.determinant().sqrt()
    }

    /// Builds the derived fields from the primary ones.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        h: Matrix3<f64>,
        h1: Matrix3<f64>,
        h2: Matrix3<f64>,
        h3: Matrix3<f64>,
        rbar0i0j: Matrix3<f64>,
        rbar_ij: Matrix3<f64>,
        rbar0ijk: Tensor3,
        ric_h: Matrix3<f64>,
        dnu_rbar: f64,
        rbar00_0: f64,
        lapl_h: f64,
        divdiv_l: f64,
    ) -> JetPoint {
        let h_inv = h.try_inverse().expect("h is positive definite");
        let l = -0.5 * h1;
        let mean = (h_inv * l).trace();
        let lring = l - (mean / 3.0) * h;
        let lu = h_inv * l;
        let lru = h_inv * lring;
        let rbar00 = (h_inv * rbar0i0j).trace();
        let rbar = rbar00 + (h_inv * rbar_ij).trace();
        let p00 = 0.5 * (rbar00 - rbar / 6.0);
        let p_ij = 0.5 * (rbar_ij - (rbar / 6.0) * h);
        let w0i0j = rbar0i0j - p00 * h - p_ij;
        let mut rbar0i = Vector3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    rbar0i[i] += h_inv[(j, k)] * rbar0ijk[j][i][k];
                }
            }
        }
        JetPoint {
            h,
            h_inv,
            h1,
            h2,
            h3,
            l,
            lring,
            mean,
            norm_l2: (lu * lu).trace(),
            norm_lring2: (lru * lru).trace(),
            tr_l3: (lu * lu * lu).trace(),
            tr_lring3: (lru * lru * lru).trace(),
            rbar,
            rbar00,
            rbar0i,
            rbar_ij,
            rbar0i0j,
            rbar0ijk,
            w0i0j,
            ric_h,
            scal_h: (h_inv * ric_h).trace(),
            dnu_rbar,
            rbar00_0,
            lapl_h,
            divdiv_l,
            divdiv_lring: divdiv_l - lapl_h / 3.0,
        }
    }

    /// Residual of the contracted Bianchi identity
    /// `R̄₀₀,₀ = ½R̄,₀ + L_{ij,}^{ij} − ΔH − L^{ij}R̄_{ij} + HR̄₀₀`.
    pub fn bianchi_residual(&self) -> f64 {
        self.rbar00_0
            - (0.5 * self.dnu_rbar + self.divdiv_l - self.lapl_h - self.l_rij()
                + self.mean * self.rbar00)
    }
}

impl BoundaryJet {
    pub fn integrate<F: Fn(&JetPoint) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    pub fn boundary_volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn max_abs<F: Fn(&JetPoint) -> f64>(&self, f: F) -> f64 {
        self.points.iter().map(|p| f(p).abs()).fold(0.0, f64::max)
    }

    pub fn is_umbilic(&self) -> bool {
        self.max_abs(|p| p.norm_lring2.sqrt()) < UMBILIC_TOL
    }

    /// Grid values of `f` over the boundary points.
    pub fn field<F: Fn(&JetPoint) -> f64>(&self, f: F) -> Vec<f64> {
        self.points.iter().map(f).collect()
    }
}

fn diag(v: [f64; 3]) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::from(v))
}

/// Milnor's Ricci tensor of `Σ a_i² σ_i²` in the `σ` coframe.
pub fn berger_ricci(a: [f64; 3]) -> Matrix3<f64> {
    let lam: [f64; 3] = std::array::from_fn(|i| 2.0 * a[i] / (a[(i + 1) % 3] * a[(i + 2) % 3]));
    let half = 0.5 * (lam[0] + lam[1] + lam[2]);
    let mu: [f64; 3] = std::array::from_fn(|i| half - lam[i]);
    diag(std::array::from_fn(|i| {
        2.0 * mu[(i + 1) % 3] * mu[(i + 2) % 3] * a[i] * a[i]
    }))
}

pub(crate) fn radial_jet(profile: &Profile, components: usize) -> BoundaryJet {
    let [a, da, dda, d3a] = profile.jet3(0.0);
    let h = diag(std::array::from_fn(|i| a[i] * a[i]));
    let h1 = diag(std::array::from_fn(|i| 2.0 * a[i] * da[i]));
    let h2 = diag(std::array::from_fn(|i| 2.0 * da[i] * da[i] + 2.0 * a[i] * dda[i]));
    let h3 = diag(std::array::from_fn(|i| {
        6.0 * da[i] * dda[i] + 2.0 * a[i] * d3a[i]
    }));
    let rm = radial_riemann(profile, Dual::variable(0.0));
    let (ric, scal) = ricci_scalar(&rm);
    let mut rbar0i0j = Matrix3::zeros();
    let mut rbar_ij = Matrix3::zeros();
    let mut rbar0ijk = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            rbar0i0j[(i, j)] = a[i] * a[j] * rm[0][i + 1][0][j + 1].v;
            rbar_ij[(i, j)] = a[i] * a[j] * ric[i + 1][j + 1].v;
            for k in 0..3 {
                rbar0ijk[i][j][k] = a[i] * a[j] * a[k] * rm[0][i + 1][j + 1][k + 1].v;
            }
        }
    }
    let point = JetPoint::assemble(
        h,
        h1,
        h2,
        h3,
        rbar0i0j,
        rbar_ij,
        rbar0ijk,
        berger_ricci(a),
        scal.d,
        ric[0][0].d,
        0.0,
        0.0,
    );
    let vol = components as f64 * super::radial::S3_VOLUME * a[0] * a[1] * a[2];
    BoundaryJet {
        points: vec![point],
        weights: vec![vol],
        chart: Chart::Homogeneous { components },
    }
}

fn m3(a: [[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| a[i][j])
}

/// Intrinsic curvature and Christoffel symbols of `h` at a grid point.
struct Intrinsic {
    gamma: Tensor3,
    ric: Matrix3<f64>,
    riem: [[[[f64; 3]; 3]; 3]; 3],
}

fn intrinsic(model: &TorusModel, idx: usize) -> Intrinsic {
    let mut g = [[Jet2::<f64>::constant(0.0); 4]; 4];
    g[0][0] = Jet2::constant(1.0);
    let h = model.r_derivative(idx, 0.0, 0);
    let dh = model.grad_coefficient(idx, 0);
    for i in 0..3 {
        for j in 0..3 {
            let c = super::torus::sym_index(i, j);
            let mut e = Jet2::constant(h[i][j]);
            for k in 0..3 {
                e.g[k + 1] = dh[k][i][j];
                for l in 0..3 {
                    e.h[k + 1][l + 1] = model.d2[0][c][super::torus::sym_index(k, l)][idx];
                }
            }
            g[i + 1][j + 1] = e;
        }
    }
    let cc = coord_curvature(&g);
    Intrinsic {
        gamma: std::array::from_fn(|k| {
            std::array::from_fn(|i| std::array::from_fn(|j| cc.christoffel[k + 1][i + 1][j + 1]))
        }),
        ric: Matrix3::from_fn(|i, j| cc.ricci[i + 1][j + 1]),
        riem: std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                std::array::from_fn(|c| std::array::from_fn(|d| cc.riemann[a + 1][b + 1][c + 1][d + 1]))
            })
        }),
    }
}

/// Covariant derivative `(∇_k T)_{ij}` of a symmetric 2-tensor field given
/// its value and coordinate derivatives at a point.
pub fn cov_deriv_2(gamma: &Tensor3, t: &Matrix3<f64>, dt: &Tensor3) -> Tensor3 {
    let mut out = [[[0.0; 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let mut v = dt[k][i][j];
                for p in 0..3 {
                    v -= gamma[p][k][i] * t[(p, j)] + gamma[p][k][j] * t[(i, p)];
                }
                out[k][i][j] = v;
            }
        }
    }
    out
}

/// `h^{ij}(∂_i∂_j f − Γ^k_{ij}∂_k f)` on the grid.
pub(crate) fn grid_laplacian(
    sp: &Spectral3,
    h_inv: &[Matrix3<f64>],
    gammas: &[Tensor3],
    f: &[f64],
) -> Vec<f64> {
    let grad = sp.gradient(f);
    let hess: [[Vec<f64>; 3]; 3] =
        std::array::from_fn(|i| std::array::from_fn(|j| sp.derivative(&grad[i], j, 1)));
    (0..f.len())
        .map(|p| {
            let mut v = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    let mut hij = hess[i][j][p];
                    for k in 0..3 {
                        hij -= gammas[p][k][i][j] * grad[k][p];
                    }
                    v += h_inv[p][(i, j)] * hij;
                }
            }
            v
        })
        .collect()
}

/// `∇^j V_j` of a one-form field on the grid.
pub(crate) fn grid_divergence(
    sp: &Spectral3,
    h_inv: &[Matrix3<f64>],
    gammas: &[Tensor3],
    v: &[Vec<f64>; 3],
) -> Vec<f64> {
    let dv: [[Vec<f64>; 3]; 3] =
        std::array::from_fn(|j| std::array::from_fn(|l| sp.derivative(&v[j], l, 1)));
    (0..v[0].len())
        .map(|p| {
            let mut s = 0.0;
            for j in 0..3 {
                for l in 0..3 {
                    let mut c = dv[j][l][p];
                    for q in 0..3 {
                        c -= gammas[p][q][l][j] * v[q][p];
                    }
                    s += h_inv[p][(j, l)] * c;
                }
            }
            s
        })
        .collect()
}

/// Divergence one-form `h^{ik}∇_k T_{ij}` of a symmetric tensor field on
/// the grid, with the tensor's coordinate derivatives computed spectrally.
pub(crate) fn grid_div_tensor(
    sp: &Spectral3,
    h_inv: &[Matrix3<f64>],
    gammas: &[Tensor3],
    t: &[Matrix3<f64>],
) -> [Vec<f64>; 3] {
    let comps: Vec<Vec<f64>> = (0..9).map(|c| t.iter().map(|m| m[(c / 3, c % 3)]).collect()).collect();
    let d: Vec<[Vec<f64>; 3]> = comps.iter().map(|f| sp.gradient(f)).collect();
    let n = t.len();
    let mut out: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);
    for p in 0..n {
        let dt: Tensor3 =
            std::array::from_fn(|k| std::array::from_fn(|i| std::array::from_fn(|j| d[i * 3 + j][k][p])));
        let nab = cov_deriv_2(&gammas[p], &t[p], &dt);
        for j in 0..3 {
            let mut s = 0.0;
            for i in 0..3 {
                for k in 0..3 {
                    s += h_inv[p][(i, k)] * nab[k][i][j];
                }
            }
            out[j][p] = s;
        }
    }
    out
}

pub(crate) fn torus_jet(model: &TorusModel) -> Result<BoundaryJet, GeometryError> {
    let sp = &model.spectral;
    let npts = sp.len();
    struct Local {
        h: Matrix3<f64>,
        h1: Matrix3<f64>,
        h2: Matrix3<f64>,
        h3: Matrix3<f64>,
        h_inv: Matrix3<f64>,
        intr: Intrinsic,
        nabla_l: Tensor3,
    }
    let locals: Vec<Local> = (0..npts)
        .into_par_iter()
        .map(|p| {
            let h = m3(model.r_derivative(p, 0.0, 0));
            let h1 = m3(model.r_derivative(p, 0.0, 1));
            let h2 = m3(model.r_derivative(p, 0.0, 2));
            let h3 = m3(model.r_derivative(p, 0.0, 3));
            let h_inv = h.try_inverse().expect("positive definite");
            let intr = intrinsic(model, p);
            let l = -0.5 * h1;
            let dh1 = model.grad_coefficient(p, 1);
            let dl: Tensor3 = dh1.map(|a| a.map(|b| b.map(|x| -0.5 * x)));
            let nabla_l = cov_deriv_2(&intr.gamma, &l, &dl);
            Local {
                h,
                h1,
                h2,
                h3,
                h_inv,
                intr,
                nabla_l,
            }
        })
        .collect();
    let h_inv: Vec<Matrix3<f64>> = locals.iter().map(|x| x.h_inv).collect();
    let gammas: Vec<Tensor3> = locals.iter().map(|x| x.intr.gamma).collect();
    let ls: Vec<Matrix3<f64>> = locals.iter().map(|x| -0.5 * x.h1).collect();
    let mean: Vec<f64> = locals
        .iter()
        .map(|x| (x.h_inv * (-0.5 * x.h1)).trace())
        .collect();
    sp.check_resolved("H", &mean, TAIL_TOL)?;
    let lapl_h = grid_laplacian(sp, &h_inv, &gammas, &mean);
    let div_l = grid_div_tensor(sp, &h_inv, &gammas, &ls);
    for (j, d) in div_l.iter().enumerate() {
        sp.check_resolved(&format!("div L [{j}]"), d, TAIL_TOL)?;
    }
    let divdiv_l = grid_divergence(sp, &h_inv, &gammas, &div_l);
    let mut points = Vec::with_capacity(npts);
    let mut weights = Vec::with_capacity(npts);
    for (p, loc) in locals.iter().enumerate() {
        let l = ls[p];
        let hi = loc.h_inv;
        let hh = mean[p];
        let ll = l * hi * l;
        let rbar0i0j = ll - 0.5 * loc.h2;
        let rbar_ij = rbar0i0j + loc.intr.ric - hh * l + ll;
        let mut rbar0ijk = [[[0.0; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    rbar0ijk[i][j][k] = loc.nabla_l[j][i][k] - loc.nabla_l[k][j][i];
                }
            }
        }
        // normal derivatives via the variation formulas
        let m1 = hi * loc.h1;
        let m2 = hi * loc.h2;
        let m3_ = hi * loc.h3;
        let d_norm_l2 = 0.5 * ((m2 * m1).trace() - (m1 * m1 * m1).trace());
        let d_tr_h2 = m3_.trace() - (m1 * m2).trace();
        let d_mean = -0.5 * (m2.trace() - (m1 * m1).trace());
        let d_scal_h = 2.0 * lapl_h[p] - 2.0 * divdiv_l[p] + 2.0 * contract(&hi, &loc.intr.ric, &l);
        let dnu_rbar = d_scal_h + 3.0 * d_norm_l2 - d_tr_h2 - 2.0 * hh * d_mean;
        let rbar00_0 = 4.0 * contract(&hi, &l, &rbar0i0j) - 0.5 * m3_.trace();
        let jp = JetPoint::assemble(
            loc.h,
            loc.h1,
            loc.h2,
            loc.h3,
            rbar0i0j,
            rbar_ij,
            rbar0ijk,
            loc.intr.ric,
            dnu_rbar,
            rbar00_0,
            lapl_h[p],
            divdiv_l[p],
        );
        weights.push(model.cell_volume() * jp.sqrt_det_h());
        points.push(jp);
    }
    Ok(BoundaryJet {
        points,
        weights,
        chart: Chart::Torus(sp.clone()),
    })
}

impl CollarMetric {
    /// Intrinsic Riemann tensor of `h` at a torus grid point (lower indices).
    pub fn boundary_riemann(&self, idx: usize) -> Option<[[[[f64; 3]; 3]; 3]; 3]> {
        match &self.model {
            Model::Torus(t) => Some(intrinsic(t, idx).riem),
            Model::Radial(_) => None,
        }
    }
}
