//! Global defining functions on radial geometries.
//!
//! The unknown is `φ` in `u = r(1 + rφ)`, collocated on a Chebyshev grid in
//! `ρ = √r` over `[0, √r_max]`, where `r_max` is the centre of a ball or the
//! mid-slice of an interval. The equation is divided by `r` and only sees
//! `φ`, `rφ′` and `r²φ″`, so at `r = 0` it reduces to the algebraic
//! condition `φ(0) = −H/6`. Newton runs in f64; the converged iterate is
//! then refined with double-double residuals so that cut-off integrals down
//! to `r ~ 10⁻⁴` do not see f64 rounding amplified by `u⁻⁴`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::collar_geometry::{boundary_jet, radial_riemann, ricci_scalar, CollarMetric, GeometryError, Profile};
use crate::expansion_engine::{expansion, Problem};
use crate::numeric::{ChebGrid, ChebGridDD, Dual, Real, DD};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("Newton iteration diverged after {iterations} steps; residual trace {trace:?}")]
    NewtonDiverged { iterations: usize, trace: Vec<f64> },
    #[error("iterate left the negative 2-admissible cone at r = {r} (σ₁ = {sigma1}, σ₂ = {sigma2})")]
    AdmissibilityLost { r: f64, sigma1: f64, sigma2: f64 },
    #[error("boundary coefficient f{index} of the solution is {solved}, the expansion gives {formal}")]
    ExpansionMismatch { index: usize, solved: f64, formal: f64 },
    #[error("global solves need a ball or interval radial geometry: {0}")]
    NotRadial(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Newton and discretisation settings.
#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Chebyshev polynomial degree.
    pub degree: usize,
    pub tol: f64,
    pub max_iterations: usize,
    /// Starting nodal values of `φ`; defaults to `−H/6` everywhere.
    pub initial_phi: Option<Vec<f64>>,
    /// Largest allowed mismatch of `(f₀, f₁, f₂)` against the expansion.
    pub coefficient_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            degree: 128,
            tol: 1e-12,
            max_iterations: 60,
            initial_phi: None,
            coefficient_tol: 1e-6,
        }
    }
}

/// A collocated solution `g = u⁻²ḡ`.
///
/// Nodes live in `ρ = √r`, which softens the `r³ log r` term that `φ`
/// carries when the boundary is not umbilic.
#[derive(Clone, Debug)]
pub struct RadialSolution {
    pub k: Problem,
    /// Chebyshev grid in `ρ`.
    pub grid: ChebGrid,
    /// `r = ρ²` at the nodes.
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub ddu: Vec<f64>,
    /// `φ` at the nodes, with its first two `ρ`-derivatives.
    pub phi: Vec<f64>,
    pub phi_rho: Vec<f64>,
    pub phi_rhorho: Vec<f64>,
    /// Equation residual per node; the last entry is the symmetry condition.
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Double-double nodal data behind every off-grid evaluation.
    nodal: Nodal,
}

#[derive(Clone, Debug)]
struct Nodal {
    grid: ChebGridDD,
    phi: Vec<DD>,
    phi_rho: Vec<DD>,
    phi_rhorho: Vec<DD>,
}

/// `(φ, rφ′, r²φ″)` from `φ` and its `ρ`-derivatives at `ρ = √r`.
pub fn euler_from_rho<T: Real>(rho: T, phi: T, phi_rho: T, phi_rhorho: T) -> [T; 3] {
    let half = rho * phi_rho * T::from_f64(0.5);
    [phi, half, (rho * rho * phi_rhorho - rho * phi_rho) * T::from_f64(0.25)]
}

/// `u`, `u′`, `u″` from `(φ, rφ′, r²φ″)`.
pub fn u_from_phi<T: Real>(r: T, e: [T; 3]) -> [T; 3] {
    let [p, t1, t2] = e;
    let two = T::from_f64(2.0);
    let u = r * (T::one() + r * p);
    let du = T::one() + two * r * p + r * t1;
    let ddu = two * p + T::from_f64(4.0) * t1 + t2;
    [u, du, ddu]
}

/// `B = (ḡ⁻¹A + ½)/r` in the orthonormal frame `(∂_r, a_i⁻¹E_i)`, where
/// `A = u²P̄ + u∇̄²u − ½|du|²ḡ`, `u = r(1 + rφ)` and `e = (φ, rφ′, r²φ″)`.
///
/// The factorisation avoids the cancellation in `A + ½`.
pub fn frame_b<T: Real>(profile: &Profile, r: T, e: [T; 3]) -> [[T; 4]; 4] {
    let [p, t1, _] = e;
    let [_, du, ddu] = u_from_phi(r, e);
    let [a, da, _] = profile.jet2(r);
    let (ric, scal) = ricci_scalar(&radial_riemann(profile, r));
    let w = T::one() + r * p;
    let q = T::from_f64(2.0) * p + t1;
    let shift = q * (T::one() + du) * T::from_f64(0.5);
    let rw2 = r * w * w;
    let mut b = [[T::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut pbar = ric[i][j] * T::from_f64(0.5);
            if i == j {
                pbar -= scal / T::from_f64(12.0);
            }
            b[i][j] = rw2 * pbar;
        }
    }
    b[0][0] += w * ddu - shift;
    for i in 0..3 {
        b[i + 1][i + 1] += w * (da[i] / a[i]) * du - shift;
    }
    b
}

fn trace4<T: Real>(b: &[[T; 4]; 4]) -> T {
    b[0][0] + b[1][1] + b[2][2] + b[3][3]
}

fn sigma2_4<T: Real>(b: &[[T; 4]; 4]) -> T {
    let t = trace4(b);
    let mut sq = T::zero();
    for i in 0..4 {
        for j in 0..4 {
            sq += b[i][j] * b[j][i];
        }
    }
    (t * t - sq) * T::from_f64(0.5)
}

/// Scalar equation divided by `r`: `(R_g + 12)/(6r)` for `k = 1`,
/// `(2σ₂(g⁻¹P) − 3)/r` for `k = 2`, with the σ₂ nonlinearity scaled by
/// `lambda` (`lambda = 1` is the true equation).
fn equation<T: Real>(profile: &Profile, k: Problem, lambda: f64, r: T, e: [T; 3]) -> T {
    let b = frame_b(profile, r, e);
    match k {
        Problem::Yamabe => trace4(&b),
        Problem::Sigma2 => trace4(&b).scale(-3.0) + r * sigma2_4(&b).scale(2.0 * lambda),
    }
}

/// Pointwise residual of the scalar equation at `r`, given `(φ, rφ′, r²φ″)`.
pub fn equation_residual(profile: &Profile, k: Problem, r: f64, e: [f64; 3]) -> f64 {
    equation(profile, k, 1.0, r, e)
}

/// `σ₁(−g⁻¹P)` and `σ₂(−g⁻¹P)` at `r`.
pub fn cone(profile: &Profile, r: f64, e: [f64; 3]) -> [f64; 2] {
    let b = frame_b(profile, r, e);
    let mut m = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = -r * b[i][j];
        }
        m[i][i] += 0.5;
    }
    [trace4(&m), sigma2_4(&m)]
}

struct Setup<'a> {
    profile: &'a Profile,
    grid: ChebGrid,
    grid_dd: ChebGridDD,
}

impl Setup<'_> {
    fn euler(&self, phi: &[f64]) -> Vec<[f64; 3]> {
        let d1 = self.grid.derivative(phi);
        let d2 = self.grid.second_derivative(phi);
        (0..phi.len())
            .map(|j| euler_from_rho(self.grid.nodes[j], phi[j], d1[j], d2[j]))
            .collect()
    }

    fn r(&self, j: usize) -> f64 {
        self.grid.nodes[j] * self.grid.nodes[j]
    }

    fn residual(&self, k: Problem, lambda: f64, phi: &[f64]) -> Vec<f64> {
        let e = self.euler(phi);
        let n = self.grid.len() - 1;
        let mut res: Vec<f64> = (0..n).map(|j| equation(self.profile, k, lambda, self.r(j), e[j])).collect();
        res.push(u_from_phi(self.r(n), e[n])[1]);
        res
    }

    fn jacobian(&self, k: Problem, lambda: f64, phi: &[f64]) -> DMatrix<f64> {
        let e = self.euler(phi);
        let m = self.grid.len();
        let n = m - 1;
        let mut jac = DMatrix::zeros(m, m);
        for j in 0..n {
            let r = Dual::constant(self.r(j));
            let rho = self.grid.nodes[j];
            let partial = |slot: usize| {
                let x: [Dual<f64>; 3] =
                    std::array::from_fn(|s| if s == slot { Dual::variable(e[j][s]) } else { Dual::constant(e[j][s]) });
                equation(self.profile, k, lambda, r, x).d
            };
            let (p0, p1, p2) = (partial(0), partial(1), partial(2));
            // rφ′ = ρΦ′/2 and r²φ″ = (ρ²Φ″ − ρΦ′)/4
            let c1 = 0.5 * rho * p1 - 0.25 * rho * p2;
            let c2 = 0.25 * rho * rho * p2;
            for c in 0..m {
                jac[(j, c)] = c1 * self.grid.d1[(j, c)] + c2 * self.grid.d2[(j, c)];
            }
            jac[(j, j)] += p0;
        }
        let (r, rho) = (self.r(n), self.grid.nodes[n]);
        for c in 0..m {
            jac[(n, c)] = 0.5 * r * rho * self.grid.d1[(n, c)];
        }
        jac[(n, n)] += 2.0 * r;
        jac
    }

    fn residual_dd(&self, k: Problem, phi: &[DD]) -> Vec<DD> {
        let g = &self.grid_dd;
        let (d1, d2) = (g.derivative(phi), g.second_derivative(phi));
        let n = phi.len() - 1;
        let e = |j: usize| euler_from_rho(g.nodes[j], phi[j], d1[j], d2[j]);
        let r = |j: usize| g.nodes[j] * g.nodes[j];
        let mut res: Vec<DD> = (0..n).map(|j| equation(self.profile, k, 1.0, r(j), e(j))).collect();
        res.push(u_from_phi(r(n), e(n))[1]);
        res
    }

    /// Iterative refinement of a converged iterate: residuals in
    /// double-double, corrections from the f64 Jacobian.
    fn refine(&self, k: Problem, phi: &[f64]) -> (Vec<DD>, Vec<DD>) {
        let norm = |v: &[DD]| v.iter().fold(0.0f64, |m, x| m.max(x.to_f64().abs()));
        let lu = self.jacobian(k, 1.0, phi).lu();
        let mut best: Vec<DD> = phi.iter().map(|&p| DD::new(p)).collect();
        let mut best_res = self.residual_dd(k, &best);
        for _ in 0..REFINE_STEPS {
            let rhs = DVector::from_iterator(best_res.len(), best_res.iter().map(|x| -x.to_f64()));
            let Some(step) = lu.solve(&rhs) else { break };
            let trial: Vec<DD> = best.iter().zip(step.iter()).map(|(p, s)| *p + DD::new(*s)).collect();
            let res = self.residual_dd(k, &trial);
            if !(norm(&res) < 0.5 * norm(&best_res)) {
                break;
            }
            best = trial;
            best_res = res;
        }
        (best, best_res)
    }

    fn admissible(&self, phi: &[f64]) -> Result<(), SolverError> {
        let e = self.euler(phi);
        for (j, ej) in e.iter().enumerate().take(self.grid.len() - 1) {
            let r = self.r(j);
            let [s1, s2] = cone(self.profile, r, *ej);
            if !(s1 > 0.0 && s2 > 0.0) {
                return Err(SolverError::AdmissibilityLost { r, sigma1: s1, sigma2: s2 });
            }
        }
        Ok(())
    }

    /// Damped Newton from `phi`; returns the iterate and iteration count.
    fn newton(&self, k: Problem, lambda: f64, mut phi: Vec<f64>, opts: &SolveOptions) -> Result<(Vec<f64>, usize), SolverError> {
        let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut res = self.residual(k, lambda, &phi);
        let mut trace = vec![norm(&res)];
        for it in 0..opts.max_iterations {
            let current = norm(&res);
            if current < opts.tol {
                return Ok((phi, it));
            }
            let jac = self.jacobian(k, lambda, &phi);
            let rhs = DVector::from_iterator(res.len(), res.iter().map(|x| -x));
            let step = jac.lu().solve(&rhs).ok_or_else(|| SolverError::NewtonDiverged {
                iterations: it,
                trace: trace.clone(),
            })?;
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..=40 {
                let trial: Vec<f64> = phi.iter().zip(step.iter()).map(|(p, s)| p + t * s).collect();
                let tr = self.residual(k, lambda, &trial);
                let n = norm(&tr);
                if n.is_finite() && n < current {
                    accepted = Some((trial, tr));
                    break;
                }
                t *= 0.5;
            }
            let Some((trial, tr)) = accepted else {
                // a step that cannot lower the residual at round-off level is convergence
                if current < 1e3 * opts.tol {
                    return Ok((phi, it));
                }
                return Err(SolverError::NewtonDiverged { iterations: it, trace });
            };
            phi = trial;
            res = tr;
            trace.push(norm(&res));
            if k == Problem::Sigma2 {
                self.admissible(&phi)?;
            }
            if norm(step.as_slice()) * t < 1e-15 {
                return Ok((phi, it + 1));
            }
        }
        if norm(&res) < 1e3 * opts.tol {
            return Ok((phi, opts.max_iterations));
        }
        Err(SolverError::NewtonDiverged {
            iterations: opts.max_iterations,
            trace,
        })
    }
}

fn radial_parts(metric: &CollarMetric) -> Result<(&Profile, f64), SolverError> {
    let m = metric
        .radial()
        .ok_or_else(|| SolverError::NotRadial("torus collars have no interior".into()))?;
    if m.topology.is_none() {
        return Err(SolverError::NotRadial("collar-only catalog entry".into()));
    }
    Ok((&m.profile, m.r_max))
}

const REFINE_STEPS: usize = 12;

/// Small-`r` window and sample count for reading off `(f₀, f₁, f₂)`.
const COEFFICIENT_WINDOW: f64 = 0.002;
const COEFFICIENT_SAMPLES: usize = 60;

impl RadialSolution {
    fn assemble(k: Problem, setup: &Setup<'_>, phi: &[f64], iterations: usize) -> Self {
        let (phi, residual) = setup.refine(k, phi);
        let g = &setup.grid_dd;
        let nodal = Nodal {
            grid: g.clone(),
            phi_rho: g.derivative(&phi),
            phi_rhorho: g.second_derivative(&phi),
            phi,
        };
        let m = g.nodes.len();
        let mut r = Vec::with_capacity(m);
        let mut jets = Vec::with_capacity(m);
        for j in 0..m {
            let rho = g.nodes[j];
            let rj = rho * rho;
            let e = euler_from_rho(rho, nodal.phi[j], nodal.phi_rho[j], nodal.phi_rhorho[j]);
            r.push(rj.to_f64());
            jets.push(u_from_phi(rj, e).map(|x| x.to_f64()));
        }
        let round = |v: &[DD]| v.iter().map(|x| x.to_f64()).collect::<Vec<f64>>();
        let residual = round(&residual);
        let residual_norm = residual.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        RadialSolution {
            k,
            grid: setup.grid.clone(),
            r,
            u: jets.iter().map(|j| j[0]).collect(),
            du: jets.iter().map(|j| j[1]).collect(),
            ddu: jets.iter().map(|j| j[2]).collect(),
            phi: round(&nodal.phi),
            phi_rho: round(&nodal.phi_rho),
            phi_rhorho: round(&nodal.phi_rhorho),
            residual,
            residual_norm,
            iterations,
            nodal,
        }
    }

    pub fn r_max(&self) -> f64 {
        self.grid.b * self.grid.b
    }

    /// `(φ, rφ′, r²φ″)` at `r` by barycentric interpolation, in the precision of `T`.
    pub fn phi_at<T: Real>(&self, r: T) -> [T; 3] {
        let rho = r.sqrt();
        let g = &self.nodal.grid;
        euler_from_rho(
            rho,
            g.interpolate(&self.nodal.phi, rho),
            g.interpolate(&self.nodal.phi_rho, rho),
            g.interpolate(&self.nodal.phi_rhorho, rho),
        )
    }

    /// `(u, u′, u″)` at `r`.
    pub fn u_jet<T: Real>(&self, r: T) -> [T; 3] {
        u_from_phi(r, self.phi_at(r))
    }

    /// `u` at `r`.
    pub fn u_at<T: Real>(&self, r: T) -> T {
        let phi = self.nodal.grid.interpolate(&self.nodal.phi, r.sqrt());
        r * (T::one() + r * phi)
    }

    /// `(u, u′)` at `r`.
    pub fn u_slope<T: Real>(&self, r: T) -> (T, T) {
        let [u, du, _] = self.u_jet(r);
        (u, du)
    }

    /// `(f₀, f₁, f₂)`, from a least-squares fit of `φ` near the boundary by
    /// `1, r, r², r³, r³ log r, r⁴, r⁴ log r`.
    pub fn boundary_coefficients(&self) -> [f64; 3] {
        let hi = COEFFICIENT_WINDOW.min(0.25 * self.r_max());
        let rows: Vec<(f64, f64)> = (0..COEFFICIENT_SAMPLES)
            .map(|i| {
                let t = (i as f64 + 0.5) / COEFFICIENT_SAMPLES as f64;
                let r = hi * t * t;
                (r, self.phi_at(r)[0])
            })
            .collect();
        let basis = |r: f64| [1.0, r, r * r, r.powi(3), r.powi(3) * r.ln(), r.powi(4), r.powi(4) * r.ln()];
        let a = DMatrix::from_fn(rows.len(), 7, |i, j| basis(rows[i].0)[j] * hi.powi(-[0, 1, 2, 3, 3, 4, 4][j]));
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|x| x.1));
        let x = a.svd(true, true).solve(&b, 1e-14).expect("svd solve");
        [x[0], x[1] / hi, x[2] / (hi * hi)]
    }

    /// Largest residual on the midpoints between nodes, away from the centre.
    pub fn off_grid_residual(&self, profile: &Profile) -> f64 {
        let n = self.grid.len() - 1;
        (0..n - 1)
            .map(|j| {
                let rho = 0.5 * (self.grid.nodes[j] + self.grid.nodes[j + 1]);
                let r = rho * rho;
                equation_residual(profile, self.k, r, self.phi_at(r)).abs()
            })
            .fold(0.0, f64::max)
    }

    pub const CSV_HEADER: [&'static str; 5] = ["node", "r", "u", "du", "residual"];

    /// Nodal table with round-trip float formatting.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for j in 0..self.grid.len() {
            w.write_record([
                j.to_string(),
                self.r[j].to_string(),
                self.u[j].to_string(),
                self.du[j].to_string(),
                self.residual[j].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn setup_for(profile: &Profile, r_max: f64, degree: usize) -> Setup<'_> {
    Setup {
        profile,
        grid: ChebGrid::new(degree, 0.0, r_max.sqrt()),
        grid_dd: ChebGridDD::new(degree, DD::ZERO, DD::new(r_max).sqrt()),
    }
}

/// The hyperbolic metric on the unit ball, `u = (1 − s²)/2` with `s` the
/// Euclidean radius, which solves both problems.
pub fn exact_hyperbolic_ball() -> RadialSolution {
    let profile = Profile::Ball { radius: 1.0 };
    let setup = setup_for(&profile, 1.0, SolveOptions::default().degree);
    let phi = vec![-0.5; setup.grid.len()];
    RadialSolution::assemble(Problem::Yamabe, &setup, &phi, 0)
}

pub fn solve_radial(metric: &CollarMetric, k: Problem) -> Result<RadialSolution, SolverError> {
    solve_radial_with(metric, k, &SolveOptions::default())
}

pub fn solve_radial_with(metric: &CollarMetric, k: Problem, opts: &SolveOptions) -> Result<RadialSolution, SolverError> {
    let (profile, r_max) = radial_parts(metric)?;
    let setup = setup_for(profile, r_max, opts.degree);
    let jet = boundary_jet(metric)?;
    let formal = expansion(&jet.points[0], k);
    let start = match &opts.initial_phi {
        Some(p) if p.len() == setup.grid.len() => p.clone(),
        Some(p) => {
            return Err(SolverError::NotRadial(format!(
                "initial iterate has {} values for {} nodes",
                p.len(),
                setup.grid.len()
            )))
        }
        None => vec![-jet.points[0].mean / 6.0; setup.grid.len()],
    };
    let (phi, iterations) = match k {
        Problem::Yamabe => setup.newton(k, 1.0, start, opts)?,
        Problem::Sigma2 => {
            let (mut phi, mut its) = if opts.initial_phi.is_some() {
                (start, 0)
            } else {
                setup.newton(Problem::Yamabe, 1.0, start, opts)?
            };
            setup.admissible(&phi)?;
            // continuation in the strength of the σ₂ term
            let mut lambda = 0.0f64;
            let mut dl = 1.0;
            while lambda < 1.0 {
                let next = (lambda + dl).min(1.0);
                match setup.newton(k, next, phi.clone(), opts) {
                    Ok((p, n)) => {
                        phi = p;
                        its += n;
                        lambda = next;
                        dl *= 2.0;
                    }
                    Err(e) if dl < 1.0 / 64.0 => return Err(e),
                    Err(_) => dl *= 0.5,
                }
            }
            (phi, its)
        }
    };
    let sol = RadialSolution::assemble(k, &setup, &phi, iterations);
    if sol.u[1..].iter().any(|&u| u <= 0.0) {
        return Err(SolverError::NewtonDiverged {
            iterations,
            trace: vec![sol.residual_norm],
        });
    }
    for (index, (solved, formal)) in sol.boundary_coefficients().into_iter().zip(formal).enumerate() {
        if (solved - formal).abs() > opts.coefficient_tol * (1.0 + formal.abs()) {
            return Err(SolverError::ExpansionMismatch { index, solved, formal });
        }
    }
    Ok(sol)
}

/// Diagnostics of a solved metric on sample radii.
#[derive(Clone, Debug, Serialize)]
pub struct SolutionDiagnostics {
    /// `max |Ric(g) + 3g|` in a `g`-orthonormal frame.
    pub einstein_defect: f64,
    pub min_cone: [f64; 2],
}

/// `Ric(g) + 3g = 2ḡ⁻¹A + (tr A + 3)` in a `g`-orthonormal frame, sampled on
/// the interior nodes.
pub fn diagnostics(metric: &CollarMetric, sol: &RadialSolution) -> Result<SolutionDiagnostics, SolverError> {
    let (profile, _) = radial_parts(metric)?;
    let mut defect = 0.0f64;
    let mut min_cone = [f64::INFINITY; 2];
    let n = sol.grid.len() - 1;
    for j in 0..n {
        let r = sol.r[j];
        let phi = euler_from_rho(sol.grid.nodes[j], sol.phi[j], sol.phi_rho[j], sol.phi_rhorho[j]);
        let b = frame_b(profile, r, phi);
        let tr = trace4(&b);
        // A = −½ + rB, so 2A + (trA + 3) = 2rB + r trB
        for (i, row) in b.iter().enumerate() {
            for (l, x) in row.iter().enumerate() {
                let v = 2.0 * r * x + if i == l { r * tr } else { 0.0 };
                defect = defect.max(v.abs());
            }
        }
        let c = cone(profile, r, phi);
        min_cone = [min_cone[0].min(c[0]), min_cone[1].min(c[1])];
    }
    Ok(SolutionDiagnostics {
        einstein_defect: defect,
        min_cone,
    })
}
