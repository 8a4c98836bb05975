//! Gauss-Bonnet budgets and the statements built on them: conformal
//! invariance of `Ṽ`, the anomaly of `V` under rescaling, the
//! Poincaré-Einstein inequality and the comparison of the two problems.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::collar_geometry::{boundary_jet, weyl_energy, CollarMetric, GeometryError, RadialOmega};
use crate::expansion_engine::{ExpansionError, ExpansionProfile, Problem};
use crate::radial_solver::{diagnostics, solve_radial, RadialSolution, SolverError};
use crate::renormalizer::{
    einstein_integral, fp_einstein, fp_einstein_rescaled, renormalized_volume, renormalized_volume_rescaled,
    rescaled_profile, RenormError,
};
use crate::report::Criterion;

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("geometry has no Euler characteristic")]
    MissingChi,
    #[error("Ṽ for k = 1 needs an umbilic boundary; use the combination quantity instead")]
    NotUmbilic,
    #[error("finite-difference error estimate {estimate:e} exceeds {limit:e}")]
    StepTooCoarse { estimate: f64, limit: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Renorm(#[from] RenormError),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `|Ric(g) + 3g|_∞` below this counts as Poincaré-Einstein.
pub const EINSTEIN_TOL: f64 = 1e-6;
/// Spread allowed for `Ṽ` and `Ṽ^{σ₂}` across rescalings.
pub const VTILDE_SPREAD_TOL: f64 = 1e-5;
/// Spread allowed for `6V − ½fp∫|E|² + ∫𝓑` across rescalings.
pub const COMBINATION_SPREAD_TOL: f64 = 1e-4;
pub const ANOMALY_TOL: f64 = 1e-5;
pub const ANOMALY_STEP: f64 = 1e-3;
/// Largest Richardson estimate of the finite-difference error.
pub const RICHARDSON_LIMIT: f64 = 1e-6;
pub const SHIFT_TOL: f64 = 1e-6;
/// Slack in `V₂ ≤ V₁`.
pub const COMPARISON_TOL: f64 = 1e-8;

const WEYL_PANELS: usize = 64;

fn boundary_integral(profile: &ExpansionProfile) -> f64 {
    profile.integrate(|p| p.bterm)
}

/// How the Einstein term was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EinsteinRoute {
    /// Umbilic boundary: `∫|E|²` converges.
    Convergent,
    /// Finite part of the ladder.
    FinitePart,
    /// `k = 2`: no Einstein term.
    Absent,
}

/// Terms of `8π²χ = ¼∫|W|² − ½fp∫|E|² + 6V + ∫𝓑`.
#[derive(Clone, Debug, Serialize)]
pub struct CgbReport {
    pub k: Problem,
    pub chi: i64,
    pub umbilic: bool,
    /// `¼∫|W|² dv_g`
    pub weyl_term: f64,
    /// `½fp∫|E|²`, zero for `k = 2`.
    pub einstein_term: f64,
    pub einstein_route: EinsteinRoute,
    /// `6V(g, ḡ)`
    pub volume_term: f64,
    /// `∫𝓑 dv_h`
    pub boundary_term: f64,
    pub volume: f64,
    pub vtilde: f64,
    pub residual: f64,
    /// `|residual|` over the largest term.
    pub relative_residual: f64,
}

impl CgbReport {
    pub fn criteria(&self, tol: f64) -> Vec<Criterion> {
        vec![Criterion::below("cgb relative residual", self.relative_residual, tol)]
    }
}

fn einstein_term(metric: &CollarMetric, sol: &RadialSolution, umbilic: bool) -> Result<(f64, EinsteinRoute), VerifierError> {
    Ok(match sol.k {
        Problem::Sigma2 => (0.0, EinsteinRoute::Absent),
        Problem::Yamabe if umbilic => (0.5 * einstein_integral(metric, sol)?, EinsteinRoute::Convergent),
        Problem::Yamabe => (0.5 * fp_einstein(metric, sol)?.fp, EinsteinRoute::FinitePart),
    })
}

/// Gauss-Bonnet budget from an existing solution.
pub fn cgb_budget(metric: &CollarMetric, sol: &RadialSolution) -> Result<CgbReport, VerifierError> {
    let chi = metric.euler_characteristic().ok_or(VerifierError::MissingChi)?;
    let jet = boundary_jet(metric)?;
    let profile = ExpansionProfile::new(&jet, sol.k);
    let rv = renormalized_volume(metric, sol)?;
    let weyl_term = 0.25 * weyl_energy(metric, WEYL_PANELS)?;
    let (einstein_term, einstein_route) = einstein_term(metric, sol, profile.umbilic)?;
    let boundary_term = boundary_integral(&profile);
    let volume_term = 6.0 * rv.volume;
    let lhs = 8.0 * PI * PI * chi as f64;
    let residual = lhs - (weyl_term - einstein_term + volume_term + boundary_term);
    let scale = [lhs, weyl_term, einstein_term, volume_term, boundary_term]
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(CgbReport {
        k: sol.k,
        chi,
        umbilic: profile.umbilic,
        weyl_term,
        einstein_term,
        einstein_route,
        volume_term,
        boundary_term,
        volume: rv.volume,
        vtilde: rv.volume + boundary_term / 6.0,
        residual,
        relative_residual: residual.abs() / scale,
    })
}

pub fn cgb_verify(metric: &CollarMetric, k: Problem) -> Result<CgbReport, VerifierError> {
    metric.euler_characteristic().ok_or(VerifierError::MissingChi)?;
    let sol = solve_radial(metric, k)?;
    cgb_budget(metric, &sol)
}

/// `Ṽ = V + ⅙∫𝓑` (or `Ṽ^{σ₂}`) of a solution.
pub fn vtilde_of(metric: &CollarMetric, sol: &RadialSolution) -> Result<f64, VerifierError> {
    let jet = boundary_jet(metric)?;
    if sol.k == Problem::Yamabe && !jet.is_umbilic() {
        return Err(VerifierError::NotUmbilic);
    }
    let profile = ExpansionProfile::new(&jet, sol.k);
    Ok(renormalized_volume(metric, sol)?.volume + boundary_integral(&profile) / 6.0)
}

pub fn vtilde(metric: &CollarMetric, k: Problem) -> Result<f64, VerifierError> {
    if k == Problem::Yamabe && !boundary_jet(metric)?.is_umbilic() {
        return Err(VerifierError::NotUmbilic);
    }
    vtilde_of(metric, &solve_radial(metric, k)?)
}

/// Which conformal invariant a suite tracks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    /// `V + ⅙∫𝓑`, `k = 1` on umbilic boundaries.
    VTilde,
    /// `V^{σ₂} + ⅙∫𝓑^{σ₂}`.
    VTildeSigma2,
    /// `6V − ½fp∫|E|² + ∫𝓑`, `k = 1` on any boundary.
    Combination,
}

impl Invariant {
    pub fn spread_tol(self) -> f64 {
        match self {
            Invariant::Combination => COMBINATION_SPREAD_TOL,
            _ => VTILDE_SPREAD_TOL,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub k: Problem,
    pub invariant: Invariant,
    /// `‖ω‖_∞` per rescaling; the first entry is `ω = 0`.
    pub omega_sup: Vec<f64>,
    pub values: Vec<f64>,
    pub spread: f64,
}

impl InvarianceReport {
    pub fn criteria(&self) -> Vec<Criterion> {
        vec![Criterion::below("invariant spread", self.spread, self.invariant.spread_tol())]
    }
}

/// Five fixed radial factors with `‖ω‖_∞ ≤ 0.5` on `metric`.
pub fn default_omegas(metric: &CollarMetric) -> Result<Vec<RadialOmega>, VerifierError> {
    let shapes = [
        vec![0.3],
        vec![0.2, -0.3],
        vec![-0.25, 0.2, 0.1],
        vec![0.1, 0.35, -0.2],
        vec![-0.4, 0.15],
    ];
    let r_max = metric.radial().map(|m| m.r_max).unwrap_or(1.0);
    shapes
        .into_iter()
        .map(|c| {
            let om = RadialOmega::for_metric(metric, c)?;
            let sup = om.sup_norm(r_max);
            Ok(if sup > 0.5 { om.scaled(0.5 / sup) } else { om })
        })
        .collect()
}

/// The invariant for `e^{2ω}ḡ`, from fresh ladders in the rescaled distance.
fn invariant_value(
    metric: &CollarMetric,
    sol: &RadialSolution,
    invariant: Invariant,
    omega: &RadialOmega,
) -> Result<f64, VerifierError> {
    let volume = renormalized_volume_rescaled(metric, sol, omega)?.volume;
    let boundary = boundary_integral(&rescaled_profile(metric, sol.k, omega)?);
    Ok(match invariant {
        Invariant::VTilde | Invariant::VTildeSigma2 => volume + boundary / 6.0,
        Invariant::Combination => {
            let fp = fp_einstein_rescaled(metric, sol, omega)?.finite_part();
            6.0 * volume - 0.5 * fp + boundary
        }
    })
}

pub fn invariance_suite(
    metric: &CollarMetric,
    k: Problem,
    omegas: &[RadialOmega],
) -> Result<InvarianceReport, VerifierError> {
    let umbilic = boundary_jet(metric)?.is_umbilic();
    let invariant = match k {
        Problem::Sigma2 => Invariant::VTildeSigma2,
        Problem::Yamabe if umbilic => Invariant::VTilde,
        Problem::Yamabe => Invariant::Combination,
    };
    let sol = solve_radial(metric, k)?;
    let r_max = metric.radial().map(|m| m.r_max).unwrap_or(1.0);
    let mut omega_sup = vec![0.0];
    let mut values = vec![invariant_value(metric, &sol, invariant, &RadialOmega::constant(0.0))?];
    for om in omegas {
        omega_sup.push(om.sup_norm(r_max));
        values.push(invariant_value(metric, &sol, invariant, om)?);
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    Ok(InvarianceReport {
        k,
        invariant,
        omega_sup,
        values,
        spread: hi - lo,
    })
}

/// Finite-difference derivative against the boundary formula.
#[derive(Clone, Debug, Serialize)]
pub struct AnomalyPair {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    /// `|D(h) − D(2h)|/3`.
    pub richardson: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnomalyReport {
    pub k: Problem,
    pub omega_jet: [f64; 4],
    pub volume: AnomalyPair,
    /// `k = 1` only.
    pub einstein: Option<AnomalyPair>,
}

impl AnomalyReport {
    pub fn criteria(&self) -> Vec<Criterion> {
        let mut out = vec![Criterion::below("volume anomaly gap", self.volume.gap, ANOMALY_TOL)];
        if let Some(e) = &self.einstein {
            out.push(Criterion::below(
                "Einstein anomaly gap",
                e.gap / e.rhs.abs().max(1.0),
                ANOMALY_TOL,
            ));
        }
        out
    }
}

fn central_difference<F: Fn(f64) -> Result<f64, VerifierError>>(f: F, rhs: f64) -> Result<AnomalyPair, VerifierError> {
    let h = ANOMALY_STEP;
    let d = |s: f64| -> Result<f64, VerifierError> { Ok((f(s)? - f(-s)?) / (2.0 * s)) };
    let (d1, d2) = (d(h)?, d(2.0 * h)?);
    let richardson = (d1 - d2).abs() / 3.0;
    let limit = RICHARDSON_LIMIT * d1.abs().max(1.0);
    if richardson > limit {
        return Err(VerifierError::StepTooCoarse {
            estimate: richardson,
            limit,
        });
    }
    Ok(AnomalyPair {
        lhs: d1,
        rhs,
        gap: (d1 - rhs).abs(),
        richardson,
    })
}

/// `d/dt V(g, e^{2tω}ḡ)` at `t = 0` against
/// `∫ Σ_j v⁽³⁻ʲ⁾ ∂_r^j ω/(j+1)! dv_h`, and for `k = 1` the Einstein analogue
/// `d/dt fp∫|E|² = ∫ (𝓕-density ω + ½ a-density ∂_r ω) dv_h`.
pub fn anomaly_verify(metric: &CollarMetric, k: Problem, omega: &RadialOmega) -> Result<AnomalyReport, VerifierError> {
    let sol = solve_radial(metric, k)?;
    let jet = boundary_jet(metric)?;
    let profile = ExpansionProfile::new(&jet, k);
    let w = omega.jet(0.0);
    let rhs = profile.integrate(|p| p.v[3] * w[0] + p.v[2] * w[1] / 2.0 + p.v[1] * w[2] / 6.0 + p.v[0] * w[3] / 24.0);
    let volume = central_difference(
        |t| Ok(renormalized_volume_rescaled(metric, &sol, &omega.scaled(t))?.volume),
        rhs,
    )?;
    let einstein = if k == Problem::Yamabe {
        let rhs = profile.integrate(|p| p.f_density * w[0] + 0.5 * p.a_density * w[1]);
        Some(central_difference(
            |t| Ok(fp_einstein_rescaled(metric, &sol, &omega.scaled(t))?.finite_part()),
            rhs,
        )?)
    } else {
        None
    };
    Ok(AnomalyReport {
        k,
        omega_jet: w,
        volume,
        einstein,
    })
}

/// `V(g, e^{2c}ḡ) − V(g, ḡ)` against `ℰc`.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantShift {
    pub c: f64,
    pub shift: f64,
    pub expected: f64,
    pub gap: f64,
}

pub fn constant_shift(metric: &CollarMetric, sol: &RadialSolution, c: f64) -> Result<ConstantShift, VerifierError> {
    let base = renormalized_volume(metric, sol)?;
    let scaled = renormalized_volume_rescaled(metric, sol, &RadialOmega::constant(c))?;
    let shift = scaled.volume - base.volume;
    let expected = base.energy * c;
    Ok(ConstantShift {
        c,
        shift,
        expected,
        gap: (shift - expected).abs(),
    })
}

/// `¼∫|W|² + 6Ṽ − 8π²χ = ½∫|E|²` on umbilic boundaries.
#[derive(Clone, Debug, Serialize)]
pub struct PeReport {
    /// `½∫|E|²`, nonnegative by construction.
    pub gap: f64,
    /// `¼∫|W|² + 6Ṽ − 8π²χ` from the budget terms.
    pub budget_gap: f64,
    pub einstein_defect: f64,
    /// `|Ric(g) + 3g|_∞ < EINSTEIN_TOL`.
    pub einstein: bool,
}

impl PeReport {
    pub fn criteria(&self, tol: f64) -> Vec<Criterion> {
        let scale = self.gap.abs().max(1.0);
        vec![
            Criterion::nonnegative("PE gap", self.gap, 0.0),
            Criterion::below("PE gap against budget", (self.gap - self.budget_gap) / scale, tol),
            Criterion::flag("equality iff Einstein", (self.gap < tol * scale) == self.einstein),
        ]
    }
}

pub fn pe_inequality(metric: &CollarMetric) -> Result<PeReport, VerifierError> {
    if !boundary_jet(metric)?.is_umbilic() {
        return Err(VerifierError::NotUmbilic);
    }
    let sol = solve_radial(metric, Problem::Yamabe)?;
    let cgb = cgb_budget(metric, &sol)?;
    let einstein_defect = diagnostics(metric, &sol)?.einstein_defect;
    Ok(PeReport {
        gap: cgb.einstein_term,
        budget_gap: cgb.weyl_term + 6.0 * cgb.vtilde - 8.0 * PI * PI * cgb.chi as f64,
        einstein_defect,
        einstein: einstein_defect < EINSTEIN_TOL,
    })
}

/// `V(g₂, ḡ) ≤ V(g₁, ḡ)` on umbilic boundaries.
#[derive(Clone, Debug, Serialize)]
pub struct NewtonReport {
    pub v1: f64,
    pub v2: f64,
    pub holds: bool,
    /// Decided by the Einstein diagnostic of `g₁`, never by `V₁ = V₂`.
    pub equality: bool,
    pub einstein_defect: f64,
}

impl NewtonReport {
    pub fn criteria(&self) -> Vec<Criterion> {
        vec![Criterion::nonnegative("V1 - V2", self.v1 - self.v2, COMPARISON_TOL)]
    }
}

pub fn newton_compare(metric: &CollarMetric) -> Result<NewtonReport, VerifierError> {
    if !boundary_jet(metric)?.is_umbilic() {
        return Err(VerifierError::NotUmbilic);
    }
    let s1 = solve_radial(metric, Problem::Yamabe)?;
    let s2 = solve_radial(metric, Problem::Sigma2)?;
    let v1 = renormalized_volume(metric, &s1)?.volume;
    let v2 = renormalized_volume(metric, &s2)?.volume;
    let einstein_defect = diagnostics(metric, &s1)?.einstein_defect;
    Ok(NewtonReport {
        v1,
        v2,
        holds: v2 <= v1 + COMPARISON_TOL,
        equality: einstein_defect < EINSTEIN_TOL,
        einstein_defect,
    })
}
