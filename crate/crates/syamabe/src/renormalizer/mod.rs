//! Divergent, logarithmic and finite parts of volume and Einstein integrals
//! over `{ρ > ε}`, fitted along `ε` ladders and cross-checked against the
//! boundary integrals of the expansion coefficients.

mod fit;
mod ladder;

use serde::Serialize;
use thiserror::Error;

use crate::collar_geometry::{
    boundary_jet, jet_conformal_transform, rescaled_distance, CollarMetric, ConformalFactorJet, GeometryError,
    RadialOmega,
};
use crate::expansion_engine::{
    einstein_leading, energy_from_profile, energy_functional, EnergyCoefficients, ExpansionError, ExpansionProfile,
    Problem, TruncatedU,
};
use crate::numeric::geomspace;
use crate::radial_solver::RadialSolution;

pub use fit::{fit_finite_part, Basis, Ladder, LadderFit, Term, MAX_CONDITION, NUISANCE_ORDER, STABILITY_TOL};
pub use ladder::{
    collar_einstein_ladder, collar_top, collar_volume_ladder, default_epsilons, einstein_integral, einstein_ladder_by,
    einstein_norm,
    volume_ladder, volume_ladder_by, Exhaustion,
};

#[derive(Debug, Error)]
pub enum RenormError {
    #[error("ladder fit is ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("bad ladder: {0}")]
    BadLadder(String),
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("{quantity}: ladder gives {ladder}, boundary integrals give {analytic}")]
    RouteMismatch { quantity: String, ladder: f64, analytic: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Relative agreement required between the ladder and boundary-integral routes.
pub const ROUTE_TOL: f64 = 1e-5;

fn check_route(quantity: &str, ladder: f64, analytic: f64) -> Result<(), RenormError> {
    if (ladder - analytic).abs() > ROUTE_TOL * analytic.abs().max(1.0) {
        return Err(RenormError::RouteMismatch {
            quantity: quantity.into(),
            ladder,
            analytic,
        });
    }
    Ok(())
}

fn check_energy(fit: &LadderFit, analytic: &EnergyCoefficients) -> Result<(), RenormError> {
    for (j, (&l, &a)) in fit.divergent().iter().zip(&analytic.c).enumerate() {
        check_route(&format!("c{j}"), l, a)?;
    }
    check_route("log coefficient", fit.log_coefficient(), analytic.energy)
}

#[derive(Clone, Debug, Serialize)]
pub struct RenormalizedVolume {
    pub k: Problem,
    pub volume: f64,
    /// `c₀, c₁, c₂` from the ladder.
    pub c: [f64; 3],
    pub energy: f64,
    /// The same coefficients from boundary integrals.
    pub analytic: EnergyCoefficients,
    pub fit: LadderFit,
}

impl RenormalizedVolume {
    fn from_fit(k: Problem, fit: LadderFit, analytic: EnergyCoefficients) -> Result<Self, RenormError> {
        check_energy(&fit, &analytic)?;
        Ok(RenormalizedVolume {
            k,
            volume: fit.finite_part(),
            c: [fit.coefficients[0], fit.coefficients[1], fit.coefficients[2]],
            energy: fit.log_coefficient(),
            analytic,
            fit,
        })
    }
}

/// `V(g, ḡ)` from the distance ladder, with `c_j` and `ℰ` checked against
/// the boundary route.
pub fn renormalized_volume(metric: &CollarMetric, sol: &RadialSolution) -> Result<RenormalizedVolume, RenormError> {
    let ladder = volume_ladder(metric, sol, &default_epsilons())?;
    let fit = fit_finite_part(&ladder, Basis::Volume)?;
    RenormalizedVolume::from_fit(sol.k, fit, energy_functional(metric, sol.k)?)
}

/// Boundary jet and coefficient profile of `e^{2ω}ḡ`.
pub fn rescaled_profile(metric: &CollarMetric, k: Problem, omega: &RadialOmega) -> Result<ExpansionProfile, RenormError> {
    let jet = boundary_jet(metric)?;
    let om = ConformalFactorJet::radial(metric, omega);
    Ok(ExpansionProfile::new(&jet_conformal_transform(&jet, &om)?, k))
}

/// `V(g, e^{2ω}ḡ)` from the ladder in the rescaled distance, checked
/// against the boundary route of the rescaled jet.
pub fn renormalized_volume_rescaled(
    metric: &CollarMetric,
    sol: &RadialSolution,
    omega: &RadialOmega,
) -> Result<RenormalizedVolume, RenormError> {
    let profile = rescaled_distance(metric, omega)?;
    let ladder = volume_ladder_by(metric, sol, &default_epsilons(), &Exhaustion::Rescaled(profile))?;
    let fit = fit_finite_part(&ladder, Basis::Volume)?;
    let analytic = energy_from_profile(&rescaled_profile(metric, sol.k, omega)?);
    RenormalizedVolume::from_fit(sol.k, fit, analytic)
}

/// Volume fit along the level sets of the solution itself. Its log
/// coefficient must agree with the distance ladder's.
pub fn volume_fit_by_u(metric: &CollarMetric, sol: &RadialSolution) -> Result<LadderFit, RenormError> {
    let ladder = volume_ladder_by(metric, sol, &default_epsilons(), &Exhaustion::DefiningFunction)?;
    fit_finite_part(&ladder, Basis::Volume)
}

/// Volume fit of the truncated defining function on the collar
/// `{ρ > ε, r < collar_top}`; works on every geometry, including tori.
pub fn collar_volume_fit(metric: &CollarMetric, k: Problem, exhaustion: &Exhaustion) -> Result<LadderFit, RenormError> {
    let u = TruncatedU::new(metric, k, 3)?;
    let ladder = collar_volume_ladder(metric, &u, &default_epsilons(), exhaustion)?;
    fit_finite_part(&ladder, Basis::Volume)
}

#[derive(Clone, Debug, Serialize)]
pub struct EinsteinFinitePart {
    /// Coefficient of `ε⁻¹`.
    pub a: f64,
    /// Coefficient of `log(1/ε)`.
    pub f: f64,
    pub fp: f64,
    pub analytic_a: f64,
    pub analytic_f: f64,
    pub fit: LadderFit,
}

fn einstein_from_fit(metric: &CollarMetric, fit: LadderFit) -> Result<EinsteinFinitePart, RenormError> {
    let jet = boundary_jet(metric)?;
    let lead = einstein_leading(&jet, 3)?;
    let (analytic_a, analytic_f) = (lead.a.unwrap_or(0.0), lead.f.unwrap_or(0.0));
    check_route("Einstein ε⁻¹ coefficient", fit.coefficients[0], analytic_a)?;
    check_route("Einstein log coefficient", fit.coefficients[1], analytic_f)?;
    Ok(EinsteinFinitePart {
        a: fit.coefficients[0],
        f: fit.coefficients[1],
        fp: fit.finite_part(),
        analytic_a,
        analytic_f,
        fit,
    })
}

/// `fp ∫_{r>ε} |E|² dv_g` for a Yamabe solution, with `a` and `𝓕` checked
/// against boundary integrals.
pub fn fp_einstein(metric: &CollarMetric, sol: &RadialSolution) -> Result<EinsteinFinitePart, RenormError> {
    if sol.k != Problem::Yamabe {
        return Err(RenormError::Unsupported("the Einstein finite part is taken for k = 1".into()));
    }
    let ladder = einstein_ladder_by(metric, sol, &default_epsilons(), &Exhaustion::Distance)?;
    einstein_from_fit(metric, fit_finite_part(&ladder, Basis::Einstein)?)
}

/// `fp ∫|E|²` cut by the distance for `e^{2ω}ḡ`. No route check: the
/// boundary coefficients are those of the rescaled jet.
pub fn fp_einstein_rescaled(
    metric: &CollarMetric,
    sol: &RadialSolution,
    omega: &RadialOmega,
) -> Result<LadderFit, RenormError> {
    let profile = rescaled_distance(metric, omega)?;
    let ladder = einstein_ladder_by(metric, sol, &default_epsilons(), &Exhaustion::Rescaled(profile))?;
    fit_finite_part(&ladder, Basis::Einstein)
}

/// Einstein fit of the truncated defining function on the collar.
pub fn collar_einstein_fit(metric: &CollarMetric) -> Result<EinsteinFinitePart, RenormError> {
    let u = TruncatedU::new(metric, Problem::Yamabe, 3)?;
    let ladder = collar_einstein_ladder(metric, &u, &default_epsilons())?;
    let fit = fit_finite_part(&ladder, Basis::Einstein)?;
    let jet = boundary_jet(metric)?;
    let lead = einstein_leading(&jet, 3)?;
    Ok(EinsteinFinitePart {
        a: fit.coefficients[0],
        f: fit.coefficients[1],
        fp: fit.finite_part(),
        analytic_a: lead.a.unwrap_or(0.0),
        analytic_f: lead.f.unwrap_or(0.0),
        fit,
    })
}

/// Growth of `sup_{r ≥ ε} |E|_ḡ` as `ε → 0`.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthFit {
    pub epsilons: Vec<f64>,
    pub maxima: Vec<f64>,
    /// Slope of `log sup|E|` against `log(1/ε)`; zero when `E` vanishes.
    pub slope: f64,
}

/// Suprema below this are rounding noise.
const EINSTEIN_NOISE: f64 = 1e-9;

pub fn einstein_growth(metric: &CollarMetric, sol: &RadialSolution, epsilons: &[f64]) -> Result<GrowthFit, RenormError> {
    let lo = epsilons.iter().cloned().fold(f64::INFINITY, f64::min);
    let samples = geomspace(lo, 0.99 * sol.r_max(), 400);
    let norms: Vec<f64> = samples
        .iter()
        .map(|&r| einstein_norm(metric, sol, r))
        .collect::<Result<_, _>>()?;
    let maxima: Vec<f64> = epsilons
        .iter()
        .map(|&e| {
            samples
                .iter()
                .zip(&norms)
                .filter(|(r, _)| **r >= e * (1.0 - 1e-12))
                .fold(0.0f64, |m, (_, n)| m.max(*n))
        })
        .collect();
    let slope = if maxima.iter().all(|&m| m < EINSTEIN_NOISE) {
        0.0
    } else {
        let xs: Vec<f64> = epsilons.iter().map(|e| -e.ln()).collect();
        let ys: Vec<f64> = maxima.iter().map(|m| m.max(EINSTEIN_NOISE).ln()).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    };
    Ok(GrowthFit {
        epsilons: epsilons.to_vec(),
        maxima,
        slope,
    })
}
