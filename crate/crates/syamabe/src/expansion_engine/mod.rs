//! Closed-form boundary coefficients: the expansion of the defining function,
//! the volume coefficients, the integrand ladders behind the Gauss-Bonnet
//! boundary term, and the checks that tie them together.

mod indicial;
mod residual;

use std::io::Write;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collar_geometry::{boundary_jet, BoundaryJet, CollarMetric, GeometryError, JetPoint};

pub use indicial::{indicial_roots, IndicialRoots};
pub use residual::{
    decay_fit, einstein_density, pde_pointwise, pde_residual, pdiv_residual, sigma2_ric_identity, DecayFit,
    PdeResidualPoint, Polynomial, RadialSeries, RicIdentity, ScalarField, TruncatedU,
};

/// Which singular problem fixes the defining function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// Constant scalar curvature `R_g = −12`.
    Yamabe,
    /// `σ₂(g⁻¹P_g) = 3/2`.
    Sigma2,
}

impl Problem {
    pub fn from_k(k: u8) -> Option<Self> {
        match k {
            1 => Some(Problem::Yamabe),
            2 => Some(Problem::Sigma2),
            _ => None,
        }
    }

    pub fn k(self) -> u8 {
        match self {
            Problem::Yamabe => 1,
            Problem::Sigma2 => 2,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExpansionError {
    #[error("dimension n = {n} is not supported here (only n = 3)")]
    DimensionUnsupported { n: usize },
    #[error("parameters out of range: k = {k}, n = {n} (need 1 ≤ k ≤ n + 1)")]
    ParameterOutOfRange { k: u64, n: u64 },
    #[error("decay fit unstable: {0}")]
    FitUnstable(String),
    #[error("unsupported geometry: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// All coefficients at one boundary point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointCoefficients {
    /// `u = r + f₀r² + f₁r³ + f₂r⁴ + …`
    pub f: [f64; 3],
    /// `v⁽⁰⁾ … v⁽³⁾`
    pub v: [f64; 4],
    /// `D₁, D₂, D₃`
    pub d: [f64; 3],
    /// `𝓘₁, 𝓘₂, 𝓘₃`
    pub i: [f64; 3],
    /// `B₀…B₃` (Yamabe) or `A₀…A₃` (σ₂), assembled from `𝓘` and `D`.
    pub b: [f64; 4],
    pub s: f64,
    pub bterm: f64,
    /// `S − 2B₃ − 𝓑`, a divergence once the Bianchi identity holds.
    pub div_remainder: f64,
    /// `(−5 L̊_{ij,}^{ij} + 25/3 Δ_h H)/12`.
    pub div_terms: f64,
    /// `4|L̊|²`
    pub a_density: f64,
    /// `8(tr L̊³ + L̊^{ij} W̄₀ᵢ₀ⱼ)`
    pub f_density: f64,
}

/// Coefficients over the whole boundary.
#[derive(Clone, Debug)]
pub struct ExpansionProfile {
    pub k: Problem,
    pub umbilic: bool,
    pub points: Vec<PointCoefficients>,
    pub weights: Vec<f64>,
}

impl ExpansionProfile {
    pub fn new(jet: &BoundaryJet, k: Problem) -> Self {
        let umbilic = jet.is_umbilic();
        let points = jet.points.iter().map(|p| point_coefficients(p, k, umbilic)).collect();
        ExpansionProfile {
            k,
            umbilic,
            points,
            weights: jet.weights.clone(),
        }
    }

    /// `∫_{∂M} f dv_h`.
    pub fn integrate<F: Fn(&PointCoefficients) -> f64>(&self, f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    pub const CSV_HEADER: [&'static str; 28] = [
        "point", "weight", "f0", "f1", "f2", "v0", "v1", "v2", "v3", "D1", "D2", "D3", "I1", "I2",
        "I3", "B0", "B1", "B2", "B3", "S", "Bterm", "div_remainder", "div_terms", "a_density",
        "F_density", "umbilic", "k", "boundary_volume",
    ];

    /// One row per boundary point, floats in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        let vol: f64 = self.weights.iter().sum();
        for (idx, (p, wt)) in self.points.iter().zip(&self.weights).enumerate() {
            let mut row = vec![idx.to_string(), wt.to_string()];
            row.extend(
                p.f.iter()
                    .chain(&p.v)
                    .chain(&p.d)
                    .chain(&p.i)
                    .chain(&p.b)
                    .chain(&[p.s, p.bterm, p.div_remainder, p.div_terms, p.a_density, p.f_density])
                    .map(|x| x.to_string()),
            );
            row.push(self.umbilic.to_string());
            row.push(self.k.k().to_string());
            row.push(vol.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `(f₀, f₁, f₂)` for the singular Yamabe problem. `f₂` needs `n = 3`.
pub fn yamabe_expansion(jet: &JetPoint, n: usize) -> Result<(f64, f64, Option<f64>), ExpansionError> {
    if n < 2 {
        return Err(ExpansionError::DimensionUnsupported { n });
    }
    let nf = n as f64;
    let f0 = -jet.mean / (2.0 * nf);
    let f1 = (-jet.rbar00 - jet.norm_lring2 + jet.rbar / (2.0 * nf)) / (3.0 * (nf - 1.0));
    let f2 = (n == 3).then(|| yamabe_f2(jet));
    Ok((f0, f1, f2))
}

fn yamabe_f2(p: &JetPoint) -> f64 {
    let h = p.mean;
    let rhs = -3.0 * p.rbar00_0 + p.dnu_rbar - p.lapl_h - 6.0 * p.l_r0i0j() - 6.0 * p.tr_l3
        + 13.0 / 3.0 * h * p.norm_lring2
        + 13.0 / 3.0 * h * p.rbar00
        - 5.0 / 9.0 * h * p.rbar
        + 2.0 / 3.0 * h.powi(3);
    // the right-hand side is 12 φ_rr(0) and f₂ = φ_rr(0)/2
    rhs / 24.0
}

/// `(f₀, f₁, f₂)` for the singular σ₂-Yamabe problem.
pub fn sigma2_expansion(p: &JetPoint) -> [f64; 3] {
    let h = p.mean;
    let f0 = -h / 6.0;
    let f1 = (-2.0 * p.norm_lring2 - 3.0 * p.rbar00 + 0.5 * p.rbar) / 18.0;
    let f2 = (-3.0 * p.rbar00_0 + p.dnu_rbar - p.lapl_h - 2.0 * p.l_r0i0j() - 2.0 * p.l_rij()
        - 2.0 * p.tr_l3
        + 7.0 / 3.0 * h * p.rbar00
        + 1.0 / 9.0 * h * p.rbar
        + 5.0 / 9.0 * h * p.norm_lring2
        + 2.0 / 9.0 * h.powi(3))
        / 24.0;
    [f0, f1, f2]
}

/// `(f₀, f₁, f₂)` of either problem at a boundary point.
pub fn expansion(p: &JetPoint, k: Problem) -> [f64; 3] {
    match k {
        Problem::Yamabe => {
            let (f0, f1, f2) = yamabe_expansion(p, 3).expect("n = 3");
            [f0, f1, f2.expect("n = 3")]
        }
        Problem::Sigma2 => sigma2_expansion(p),
    }
}

/// `v⁽⁰⁾ … v⁽³⁾` in `dv_g = r⁻⁴(v⁽⁰⁾ + v⁽¹⁾r + v⁽²⁾r² + v⁽³⁾r³ + …) dr dv_h`.
pub fn volume_coefficients(p: &JetPoint, k: Problem) -> [f64; 4] {
    let h = p.mean;
    let common = -p.rbar / 9.0 + p.rbar00 / 6.0 - h * h / 18.0;
    let div = p.divdiv_l / 3.0 - p.lapl_h / 6.0;
    match k {
        Problem::Yamabe => [
            1.0,
            -h / 3.0,
            common + p.norm_lring2 / 6.0,
            2.0 / 3.0 * (p.tr_lring3 + p.lring_w()) + div,
        ],
        Problem::Sigma2 => [1.0, -h / 3.0, common - p.norm_lring2 / 18.0, div],
    }
}

/// `D₁, D₂, D₃` from `√(det h_r / det h) = 1 + D₁r + D₂r² + D₃r³ + …`.
pub fn determinant_coefficients(p: &JetPoint) -> [f64; 3] {
    let h = p.mean;
    let l2 = p.norm_l2;
    [
        -h,
        0.5 * (-p.rbar00 - l2 + h * h),
        (-p.rbar00_0 - 2.0 * p.l_r0i0j() - 2.0 * p.tr_l3 + 3.0 * h * p.rbar00 + 3.0 * h * l2
            - h.powi(3))
            / 6.0,
    ]
}

/// `𝓘₁, 𝓘₂, 𝓘₃`.
pub fn integrand_coefficients(p: &JetPoint, k: Problem) -> [f64; 3] {
    let h = p.mean;
    match k {
        Problem::Yamabe => [
            h / 2.0,
            p.rbar00 - p.rbar / 3.0,
            (9.0 * p.rbar00_0 - 3.0 * p.dnu_rbar - 5.0 * p.lapl_h - 30.0 * p.l_r0i0j()
                - 30.0 * p.tr_l3
                + 17.0 * h * p.norm_lring2
                + 13.0 * h * p.rbar00
                - 2.0 / 3.0 * h * p.rbar
                + 26.0 / 9.0 * h.powi(3))
                / 24.0,
        ],
        Problem::Sigma2 => [
            h / 2.0,
            p.norm_lring2 / 3.0 + p.rbar00 - p.rbar / 3.0,
            (9.0 * p.rbar00_0 - 3.0 * p.dnu_rbar - 5.0 * p.lapl_h + 6.0 * p.l_r0i0j()
                - 18.0 * p.l_rij()
                + 6.0 * p.tr_l3
                - 5.0 * h * p.rbar00
                + 16.0 / 3.0 * h * p.rbar
                - 37.0 / 3.0 * h * p.norm_lring2
                - 10.0 / 9.0 * h.powi(3))
                / 24.0,
        ],
    }
}

/// `B = 𝓘 ⊛ D`: `B_j = Σ_{a+b=j} 𝓘_a D_b` with `𝓘₀ = D₀ = 1`.
pub fn compose(i: [f64; 3], d: [f64; 3]) -> [f64; 4] {
    [
        1.0,
        i[0] + d[0],
        i[1] + i[0] * d[0] + d[1],
        i[2] + i[1] * d[0] + i[0] * d[1] + d[2],
    ]
}

/// The printed simplified forms of `B₁…B₃` (Yamabe) or `A₂, A₃` (σ₂);
/// `A₁` is taken from the composition.
pub fn ladder_closed_form(p: &JetPoint, k: Problem) -> [f64; 4] {
    let h = p.mean;
    match k {
        Problem::Yamabe => [
            1.0,
            -h / 2.0,
            0.5 * p.rbar00 - p.rbar / 3.0 - 0.5 * p.norm_l2,
            (5.0 * p.rbar00_0 - 3.0 * p.dnu_rbar - 5.0 * p.lapl_h - 38.0 * p.l_r0i0j()
                - 38.0 * p.tr_l3
                + 23.0 * h * p.norm_lring2
                - 5.0 * h * p.rbar00
                + 22.0 / 3.0 * h * p.rbar
                + 62.0 / 9.0 * h.powi(3))
                / 24.0,
        ],
        Problem::Sigma2 => [
            1.0,
            -h / 2.0,
            0.5 * p.rbar00 - p.rbar / 3.0 - p.norm_lring2 / 6.0 - h * h / 6.0,
            (5.0 * p.rbar00_0 - 3.0 * p.dnu_rbar - 5.0 * p.lapl_h - 2.0 * p.l_r0i0j()
                - 18.0 * p.l_rij()
                - 2.0 * p.tr_l3
                - 23.0 * h * p.rbar00
                + 40.0 / 3.0 * h * p.rbar
                - 43.0 / 3.0 * h * p.norm_lring2
                + 26.0 / 9.0 * h.powi(3))
                / 24.0,
        ],
    }
}

/// Boundary integrand `S` of the Gauss-Bonnet formula.
pub fn chern_boundary(p: &JetPoint) -> f64 {
    let h = p.mean;
    let mixed = p.l_rij() - p.l_r0i0j();
    p.rbar * h - 2.0 * p.rbar00 * h - 2.0 * mixed + 2.0 / 3.0 * h.powi(3) - 2.0 * h * p.norm_l2
        + 4.0 / 3.0 * p.tr_l3
}

/// `12(S − 2B₃)` (Yamabe) or `12(S − 2A₃)` (σ₂) as printed, before the
/// Bianchi identity is used.
pub fn sb_expanded(p: &JetPoint, k: Problem) -> f64 {
    let h = p.mean;
    match k {
        Problem::Yamabe => {
            -5.0 * p.rbar00_0 + 3.0 * p.dnu_rbar + 5.0 * p.lapl_h + 62.0 * p.l_r0i0j()
                + 54.0 * p.tr_l3
                - 24.0 * p.l_rij()
                - 47.0 * h * p.norm_lring2
                - 19.0 * h * p.rbar00
                + 14.0 / 3.0 * h * p.rbar
                - 62.0 / 9.0 * h.powi(3)
        }
        Problem::Sigma2 => {
            -5.0 * p.rbar00_0 + 3.0 * p.dnu_rbar + 5.0 * p.lapl_h + 26.0 * p.l_r0i0j()
                - 6.0 * p.l_rij()
                + 18.0 * p.tr_l3
                - h * p.rbar00
                - 4.0 / 3.0 * h * p.rbar
                - 29.0 / 3.0 * h * p.norm_lring2
                - 26.0 / 9.0 * h.powi(3)
        }
    }
}

/// `𝓑_ḡ` (Yamabe) or `𝓑^{σ₂}_ḡ`; the short form is used on umbilic boundaries.
pub fn bterm(p: &JetPoint, k: Problem, umbilic: bool) -> f64 {
    let h = p.mean;
    let base = p.dnu_rbar + 6.0 * h * p.rbar00 - 10.0 / 3.0 * h * p.rbar - 16.0 / 9.0 * h.powi(3);
    if umbilic {
        return base / 24.0;
    }
    let w = p.lring_w();
    let t = p.tr_lring3;
    let extra = match k {
        Problem::Yamabe => 124.0 * w + 108.0 * t + 14.0 * h * p.norm_lring2,
        Problem::Sigma2 => 52.0 * w + 36.0 * t + 50.0 / 3.0 * h * p.norm_lring2,
    };
    (base + extra + 24.0 * p.lring_rij()) / 24.0
}

pub fn point_coefficients(p: &JetPoint, k: Problem, umbilic: bool) -> PointCoefficients {
    let d = determinant_coefficients(p);
    let i = integrand_coefficients(p, k);
    let b = compose(i, d);
    let s = chern_boundary(p);
    let bt = bterm(p, k, umbilic);
    PointCoefficients {
        f: expansion(p, k),
        v: volume_coefficients(p, k),
        d,
        i,
        b,
        s,
        bterm: bt,
        div_remainder: s - 2.0 * b[3] - bt,
        div_terms: (-5.0 * p.divdiv_lring + 25.0 / 3.0 * p.lapl_h) / 12.0,
        a_density: 4.0 * p.norm_lring2,
        f_density: 8.0 * (p.tr_lring3 + p.lring_w()),
    }
}

/// The integrand ladder at every boundary point.
pub fn integrand_ladder(jet: &BoundaryJet, k: Problem) -> ExpansionProfile {
    ExpansionProfile::new(jet, k)
}

/// Divergent coefficients `c₀, c₁, c₂` and the log coefficient `ℰ` of the
/// volume expansion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyCoefficients {
    pub c: [f64; 3],
    pub energy: f64,
}

pub fn energy_from_profile(profile: &ExpansionProfile) -> EnergyCoefficients {
    let c = std::array::from_fn(|j| profile.integrate(|p| p.v[j]) / (3 - j) as f64);
    EnergyCoefficients {
        c,
        energy: profile.integrate(|p| p.v[3]),
    }
}

pub fn energy_functional(metric: &CollarMetric, k: Problem) -> Result<EnergyCoefficients, ExpansionError> {
    let jet = boundary_jet(metric)?;
    Ok(energy_from_profile(&ExpansionProfile::new(&jet, k)))
}

/// Leading part of the trace-free Ricci tensor of `g` near the boundary.
#[derive(Clone, Debug)]
pub struct EinsteinLeading {
    /// `E_{ij} = leading[p]_{ij} r⁻¹ + O(1)` per boundary point.
    pub leading: Vec<Matrix3<f64>>,
    /// `a = 4∫|L̊|²`, `n = 3` only.
    pub a: Option<f64>,
    /// `𝓕 = 8∫(tr L̊³ + L̊^{ij}W̄₀ᵢ₀ⱼ)`, `n = 3` only.
    pub f: Option<f64>,
}

pub fn einstein_leading(jet: &BoundaryJet, n: usize) -> Result<EinsteinLeading, ExpansionError> {
    if n < 2 {
        return Err(ExpansionError::DimensionUnsupported { n });
    }
    let leading = jet.points.iter().map(|p| -((n - 1) as f64) * p.lring).collect();
    let (a, f) = if n == 3 {
        (
            Some(jet.integrate(|p| 4.0 * p.norm_lring2)),
            Some(jet.integrate(|p| 8.0 * (p.tr_lring3 + p.lring_w()))),
        )
    } else {
        (None, None)
    };
    Ok(EinsteinLeading { leading, a, f })
}

/// Residuals of the cancellation of divergent terms in the Gauss-Bonnet
/// derivation.
///
/// Yamabe: `2∫B₀ − 6c₀`, `2∫B₁ − 6c₁`, `2∫B₂ − (6c₂ − a/2)`, `6ℰ − 𝓕/2`.
/// σ₂: `2∫A_j − 6c_j` for `j = 0, 1, 2`, then `ℰ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cancellation {
    pub k: Problem,
    pub residuals: [f64; 4],
    /// Magnitude of the terms that cancel, for relative comparisons.
    pub scale: f64,
}

impl Cancellation {
    pub fn max_abs(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

pub fn divergence_cancellation(metric: &CollarMetric, k: Problem) -> Result<Cancellation, ExpansionError> {
    let jet = boundary_jet(metric)?;
    Ok(cancellation_from_jet(&jet, k))
}

pub fn cancellation_from_jet(jet: &BoundaryJet, k: Problem) -> Cancellation {
    let profile = ExpansionProfile::new(jet, k);
    let e = energy_from_profile(&profile);
    let ib: [f64; 3] = std::array::from_fn(|j| profile.integrate(|p| p.b[j]));
    let a = profile.integrate(|p| p.a_density);
    let f = profile.integrate(|p| p.f_density);
    let mut residuals = [
        2.0 * ib[0] - 6.0 * e.c[0],
        2.0 * ib[1] - 6.0 * e.c[1],
        2.0 * ib[2] - 6.0 * e.c[2],
        e.energy,
    ];
    if k == Problem::Yamabe {
        residuals[2] += 0.5 * a;
        residuals[3] = 6.0 * e.energy - 0.5 * f;
    }
    let scale = ib.iter().chain(&e.c).chain(&[a, f]).fold(0.0f64, |m, x| m.max(x.abs()));
    Cancellation { k, residuals, scale }
}
