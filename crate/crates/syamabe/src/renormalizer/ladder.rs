use crate::collar_geometry::{CollarMetric, DistanceProfile, Model, Profile, RadialModel, S3_VOLUME};
use crate::expansion_engine::{einstein_density, TruncatedU};
use crate::numeric::{geomspace, GaussLegendre, Real, DD};
use crate::radial_solver::{frame_b, RadialSolution};

use super::{Ladder, RenormError};

/// Default cut-off ladder.
pub fn default_epsilons() -> Vec<f64> {
    geomspace(3e-5, 3e-3, 32)
}

/// How the region `{ρ > ε}` is cut out.
#[derive(Clone, Debug)]
pub enum Exhaustion {
    /// `ρ = r`, the `ḡ`-distance to the boundary.
    Distance,
    /// `ρ = u`, the defining function itself.
    DefiningFunction,
    /// `ρ = r̂`, the distance for a rescaled compactification `e^{2ω}ḡ`.
    Rescaled(DistanceProfile),
}

/// Largest ratio of panel end points.
const PANEL_RATIO: f64 = 1.3;
const MAX_DEPTH: usize = 12;

/// Composite Gauss-Legendre rule with bisection checks.
struct PanelRule {
    rule: GaussLegendre<DD>,
    /// Relative agreement demanded between a panel and its halves;
    /// `None` trusts the single panel.
    tol: Option<f64>,
    /// Absolute slack per panel.
    abs: f64,
}

impl PanelRule {
    fn precise() -> Self {
        PanelRule {
            rule: GaussLegendre::new(20),
            tol: Some(1e-25),
            abs: 1e-40,
        }
    }

    fn fast() -> Self {
        PanelRule {
            rule: GaussLegendre::new(10),
            tol: None,
            abs: 0.0,
        }
    }

    fn panel<F: Fn(DD) -> DD>(&self, a: DD, b: DD, f: &F, depth: usize) -> Result<DD, RenormError> {
        let whole = self.rule.integrate(a, b, f);
        let Some(tol) = self.tol else {
            return Ok(whole);
        };
        let mid = (a + b) * DD::new(0.5);
        let halves = self.rule.integrate(a, mid, f) + self.rule.integrate(mid, b, f);
        let diff = (whole - halves).to_f64().abs();
        if diff <= tol * halves.to_f64().abs() + self.abs {
            return Ok(halves);
        }
        if depth == 0 {
            return Err(RenormError::QuadratureFailure(format!(
                "panel [{:e}, {:e}] unresolved, estimate {diff:e}",
                a.to_f64(),
                b.to_f64()
            )));
        }
        Ok(self.panel(a, mid, f, depth - 1)? + self.panel(mid, b, f, depth - 1)?)
    }

    /// `∫_a^b f`, split at the breakpoints inside `(a, b)`.
    fn integrate<F: Fn(DD) -> DD>(&self, a: DD, b: DD, breaks: &[f64], f: &F) -> Result<DD, RenormError> {
        let mut acc = DD::ZERO;
        let mut lo = a;
        for &x in breaks {
            if x > a.to_f64() && x < b.to_f64() {
                acc += self.geometric(lo, DD::new(x), f)?;
                lo = DD::new(x);
            }
        }
        Ok(acc + self.geometric(lo, b, f)?)
    }

    /// `∫_a^b f` over geometric panels.
    fn geometric<F: Fn(DD) -> DD>(&self, a: DD, b: DD, f: &F) -> Result<DD, RenormError> {
        let (af, bf) = (a.to_f64(), b.to_f64());
        if bf <= af {
            return Ok(DD::ZERO);
        }
        let pieces = ((bf / af).ln() / PANEL_RATIO.ln()).ceil().max(1.0) as usize;
        let ratio = (b / a).ln() / DD::new(pieces as f64);
        let mut acc = DD::ZERO;
        let mut lo = a;
        for i in 1..=pieces {
            let hi = if i == pieces { b } else { a * (ratio * DD::new(i as f64)).exp() };
            acc += self.panel(lo, hi, f, MAX_DEPTH)?;
            lo = hi;
        }
        Ok(acc)
    }

    /// `∫_{cut_i}^{top} f` for every cut, sharing the pieces between cuts.
    fn above_cuts<F: Fn(DD) -> DD>(&self, cuts: &[DD], top: DD, breaks: &[f64], f: &F) -> Result<Vec<DD>, RenormError> {
        let mut order: Vec<usize> = (0..cuts.len()).collect();
        order.sort_by(|&i, &j| cuts[j].to_f64().total_cmp(&cuts[i].to_f64()));
        let mut out = vec![DD::ZERO; cuts.len()];
        let mut acc = DD::ZERO;
        let mut upper = top;
        for &i in &order {
            if !(cuts[i].to_f64() > 0.0 && cuts[i].to_f64() < top.to_f64()) {
                return Err(RenormError::BadLadder(format!(
                    "cut {:e} outside (0, {:e})",
                    cuts[i].to_f64(),
                    top.to_f64()
                )));
            }
            acc += self.integrate(cuts[i], upper, breaks, f)?;
            upper = cuts[i];
            out[i] = acc;
        }
        Ok(out)
    }
}

fn radial_parts(metric: &CollarMetric) -> Result<&RadialModel, RenormError> {
    match &metric.model {
        Model::Radial(m) if m.topology.is_some() => Ok(m),
        _ => Err(RenormError::Unsupported("global ladders need a ball or interval radial geometry".into())),
    }
}

/// `|∂M|`-weight turning a radial density into an integral over the slice.
fn slice_measure(m: &RadialModel) -> DD {
    DD::new(2.0) * DD::pi() * DD::pi() * DD::new(m.components as f64)
}

/// Root of `u(r) = ε` by Newton in double-double, from `r = ε`.
fn invert_u<F: Fn(DD) -> (DD, DD)>(eps: f64, u: F) -> Result<DD, RenormError> {
    let target = DD::new(eps);
    let mut r = target;
    for _ in 0..60 {
        let (v, dv) = u(r);
        let step = (v - target) / dv;
        r -= step;
        if step.to_f64().abs() <= 1e-31 * r.to_f64().abs() {
            return Ok(r);
        }
    }
    Err(RenormError::BadLadder(format!("no level set u = {eps:e} near the boundary")))
}

fn cuts_for(sol: &RadialSolution, epsilons: &[f64], exhaustion: &Exhaustion) -> Result<Vec<DD>, RenormError> {
    epsilons
        .iter()
        .map(|&e| match exhaustion {
            Exhaustion::Distance => Ok(DD::new(e)),
            Exhaustion::DefiningFunction => invert_u(e, |r| sol.u_slope(r)),
            Exhaustion::Rescaled(p) => Ok(p.r_of(DD::new(e))),
        })
        .collect()
}

/// `Vol_g({ρ > ε}) = ∫ u⁻⁴ dv_ḡ` along the ladder, in double-double.
pub fn volume_ladder_by(
    metric: &CollarMetric,
    sol: &RadialSolution,
    epsilons: &[f64],
    exhaustion: &Exhaustion,
) -> Result<Ladder, RenormError> {
    let m = radial_parts(metric)?;
    let cuts = cuts_for(sol, epsilons, exhaustion)?;
    let c = slice_measure(m);
    let f = |r: DD| m.jacobian(r) / sol.u_at(r).powi(4) * c;
    let values = PanelRule::precise().above_cuts(&cuts, DD::new(m.r_max), &[], &f)?;
    Ok(Ladder {
        epsilons: epsilons.to_vec(),
        values,
    })
}

/// Volume ladder cut by the distance to the boundary.
pub fn volume_ladder(metric: &CollarMetric, sol: &RadialSolution, epsilons: &[f64]) -> Result<Ladder, RenormError> {
    volume_ladder_by(metric, sol, epsilons, &Exhaustion::Distance)
}

/// `|E|²_ḡ` times the radial volume density, `4|tf B|² r⁻² w⁻⁴ J`.
fn einstein_integrand<T: Real>(profile: &Profile, m: &RadialModel, sol: &RadialSolution, r: T) -> T {
    let e = sol.phi_at(r);
    let b = frame_b(profile, r, e);
    let tr = (b[0][0] + b[1][1] + b[2][2] + b[3][3]).scale(0.25);
    let mut sq = T::zero();
    for (i, row) in b.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            let v = if i == j { x - tr } else { x };
            sq += v * v;
        }
    }
    let w = T::one() + r * e[0];
    sq.scale(4.0) / (r * r * w.powi(4)) * m.jacobian(r)
}

/// `|E|_ḡ = 2|tf B|/(r w²)` of the solved metric.
pub fn einstein_norm(metric: &CollarMetric, sol: &RadialSolution, r: f64) -> Result<f64, RenormError> {
    let m = radial_parts(metric)?;
    let density = einstein_integrand(&m.profile, m, sol, r);
    Ok((density / m.jacobian(r)).max(0.0).sqrt())
}

/// `∫_{ρ > ε} |E|² dv_g` along the ladder, in double-double.
pub fn einstein_ladder_by(
    metric: &CollarMetric,
    sol: &RadialSolution,
    epsilons: &[f64],
    exhaustion: &Exhaustion,
) -> Result<Ladder, RenormError> {
    let m = radial_parts(metric)?;
    let cuts = cuts_for(sol, epsilons, exhaustion)?;
    let c = slice_measure(m);
    let f = |r: DD| einstein_integrand(&m.profile, m, sol, r) * c;
    let values = PanelRule::precise().above_cuts(&cuts, DD::new(m.r_max), &[], &f)?;
    Ok(Ladder {
        epsilons: epsilons.to_vec(),
        values,
    })
}

/// Inner end of the convergent Einstein integral; `|E|²` is bounded on
/// umbilic boundaries, so the omitted layer is below rounding.
const EINSTEIN_FLOOR: f64 = 1e-14;

/// `∫_M |E|² dv_g` over the whole manifold. Only finite when the boundary is
/// umbilic; the value is then the finite part of the ladder.
pub fn einstein_integral(metric: &CollarMetric, sol: &RadialSolution) -> Result<f64, RenormError> {
    let m = radial_parts(metric)?;
    let c = slice_measure(m);
    let f = |r: DD| einstein_integrand(&m.profile, m, sol, r) * c;
    // Near the floor the integrand is rounding noise far below the total.
    let rule = PanelRule {
        abs: 1e-30,
        ..PanelRule::precise()
    };
    let v = rule.integrate(DD::new(EINSTEIN_FLOOR), DD::new(m.r_max), &[], &f)?;
    Ok(v.to_f64())
}

/// Outer end of the truncated collar ladders.
pub fn collar_top(metric: &CollarMetric) -> f64 {
    (0.1f64).min(metric.collar_depth() / 2.0)
}

/// `√det h_r` at a torus grid point, from the polynomial coefficients.
fn torus_sqrt_det(t: &crate::collar_geometry::TorusModel, idx: usize, r: DD) -> DD {
    let mut h = [[DD::ZERO; 3]; 3];
    for (c, &(i, j)) in crate::collar_geometry::SYM.iter().enumerate() {
        let mut acc = DD::ZERO;
        for m in (0..t.val.len()).rev() {
            acc = acc * r + DD::new(t.val[m][c][idx]);
        }
        h[i][j] = acc;
        h[j][i] = acc;
    }
    let det = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
        + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
    det.sqrt()
}

fn truncated_jet(f: [f64; 3], r: DD) -> (DD, DD) {
    let [a, b, c] = f.map(DD::new);
    let u = r * (DD::ONE + r * (a + r * (b + r * c)));
    let du = DD::ONE + r * (DD::new(2.0) * a + r * (DD::new(3.0) * b + r * DD::new(4.0) * c));
    (u, du)
}

/// Volume of `{ρ > ε, r < collar_top}` for the truncated defining function,
/// cut by `r` or by `u`. Only the divergent and log coefficients of the fit
/// are meaningful.
pub fn collar_volume_ladder(
    metric: &CollarMetric,
    u: &TruncatedU,
    epsilons: &[f64],
    exhaustion: &Exhaustion,
) -> Result<Ladder, RenormError> {
    let top = DD::new(collar_top(metric));
    let rule = PanelRule::precise();
    let mut values = vec![DD::ZERO; epsilons.len()];
    let mut add = |cuts: Vec<DD>, f: &dyn Fn(DD) -> DD| -> Result<(), RenormError> {
        let vals = rule.above_cuts(&cuts, top, &[], &f)?;
        for (acc, v) in values.iter_mut().zip(vals) {
            *acc += v;
        }
        Ok(())
    };
    let cuts = |f: [f64; 3]| -> Result<Vec<DD>, RenormError> {
        epsilons
            .iter()
            .map(|&e| match exhaustion {
                Exhaustion::Distance => Ok(DD::new(e)),
                Exhaustion::DefiningFunction => invert_u(e, |r| truncated_jet(f, r)),
                Exhaustion::Rescaled(_) => Err(RenormError::Unsupported("rescaled cuts need a global solution".into())),
            })
            .collect()
    };
    match &metric.model {
        Model::Radial(m) => {
            let c = slice_measure(m);
            let f = u.f[0];
            add(cuts(f)?, &|r: DD| m.jacobian(r) / truncated_jet(f, r).0.powi(4) * c)?;
        }
        Model::Torus(t) => {
            let cell = DD::new(t.cell_volume());
            for (idx, &f) in u.f.iter().enumerate() {
                add(cuts(f)?, &|r: DD| torus_sqrt_det(t, idx, r) / truncated_jet(f, r).0.powi(4) * cell)?;
            }
        }
    }
    Ok(Ladder {
        epsilons: epsilons.to_vec(),
        values,
    })
}

/// `∫_{ε < r < collar_top} |E|² dv_g` for the truncated defining function,
/// evaluated in double precision.
pub fn collar_einstein_ladder(metric: &CollarMetric, u: &TruncatedU, epsilons: &[f64]) -> Result<Ladder, RenormError> {
    let top = DD::new(collar_top(metric));
    let rule = PanelRule::fast();
    let cuts: Vec<DD> = epsilons.iter().map(|&e| DD::new(e)).collect();
    let (weight, points, radial) = match &metric.model {
        Model::Radial(m) => (S3_VOLUME * m.components as f64, 1, Some(m)),
        Model::Torus(t) => (t.cell_volume(), u.f.len(), None),
    };
    let mut values = vec![DD::ZERO; epsilons.len()];
    for idx in 0..points {
        let f = |r: DD| {
            let r = r.to_f64();
            let jac = radial.map_or(1.0, |m| m.jacobian(r));
            DD::new(einstein_density(metric, u, r, idx) * jac * weight)
        };
        for (acc, v) in values.iter_mut().zip(rule.above_cuts(&cuts, top, &[], &f)?) {
            *acc += v;
        }
    }
    Ok(Ladder {
        epsilons: epsilons.to_vec(),
        values,
    })
}
