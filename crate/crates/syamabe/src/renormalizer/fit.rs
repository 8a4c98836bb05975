use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::numeric::{Real, DD};

use super::RenormError;

/// A basis function of the cut-off parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Term {
    /// `ε^p`
    Pow(i32),
    /// `log(1/ε)`
    LogInv,
    /// `ε^p log ε`
    PowLog(i32),
}

impl Term {
    pub fn eval(self, eps: DD) -> DD {
        match self {
            Term::Pow(p) => eps.powi(p),
            Term::LogInv => -eps.ln(),
            Term::PowLog(p) => eps.powi(p) * eps.ln(),
        }
    }

    pub fn label(self) -> String {
        match self {
            Term::Pow(0) => "1".into(),
            Term::Pow(1) => "eps".into(),
            Term::Pow(p) => format!("eps^{p}"),
            Term::LogInv => "log(1/eps)".into(),
            Term::PowLog(1) => "eps log eps".into(),
            Term::PowLog(p) => format!("eps^{p} log eps"),
        }
    }
}

/// Highest power of the `ε^k log ε`, `ε^k` remainder terms.
pub const NUISANCE_ORDER: i32 = 4;

/// Which expansion a ladder is fitted against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Basis {
    /// `c₀ε⁻³ + c₁ε⁻² + c₂ε⁻¹ + ℰ log(1/ε) + V + …`
    Volume,
    /// `a ε⁻¹ + 𝓕 log(1/ε) + fp + …`
    Einstein,
}

impl Basis {
    pub fn principal(self) -> Vec<Term> {
        match self {
            Basis::Volume => vec![Term::Pow(-3), Term::Pow(-2), Term::Pow(-1), Term::LogInv, Term::Pow(0)],
            Basis::Einstein => vec![Term::Pow(-1), Term::LogInv, Term::Pow(0)],
        }
    }

    pub fn terms(self) -> Vec<Term> {
        let mut t = self.principal();
        for k in 1..=NUISANCE_ORDER {
            t.push(Term::PowLog(k));
            t.push(Term::Pow(k));
        }
        t
    }

    /// Row weight that brings the leading divergence to order one.
    fn weight(self, eps: DD) -> DD {
        match self {
            Basis::Volume => eps.powi(3),
            Basis::Einstein => eps,
        }
    }

    fn finite_index(self) -> usize {
        self.principal().len() - 1
    }
}

/// Condition numbers above this reject the fit.
pub const MAX_CONDITION: f64 = 1e12;
/// Relative change of the finite part allowed when the two largest `ε` are dropped.
pub const STABILITY_TOL: f64 = 1e-6;

/// Values of a cut-off integral along an `ε` ladder.
#[derive(Clone, Debug)]
pub struct Ladder {
    pub epsilons: Vec<f64>,
    pub values: Vec<DD>,
}

impl Ladder {
    pub const CSV_HEADER: [&'static str; 3] = ["epsilon", "value", "value_lo"];

    /// One row per rung; the value is split into its two double limbs.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for (e, v) in self.epsilons.iter().zip(&self.values) {
            w.write_record([e.to_string(), v.hi().to_string(), v.lo().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderFit {
    pub basis: Basis,
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    pub terms: Vec<Term>,
    /// Principal coefficients first, then the remainder terms.
    pub coefficients: Vec<f64>,
    /// Largest `|value − model|` over the ladder.
    pub fit_residual: f64,
    pub condition_estimate: f64,
    /// Relative change of the finite part when the two largest `ε` are dropped.
    pub stability: f64,
}

impl LadderFit {
    pub fn finite_part(&self) -> f64 {
        self.coefficients[self.basis.finite_index()]
    }

    pub fn log_coefficient(&self) -> f64 {
        self.coefficients[self.basis.finite_index() - 1]
    }

    /// Coefficients of the negative powers, most singular first.
    pub fn divergent(&self) -> &[f64] {
        &self.coefficients[..self.basis.finite_index() - 1]
    }

    pub fn is_stable(&self) -> bool {
        self.stability < STABILITY_TOL
    }

    pub fn residual_accepted(&self) -> bool {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.fit_residual < 1e-8 * scale
    }

    pub const CSV_HEADER: [&'static str; 2] = ["term", "coefficient"];

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for (t, c) in self.terms.iter().zip(&self.coefficients) {
            w.write_record([t.label(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Weighted least squares in double-double, Householder QR.
fn solve_weighted(eps: &[f64], values: &[DD], basis: Basis) -> Result<(Vec<DD>, f64), RenormError> {
    let terms = basis.terms();
    let (m, n) = (eps.len(), terms.len());
    let mut a: Vec<Vec<DD>> = eps
        .iter()
        .map(|&e| {
            let e = DD::new(e);
            let w = basis.weight(e);
            terms.iter().map(|t| t.eval(e) * w).collect()
        })
        .collect();
    let mut b: Vec<DD> = eps.iter().zip(values).map(|(&e, &v)| v * basis.weight(DD::new(e))).collect();
    // column scaling
    let scale: Vec<DD> = (0..n)
        .map(|j| {
            let s = (0..m).fold(DD::ZERO, |acc, i| acc + a[i][j] * a[i][j]).sqrt();
            if s.to_f64() == 0.0 {
                DD::ONE
            } else {
                s
            }
        })
        .collect();
    for row in a.iter_mut() {
        for j in 0..n {
            row[j] /= scale[j];
        }
    }
    let condition = {
        let mat = DMatrix::from_fn(m, n, |i, j| a[i][j].to_f64());
        let sv = mat.singular_values();
        let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        hi / lo
    };
    if !(condition <= MAX_CONDITION) {
        return Err(RenormError::IllConditioned { condition });
    }
    for k in 0..n {
        let norm = (k..m).fold(DD::ZERO, |acc, i| acc + a[i][k] * a[i][k]).sqrt();
        let alpha = if a[k][k].to_f64() > 0.0 { -norm } else { norm };
        let mut v: Vec<DD> = (k..m).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vv = v.iter().fold(DD::ZERO, |acc, x| acc + *x * *x);
        if vv.to_f64() == 0.0 {
            continue;
        }
        for j in k..n {
            let dot = (k..m).fold(DD::ZERO, |acc, i| acc + v[i - k] * a[i][j]);
            let f = DD::new(2.0) * dot / vv;
            for i in k..m {
                a[i][j] -= f * v[i - k];
            }
        }
        let dot = (k..m).fold(DD::ZERO, |acc, i| acc + v[i - k] * b[i]);
        let f = DD::new(2.0) * dot / vv;
        for i in k..m {
            b[i] -= f * v[i - k];
        }
    }
    let mut x = vec![DD::ZERO; n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    Ok((x.iter().zip(&scale).map(|(x, s)| *x / *s).collect(), condition))
}

/// Fits the ladder against `basis` and checks the finite part against a
/// refit without the two largest `ε`.
pub fn fit_finite_part(ladder: &Ladder, basis: Basis) -> Result<LadderFit, RenormError> {
    let terms = basis.terms();
    let n = ladder.epsilons.len();
    if ladder.values.len() != n {
        return Err(RenormError::BadLadder(format!("{} values for {n} epsilons", ladder.values.len())));
    }
    if n < 2 * terms.len() {
        return Err(RenormError::BadLadder(format!("{n} points for {} basis terms", terms.len())));
    }
    let (lo, hi) = ladder
        .epsilons
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if !(lo > 0.0) || (hi / lo).log10() < 1.5 {
        return Err(RenormError::BadLadder(format!("ladder [{lo:e}, {hi:e}] spans under 1.5 decades")));
    }
    let (x, condition) = solve_weighted(&ladder.epsilons, &ladder.values, basis)?;
    let fit_residual = ladder
        .epsilons
        .iter()
        .zip(&ladder.values)
        .map(|(&e, &v)| {
            let e = DD::new(e);
            let model = terms.iter().zip(&x).fold(DD::ZERO, |acc, (t, c)| acc + t.eval(e) * *c);
            (v - model).to_f64().abs()
        })
        .fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| ladder.epsilons[i].total_cmp(&ladder.epsilons[j]));
    let kept = &order[..n - 2];
    let eps: Vec<f64> = kept.iter().map(|&i| ladder.epsilons[i]).collect();
    let vals: Vec<DD> = kept.iter().map(|&i| ladder.values[i]).collect();
    let (y, _) = solve_weighted(&eps, &vals, basis)?;
    let fi = basis.finite_index();
    let fp = x[fi].to_f64();
    let stability = (fp - y[fi].to_f64()).abs() / fp.abs().max(1.0);
    Ok(LadderFit {
        basis,
        epsilons: ladder.epsilons.clone(),
        values: ladder.values.iter().map(|v| v.to_f64()).collect(),
        terms,
        coefficients: x.iter().map(|c| c.to_f64()).collect(),
        fit_residual,
        condition_estimate: condition,
        stability,
    })
}
