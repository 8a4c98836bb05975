use num_integer::Roots;
use num_rational::Ratio;
use serde::Serialize;

use super::ExpansionError;
use crate::numeric::binomial;

type Q = Ratio<i128>;

/// Indicial data of the singular σ_k-Yamabe equation in dimension `n + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct IndicialRoots {
    pub k: u64,
    pub n: u64,
    /// `c_{k,n} = 2^{1−k} C(n, k−1)` as `(numerator, denominator)`.
    pub c: (i128, i128),
    /// `β⁰_k = 2^{−k} C(n+1, k)`.
    pub beta: (i128, i128),
    pub gamma_plus: (i128, i128),
    pub gamma_minus: (i128, i128),
    /// Orders at which `u` may be perturbed, `γ± + 1`.
    pub u_roots: [i128; 2],
}

fn pair(q: Q) -> (i128, i128) {
    (*q.numer(), *q.denom())
}

fn exact_sqrt(q: Q) -> Option<Q> {
    if *q.numer() < 0 {
        return None;
    }
    let (a, b) = (q.numer().sqrt(), q.denom().sqrt());
    (a * a == *q.numer() && b * b == *q.denom()).then(|| Q::new(a, b))
}

/// Roots `γ±` of the indicial polynomial and the matching orders for `u`.
///
/// Fails unless `1 ≤ k ≤ n + 1`, and if the discriminant is not a rational
/// square (it always is for these parameters).
pub fn indicial_roots(k: u64, n: u64) -> Result<IndicialRoots, ExpansionError> {
    let out = ExpansionError::ParameterOutOfRange { k, n };
    if k == 0 || k > n + 1 || n > 60 {
        return Err(out);
    }
    let pow2 = |e: u64| Q::from_integer(1i128 << e);
    let c = Q::from_integer(binomial(n, k - 1) as i128) / pow2(k - 1);
    let beta = Q::from_integer(binomial(n + 1, k) as i128) / pow2(k);
    let half_n = Q::new(n as i128, 2);
    let disc = half_n * half_n + Q::from_integer(2 * k as i128) * beta / c;
    let root = exact_sqrt(disc).ok_or(out)?;
    let gp = half_n + root;
    let gm = half_n - root;
    if !gp.is_integer() || !gm.is_integer() {
        return Err(ExpansionError::ParameterOutOfRange { k, n });
    }
    Ok(IndicialRoots {
        k,
        n,
        c: pair(c),
        beta: pair(beta),
        gamma_plus: pair(gp),
        gamma_minus: pair(gm),
        u_roots: [gm.to_integer() + 1, gp.to_integer() + 1],
    })
}
