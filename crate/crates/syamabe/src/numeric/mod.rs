//! Scalar types and small numerical kernels shared by the pipeline.

mod cheb;
mod dd;
mod dual;
mod jet;
mod quad;
mod real;

pub use cheb::{ChebGrid, ChebGridDD};
pub use dd::DD;
pub use dual::Dual;
pub use jet::{Jet2, NV};
pub use quad::GaussLegendre;
pub use real::Real;

use nalgebra::Matrix3;

/// Second elementary symmetric function of the eigenvalues of `a`.
pub fn sigma2(a: &nalgebra::DMatrix<f64>) -> f64 {
    let t = a.trace();
    0.5 * (t * t - (a * a).trace())
}

/// `σ₂` of a 3×3 endomorphism.
pub fn sigma2_3(a: &Matrix3<f64>) -> f64 {
    let t = a.trace();
    0.5 * (t * t - (a * a).trace())
}

/// Inverse of a small dense matrix over any [`Real`], by Gauss-Jordan with
/// partial pivoting on the f64 magnitudes.
pub fn invert<T: Real, const N: usize>(m: &[[T; N]; N]) -> Option<[[T; N]; N]> {
    let mut a = *m;
    let mut inv = [[T::zero(); N]; N];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = T::one();
    }
    for col in 0..N {
        let piv = (col..N).max_by(|&x, &y| {
            a[x][col]
                .to_f64()
                .abs()
                .total_cmp(&a[y][col].to_f64().abs())
        })?;
        if a[piv][col].to_f64() == 0.0 {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col].recip();
        for j in 0..N {
            a[col][j] *= p;
            inv[col][j] *= p;
        }
        for i in 0..N {
            if i != col {
                // no zero shortcut: a vanishing value may carry derivative parts
                let f = a[i][col];
                for j in 0..N {
                    let (acj, icj) = (a[col][j], inv[col][j]);
                    a[i][j] -= f * acj;
                    inv[i][j] -= f * icj;
                }
            }
        }
    }
    Some(inv)
}

/// Binomial coefficient as an exact integer.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// `n` points geometrically spaced on `[lo, hi]`, ascending.
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
