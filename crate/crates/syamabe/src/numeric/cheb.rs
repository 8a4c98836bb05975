use nalgebra::DMatrix;

use super::{Real, DD};

/// Chebyshev-Lobatto grid on `[a, b]`, clustered at both ends.
///
/// Node `0` sits at `a`, node `n` at `b`.
#[derive(Clone, Debug)]
pub struct ChebGrid {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    bary: Vec<f64>,
}

impl ChebGrid {
    pub fn new(n: usize, a: f64, b: f64) -> Self {
        assert!(n >= 2 && b > a);
        let m = n + 1;
        // standard points x_j = cos(j pi / n) on [-1,1], mapped so x=-1 -> a
        let x: Vec<f64> = (0..m)
            .map(|j| -(std::f64::consts::PI * j as f64 / n as f64).cos())
            .collect();
        let c: Vec<f64> = (0..m)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    2.0 * s
                } else {
                    s
                }
            })
            .collect();
        let mut d = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    d[(i, j)] = (c[i] / c[j]) / (x[i] - x[j]);
                }
            }
        }
        // negative-sum trick for the diagonal
        for i in 0..m {
            let s: f64 = (0..m).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
            d[(i, i)] = -s;
        }
        let scale = 2.0 / (b - a);
        let d1 = &d * scale;
        let d2 = &d1 * &d1;
        let nodes = x.iter().map(|&t| a + (b - a) * (t + 1.0) / 2.0).collect();
        let bary = (0..m)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        ChebGrid {
            a,
            b,
            nodes,
            d1,
            d2,
            bary,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Barycentric interpolation of nodal values at `x`, in the precision of `T`.
    pub fn interpolate<T: Real>(&self, values: &[f64], x: T) -> T {
        let mut num = T::zero();
        let mut den = T::zero();
        for (j, (&xj, &fj)) in self.nodes.iter().zip(values).enumerate() {
            let diff = x - T::from_f64(xj);
            if diff.to_f64() == 0.0 {
                return T::from_f64(fj);
            }
            let w = T::from_f64(self.bary[j]) / diff;
            num += w * T::from_f64(fj);
            den += w;
        }
        num / den
    }

    pub fn derivative(&self, values: &[f64]) -> Vec<f64> {
        (&self.d1 * nalgebra::DVector::from_column_slice(values))
            .iter()
            .copied()
            .collect()
    }

    pub fn second_derivative(&self, values: &[f64]) -> Vec<f64> {
        (&self.d2 * nalgebra::DVector::from_column_slice(values))
            .iter()
            .copied()
            .collect()
    }
}

/// The same Lobatto grid with nodes and differentiation matrices in
/// double-double, for residuals that must resolve below f64 rounding.
#[derive(Clone, Debug)]
pub struct ChebGridDD {
    pub nodes: Vec<DD>,
    d1: Vec<Vec<DD>>,
    d2: Vec<Vec<DD>>,
    bary: Vec<f64>,
}

impl ChebGridDD {
    pub fn new(n: usize, a: DD, b: DD) -> Self {
        let m = n + 1;
        let x: Vec<DD> = (0..m)
            .map(|j| -(DD::pi() * DD::new(j as f64) / DD::new(n as f64)).cos())
            .collect();
        let c: Vec<f64> = (0..m)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    2.0 * s
                } else {
                    s
                }
            })
            .collect();
        let scale = DD::new(2.0) / (b - a);
        let mut d = vec![vec![DD::ZERO; m]; m];
        for i in 0..m {
            let mut diag = DD::ZERO;
            for j in 0..m {
                if i != j {
                    d[i][j] = DD::new(c[i] / c[j]) / (x[i] - x[j]) * scale;
                    diag -= d[i][j];
                }
            }
            d[i][i] = diag;
        }
        // D²_ij = 2 D_ij (D_ii − 1/(y_i − y_j)) off the diagonal, in mapped coordinates
        let mut d2 = vec![vec![DD::ZERO; m]; m];
        for i in 0..m {
            let mut diag = DD::ZERO;
            for j in 0..m {
                if i != j {
                    d2[i][j] = DD::new(2.0) * d[i][j] * (d[i][i] - scale / (x[i] - x[j]));
                    diag -= d2[i][j];
                }
            }
            d2[i][i] = diag;
        }
        let nodes = x.iter().map(|&t| a + (b - a) * (t + DD::ONE) / DD::new(2.0)).collect();
        let bary = (0..m)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        ChebGridDD { nodes, d1: d, d2, bary }
    }

    fn apply(mat: &[Vec<DD>], values: &[DD]) -> Vec<DD> {
        mat.iter()
            .map(|row| row.iter().zip(values).fold(DD::ZERO, |acc, (a, v)| acc + *a * *v))
            .collect()
    }

    pub fn derivative(&self, values: &[DD]) -> Vec<DD> {
        Self::apply(&self.d1, values)
    }

    pub fn second_derivative(&self, values: &[DD]) -> Vec<DD> {
        Self::apply(&self.d2, values)
    }

    /// Barycentric interpolation of double-double nodal values.
    pub fn interpolate<T: Real>(&self, values: &[DD], x: T) -> T {
        let lift = |v: DD| T::from_f64(v.hi()) + T::from_f64(v.lo());
        let mut num = T::zero();
        let mut den = T::zero();
        for (j, (&xj, &fj)) in self.nodes.iter().zip(values).enumerate() {
            let diff = x - lift(xj);
            if diff.to_f64() == 0.0 {
                return lift(fj);
            }
            let w = T::from_f64(self.bary[j]) / diff;
            num += w * lift(fj);
            den += w;
        }
        num / den
    }
}
