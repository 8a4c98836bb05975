use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::numeric::{Dual, Jet2, Real};

use super::spec::FourierTerm;
use super::GeometryError;

/// Symmetric index pairs in storage order.
pub const SYM: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

pub fn sym_index(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    SYM.iter().position(|&p| p == (a, b)).unwrap()
}

/// Spectral differentiation on the periodic grid `[0, 2π)³` with `n` points
/// per axis. Grid index `(i0 * n + i1) * n + i2`.
#[derive(Clone)]
pub struct Spectral3 {
    pub n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Spectral3 {{ n: {} }}", self.n)
    }
}

impl Spectral3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Spectral3 {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => self.n * self.n,
            1 => self.n,
            _ => 1,
        }
    }

    /// Starting indices of every grid line along `axis`.
    fn line_starts(&self, axis: usize) -> Vec<usize> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                out.push(match axis {
                    0 => a * n + b,
                    1 => a * n * n + b,
                    _ => (a * n + b) * n,
                });
            }
        }
        out
    }

    fn wavenumber(&self, j: usize) -> f64 {
        let n = self.n as i64;
        let j = j as i64;
        (if j <= n / 2 { j } else { j - n }) as f64
    }

    /// `∂^order f / ∂x_axis^order` by FFT along each grid line.
    pub fn derivative(&self, f: &[f64], axis: usize, order: u32) -> Vec<f64> {
        let n = self.n;
        let st = self.stride(axis);
        let mut out = vec![0.0; f.len()];
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for start in self.line_starts(axis) {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = Complex::new(f[start + j * st], 0.0);
            }
            self.fwd.process(&mut buf);
            for (j, b) in buf.iter_mut().enumerate() {
                let k = self.wavenumber(j);
                if order % 2 == 1 && j == n / 2 && n % 2 == 0 {
                    *b = Complex::new(0.0, 0.0);
                    continue;
                }
                let ik = Complex::new(0.0, k).powu(order);
                *b *= ik;
            }
            self.inv.process(&mut buf);
            for (j, b) in buf.iter().enumerate() {
                out[start + j * st] = b.re / n as f64;
            }
        }
        out
    }

    pub fn gradient(&self, f: &[f64]) -> [Vec<f64>; 3] {
        std::array::from_fn(|k| self.derivative(f, k, 1))
    }

    /// Fraction of energy in the top third of wavenumbers, worst axis.
    pub fn tail_fraction(&self, f: &[f64]) -> f64 {
        let n = self.n;
        let cut = n as f64 / 3.0;
        let mut worst: f64 = 0.0;
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for axis in 0..3 {
            let st = self.stride(axis);
            let (mut total, mut tail) = (0.0, 0.0);
            for start in self.line_starts(axis) {
                for (j, b) in buf.iter_mut().enumerate() {
                    *b = Complex::new(f[start + j * st], 0.0);
                }
                self.fwd.process(&mut buf);
                for (j, b) in buf.iter().enumerate() {
                    let e = b.norm_sqr();
                    total += e;
                    if self.wavenumber(j).abs() > cut {
                        tail += e;
                    }
                }
            }
            if total > 1e-300 {
                worst = worst.max(tail / total);
            }
        }
        worst
    }

    pub fn check_resolved(&self, name: &str, f: &[f64], tol: f64) -> Result<(), GeometryError> {
        let tail = self.tail_fraction(f);
        if tail > tol {
            return Err(GeometryError::ResolutionInsufficient {
                field: name.to_string(),
                tail,
            });
        }
        Ok(())
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let n = self.n;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        [(idx / (n * n)) as f64 * h, ((idx / n) % n) as f64 * h, (idx % n) as f64 * h]
    }
}

/// Energy tolerance for the trailing third of the spectrum.
pub const TAIL_TOL: f64 = 1e-10;

/// Polynomial-in-`r` torus collar with Fourier coefficient fields.
#[derive(Clone, Debug)]
pub struct TorusModel {
    pub terms: Vec<FourierTerm>,
    pub spectral: Spectral3,
    /// `val[m][c]`: grid values of the coefficient of `r^m`, symmetric component `c`.
    pub val: Vec<[Vec<f64>; 6]>,
    /// `d1[m][c][k]`: first derivatives.
    pub d1: Vec<[[Vec<f64>; 3]; 6]>,
    /// `d2[m][c][q]`: second derivatives, `q` a symmetric pair index.
    pub d2: Vec<[[Vec<f64>; 6]; 6]>,
}

/// Highest power of `r` in a torus collar.
pub const MAX_ORDER: usize = 4;

impl TorusModel {
    pub fn new(n: usize, terms: Vec<FourierTerm>) -> Result<Self, GeometryError> {
        if n < 4 || n % 2 != 0 {
            return Err(GeometryError::BadSpec(format!("grid {n} must be even and ≥ 4")));
        }
        for t in &terms {
            if t.order > MAX_ORDER || t.ij[0] > 2 || t.ij[1] > 2 {
                return Err(GeometryError::BadSpec(format!("bad torus term {t:?}")));
            }
        }
        let spectral = Spectral3::new(n);
        let len = spectral.len();
        let mut model = TorusModel {
            terms,
            spectral,
            val: Vec::new(),
            d1: Vec::new(),
            d2: Vec::new(),
        };
        for m in 0..=MAX_ORDER {
            let vals: [Vec<f64>; 6] = std::array::from_fn(|c| {
                let (i, j) = SYM[c];
                (0..len)
                    .map(|idx| model.component::<f64>(m, i, j, model.spectral.point(idx)))
                    .collect()
            });
            for (c, v) in vals.iter().enumerate() {
                model
                    .spectral
                    .check_resolved(&format!("h coefficient r^{m} [{c}]"), v, TAIL_TOL)?;
            }
            let d1: [[Vec<f64>; 3]; 6] =
                std::array::from_fn(|c| model.spectral.gradient(&vals[c]));
            let d2: [[Vec<f64>; 6]; 6] = std::array::from_fn(|c| {
                std::array::from_fn(|q| {
                    let (k, l) = SYM[q];
                    model.spectral.derivative(&d1[c][k], l, 1)
                })
            });
            model.val.push(vals);
            model.d1.push(d1);
            model.d2.push(d2);
        }
        Ok(model)
    }

    /// Coefficient of `r^m` in `h_r(x)_{ij}`, evaluated analytically.
    pub fn component<T: Real>(&self, m: usize, i: usize, j: usize, x: [T; 3]) -> T {
        let mut acc = if m == 0 && i == j { T::one() } else { T::zero() };
        for t in &self.terms {
            if t.order != m {
                continue;
            }
            let hit = (t.ij[0] == i && t.ij[1] == j) || (t.ij[0] == j && t.ij[1] == i);
            if !hit {
                continue;
            }
            let phase = x[0].scale(t.k[0] as f64) + x[1].scale(t.k[1] as f64) + x[2].scale(t.k[2] as f64);
            if t.cos != 0.0 {
                acc += phase.cos().scale(t.cos);
            }
            if t.sin != 0.0 {
                acc += phase.sin().scale(t.sin);
            }
        }
        acc
    }

    /// `h_r(x)` at an arbitrary point.
    pub fn metric_at<T: Real>(&self, r: T, x: [T; 3]) -> [[T; 3]; 3] {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut acc = T::zero();
                let mut p = T::one();
                for m in 0..=MAX_ORDER {
                    acc += p * self.component(m, i, j, x);
                    p *= r;
                }
                acc
            })
        })
    }

    /// Collar metric `dr² + h_r` as a second-order jet in `(r, x)` whose
    /// scalars carry one extra `r`-derivative, assembled from grid data.
    pub fn collar_jet(&self, idx: usize, r: f64) -> [[Jet2<Dual<f64>>; 4]; 4] {
        let mut g = [[Jet2::<Dual<f64>>::constant(Dual::constant(0.0)); 4]; 4];
        g[0][0] = Jet2::constant(Dual::constant(1.0));
        // polynomial weights for d^p/dr^p of r^m
        let dpow = |m: usize, p: usize| -> f64 {
            if p > m {
                return 0.0;
            }
            let mut c = 1.0;
            for t in 0..p {
                c *= (m - t) as f64;
            }
            c * r.powi((m - p) as i32)
        };
        for c in 0..6 {
            let (i, j) = SYM[c];
            let at = |p: usize, f: &dyn Fn(usize) -> f64| -> f64 {
                (0..=MAX_ORDER).map(|m| dpow(m, p) * f(m)).sum()
            };
            let d = |p: usize| Dual::new(at(p, &|m| self.val[m][c][idx]), at(p + 1, &|m| self.val[m][c][idx]));
            let mut e = Jet2::constant(d(0));
            e.g[0] = d(1);
            e.h[0][0] = d(2);
            for k in 0..3 {
                let dk = |p: usize| {
                    Dual::new(
                        at(p, &|m| self.d1[m][c][k][idx]),
                        at(p + 1, &|m| self.d1[m][c][k][idx]),
                    )
                };
                e.g[k + 1] = dk(0);
                e.h[0][k + 1] = dk(1);
                e.h[k + 1][0] = dk(1);
                for l in 0..3 {
                    let q = sym_index(k, l);
                    e.h[k + 1][l + 1] = Dual::new(
                        at(0, &|m| self.d2[m][c][q][idx]),
                        at(1, &|m| self.d2[m][c][q][idx]),
                    );
                }
            }
            g[i + 1][j + 1] = e;
            g[j + 1][i + 1] = e;
        }
        g
    }

    /// `∂_r^p h_r` at `r` on the grid point, `p ≤ 4`.
    pub fn r_derivative(&self, idx: usize, r: f64, p: usize) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for c in 0..6 {
            let (i, j) = SYM[c];
            let mut acc = 0.0;
            for m in p..=MAX_ORDER {
                let mut coef = 1.0;
                for t in 0..p {
                    coef *= (m - t) as f64;
                }
                acc += coef * r.powi((m - p) as i32) * self.val[m][c][idx];
            }
            out[i][j] = acc;
            out[j][i] = acc;
        }
        out
    }

    /// Tangential first derivatives of the `r^m` coefficient, `[k][i][j]`.
    pub fn grad_coefficient(&self, idx: usize, m: usize) -> [[[f64; 3]; 3]; 3] {
        let mut out = [[[0.0; 3]; 3]; 3];
        for c in 0..6 {
            let (i, j) = SYM[c];
            for k in 0..3 {
                out[k][i][j] = self.d1[m][c][k][idx];
                out[k][j][i] = self.d1[m][c][k][idx];
            }
        }
        out
    }

    pub fn cell_volume(&self) -> f64 {
        let h = 2.0 * std::f64::consts::PI / self.spectral.n as f64;
        h * h * h
    }
}
