use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use super::Real;

/// Number of independent variables carried by [`Jet2`].
pub const NV: usize = 4;

/// Second-order jet in four variables: value, gradient and Hessian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2<T> {
    pub v: T,
    pub g: [T; NV],
    pub h: [[T; NV]; NV],
}

impl<T: Real> Jet2<T> {
    pub fn constant(v: T) -> Self {
        Jet2 {
            v,
            g: [T::zero(); NV],
            h: [[T::zero(); NV]; NV],
        }
    }

    /// The coordinate function `x_i` evaluated at `v`.
    pub fn variable(v: T, i: usize) -> Self {
        let mut j = Self::constant(v);
        j.g[i] = T::one();
        j
    }

    /// Seeds a point as four coordinate jets.
    pub fn point(x: [T; NV]) -> [Self; NV] {
        std::array::from_fn(|i| Self::variable(x[i], i))
    }

    /// Applies a scalar function given its value and first two derivatives.
    pub fn chain(self, f: T, df: T, ddf: T) -> Self {
        let mut out = Self::constant(f);
        for a in 0..NV {
            out.g[a] = df * self.g[a];
            for b in 0..NV {
                out.h[a][b] = df * self.h[a][b] + ddf * self.g[a] * self.g[b];
            }
        }
        out
    }
}

impl<T: Real> Default for Jet2<T> {
    fn default() -> Self {
        Self::constant(T::zero())
    }
}

impl<T: Real> PartialOrd for Jet2<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.v.partial_cmp(&other.v)
    }
}

impl<T: Real> Add for Jet2<T> {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self.v += o.v;
        for a in 0..NV {
            self.g[a] += o.g[a];
            for b in 0..NV {
                self.h[a][b] += o.h[a][b];
            }
        }
        self
    }
}
impl<T: Real> Sub for Jet2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}
impl<T: Real> Neg for Jet2<T> {
    type Output = Self;
    fn neg(mut self) -> Self {
        self.v = -self.v;
        for a in 0..NV {
            self.g[a] = -self.g[a];
            for b in 0..NV {
                self.h[a][b] = -self.h[a][b];
            }
        }
        self
    }
}
impl<T: Real> Mul for Jet2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = Self::constant(self.v * o.v);
        for a in 0..NV {
            out.g[a] = self.v * o.g[a] + o.v * self.g[a];
            for b in 0..NV {
                out.h[a][b] = self.v * o.h[a][b]
                    + o.v * self.h[a][b]
                    + self.g[a] * o.g[b]
                    + o.g[a] * self.g[b];
            }
        }
        out
    }
}
impl<T: Real> Div for Jet2<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}
impl<T: Real> AddAssign for Jet2<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}
impl<T: Real> SubAssign for Jet2<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}
impl<T: Real> MulAssign for Jet2<T> {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}
impl<T: Real> DivAssign for Jet2<T> {
    fn div_assign(&mut self, o: Self) {
        *self = *self / o;
    }
}

impl<T: Real> Real for Jet2<T> {
    fn from_f64(x: f64) -> Self {
        Self::constant(T::from_f64(x))
    }
    fn to_f64(self) -> f64 {
        self.v.to_f64()
    }
    fn recip(self) -> Self {
        let r = self.v.recip();
        self.chain(r, -(r * r), T::from_f64(2.0) * r * r * r)
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        let d = T::from_f64(0.5) / s;
        self.chain(s, d, -(d / (self.v + self.v)))
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    fn ln(self) -> Self {
        let r = self.v.recip();
        self.chain(self.v.ln(), r, -(r * r))
    }
    fn sin(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(c, -s, -c)
    }
    fn pi() -> Self {
        Self::constant(T::pi())
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => return Self::one(),
            1 => return self,
            2 => return self * self,
            _ => {}
        }
        let p2 = self.v.powi(n - 2);
        let p1 = p2 * self.v;
        let nf = T::from_f64(n as f64);
        self.chain(
            p1 * self.v,
            nf * p1,
            nf * T::from_f64((n - 1) as f64) * p2,
        )
    }
}
