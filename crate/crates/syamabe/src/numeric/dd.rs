use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use qd::Quad;

use super::Real;

/// Double-double number (about 31 significant digits).
///
/// Thin wrapper over [`qd::Quad`] that always uses the accurate addition
/// and adds the trigonometric functions the ladder code needs.
#[derive(Clone, Copy, PartialEq)]
pub struct DD(pub Quad);

impl Default for DD {
    fn default() -> Self {
        DD::ZERO
    }
}

impl DD {
    pub const ZERO: DD = DD(Quad::ZERO);
    pub const ONE: DD = DD(Quad::ONE);

    pub fn new(x: f64) -> Self {
        DD(Quad::from_f64(x))
    }

    pub fn hi(self) -> f64 {
        self.0 .0
    }

    pub fn lo(self) -> f64 {
        self.0 .1
    }

    /// Sum of both limbs rounded to f64.
    pub fn round(self) -> f64 {
        self.0 .0 + self.0 .1
    }

    fn sin_cos(self) -> (DD, DD) {
        let two_pi = DD(Quad::PI) * DD::new(2.0);
        let k = (self / two_pi).round().round_ties_even();
        let x = self - two_pi * DD::new(k);
        // halve 10 times, Taylor, then double back
        let y = x / DD::new(1024.0);
        let y2 = y * y;
        let mut s = DD::ZERO;
        let mut c = DD::ZERO;
        let mut term_s = y;
        let mut term_c = DD::ONE;
        for j in 0..14 {
            s += term_s;
            c += term_c;
            let a = (2 * j + 2) as f64;
            let b = (2 * j + 3) as f64;
            term_s = -(term_s * y2) / DD::new(a * b);
            term_c = -(term_c * y2) / DD::new((a - 1.0) * a);
        }
        for _ in 0..10 {
            let s2 = DD::new(2.0) * s * c;
            let c2 = DD::ONE - DD::new(2.0) * s * s;
            s = s2;
            c = c2;
        }
        (s, c)
    }
}

impl fmt::Debug for DD {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DD({:e} + {:e})", self.hi(), self.lo())
    }
}

impl fmt::Display for DD {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.round())
    }
}

impl PartialOrd for DD {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(other.0)
    }
}

impl Add for DD {
    type Output = DD;
    fn add(self, rhs: DD) -> DD {
        DD(self.0.add_accurate(rhs.0))
    }
}
impl Sub for DD {
    type Output = DD;
    fn sub(self, rhs: DD) -> DD {
        DD(self.0.sub_accurate(rhs.0))
    }
}
impl Mul for DD {
    type Output = DD;
    fn mul(self, rhs: DD) -> DD {
        DD(self.0 * rhs.0)
    }
}
impl Div for DD {
    type Output = DD;
    fn div(self, rhs: DD) -> DD {
        DD(self.0 / rhs.0)
    }
}
impl Neg for DD {
    type Output = DD;
    fn neg(self) -> DD {
        DD(-self.0)
    }
}
impl AddAssign for DD {
    fn add_assign(&mut self, rhs: DD) {
        *self = *self + rhs;
    }
}
impl SubAssign for DD {
    fn sub_assign(&mut self, rhs: DD) {
        *self = *self - rhs;
    }
}
impl MulAssign for DD {
    fn mul_assign(&mut self, rhs: DD) {
        *self = *self * rhs;
    }
}
impl DivAssign for DD {
    fn div_assign(&mut self, rhs: DD) {
        *self = *self / rhs;
    }
}

impl From<f64> for DD {
    fn from(x: f64) -> Self {
        DD::new(x)
    }
}

impl Real for DD {
    fn from_f64(x: f64) -> Self {
        DD::new(x)
    }
    fn to_f64(self) -> f64 {
        self.round()
    }
    fn sqrt(self) -> Self {
        DD(self.0.sqrt())
    }
    fn exp(self) -> Self {
        DD(self.0.exp())
    }
    fn ln(self) -> Self {
        DD(self.0.ln())
    }
    fn sin(self) -> Self {
        self.sin_cos().0
    }
    fn cos(self) -> Self {
        self.sin_cos().1
    }
    fn pi() -> Self {
        DD(Quad::PI)
    }
}
