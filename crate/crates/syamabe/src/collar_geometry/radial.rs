use crate::numeric::{Dual, Real};

use super::spec::Topology;

/// Warp factors of a radial metric `dr² + Σ a_i(r)² σ_i²`.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    /// Euclidean ball: `a = R − r`.
    Ball { radius: f64 },
    /// Round product: `a = ρ`.
    Product { rho: f64 },
    WarpedBall { radius: f64, c: [Vec<f64>; 3] },
    WarpedInterval { length: f64, base: [f64; 3], c: [Vec<f64>; 3] },
    /// `a = 1 − r²/4`.
    PoincareGeodesic,
}

impl Profile {
    pub fn eval<T: Real>(&self, r: T) -> [T; 3] {
        match self {
            Profile::Ball { radius } => [T::from_f64(*radius) - r; 3],
            Profile::Product { rho } => [T::from_f64(*rho); 3],
            Profile::WarpedBall { radius, c } => {
                let s = T::from_f64(*radius) - r;
                let s2 = s * s;
                std::array::from_fn(|i| {
                    let mut acc = T::zero();
                    let mut p = s2;
                    for &ci in &c[i] {
                        acc += p.scale(ci);
                        p *= s2;
                    }
                    s * (T::one() + acc)
                })
            }
            Profile::WarpedInterval { length, base, c } => {
                let w = r * T::pi() / T::from_f64(*length);
                std::array::from_fn(|i| {
                    let mut acc = T::from_f64(base[i]);
                    for (m, &ci) in c[i].iter().enumerate() {
                        acc += (w.scale((2 * m + 1) as f64)).sin().scale(ci);
                    }
                    acc
                })
            }
            Profile::PoincareGeodesic => [T::one() - r * r * T::from_f64(0.25); 3],
        }
    }

    /// `(a, a', a'')` at `r`.
    pub fn jet2<T: Real>(&self, r: T) -> [[T; 3]; 3] {
        let x = Dual::new(Dual::variable(r), Dual::constant(T::one()));
        let a = self.eval(x);
        [
            std::array::from_fn(|i| a[i].v.v),
            std::array::from_fn(|i| a[i].v.d),
            std::array::from_fn(|i| a[i].d.d),
        ]
    }

    /// `(a, a', a'', a''')` at `r`.
    pub fn jet3(&self, r: f64) -> [[f64; 3]; 4] {
        let x = Dual::new(
            Dual::new(Dual::variable(r), Dual::constant(1.0)),
            Dual::new(Dual::constant(1.0), Dual::constant(0.0)),
        );
        let a = self.eval(x);
        [
            std::array::from_fn(|i| a[i].v.v.v),
            std::array::from_fn(|i| a[i].v.v.d),
            std::array::from_fn(|i| a[i].v.d.d),
            std::array::from_fn(|i| a[i].d.d.d),
        ]
    }
}

/// Radial geometry: warp profile plus global shape.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialModel {
    pub profile: Profile,
    /// `None` for collar-only catalog entries.
    pub topology: Option<Topology>,
    /// Centre (ball) or mid-slice (interval) coordinate; collar end otherwise.
    pub r_max: f64,
    pub components: usize,
}

/// Volume of the unit round `S³`.
pub const S3_VOLUME: f64 = 2.0 * std::f64::consts::PI * std::f64::consts::PI;

impl RadialModel {
    /// Area density `a₁a₂a₃` relative to the unit `S³` measure.
    pub fn jacobian<T: Real>(&self, r: T) -> T {
        let a = self.profile.eval(r);
        a[0] * a[1] * a[2]
    }

    /// Total boundary volume over all components.
    pub fn boundary_volume(&self) -> f64 {
        self.components as f64 * S3_VOLUME * self.jacobian(0.0)
    }
}

pub type Tensor4<T> = [[[[T; 4]; 4]; 4]; 4];

/// Levi-Civita data of the orthonormal frame `(∂_r, a_i⁻¹ E_i)`,
/// `Γ[a][b][c] = ⟨∇_{e_a} e_b, e_c⟩`.
fn frame_connection<S: Real>(a: [S; 3], da: [S; 3]) -> ([[[S; 4]; 4]; 4], [[[S; 4]; 4]; 4]) {
    let mut c = [[[S::zero(); 4]; 4]; 4];
    for i in 0..3 {
        let l = da[i] / a[i];
        c[0][i + 1][i + 1] = -l;
        c[i + 1][0][i + 1] = l;
    }
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        let v = S::from_f64(2.0) * a[k] / (a[i] * a[j]);
        c[i + 1][j + 1][k + 1] = v;
        c[j + 1][i + 1][k + 1] = -v;
    }
    let mut g = [[[S::zero(); 4]; 4]; 4];
    for x in 0..4 {
        for y in 0..4 {
            for z in 0..4 {
                g[x][y][z] = (c[x][y][z] - c[y][z][x] + c[z][x][y]).scale(0.5);
            }
        }
    }
    (c, g)
}

/// Riemann tensor `R_abcd = ⟨R(e_c, e_d) e_b, e_a⟩` in the orthonormal frame,
/// from the warp factors and their first two derivatives.
pub fn frame_riemann<T: Real>(a: [T; 3], da: [T; 3], dda: [T; 3]) -> Tensor4<T> {
    let ad: [Dual<T>; 3] = std::array::from_fn(|i| Dual::new(a[i], da[i]));
    let dad: [Dual<T>; 3] = std::array::from_fn(|i| Dual::new(da[i], dda[i]));
    let (cd, gd) = frame_connection(ad, dad);
    let c = cd.map(|x| x.map(|y| y.map(|z| z.v)));
    let g = gd.map(|x| x.map(|y| y.map(|z| z.v)));
    let dg = gd.map(|x| x.map(|y| y.map(|z| z.d)));
    let mut r = [[[[T::zero(); 4]; 4]; 4]; 4];
    for ia in 0..4 {
        for b in 0..4 {
            for cc in 0..4 {
                for d in 0..4 {
                    let mut v = T::zero();
                    if cc == 0 {
                        v += dg[d][b][ia];
                    }
                    if d == 0 {
                        v -= dg[cc][b][ia];
                    }
                    for f in 0..4 {
                        v += g[d][b][f] * g[cc][f][ia] - g[cc][b][f] * g[d][f][ia]
                            - c[cc][d][f] * g[f][b][ia];
                    }
                    r[ia][b][cc][d] = v;
                }
            }
        }
    }
    r
}

/// Ricci and scalar curvature of an orthonormal-frame Riemann tensor.
pub fn ricci_scalar<T: Real>(r: &Tensor4<T>) -> ([[T; 4]; 4], T) {
    let mut ric = [[T::zero(); 4]; 4];
    for b in 0..4 {
        for d in 0..4 {
            for a in 0..4 {
                ric[b][d] += r[a][b][a][d];
            }
        }
    }
    let s = (0..4).fold(T::zero(), |acc, i| acc + ric[i][i]);
    (ric, s)
}

/// Frame curvature of the radial metric at `r`, generic in the scalar so that
/// dual numbers give `r`-derivatives.
pub fn radial_riemann<T: Real>(profile: &Profile, r: T) -> Tensor4<T> {
    let [a, da, dda] = profile.jet2(r);
    frame_riemann(a, da, dda)
}
