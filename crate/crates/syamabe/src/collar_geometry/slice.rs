use crate::numeric::{GaussLegendre, Jet2};

use super::coord::coord_curvature;
use super::radial::{radial_riemann, Tensor4, S3_VOLUME};
use super::{CollarMetric, GeometryError, Model};

/// Ambient curvature at one point of a slice `{r = const}`.
#[derive(Clone, Debug)]
pub struct SlicePoint {
    /// Components are taken in the orthonormal frame `(∂_r, a_i⁻¹E_i)` on
    /// radial metrics and in collar coordinates on the torus; `metric` is the
    /// matching Gram matrix.
    pub metric: [[f64; 4]; 4],
    pub inverse: [[f64; 4]; 4],
    pub riemann: Tensor4<f64>,
    pub ricci: [[f64; 4]; 4],
    pub scalar: f64,
    pub schouten: [[f64; 4]; 4],
    pub weyl: Tensor4<f64>,
    pub weyl_norm2: f64,
    pub einstein_tf: [[f64; 4]; 4],
}

#[derive(Clone, Debug)]
pub struct CurvatureSlice {
    pub r: f64,
    pub points: Vec<SlicePoint>,
}

impl SlicePoint {
    pub fn from_riemann(metric: [[f64; 4]; 4], inverse: [[f64; 4]; 4], riemann: Tensor4<f64>) -> Self {
        let mut ricci = [[0.0; 4]; 4];
        for b in 0..4 {
            for d in 0..4 {
                for a in 0..4 {
                    for c in 0..4 {
                        ricci[b][d] += inverse[a][c] * riemann[a][b][c][d];
                    }
                }
            }
        }
        let mut scalar = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                scalar += inverse[a][b] * ricci[a][b];
            }
        }
        let j = scalar / 6.0;
        let schouten: [[f64; 4]; 4] =
            std::array::from_fn(|a| std::array::from_fn(|b| 0.5 * (ricci[a][b] - j * metric[a][b])));
        let einstein_tf: [[f64; 4]; 4] =
            std::array::from_fn(|a| std::array::from_fn(|b| ricci[a][b] - 0.25 * scalar * metric[a][b]));
        let p = &schouten;
        let g = &metric;
        let mut weyl = [[[[0.0; 4]; 4]; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        weyl[a][b][c][d] = riemann[a][b][c][d]
                            - (p[a][c] * g[b][d] + p[b][d] * g[a][c] - p[a][d] * g[b][c] - p[b][c] * g[a][d]);
                    }
                }
            }
        }
        let weyl_norm2 = norm2_4(&weyl, &inverse);
        SlicePoint {
            metric,
            inverse,
            riemann,
            ricci,
            scalar,
            schouten,
            weyl,
            weyl_norm2,
            einstein_tf,
        }
    }

    /// `|Ē|²` with the slice metric.
    pub fn einstein_norm2(&self) -> f64 {
        norm2_2(&self.einstein_tf, &self.inverse)
    }

    /// Largest single trace of the Weyl tensor.
    pub fn weyl_trace_max(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for b in 0..4 {
            for d in 0..4 {
                let mut t = 0.0;
                for a in 0..4 {
                    for c in 0..4 {
                        t += self.inverse[a][c] * self.weyl[a][b][c][d];
                    }
                }
                worst = worst.max(t.abs());
            }
        }
        worst
    }

    /// Largest violation of the algebraic curvature symmetries.
    pub fn symmetry_defect(&self) -> f64 {
        let r = &self.riemann;
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let x = r[a][b][c][d];
                        worst = worst
                            .max((x + r[b][a][c][d]).abs())
                            .max((x + r[a][b][d][c]).abs())
                            .max((x - r[c][d][a][b]).abs())
                            .max((x + r[a][c][d][b] + r[a][d][b][c]).abs());
                    }
                }
            }
        }
        worst
    }
}

/// `T_{abcd} T^{abcd}`.
pub fn norm2_4(t: &Tensor4<f64>, inv: &[[f64; 4]; 4]) -> f64 {
    // raise one index at a time
    let mut up = *t;
    for _slot in 0..4 {
        let mut next = [[[[0.0; 4]; 4]; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let mut v = 0.0;
                        for e in 0..4 {
                            v += inv[a][e] * up[e][b][c][d];
                        }
                        // rotate slots so every index gets raised once
                        next[b][c][d][a] = v;
                    }
                }
            }
        }
        up = next;
    }
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    s += t[a][b][c][d] * up[a][b][c][d];
                }
            }
        }
    }
    s
}

/// `T_{ab} T^{ab}` for a symmetric tensor.
pub fn norm2_2(t: &[[f64; 4]; 4], inv: &[[f64; 4]; 4]) -> f64 {
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    s += inv[a][c] * inv[b][d] * t[a][b] * t[c][d];
                }
            }
        }
    }
    s
}

fn identity4() -> [[f64; 4]; 4] {
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }))
}

/// Curvature on the slice at collar coordinate `r`.
pub fn curvature_slice(metric: &CollarMetric, r: f64) -> Result<CurvatureSlice, GeometryError> {
    let limit = match &metric.model {
        Model::Radial(m) if m.topology.is_some() => m.r_max,
        _ => metric.collar_depth(),
    };
    if !(0.0..limit).contains(&r) && !(r == limit && matches!(&metric.model, Model::Radial(m) if m.topology == Some(super::Topology::Interval))) {
        return Err(GeometryError::BadSpec(format!("slice r = {r} outside [0, {limit})")));
    }
    let points = match &metric.model {
        Model::Radial(m) => {
            let rm = radial_riemann(&m.profile, r);
            vec![SlicePoint::from_riemann(identity4(), identity4(), rm)]
        }
        Model::Torus(t) => (0..t.spectral.len())
            .map(|p| {
                let jet = t.collar_jet(p, r);
                let plain = jet.map(|row| {
                    row.map(|e| {
                        let mut x = Jet2::<f64>::constant(e.v.v);
                        for a in 0..4 {
                            x.g[a] = e.g[a].v;
                            for b in 0..4 {
                                x.h[a][b] = e.h[a][b].v;
                            }
                        }
                        x
                    })
                });
                let cc = coord_curvature(&plain);
                SlicePoint::from_riemann(cc.metric, cc.inverse, cc.riemann)
            })
            .collect(),
    };
    Ok(CurvatureSlice { r, points })
}

/// `∫_M |W̄|² dv_ḡ`, which equals `∫_M |W|²_g dv_g` for any conformal factor.
///
/// `panels` composite 20-point Gauss-Legendre panels in `r`.
pub fn weyl_energy(metric: &CollarMetric, panels: usize) -> Result<f64, GeometryError> {
    let m = match &metric.model {
        Model::Radial(m) if m.topology.is_some() => m,
        _ => {
            return Err(GeometryError::UnsupportedGeometry(
                "the interior beyond the collar is not defined".into(),
            ))
        }
    };
    let rule = GaussLegendre::<f64>::new(20);
    let edges: Vec<f64> = (0..=panels).map(|i| m.r_max * i as f64 / panels as f64).collect();
    let density = |r: f64| {
        let rm = radial_riemann(&m.profile, r);
        let sp = SlicePoint::from_riemann(identity4(), identity4(), rm);
        sp.weyl_norm2 * m.jacobian(r)
    };
    Ok(m.components as f64 * S3_VOLUME * rule.integrate_panels(&edges, density))
}
