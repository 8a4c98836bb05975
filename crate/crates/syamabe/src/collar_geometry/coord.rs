use crate::numeric::{invert, Jet2, Real};

use super::radial::Tensor4;

/// Curvature of a metric given in coordinates, `R_abcd = ⟨R(∂_c, ∂_d) ∂_b, ∂_a⟩`.
#[derive(Clone, Debug)]
pub struct CoordCurvature<T> {
    pub metric: [[T; 4]; 4],
    pub inverse: [[T; 4]; 4],
    pub christoffel: [[[T; 4]; 4]; 4],
    pub riemann: Tensor4<T>,
    pub ricci: [[T; 4]; 4],
    pub scalar: T,
}

/// Assembles Christoffel symbols and curvature from the second-order jet of
/// the metric components at a point.
pub fn coord_curvature<T: Real>(g: &[[Jet2<T>; 4]; 4]) -> CoordCurvature<T> {
    let metric = g.map(|row| row.map(|x| x.v));
    let inverse = invert(&metric).expect("metric is invertible");
    // S[h][d][b] = ∂_d g_hb + ∂_b g_hd − ∂_h g_db and its derivative along c
    let mut s = [[[T::zero(); 4]; 4]; 4];
    let mut ds = [[[[T::zero(); 4]; 4]; 4]; 4];
    for h in 0..4 {
        for d in 0..4 {
            for b in 0..4 {
                s[h][d][b] = g[h][b].g[d] + g[h][d].g[b] - g[d][b].g[h];
                for c in 0..4 {
                    ds[c][h][d][b] = g[h][b].h[c][d] + g[h][d].h[c][b] - g[d][b].h[c][h];
                }
            }
        }
    }
    let mut gam = [[[T::zero(); 4]; 4]; 4];
    for e in 0..4 {
        for d in 0..4 {
            for b in 0..4 {
                let mut v = T::zero();
                for h in 0..4 {
                    v += inverse[e][h] * s[h][d][b];
                }
                gam[e][d][b] = v.scale(0.5);
            }
        }
    }
    // ∂_c g^{eh} = −g^{ep} ∂_c g_pq g^{qh}
    let mut dinv = [[[T::zero(); 4]; 4]; 4];
    for c in 0..4 {
        for e in 0..4 {
            for h in 0..4 {
                let mut v = T::zero();
                for p in 0..4 {
                    for q in 0..4 {
                        v += inverse[e][p] * g[p][q].g[c] * inverse[q][h];
                    }
                }
                dinv[c][e][h] = -v;
            }
        }
    }
    let mut dgam = [[[[T::zero(); 4]; 4]; 4]; 4];
    for c in 0..4 {
        for e in 0..4 {
            for d in 0..4 {
                for b in 0..4 {
                    let mut v = T::zero();
                    for h in 0..4 {
                        v += dinv[c][e][h] * s[h][d][b] + inverse[e][h] * ds[c][h][d][b];
                    }
                    dgam[c][e][d][b] = v.scale(0.5);
                }
            }
        }
    }
    let mut rup = [[[[T::zero(); 4]; 4]; 4]; 4];
    for e in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let mut v = dgam[c][e][d][b] - dgam[d][e][c][b];
                    for f in 0..4 {
                        v += gam[e][c][f] * gam[f][d][b] - gam[e][d][f] * gam[f][c][b];
                    }
                    rup[e][b][c][d] = v;
                }
            }
        }
    }
    let mut riemann = [[[[T::zero(); 4]; 4]; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let mut v = T::zero();
                    for e in 0..4 {
                        v += metric[a][e] * rup[e][b][c][d];
                    }
                    riemann[a][b][c][d] = v;
                }
            }
        }
    }
    let mut ricci = [[T::zero(); 4]; 4];
    for b in 0..4 {
        for d in 0..4 {
            for a in 0..4 {
                ricci[b][d] += rup[a][b][a][d];
            }
        }
    }
    let mut scalar = T::zero();
    for b in 0..4 {
        for d in 0..4 {
            scalar += inverse[b][d] * ricci[b][d];
        }
    }
    CoordCurvature {
        metric,
        inverse,
        christoffel: gam,
        riemann,
        ricci,
        scalar,
    }
}
