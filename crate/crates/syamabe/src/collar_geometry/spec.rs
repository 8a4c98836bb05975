use serde::{Deserialize, Serialize};

use super::GeometryError;

/// One geometry, as read from a TOML file.
///
/// ```toml
/// name = "unit ball"
/// collar_depth = 1.0
/// euler_characteristic = 1
///
/// [geometry]
/// kind = "euclidean_ball"
/// radius = 1.0
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    #[serde(default)]
    pub name: Option<String>,
    pub collar_depth: f64,
    #[serde(default)]
    pub euler_characteristic: Option<i64>,
    pub geometry: GeometryKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryKind {
    EuclideanBall {
        radius: f64,
    },
    /// Round `S³(sphere_radius) × [0, length]`.
    SphereIntervalProduct {
        sphere_radius: f64,
        length: f64,
    },
    WarpedRadial(WarpedRadial),
    TorusCollar(TorusCollar),
    ExactCatalogEntry {
        entry: CatalogEntry,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// One boundary sphere, smooth centre at `r = extent`.
    Ball,
    /// `S³ × [0, extent]`, two boundary components.
    Interval,
}

/// `ḡ = dr² + Σ a_i(r)² σ_i²` over left-invariant coframes of the unit `S³`.
///
/// Ball: `a_i = s (1 + Σ_m c[i][m] s^(2m+2))` with `s = extent − r`.
/// Interval: `a_i = base[i] + Σ_m c[i][m] sin((2m+1) π r / extent)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpedRadial {
    pub topology: Topology,
    pub extent: f64,
    #[serde(default)]
    pub base: Option<[f64; 3]>,
    #[serde(default)]
    pub coefficients: [Vec<f64>; 3],
}

/// `h_r = δ + Σ r^order · (cos k·x, sin k·x) terms` on the flat torus
/// `[0, 2π)³`, each term added symmetrically to components `(i, j)`, `(j, i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusCollar {
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub terms: Vec<FourierTerm>,
}

fn default_grid() -> usize {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub order: usize,
    pub ij: [usize; 2],
    pub k: [i32; 3],
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogEntry {
    /// Hyperbolic metric in its geodesic compactification,
    /// `ḡ = dr² + (1 − r²/4)² g_{S³}`, with `u = r` exact.
    PoincareBallGeodesic,
    /// `T³ × [0, δ)` with the flat metric.
    FlatCollar,
}

impl GeometrySpec {
    pub fn from_toml(text: &str) -> Result<Self, GeometryError> {
        toml::from_str(text).map_err(|e| GeometryError::BadSpec(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serialises")
    }

    pub fn ball(radius: f64) -> Self {
        GeometrySpec {
            name: Some(format!("ball radius {radius}")),
            collar_depth: radius,
            euler_characteristic: Some(1),
            geometry: GeometryKind::EuclideanBall { radius },
        }
    }

    pub fn product(sphere_radius: f64, length: f64) -> Self {
        GeometrySpec {
            name: Some(format!("S3({sphere_radius}) x [0,{length}]")),
            collar_depth: length / 2.0,
            euler_characteristic: Some(0),
            geometry: GeometryKind::SphereIntervalProduct {
                sphere_radius,
                length,
            },
        }
    }

    pub fn warped_ball(radius: f64, coefficients: [Vec<f64>; 3]) -> Self {
        GeometrySpec {
            name: Some("warped ball".into()),
            collar_depth: radius,
            euler_characteristic: Some(1),
            geometry: GeometryKind::WarpedRadial(WarpedRadial {
                topology: Topology::Ball,
                extent: radius,
                base: None,
                coefficients,
            }),
        }
    }

    pub fn warped_interval(length: f64, base: [f64; 3], coefficients: [Vec<f64>; 3]) -> Self {
        GeometrySpec {
            name: Some("warped interval".into()),
            collar_depth: length / 2.0,
            euler_characteristic: Some(0),
            geometry: GeometryKind::WarpedRadial(WarpedRadial {
                topology: Topology::Interval,
                extent: length,
                base: Some(base),
                coefficients,
            }),
        }
    }

    pub fn torus(grid: usize, collar_depth: f64, terms: Vec<FourierTerm>) -> Self {
        GeometrySpec {
            name: Some("torus collar".into()),
            collar_depth,
            euler_characteristic: None,
            geometry: GeometryKind::TorusCollar(TorusCollar { grid, terms }),
        }
    }

    pub fn catalog(entry: CatalogEntry) -> Self {
        let collar_depth = match entry {
            CatalogEntry::PoincareBallGeodesic => 1.5,
            CatalogEntry::FlatCollar => 1.0,
        };
        GeometrySpec {
            name: Some(format!("{entry:?}")),
            collar_depth,
            euler_characteristic: match entry {
                CatalogEntry::PoincareBallGeodesic => Some(1),
                CatalogEntry::FlatCollar => None,
            },
            geometry: GeometryKind::ExactCatalogEntry { entry },
        }
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
