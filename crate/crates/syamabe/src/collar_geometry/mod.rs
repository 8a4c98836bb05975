//! Compactified metrics in collar normal form `ḡ = dr² + h_r` and the
//! boundary jets extracted from them.

mod conformal;
mod coord;
mod jet;
mod radial;
mod slice;
mod spec;
mod torus;

use nalgebra::{Matrix3, SymmetricEigen};
use thiserror::Error;

pub use conformal::{
    jet_conformal_transform, rescaled_distance, ConformalFactorJet, DistanceProfile, RadialOmega,
};
pub use coord::{coord_curvature, CoordCurvature};
pub use jet::{berger_ricci, contract, BoundaryJet, Chart, JetPoint, Tensor3, UMBILIC_TOL};
pub use radial::{frame_riemann, radial_riemann, ricci_scalar, Profile, RadialModel, Tensor4, S3_VOLUME};
pub use slice::{curvature_slice, weyl_energy, CurvatureSlice, SlicePoint};
pub use spec::{CatalogEntry, FourierTerm, GeometryKind, GeometrySpec, Topology, TorusCollar, WarpedRadial};
pub use torus::{Spectral3, TorusModel, MAX_ORDER, SYM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("metric h_r is not positive definite at r = {r} (smallest eigenvalue {min_eig})")]
    NonPositiveDefinite { r: f64, min_eig: f64 },
    #[error("malformed geometry: {0}")]
    BadSpec(String),
    #[error("field {field} is under-resolved: {tail:e} of its energy sits in the top third of the spectrum")]
    ResolutionInsufficient { field: String, tail: f64 },
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
}

#[derive(Clone, Debug)]
pub enum Model {
    Radial(RadialModel),
    Torus(TorusModel),
}

/// A validated compactified metric.
#[derive(Clone, Debug)]
pub struct CollarMetric {
    pub spec: GeometrySpec,
    pub model: Model,
}

impl CollarMetric {
    pub fn collar_depth(&self) -> f64 {
        self.spec.collar_depth
    }

    pub fn euler_characteristic(&self) -> Option<i64> {
        self.spec.euler_characteristic
    }

    pub fn radial(&self) -> Option<&RadialModel> {
        match &self.model {
            Model::Radial(m) => Some(m),
            Model::Torus(_) => None,
        }
    }

    pub fn torus(&self) -> Option<&TorusModel> {
        match &self.model {
            Model::Torus(m) => Some(m),
            Model::Radial(_) => None,
        }
    }

    /// True when a global solve is possible (ball or interval topology).
    pub fn has_interior(&self) -> bool {
        matches!(&self.model, Model::Radial(m) if m.topology.is_some())
    }

    /// Number of boundary chart points.
    pub fn boundary_points(&self) -> usize {
        match &self.model {
            Model::Radial(_) => 1,
            Model::Torus(t) => t.spectral.len(),
        }
    }

    /// Boundary metric `h` at a chart point.
    pub fn h(&self, idx: usize) -> Matrix3<f64> {
        self.interior_eval(idx, 0.0)[0]
    }

    /// Exact `(h′, h″, h‴)` at `r = 0`.
    pub fn h_jets(&self, idx: usize) -> [Matrix3<f64>; 3] {
        let e = self.interior_eval(idx, 0.0);
        [e[1], e[2], e[3]]
    }

    /// `h_r` and its first three `r`-derivatives at a chart point.
    pub fn interior_eval(&self, idx: usize, r: f64) -> [Matrix3<f64>; 4] {
        match &self.model {
            Model::Radial(m) => {
                let [a, da, dda, d3a] = m.profile.jet3(r);
                let d = |f: &dyn Fn(usize) -> f64| Matrix3::from_diagonal(&nalgebra::Vector3::from_fn(|i, _| f(i)));
                [
                    d(&|i| a[i] * a[i]),
                    d(&|i| 2.0 * a[i] * da[i]),
                    d(&|i| 2.0 * da[i] * da[i] + 2.0 * a[i] * dda[i]),
                    d(&|i| 6.0 * da[i] * dda[i] + 2.0 * a[i] * d3a[i]),
                ]
            }
            Model::Torus(t) => std::array::from_fn(|p| {
                let a = t.r_derivative(idx, r, p);
                Matrix3::from_fn(|i, j| a[i][j])
            }),
        }
    }

    /// `∫_{∂M} dv_h` quadrature weights.
    pub fn boundary_measure(&self) -> Vec<f64> {
        match &self.model {
            Model::Radial(m) => vec![m.boundary_volume()],
            Model::Torus(t) => (0..t.spectral.len())
                .map(|p| t.cell_volume() * self.h(p).determinant().sqrt())
                .collect(),
        }
    }
}

fn positive(x: f64, what: &str) -> Result<(), GeometryError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::BadSpec(format!("{what} must be positive and finite, got {x}")))
    }
}

/// Validates a spec and builds the collar metric.
pub fn build_geometry(spec: &GeometrySpec) -> Result<CollarMetric, GeometryError> {
    positive(spec.collar_depth, "collar_depth")?;
    let radial = |profile: Profile, topology: Option<Topology>, r_max: f64| {
        let components = if topology == Some(Topology::Interval) { 2 } else { 1 };
        Model::Radial(RadialModel {
            profile,
            topology,
            r_max,
            components,
        })
    };
    let model = match &spec.geometry {
        GeometryKind::EuclideanBall { radius } => {
            positive(*radius, "radius")?;
            radial(Profile::Ball { radius: *radius }, Some(Topology::Ball), *radius)
        }
        GeometryKind::SphereIntervalProduct {
            sphere_radius,
            length,
        } => {
            positive(*sphere_radius, "sphere_radius")?;
            positive(*length, "length")?;
            radial(
                Profile::Product { rho: *sphere_radius },
                Some(Topology::Interval),
                length / 2.0,
            )
        }
        GeometryKind::WarpedRadial(w) => {
            positive(w.extent, "extent")?;
            if w.coefficients.iter().flatten().any(|c| !c.is_finite()) {
                return Err(GeometryError::BadSpec("non-finite warp coefficient".into()));
            }
            match w.topology {
                Topology::Ball => {
                    if w.base.is_some() {
                        return Err(GeometryError::BadSpec("ball warps take no base".into()));
                    }
                    radial(
                        Profile::WarpedBall {
                            radius: w.extent,
                            c: w.coefficients.clone(),
                        },
                        Some(Topology::Ball),
                        w.extent,
                    )
                }
                Topology::Interval => {
                    let base = w
                        .base
                        .ok_or_else(|| GeometryError::BadSpec("interval warps need base".into()))?;
                    for b in base {
                        positive(b, "base")?;
                    }
                    radial(
                        Profile::WarpedInterval {
                            length: w.extent,
                            base,
                            c: w.coefficients.clone(),
                        },
                        Some(Topology::Interval),
                        w.extent / 2.0,
                    )
                }
            }
        }
        GeometryKind::TorusCollar(t) => Model::Torus(TorusModel::new(t.grid, t.terms.clone())?),
        GeometryKind::ExactCatalogEntry { entry } => match entry {
            CatalogEntry::PoincareBallGeodesic => {
                if spec.collar_depth >= 2.0 {
                    return Err(GeometryError::BadSpec("collar_depth must be < 2".into()));
                }
                radial(Profile::PoincareGeodesic, None, spec.collar_depth)
            }
            CatalogEntry::FlatCollar => Model::Torus(TorusModel::new(16, Vec::new())?),
        },
    };
    if let Model::Radial(m) = &model {
        if spec.collar_depth > m.r_max * (1.0 + 1e-12) {
            return Err(GeometryError::BadSpec(format!(
                "collar_depth {} exceeds the radial extent {}",
                spec.collar_depth, m.r_max
            )));
        }
    }
    let metric = CollarMetric {
        spec: spec.clone(),
        model,
    };
    check_positive(&metric)?;
    Ok(metric)
}

fn check_positive(metric: &CollarMetric) -> Result<(), GeometryError> {
    let delta = metric.collar_depth();
    match &metric.model {
        Model::Radial(m) => {
            let steps = 400;
            for s in 0..steps {
                let r = delta * s as f64 / steps as f64;
                let a = m.profile.eval(r);
                let min = a.iter().map(|x| x * x).fold(f64::INFINITY, f64::min);
                if a.iter().any(|&x| x <= 0.0) || !min.is_finite() {
                    return Err(GeometryError::NonPositiveDefinite { r, min_eig: min.min(0.0) });
                }
            }
            // ball warps must keep a monotone orientation up to the centre
            if m.topology == Some(Topology::Ball) {
                for s in 1..steps {
                    let r = m.r_max * s as f64 / steps as f64;
                    if m.profile.eval(r).iter().any(|&x| x <= 0.0) {
                        return Err(GeometryError::NonPositiveDefinite { r, min_eig: 0.0 });
                    }
                }
            }
        }
        Model::Torus(t) => {
            let steps = 8;
            for s in 0..steps {
                let r = delta * s as f64 / steps as f64;
                for p in 0..t.spectral.len() {
                    let h = Matrix3::from_fn(|i, j| t.r_derivative(p, r, 0)[i][j]);
                    let min = SymmetricEigen::new(h).eigenvalues.min();
                    if min <= 0.0 || !min.is_finite() {
                        return Err(GeometryError::NonPositiveDefinite { r, min_eig: min });
                    }
                }
            }
        }
    }
    Ok(())
}

/// All boundary-local quantities of the metric.
pub fn boundary_jet(metric: &CollarMetric) -> Result<BoundaryJet, GeometryError> {
    match &metric.model {
        Model::Radial(m) => Ok(jet::radial_jet(&m.profile, m.components)),
        Model::Torus(t) => jet::torus_jet(t),
    }
}
