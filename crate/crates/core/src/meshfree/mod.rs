//! Scattered-data interpolation back-ends behind one facade.
//!
//! An [`Interpolator`] holds everything that depends only on the point cloud
//! (neighbour index, factored RBF system, grid layout). Fitting nodal values
//! yields an [`Interpolant`], possibly vector-valued, whose evaluation is pure
//! and can be shared across threads.

mod index;
mod mls;
mod multilinear;
mod rbf;
mod shepard;

use std::cell::RefCell;
use std::sync::Arc;

pub use index::NeighborIndex;
pub use mls::{mls_eval, wendland_c2, MlsEval, MlsParams};
pub use multilinear::multilinear_eval;
pub use rbf::{rbf_eval, rbf_fit, RbfKernel, RbfModel, DEFAULT_RIDGE_FACTOR, MAX_CONDITION};
pub use shepard::shepard_eval;

use crate::error::{Error, Result};
use crate::pointcloud::{default_probe_count, fill_distance, PointCloud};

use mls::MlsBasis;
use multilinear::GridLayout;
use rbf::RbfSolver;

/// Default MLS / Shepard support radius in units of the fill distance.
pub const DEFAULT_RADIUS_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterpConfig {
    /// Moving least squares; radius defaults to `3 h`.
    Mls { degree: usize, radius: Option<f64> },
    /// Shepard's method; radius defaults to `3 h`.
    Shepard { radius: Option<f64> },
    /// Polyharmonic RBF; kernel defaults by dimension, ridge to
    /// `1e-12 * max |A_ij|`.
    Rbf {
        kernel: Option<RbfKernel>,
        ridge: Option<f64>,
    },
    /// Multilinear blending on a tensor grid.
    Multilinear,
}

impl InterpConfig {
    pub fn mls() -> Self {
        InterpConfig::Mls { degree: 1, radius: None }
    }

    pub fn shepard() -> Self {
        InterpConfig::Shepard { radius: None }
    }

    pub fn rbf() -> Self {
        InterpConfig::Rbf { kernel: None, ridge: None }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InterpConfig::Mls { .. } => "mls",
            InterpConfig::Shepard { .. } => "shepard",
            InterpConfig::Rbf { .. } => "rbf",
            InterpConfig::Multilinear => "multilinear",
        }
    }

    /// Parses `mls`, `shepard`, `rbf` or `multilinear` with default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "mls" => Ok(Self::mls()),
            "shepard" => Ok(Self::shepard()),
            "rbf" => Ok(Self::rbf()),
            "multilinear" | "trilinear" | "tensor" => Ok(InterpConfig::Multilinear),
            other => Err(Error::Config(format!("unknown back-end '{other}'"))),
        }
    }
}

#[derive(Debug)]
enum Prepared {
    Mls(MlsBasis),
    Shepard { radius: f64, index: NeighborIndex },
    Rbf(Arc<RbfSolver>),
    Multilinear(GridLayout),
}

#[derive(Debug)]
struct Inner {
    cloud: PointCloud,
    prepared: Prepared,
}

/// Cloud-dependent interpolation machinery; cheap to clone.
#[derive(Debug, Clone)]
pub struct Interpolator {
    inner: Arc<Inner>,
}

fn default_radius(cloud: &PointCloud) -> Result<f64> {
    let h = match cloud.fill_distance() {
        Some(h) => h,
        None => fill_distance(cloud, default_probe_count(cloud.dim()))?,
    };
    if h > 0.0 {
        Ok(DEFAULT_RADIUS_FACTOR * h)
    } else {
        Ok(cloud.domain().diameter())
    }
}

thread_local! {
    static SCRATCH: RefCell<Vec<(usize, f64)>> = const { RefCell::new(Vec::new()) };
}

impl Interpolator {
    pub fn new(cloud: &PointCloud, config: &InterpConfig) -> Result<Self> {
        let prepared = match *config {
            InterpConfig::Mls { degree, radius } => {
                let radius = match radius {
                    Some(r) if r > 0.0 => r,
                    Some(_) => return Err(Error::InvalidArgument("MLS radius must be positive".into())),
                    None => default_radius(cloud)?,
                };
                Prepared::Mls(MlsBasis::new(cloud, MlsParams { degree, radius }))
            }
            InterpConfig::Shepard { radius } => {
                let radius = match radius {
                    Some(r) if r > 0.0 => r,
                    Some(_) => return Err(Error::InvalidArgument("Shepard radius must be positive".into())),
                    None => default_radius(cloud)?,
                };
                Prepared::Shepard {
                    radius,
                    index: NeighborIndex::new(cloud, radius),
                }
            }
            InterpConfig::Rbf { kernel, ridge } => {
                let kernel = kernel.unwrap_or_else(|| RbfKernel::default_for_dim(cloud.dim()));
                Prepared::Rbf(Arc::new(RbfSolver::new(cloud, kernel, ridge)?))
            }
            InterpConfig::Multilinear => Prepared::Multilinear(GridLayout::new(cloud)?),
        };
        Ok(Self {
            inner: Arc::new(Inner {
                cloud: cloud.clone(),
                prepared,
            }),
        })
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.inner.cloud
    }

    /// Support radius for MLS / Shepard.
    pub fn radius(&self) -> Option<f64> {
        match &self.inner.prepared {
            Prepared::Mls(b) => Some(b.params.radius),
            Prepared::Shepard { radius, .. } => Some(*radius),
            _ => None,
        }
    }

    /// Condition estimate of the RBF saddle matrix.
    pub fn condition_estimate(&self) -> Option<f64> {
        match &self.inner.prepared {
            Prepared::Rbf(s) => Some(s.condition),
            _ => None,
        }
    }

    /// Lagrange (cardinal) weights at `x` for the local back-ends; `None` for
    /// RBF, whose cardinal functions are global.
    pub fn basis_weights(&self, x: &[f64]) -> Option<Vec<(usize, f64)>> {
        let mut out = Vec::new();
        self.local_weights(x, &mut out).then_some(out)
    }

    fn local_weights(&self, x: &[f64], out: &mut Vec<(usize, f64)>) -> bool {
        let cloud = &self.inner.cloud;
        match &self.inner.prepared {
            Prepared::Mls(b) => b.weights(cloud, x, out),
            Prepared::Shepard { radius, index } => {
                shepard::shepard_weights(cloud, Some(index), x, *radius, out)
            }
            Prepared::Multilinear(g) => g.weights(x, out),
            Prepared::Rbf(_) => return false,
        }
        true
    }

    /// Fits `components` fields from node-major values
    /// (`values[k * components + c]` is component `c` at node `k`).
    pub fn fit(&self, values: &[f64], components: usize) -> Result<Interpolant> {
        let m = self.inner.cloud.len();
        if components == 0 || values.len() != m * components {
            return Err(Error::DimensionMismatch {
                expected: m * components.max(1),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow {
                context: format!("nodal value {} of component {}", k / components, k % components),
            });
        }
        match &self.inner.prepared {
            Prepared::Rbf(solver) => {
                let np = solver.basis.len();
                let mut v = vec![0.0; m * components];
                let mut z = vec![0.0; np * components];
                let mut residual: f64 = 0.0;
                let mut column = vec![0.0; m];
                for c in 0..components {
                    for k in 0..m {
                        column[k] = values[k * components + c];
                    }
                    let (vc, zc, res) = solver.solve(&column)?;
                    for k in 0..m {
                        v[k * components + c] = vc[k];
                    }
                    for a in 0..np {
                        z[a * components + c] = zc[a];
                    }
                    residual = residual.max(res);
                }
                Ok(Interpolant {
                    interp: self.clone(),
                    components,
                    data: v,
                    tail: z,
                    residual,
                })
            }
            _ => Ok(Interpolant {
                interp: self.clone(),
                components,
                data: values.to_vec(),
                tail: Vec::new(),
                residual: 0.0,
            }),
        }
    }
}

/// A field evaluable anywhere in `R^dim`.
pub trait VectorField: Sync {
    fn components(&self) -> usize;
    fn eval(&self, x: &[f64], out: &mut [f64]);
}

/// Closed-form field from a closure.
pub struct FnField<F> {
    components: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> FnField<F> {
    pub fn new(components: usize, f: F) -> Self {
        Self { components, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> VectorField for FnField<F> {
    fn components(&self) -> usize {
        self.components
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Interpolated field with one or more components sharing a cloud.
#[derive(Debug, Clone)]
pub struct Interpolant {
    interp: Interpolator,
    components: usize,
    /// nodal values (local back-ends) or RBF coefficients, node-major
    data: Vec<f64>,
    tail: Vec<f64>,
    residual: f64,
}

impl Interpolant {
    pub fn components(&self) -> usize {
        self.components
    }

    pub fn interpolator(&self) -> &Interpolator {
        &self.interp
    }

    /// Largest interpolation-condition residual over components (RBF only).
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// First component at `x`.
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut out = vec![0.0; self.components];
        self.eval(x, &mut out);
        out[0]
    }
}

impl VectorField for Interpolant {
    fn components(&self) -> usize {
        self.components
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let k = self.components;
        if let Prepared::Rbf(solver) = &self.interp.inner.prepared {
            solver.eval_many(&self.data, &self.tail, k, x, out);
            return;
        }
        SCRATCH.with(|cell| {
            let mut weights = cell.borrow_mut();
            self.interp.local_weights(x, &mut weights);
            out[..k].fill(0.0);
            for &(node, w) in weights.iter() {
                let vals = &self.data[node * k..(node + 1) * k];
                for (o, v) in out[..k].iter_mut().zip(vals) {
                    *o += w * v;
                }
            }
        });
    }
}

/// Builds a scalar interpolant of `values` on `cloud`.
pub fn interp_field(cloud: &PointCloud, values: &[f64], config: &InterpConfig) -> Result<Interpolant> {
    Interpolator::new(cloud, config)?.fit(values, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::{halton_cloud, tensor_grid, DomainBox};

    #[test]
    fn facade_examples() {
        let b = DomainBox::cube(2, 0.0, 1.0).unwrap();
        let c = halton_cloud(80, &b).unwrap().with_fill_distance(2000).unwrap();
        let lin: Vec<f64> = c.iter().map(|p| 1.0 + p[0] - 3.0 * p[1]).collect();
        let f = interp_field(&c, &lin, &InterpConfig::mls()).unwrap();
        assert!((f.value(&[0.4, 0.6]) - (1.0 + 0.4 - 1.8)).abs() < 1e-10);

        let wiggle: Vec<f64> = c.iter().map(|p| (5.0 * p[0]).sin() + p[1]).collect();
        let f = interp_field(&c, &wiggle, &InterpConfig::rbf()).unwrap();
        for (k, p) in c.iter().enumerate() {
            let e = (f.value(p) - wiggle[k]).abs();
            assert!(e < 1e-8, "node {k}: {e} residual {}", f.residual());
        }

        let f = interp_field(&c, &vec![2.5; 80], &InterpConfig::shepard()).unwrap();
        assert!((f.value(&[0.33, 0.12]) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn vector_fit_matches_scalar_fits() {
        let b = DomainBox::cube(2, -1.0, 1.0).unwrap();
        let c = halton_cloud(50, &b).unwrap();
        let interp = Interpolator::new(&c, &InterpConfig::rbf()).unwrap();
        let a: Vec<f64> = c.iter().map(|p| p[0].exp()).collect();
        let bb: Vec<f64> = c.iter().map(|p| p[1] * p[0]).collect();
        let joint: Vec<f64> = a.iter().zip(&bb).flat_map(|(x, y)| [*x, *y]).collect();
        let fj = interp.fit(&joint, 2).unwrap();
        let fa = interp.fit(&a, 1).unwrap();
        let fb = interp.fit(&bb, 1).unwrap();
        let mut out = [0.0; 2];
        fj.eval(&[0.1, -0.4], &mut out);
        assert!((out[0] - fa.value(&[0.1, -0.4])).abs() < 1e-12);
        assert!((out[1] - fb.value(&[0.1, -0.4])).abs() < 1e-12);
    }

    #[test]
    fn multilinear_needs_grid() {
        let b = DomainBox::cube(2, 0.0, 1.0).unwrap();
        let c = halton_cloud(16, &b).unwrap();
        assert!(matches!(
            Interpolator::new(&c, &InterpConfig::Multilinear),
            Err(Error::BackendMismatch)
        ));
        let g = tensor_grid(4, &b).unwrap();
        let vals: Vec<f64> = g.iter().map(|p| p[0] + 2.0 * p[1]).collect();
        let f = interp_field(&g, &vals, &InterpConfig::Multilinear).unwrap();
        assert!((f.value(&[0.3, 0.8]) - 1.9).abs() < 1e-14);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let b = DomainBox::cube(1, 0.0, 1.0).unwrap();
        let c = halton_cloud(5, &b).unwrap();
        let err = interp_field(&c, &[0.0, 1.0, f64::NAN, 0.0, 0.0], &InterpConfig::shepard());
        assert!(matches!(err, Err(Error::NumericOverflow { .. })));
    }
}
