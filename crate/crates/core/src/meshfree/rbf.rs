//! Polyharmonic radial basis interpolation with a polynomial tail, fitted by
//! solving the symmetric saddle system
//!
//! ```text
//! [ A + ridge I   P ] [v]   [f]
//! [ P^T           0 ] [z] = [0]
//! ```
//!
//! Coordinates are shifted and uniformly scaled to the unit box before
//! assembly. Polyharmonic interpolants are invariant under this change (the
//! `r^{2k}` term introduced by rescaling `r^{2k} log r` is annihilated by the
//! moment conditions), so it only improves conditioning.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::linalg::{condition_estimate, MonomialBasis};
use crate::pointcloud::PointCloud;

/// Systems whose condition estimate exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e14;

const REFINE_STEPS: usize = 30;

/// Default ridge relative to the largest kernel-matrix entry.
pub const DEFAULT_RIDGE_FACTOR: f64 = 1e-12;

const MAX_DIM: usize = 8;
const MAX_TAIL: usize = 64;

/// `r^power` (odd dimension family) or `r^power log r` (even family), with
/// conditional positive definiteness order `order`; the tail has degree
/// `order - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbfKernel {
    power: u32,
    log: bool,
    order: usize,
}

impl RbfKernel {
    /// `r^power` (`log = false`, odd power) or `r^power log r` (`log = true`,
    /// even power). `order` must be at least the kernel's CPD order.
    pub fn polyharmonic(power: u32, log: bool, order: usize) -> Result<Self> {
        if power == 0 || (log && power % 2 != 0) || (!log && power % 2 == 0) {
            return Err(Error::InvalidArgument(format!(
                "unsupported polyharmonic kernel r^{power}{}",
                if log { " log r" } else { "" }
            )));
        }
        let min_order = if log {
            power as usize / 2 + 1
        } else {
            (power as usize + 1) / 2
        };
        if order < min_order {
            return Err(Error::InvalidArgument(format!(
                "kernel needs CPD order >= {min_order}, got {order}"
            )));
        }
        Ok(Self { power, log, order })
    }

    /// `r^4 log r` with quadratic tail for even `dim`, `r^3` with linear tail
    /// for odd `dim`.
    pub fn default_for_dim(dim: usize) -> Self {
        if dim % 2 == 0 {
            Self { power: 4, log: true, order: 3 }
        } else {
            Self { power: 3, log: false, order: 2 }
        }
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn is_log(&self) -> bool {
        self.log
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn tail_degree(&self) -> Option<usize> {
        self.order.checked_sub(1)
    }

    pub fn tail_basis(&self, dim: usize) -> MonomialBasis {
        match self.tail_degree() {
            Some(deg) => MonomialBasis::new(dim, deg),
            None => MonomialBasis::empty(dim),
        }
    }

    /// Kernel value from the squared distance; the log family is 0 at r = 0.
    #[inline]
    pub fn eval_sq(&self, s: f64) -> f64 {
        let half = (self.power / 2) as i32;
        if self.log {
            if s == 0.0 {
                0.0
            } else {
                0.5 * s.powi(half) * s.ln()
            }
        } else {
            s.powi(half) * s.sqrt()
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.eval_sq(r * r)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    shift: Vec<f64>,
    scale: f64,
}

impl Scaling {
    fn for_cloud(cloud: &PointCloud) -> Self {
        let d = cloud.domain();
        let shift = (0..d.dim())
            .map(|i| 0.5 * (d.lower()[i] + d.upper()[i]))
            .collect();
        let scale = (0..d.dim()).map(|i| 0.5 * d.width(i)).fold(0.0, f64::max);
        Self { shift, scale }
    }

    fn identity(dim: usize) -> Self {
        Self { shift: vec![0.0; dim], scale: 1.0 }
    }

    #[inline]
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = (x[i] - self.shift[i]) / self.scale;
        }
    }
}

/// Field-independent part of an RBF fit: the factored saddle matrix of one
/// cloud, reusable for any number of right-hand sides.
#[derive(Debug, Clone)]
pub(crate) struct RbfSolver {
    pub kernel: RbfKernel,
    pub basis: MonomialBasis,
    scaling: Scaling,
    /// scaled centres, row-major
    centers: Vec<f64>,
    dim: usize,
    kernel_matrix: DMatrix<f64>,
    poly_matrix: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
    pub ridge: f64,
    pub condition: f64,
}

impl RbfSolver {
    pub fn new(cloud: &PointCloud, kernel: RbfKernel, ridge: Option<f64>) -> Result<Self> {
        let dim = cloud.dim();
        let m = cloud.len();
        let basis = kernel.tail_basis(dim);
        let np = basis.len();
        if dim > MAX_DIM || np > MAX_TAIL {
            return Err(Error::UnsupportedDimension { dim, max: MAX_DIM });
        }
        if m < np {
            return Err(Error::InvalidArgument(format!(
                "{m} centres cannot support a tail of {np} polynomials"
            )));
        }
        let scaling = Scaling::for_cloud(cloud);
        let mut centers = vec![0.0; m * dim];
        for (k, p) in cloud.iter().enumerate() {
            scaling.apply(p, &mut centers[k * dim..(k + 1) * dim]);
        }
        let mut kernel_matrix = DMatrix::zeros(m, m);
        for i in 0..m {
            let yi = &centers[i * dim..(i + 1) * dim];
            for j in 0..i {
                let yj = &centers[j * dim..(j + 1) * dim];
                let s: f64 = yi.iter().zip(yj).map(|(a, b)| (a - b) * (a - b)).sum();
                let v = kernel.eval_sq(s);
                kernel_matrix[(i, j)] = v;
                kernel_matrix[(j, i)] = v;
            }
            kernel_matrix[(i, i)] = kernel.eval_sq(0.0);
        }
        let mut poly_matrix = DMatrix::zeros(m, np);
        let mut row = vec![0.0; np];
        for k in 0..m {
            basis.eval(&centers[k * dim..(k + 1) * dim], &mut row);
            for (a, v) in row.iter().enumerate() {
                poly_matrix[(k, a)] = *v;
            }
        }
        let ridge = match ridge {
            Some(r) if r < 0.0 || !r.is_finite() => {
                return Err(Error::InvalidArgument("ridge must be nonnegative".into()))
            }
            Some(r) => r,
            None => DEFAULT_RIDGE_FACTOR * kernel_matrix.amax(),
        };
        let n = m + np;
        let mut saddle = DMatrix::zeros(n, n);
        saddle.view_mut((0, 0), (m, m)).copy_from(&kernel_matrix);
        for i in 0..m {
            saddle[(i, i)] += ridge;
        }
        saddle.view_mut((0, m), (m, np)).copy_from(&poly_matrix);
        saddle
            .view_mut((m, 0), (np, m))
            .copy_from(&poly_matrix.transpose());
        let lu = saddle.clone().lu();
        let condition = condition_estimate(&saddle, &lu);
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllConditioned { estimate: condition });
        }
        Ok(Self {
            kernel,
            basis,
            scaling,
            centers,
            dim,
            kernel_matrix,
            poly_matrix,
            lu,
            ridge,
            condition,
        })
    }

    pub fn len(&self) -> usize {
        self.kernel_matrix.nrows()
    }

    fn saddle_apply(&self, sol: &DVector<f64>) -> DVector<f64> {
        let m = self.len();
        let v = sol.rows(0, m);
        let z = sol.rows(m, self.basis.len());
        let top = &self.kernel_matrix * v + &self.poly_matrix * z;
        let bottom = self.poly_matrix.transpose() * v;
        let mut out = DVector::zeros(sol.len());
        out.rows_mut(0, m).copy_from(&top);
        out.rows_mut(m, self.basis.len()).copy_from(&bottom);
        out
    }

    /// Solves for one right-hand side; returns `(v, z, residual)` where the
    /// residual is `||A v + P z - f||_inf` on the unregularized conditions.
    pub fn solve(&self, values: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let m = self.len();
        let np = self.basis.len();
        let mut rhs = DVector::zeros(m + np);
        rhs.rows_mut(0, m).copy_from_slice(values);
        let mut sol = self
            .lu
            .solve(&rhs)
            .ok_or(Error::IllConditioned { estimate: f64::INFINITY })?;
        // refine towards the unregularized interpolant
        let mut r = &rhs - self.saddle_apply(&sol);
        let mut best = r.amax();
        for _ in 0..REFINE_STEPS {
            let Some(corr) = self.lu.solve(&r) else { break };
            let trial = &sol + corr;
            let trial_r = &rhs - self.saddle_apply(&trial);
            let norm = trial_r.amax();
            if !(norm < best) {
                break;
            }
            sol = trial;
            r = trial_r;
            best = norm;
        }
        let v: Vec<f64> = sol.rows(0, m).iter().copied().collect();
        let z: Vec<f64> = sol.rows(m, np).iter().copied().collect();
        let vv = DVector::from_column_slice(&v);
        let zz = DVector::from_column_slice(&z);
        let fit = &self.kernel_matrix * &vv + &self.poly_matrix * &zz;
        let residual = fit
            .iter()
            .zip(values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if sol.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericOverflow { context: "RBF solve".into() });
        }
        Ok((v, z, residual))
    }

    /// Evaluates `k` fields at `x`. `v` is centre-major (`v[j * k + c]`),
    /// `z` is basis-major (`z[a * k + c]`).
    #[inline]
    pub fn eval_many(&self, v: &[f64], z: &[f64], k: usize, x: &[f64], out: &mut [f64]) {
        let dim = self.dim;
        let mut buf = [0.0f64; MAX_DIM];
        let y = &mut buf[..dim];
        self.scaling.apply(x, y);
        out[..k].fill(0.0);
        for (j, c) in self.centers.chunks_exact(dim).enumerate() {
            let mut s = 0.0;
            for i in 0..dim {
                let t = y[i] - c[i];
                s += t * t;
            }
            let phi = self.kernel.eval_sq(s);
            let coeffs = &v[j * k..(j + 1) * k];
            for (o, c) in out[..k].iter_mut().zip(coeffs) {
                *o += phi * c;
            }
        }
        let np = self.basis.len();
        if np > 0 {
            let mut row = [0.0f64; MAX_TAIL];
            self.basis.eval(y, &mut row[..np]);
            for (a, pa) in row[..np].iter().enumerate() {
                for c in 0..k {
                    out[c] += pa * z[a * k + c];
                }
            }
        }
    }
}

/// A fitted scalar RBF interpolant.
#[derive(Debug, Clone)]
pub struct RbfModel {
    centers: PointCloud,
    solver: Arc<RbfSolver>,
    v: Vec<f64>,
    z: Vec<f64>,
    residual: f64,
}

impl RbfModel {
    /// Builds a model from explicit coefficients. The tail coefficients refer
    /// to the monomials of [`RbfKernel::tail_basis`] in raw coordinates.
    pub fn from_parts(centers: PointCloud, kernel: RbfKernel, v: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        let dim = centers.dim();
        let basis = kernel.tail_basis(dim);
        if dim > MAX_DIM || basis.len() > MAX_TAIL {
            return Err(Error::UnsupportedDimension { dim, max: MAX_DIM });
        }
        if v.len() != centers.len() || z.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: centers.len() + basis.len(),
                got: v.len() + z.len(),
            });
        }
        let m = centers.len();
        let solver = RbfSolver {
            kernel,
            basis,
            scaling: Scaling::identity(dim),
            centers: centers.points().to_vec(),
            dim,
            kernel_matrix: DMatrix::zeros(m, m),
            poly_matrix: DMatrix::zeros(m, 0),
            lu: DMatrix::<f64>::identity(1, 1).lu(),
            ridge: 0.0,
            condition: f64::NAN,
        };
        Ok(Self {
            centers,
            solver: Arc::new(solver),
            v,
            z,
            residual: f64::NAN,
        })
    }

    pub fn centers(&self) -> &PointCloud {
        &self.centers
    }

    pub fn kernel(&self) -> RbfKernel {
        self.solver.kernel
    }

    /// RBF coefficients `v`.
    pub fn rbf_coefficients(&self) -> &[f64] {
        &self.v
    }

    /// Tail coefficients `z` (in the scaled coordinates used by the fit).
    pub fn tail_coefficients(&self) -> &[f64] {
        &self.z
    }

    /// `||A v + P z - f||_inf` at fit time.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn condition_estimate(&self) -> f64 {
        self.solver.condition
    }

    pub fn ridge(&self) -> f64 {
        self.solver.ridge
    }

    /// Moment conditions `P^T v` (should vanish).
    pub fn moments(&self) -> Vec<f64> {
        let p = &self.solver.poly_matrix;
        (0..p.ncols())
            .map(|a| (0..p.nrows()).map(|k| p[(k, a)] * self.v[k]).sum())
            .collect()
    }
}

/// Fits the saddle system for one field.
pub fn rbf_fit(cloud: &PointCloud, values: &[f64], kernel: RbfKernel, ridge: f64) -> Result<RbfModel> {
    if values.len() != cloud.len() {
        return Err(Error::DimensionMismatch {
            expected: cloud.len(),
            got: values.len(),
        });
    }
    let solver = RbfSolver::new(cloud, kernel, Some(ridge))?;
    let (v, z, residual) = solver.solve(values)?;
    Ok(RbfModel {
        centers: cloud.clone(),
        solver: Arc::new(solver),
        v,
        z,
        residual,
    })
}

/// `sum v_j phi(||x - x_j||) + sum z_k p_k(x)`.
pub fn rbf_eval(model: &RbfModel, x: &[f64]) -> f64 {
    let mut out = [0.0];
    model.solver.eval_many(&model.v, &model.z, 1, x, &mut out);
    out[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::{halton_cloud, DomainBox, PointCloud};

    fn unit_cloud(m: usize) -> PointCloud {
        halton_cloud(m, &DomainBox::cube(2, 0.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn kernel_values() {
        let k = RbfKernel::default_for_dim(2);
        assert_eq!(k.eval(0.0), 0.0);
        assert!((k.eval(2.0) - 16.0 * 2f64.ln()).abs() < 1e-12);
        let k3 = RbfKernel::default_for_dim(3);
        assert!((k3.eval(2.0) - 8.0).abs() < 1e-12);
        assert!(RbfKernel::polyharmonic(4, true, 2).is_err());
        assert!(RbfKernel::polyharmonic(3, true, 3).is_err());
    }

    #[test]
    fn polynomial_data_gives_zero_rbf_part() {
        let c = unit_cloud(60);
        let f = |p: &[f64]| 1.0 + p[0] - 2.0 * p[1] + 0.5 * p[0] * p[1] - p[1] * p[1];
        let values: Vec<f64> = c.iter().map(f).collect();
        let model = rbf_fit(&c, &values, RbfKernel::default_for_dim(2), 0.0).unwrap();
        assert!(model.rbf_coefficients().iter().all(|v| v.abs() < 1e-8));
        for x in [[0.2, 0.9], [1.3, -0.4]] {
            assert!((rbf_eval(&model, &x) - f(&x)).abs() < 1e-8);
        }
    }

    #[test]
    fn interpolates_and_satisfies_moments() {
        let c = unit_cloud(100);
        let values: Vec<f64> = c.iter().map(|p| (p[0] * 3.0).sin() * p[1].cos()).collect();
        let model = rbf_fit(&c, &values, RbfKernel::default_for_dim(2), 0.0).unwrap();
        assert!(model.residual() <= 1e-8 * 2.0);
        for (k, p) in c.iter().enumerate() {
            assert!((rbf_eval(&model, p) - values[k]).abs() < 1e-8);
        }
        assert!(model.moments().iter().all(|m| m.abs() < 1e-8));
    }

    #[test]
    fn minimal_unisolvent_set() {
        // six points, quadratic tail: exact interpolation of a quadratic
        let b = DomainBox::cube(2, 0.0, 1.0).unwrap();
        let pts = vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.5, 0.5, 1.0, 1.0, 0.2, 0.7];
        let c = PointCloud::new(pts, b).unwrap();
        let f = |p: &[f64]| p[0] * p[0] + 3.0 * p[1];
        let values: Vec<f64> = c.iter().map(f).collect();
        let model = rbf_fit(&c, &values, RbfKernel::default_for_dim(2), 0.0).unwrap();
        assert!((rbf_eval(&model, &[0.3, 0.4]) - f(&[0.3, 0.4])).abs() < 1e-8);
    }

    #[test]
    fn constant_field() {
        let c = unit_cloud(40);
        let model = rbf_fit(&c, &vec![5.0; 40], RbfKernel::default_for_dim(2), 1e-9).unwrap();
        for x in [[0.1, 0.1], [0.77, 0.31]] {
            assert!((rbf_eval(&model, &x) - 5.0).abs() < 1e-8);
        }
    }

    #[test]
    fn pure_tail_evaluation() {
        let c = unit_cloud(10);
        let k = RbfKernel::default_for_dim(2);
        let basis = k.tail_basis(2);
        let z: Vec<f64> = basis
            .exponents()
            .iter()
            .map(|e| if e == &vec![2, 0] { 1.0 } else { 0.0 })
            .collect();
        let model = RbfModel::from_parts(c, k, vec![0.0; 10], z).unwrap();
        assert_eq!(rbf_eval(&model, &[1.5, -3.0]), 2.25);
    }

    #[test]
    fn too_few_points_for_tail() {
        let b = DomainBox::cube(2, 0.0, 1.0).unwrap();
        let c = PointCloud::new(vec![0.0, 0.0, 1.0, 1.0], b).unwrap();
        assert!(rbf_fit(&c, &[0.0, 1.0], RbfKernel::default_for_dim(2), 0.0).is_err());
    }

    #[test]
    fn collinear_points_are_rejected() {
        let b = DomainBox::cube(2, 0.0, 1.0).unwrap();
        let pts: Vec<f64> = (0..8).flat_map(|i| [i as f64 / 7.0, i as f64 / 7.0]).collect();
        let c = PointCloud::new(pts, b).unwrap();
        let err = rbf_fit(&c, &[0.0; 8], RbfKernel::default_for_dim(2), 0.0);
        assert!(matches!(err, Err(Error::IllConditioned { .. })));
    }
}
