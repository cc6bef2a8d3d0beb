//! Moving least squares with local polynomial reproduction.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_in_place, cholesky_solve, MonomialBasis};
use crate::pointcloud::PointCloud;

use super::index::NeighborIndex;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlsParams {
    pub degree: usize,
    pub radius: f64,
}

/// Wendland C2 bump `(1 - t)^4 (4t + 1)` on `[0, 1)`, zero beyond.
pub fn wendland_c2(t: f64) -> f64 {
    if t >= 1.0 {
        0.0
    } else {
        let s = 1.0 - t;
        s * s * s * s * (4.0 * t + 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlsEval {
    pub value: f64,
    /// Lagrange coefficients `a*_i(x)` of the contributing nodes.
    pub coefficients: Vec<(usize, f64)>,
}

/// Computes the MLS Lagrange coefficients at `x` from the given in-radius
/// neighbours `(index, squared distance)`.
///
/// With the basis centred at `x` and scaled by `r`, reproduction of `pi_l`
/// reduces to `sum a_i P(y_i) = e_0`, and the minimum-norm solution under the
/// `1/w_i` metric is `a_i = w_i P(y_i)^T G^{-1} e_0`, `G = sum w_i P P^T`.
pub(crate) fn lagrange_from_neighbors(
    cloud: &PointCloud,
    basis: &MonomialBasis,
    x: &[f64],
    radius: f64,
    neighbors: &[(usize, f64)],
    out: &mut Vec<(usize, f64)>,
) -> Result<()> {
    let nb = basis.len();
    let dim = cloud.dim();
    if neighbors.len() < nb {
        return Err(Error::RadiusTooSmall {
            radius,
            neighbors: neighbors.len(),
            required: nb,
        });
    }
    let mut gram = vec![0.0; nb * nb];
    let mut rows = vec![0.0; neighbors.len() * nb];
    let mut weights = Vec::with_capacity(neighbors.len());
    let mut y = vec![0.0; dim];
    for (j, &(k, d2)) in neighbors.iter().enumerate() {
        let p = cloud.point(k);
        for i in 0..dim {
            y[i] = (p[i] - x[i]) / radius;
        }
        let row = &mut rows[j * nb..(j + 1) * nb];
        basis.eval(&y, row);
        let w = wendland_c2(d2.sqrt() / radius);
        weights.push(w);
        for a in 0..nb {
            for b in 0..=a {
                gram[a * nb + b] += w * row[a] * row[b];
            }
        }
    }
    for a in 0..nb {
        for b in a + 1..nb {
            gram[a * nb + b] = gram[b * nb + a];
        }
    }
    if !cholesky_in_place(&mut gram, nb, 1e-12) {
        return Err(Error::RadiusTooSmall {
            radius,
            neighbors: neighbors.len(),
            required: nb,
        });
    }
    let mut c = vec![0.0; nb];
    c[0] = 1.0;
    cholesky_solve(&gram, nb, &mut c);
    out.clear();
    for (j, &(k, _)) in neighbors.iter().enumerate() {
        let row = &rows[j * nb..(j + 1) * nb];
        let dot: f64 = row.iter().zip(&c).map(|(a, b)| a * b).sum();
        out.push((k, weights[j] * dot));
    }
    Ok(())
}

/// MLS value and coefficients at `x` (brute-force neighbour scan).
pub fn mls_eval(cloud: &PointCloud, values: &[f64], x: &[f64], params: MlsParams) -> Result<MlsEval> {
    check_inputs(cloud, values, x)?;
    if !(params.radius > 0.0) {
        return Err(Error::InvalidArgument("MLS radius must be positive".into()));
    }
    let basis = MonomialBasis::new(cloud.dim(), params.degree);
    let r2 = params.radius * params.radius;
    let neighbors: Vec<(usize, f64)> = cloud
        .iter()
        .enumerate()
        .filter_map(|(k, p)| {
            let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2 < r2).then_some((k, d2))
        })
        .collect();
    let mut coefficients = Vec::new();
    lagrange_from_neighbors(cloud, &basis, x, params.radius, &neighbors, &mut coefficients)?;
    let value = coefficients.iter().map(|(k, a)| a * values[*k]).sum();
    Ok(MlsEval {
        value,
        coefficients,
    })
}

pub(crate) fn check_inputs(cloud: &PointCloud, values: &[f64], x: &[f64]) -> Result<()> {
    if values.len() != cloud.len() {
        return Err(Error::DimensionMismatch {
            expected: cloud.len(),
            got: values.len(),
        });
    }
    if x.len() != cloud.dim() {
        return Err(Error::DimensionMismatch {
            expected: cloud.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Field-independent MLS machinery bound to one cloud.
#[derive(Debug, Clone)]
pub(crate) struct MlsBasis {
    pub params: MlsParams,
    pub basis: MonomialBasis,
    pub index: NeighborIndex,
}

/// Radius doublings tried before falling back to the nearest node.
pub(crate) const MAX_DOUBLINGS: usize = 3;

impl MlsBasis {
    pub fn new(cloud: &PointCloud, params: MlsParams) -> Self {
        Self {
            params,
            basis: MonomialBasis::new(cloud.dim(), params.degree),
            index: NeighborIndex::new(cloud, params.radius),
        }
    }

    /// Lagrange coefficients at `x`, doubling the radius on unisolvency
    /// failure and falling back to the nearest node beyond support.
    pub fn weights(&self, cloud: &PointCloud, x: &[f64], out: &mut Vec<(usize, f64)>) {
        let mut neighbors = Vec::new();
        let mut radius = self.params.radius;
        for _ in 0..=MAX_DOUBLINGS {
            neighbors.clear();
            self.index
                .for_each_within(cloud, x, radius, |k, d2| neighbors.push((k, d2)));
            if lagrange_from_neighbors(cloud, &self.basis, x, radius, &neighbors, out).is_ok() {
                return;
            }
            radius *= 2.0;
        }
        out.clear();
        out.push((super::index::nearest(cloud, x), 1.0));
    }
}
