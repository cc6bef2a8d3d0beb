//! Gauss-Hermite rules for the standard normal density and their tensor
//! products.

use crate::error::{Error, Result};

/// Upper bound on `L^dim` accepted by tensor products.
pub const MAX_TENSOR_NODES: u128 = 10_000_000;

/// `L`-point Gauss-Hermite rule with probabilists' normalization: weights sum
/// to one and `sum w_l f(xi_l)` approximates `E[f(Z)]`, `Z ~ N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermiteRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermiteRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// One-dimensional quadrature of `f`, summed over mirrored node pairs
    /// so odd integrands cancel exactly.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let l = self.nodes.len();
        let mut total = 0.0;
        for i in 0..l / 2 {
            let j = l - 1 - i;
            total += self.weights[i] * (f(self.nodes[i]) + f(self.nodes[j]));
        }
        if l % 2 == 1 {
            total += self.weights[l / 2] * f(self.nodes[l / 2]);
        }
        total
    }
}

/// Builds the `order`-point rule from the Jacobi matrix of the monic
/// probabilists' Hermite recurrence (zero diagonal, off-diagonals `sqrt(k)`).
pub fn gauss_hermite(order: usize) -> Result<GaussHermiteRule> {
    if !(1..=64).contains(&order) {
        return Err(Error::QuadratureOrder(order));
    }
    let mut diag = vec![0.0; order];
    let mut off: Vec<f64> = (1..=order).map(|k| (k as f64).sqrt()).collect();
    off[order - 1] = 0.0;
    let mut first_row = vec![0.0; order];
    first_row[0] = 1.0;
    tridiagonal_ql(&mut diag, &mut off, &mut first_row)?;

    let mut pairs: Vec<(f64, f64)> = diag
        .iter()
        .zip(&first_row)
        .map(|(x, z)| (*x, z * z))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // average +/- pairs so the rule is exactly symmetric
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    for i in 0..order {
        let j = order - 1 - i;
        if i == j {
            nodes[i] = 0.0;
            weights[i] = pairs[i].1;
        } else {
            nodes[i] = 0.5 * (pairs[i].0 - pairs[j].0);
            weights[i] = 0.5 * (pairs[i].1 + pairs[j].1);
        }
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(GaussHermiteRule { nodes, weights })
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
///
/// `diag` is overwritten by the eigenvalues, `off[i]` couples rows `i` and
/// `i + 1` (last entry ignored). `first_row` is rotated along with the
/// eigenvectors, so starting from `e_1` it ends as their first components.
fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64], first_row: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n == 1 {
        return Ok(());
    }
    off[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::InvalidArgument(
                    "tridiagonal eigen-solve did not converge".into(),
                ));
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let z = first_row[i + 1];
                first_row[i + 1] = s * first_row[i] + c * z;
                first_row[i] = c * first_row[i] - s * z;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

/// Tensor product of a one-dimensional rule, nodes in lexicographic
/// multi-index order (first coordinate slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct TensorRule {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TensorRule {
    pub fn new(rule: &GaussHermiteRule, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("tensor dimension must be >= 1".into()));
        }
        let l = rule.order();
        let count = (l as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
        if count > MAX_TENSOR_NODES {
            return Err(Error::TooManyNodes {
                nodes: count,
                limit: MAX_TENSOR_NODES,
            });
        }
        let count = count as usize;
        let mut nodes = Vec::with_capacity(count * dim);
        let mut weights = Vec::with_capacity(count);
        let mut idx = vec![0usize; dim];
        for _ in 0..count {
            let mut w = 1.0;
            for &i in &idx {
                nodes.push(rule.nodes[i]);
                w *= rule.weights[i];
            }
            weights.push(w);
            for j in (0..dim).rev() {
                idx[j] += 1;
                if idx[j] < l {
                    break;
                }
                idx[j] = 0;
            }
        }
        Ok(Self {
            dim,
            nodes,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.nodes
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }
}

/// `sum f(xi) prod w` over the `dim`-fold tensor rule; `f` writes `k` outputs.
pub fn tensor_expectation<F>(rule: &GaussHermiteRule, dim: usize, k: usize, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let tensor = TensorRule::new(rule, dim)?;
    let mut acc = vec![0.0; k];
    let mut buf = vec![0.0; k];
    for (xi, w) in tensor.iter() {
        f(xi, &mut buf);
        for (a, v) in acc.iter_mut().zip(&buf) {
            *a += w * v;
        }
    }
    Ok(acc)
}
