//! Small dense helpers: monomial bases, a Cholesky solve for tiny SPD
//! systems, and a 1-norm condition estimate for LU factorizations.

use nalgebra::{DMatrix, DVector, LU, Dyn};

/// Exponent vectors of all `dim`-variate monomials of total degree `<= degree`,
/// ordered by degree (constant first).
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    dim: usize,
    exponents: Vec<Vec<u32>>,
}

impl MonomialBasis {
    pub fn new(dim: usize, degree: usize) -> Self {
        let mut exponents = Vec::new();
        for total in 0..=degree {
            let mut current = vec![0u32; dim];
            push_compositions(&mut exponents, &mut current, 0, total as u32);
        }
        Self { dim, exponents }
    }

    /// Empty basis (no polynomial tail).
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            exponents: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn eval(&self, y: &[f64], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            let mut v = 1.0;
            for (yi, &p) in y.iter().zip(e) {
                if p > 0 {
                    v *= yi.powi(p as i32);
                }
            }
            *o = v;
        }
    }
}

fn push_compositions(out: &mut Vec<Vec<u32>>, current: &mut [u32], axis: usize, left: u32) {
    if axis + 1 == current.len() {
        current[axis] = left;
        out.push(current.to_vec());
        current[axis] = 0;
        return;
    }
    for take in (0..=left).rev() {
        current[axis] = take;
        push_compositions(out, current, axis + 1, left - take);
    }
    current[axis] = 0;
}

/// Number of `dim`-variate polynomials of degree `<= degree`.
pub fn poly_space_dim(dim: usize, degree: usize) -> usize {
    // binomial(dim + degree, dim)
    let mut acc: u128 = 1;
    for i in 1..=dim as u128 {
        acc = acc * (degree as u128 + i) / i;
    }
    acc as usize
}

/// In-place Cholesky of a row-major `n x n` SPD matrix. Returns `false` when a
/// pivot falls below `rel_tol` times the largest diagonal entry.
pub fn cholesky_in_place(a: &mut [f64], n: usize, rel_tol: f64) -> bool {
    let scale = (0..n).map(|i| a[i * n + i]).fold(0.0f64, f64::max);
    if !(scale > 0.0) {
        return false;
    }
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > rel_tol * scale) {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

/// Solves `L L^T x = b` in place given the factor from [`cholesky_in_place`].
pub fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Hager/Higham estimate of `||A||_1 ||A^{-1}||_1` from an LU factorization.
pub fn condition_estimate(a: &DMatrix<f64>, lu: &LU<f64, Dyn, Dyn>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 1.0;
    }
    let norm_a = one_norm(a);
    let lu_t = a.transpose().lu();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut estimate = 0.0;
    for _ in 0..5 {
        let y = match lu.solve(&x) {
            Some(y) => y,
            None => return f64::INFINITY,
        };
        let y_norm = y.iter().map(|v| v.abs()).sum::<f64>();
        if !y_norm.is_finite() {
            return f64::INFINITY;
        }
        if y_norm <= estimate {
            break;
        }
        estimate = y_norm;
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = match lu_t.solve(&xi) {
            Some(z) => z,
            None => return f64::INFINITY,
        };
        let (j, zmax) = z
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        if zmax <= z.dot(&x) {
            break;
        }
        x.fill(0.0);
        x[j] = 1.0;
    }
    norm_a * estimate
}
