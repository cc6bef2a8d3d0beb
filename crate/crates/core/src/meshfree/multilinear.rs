//! Tensor-grid multilinear interpolation (the classical baseline).

use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;

use super::mls::check_inputs;

#[derive(Debug, Clone)]
pub(crate) struct GridLayout {
    shape: Vec<usize>,
    strides: Vec<usize>,
    lower: Vec<f64>,
    width: Vec<f64>,
}

impl GridLayout {
    pub fn new(cloud: &PointCloud) -> Result<Self> {
        let shape = cloud.grid_shape().ok_or(Error::BackendMismatch)?.to_vec();
        let dim = shape.len();
        let mut strides = vec![1usize; dim];
        for i in 1..dim {
            strides[i] = strides[i - 1] * shape[i - 1];
        }
        let d = cloud.domain();
        Ok(Self {
            shape,
            strides,
            lower: d.lower().to_vec(),
            width: (0..dim).map(|i| d.width(i)).collect(),
        })
    }

    /// Blending weights of the `2^dim` corners of the cell containing the
    /// (clamped) query.
    pub fn weights(&self, x: &[f64], out: &mut Vec<(usize, f64)>) {
        let dim = self.shape.len();
        let mut base = 0usize;
        let mut frac = [0.0f64; 16];
        for i in 0..dim {
            let n = self.shape[i];
            let s = ((x[i] - self.lower[i]) / self.width[i]).clamp(0.0, 1.0) * (n - 1) as f64;
            let cell = (s.floor() as usize).min(n - 2);
            frac[i] = s - cell as f64;
            base += cell * self.strides[i];
        }
        out.clear();
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut idx = base;
            for i in 0..dim {
                if corner >> i & 1 == 1 {
                    w *= frac[i];
                    idx += self.strides[i];
                } else {
                    w *= 1.0 - frac[i];
                }
            }
            out.push((idx, w));
        }
    }
}

/// Multilinear value at `x` (clamped into the grid's box).
pub fn multilinear_eval(grid_cloud: &PointCloud, values: &[f64], x: &[f64]) -> Result<f64> {
    check_inputs(grid_cloud, values, x)?;
    let layout = GridLayout::new(grid_cloud)?;
    let mut w = Vec::new();
    layout.weights(x, &mut w);
    Ok(w.iter().map(|(k, a)| a * values[*k]).sum())
}
