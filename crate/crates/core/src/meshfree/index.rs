use crate::pointcloud::PointCloud;

/// Uniform bucket grid over the cloud's domain box for fixed-radius queries.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    dim: usize,
    lower: Vec<f64>,
    cell: f64,
    shape: Vec<usize>,
    strides: Vec<usize>,
    /// start offsets into `entries`, one per cell plus a sentinel
    starts: Vec<usize>,
    entries: Vec<usize>,
}

impl NeighborIndex {
    /// Buckets of edge `cell_size` (grown if the grid would exceed ~4M cells).
    pub fn new(cloud: &PointCloud, cell_size: f64) -> Self {
        let dim = cloud.dim();
        let domain = cloud.domain();
        let mut cell = cell_size.max(1e-300);
        let shape = loop {
            let shape: Vec<usize> = (0..dim)
                .map(|i| ((domain.width(i) / cell).ceil() as usize).max(1))
                .collect();
            let total: f64 = shape.iter().map(|s| *s as f64).product();
            if total <= 4.0e6 {
                break shape;
            }
            cell *= 2.0;
        };
        let mut strides = vec![1usize; dim];
        for i in 1..dim {
            strides[i] = strides[i - 1] * shape[i - 1];
        }
        let total: usize = shape.iter().product();
        let lower = domain.lower().to_vec();
        let cell_of = |p: &[f64]| -> usize {
            (0..dim)
                .map(|i| {
                    let c = ((p[i] - lower[i]) / cell).floor() as isize;
                    c.clamp(0, shape[i] as isize - 1) as usize * strides[i]
                })
                .sum()
        };
        let mut counts = vec![0usize; total + 1];
        let cells: Vec<usize> = cloud.iter().map(cell_of).collect();
        for &c in &cells {
            counts[c + 1] += 1;
        }
        for i in 0..total {
            counts[i + 1] += counts[i];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut entries = vec![0usize; cells.len()];
        for (k, &c) in cells.iter().enumerate() {
            entries[fill[c]] = k;
            fill[c] += 1;
        }
        Self {
            dim,
            lower,
            cell,
            shape,
            strides,
            starts,
            entries,
        }
    }

    /// Calls `visit(k, dist2)` for every point with `||x - x_k|| < radius`.
    pub fn for_each_within<F: FnMut(usize, f64)>(
        &self,
        cloud: &PointCloud,
        x: &[f64],
        radius: f64,
        mut visit: F,
    ) {
        let dim = self.dim;
        let mut lo = vec![0usize; dim];
        let mut hi = vec![0usize; dim];
        for i in 0..dim {
            let a = ((x[i] - radius - self.lower[i]) / self.cell).floor();
            let b = ((x[i] + radius - self.lower[i]) / self.cell).floor();
            let max = (self.shape[i] - 1) as f64;
            if b < 0.0 || a > max {
                return;
            }
            lo[i] = a.max(0.0) as usize;
            hi[i] = b.min(max) as usize;
        }
        let r2 = radius * radius;
        let mut idx = lo.clone();
        loop {
            let c: usize = idx.iter().zip(&self.strides).map(|(a, s)| a * s).sum();
            for &k in &self.entries[self.starts[c]..self.starts[c + 1]] {
                let p = cloud.point(k);
                let mut d2 = 0.0;
                for i in 0..dim {
                    let t = x[i] - p[i];
                    d2 += t * t;
                }
                if d2 < r2 {
                    visit(k, d2);
                }
            }
            let mut axis = 0;
            loop {
                if axis == dim {
                    return;
                }
                idx[axis] += 1;
                if idx[axis] <= hi[axis] {
                    break;
                }
                idx[axis] = lo[axis];
                axis += 1;
            }
        }
    }
}

/// Index of the nearest cloud point (brute force).
pub fn nearest(cloud: &PointCloud, x: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, p) in cloud.iter().enumerate() {
        let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < best.1 {
            best = (k, d2);
        }
    }
    best.0
}
