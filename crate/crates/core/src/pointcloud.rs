//! Spatial point sets over a box domain.
//!
//! Points are stored row-major in a flat `Vec<f64>`: point `k` occupies
//! `points[k * dim..(k + 1) * dim]`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

const PRIMES: [u64; 20] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
];

/// Largest dimension supported by [`halton_sequence`].
pub const MAX_HALTON_DIM: usize = PRIMES.len();

#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidDomain("zero-dimensional box".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidDomain(format!(
                    "axis {i}: lower {lo} must be below upper {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The box `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.width(i).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Maps a unit-cube coordinate vector into the box.
    pub fn from_unit(&self, u: &[f64], out: &mut [f64]) {
        for i in 0..self.dim() {
            out[i] = self.lower[i] + u[i] * self.width(i);
        }
    }

    /// Inverse of [`DomainBox::from_unit`].
    pub fn to_unit(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.dim() {
            out[i] = (x[i] - self.lower[i]) / self.width(i);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    points: Vec<f64>,
    domain: DomainBox,
    fill_distance: Option<f64>,
    /// Points per axis when the cloud is a tensor lattice (axis 0 fastest).
    grid_shape: Option<Vec<usize>>,
}

impl PointCloud {
    /// Builds a cloud from flat row-major points; every point must lie in `domain`.
    pub fn new(points: Vec<f64>, domain: DomainBox) -> Result<Self> {
        let dim = domain.dim();
        if points.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: points.len() % dim,
            });
        }
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        for (k, p) in points.chunks_exact(dim).enumerate() {
            if !domain.contains(p) {
                return Err(Error::InvalidArgument(format!(
                    "point {k} = {p:?} lies outside the domain box"
                )));
            }
        }
        Ok(Self {
            dim,
            points,
            domain,
            fill_distance: None,
            grid_shape: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn fill_distance(&self) -> Option<f64> {
        self.fill_distance
    }

    pub fn grid_shape(&self) -> Option<&[usize]> {
        self.grid_shape.as_deref()
    }

    /// Measures the fill distance with `probe_count` probes and caches it.
    pub fn with_fill_distance(mut self, probe_count: usize) -> Result<Self> {
        self.fill_distance = Some(fill_distance(&self, probe_count)?);
        Ok(self)
    }

    /// Appends a point (which must lie in the box). Drops any tensor layout
    /// and cached fill distance.
    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !self.domain.contains(x) {
            return Err(Error::InvalidArgument(format!("{x:?} outside domain")));
        }
        self.points.extend_from_slice(x);
        self.grid_shape = None;
        self.fill_distance = None;
        Ok(())
    }

    /// Writes `x1,...,xd` header and one row per point, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for p in self.iter() {
            writeln!(w, "{}", crate::csvio::join_f64(p))?;
        }
        Ok(())
    }

    /// Reads a cloud written by [`PointCloud::write_csv`]. The domain box is
    /// the bounding box of the points unless one is given.
    pub fn read_csv<R: BufRead>(r: R, domain: Option<DomainBox>) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty point file".into()))??;
        let dim = header.split(',').count();
        let mut points = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let before = points.len();
            for field in line.split(',') {
                points.push(field.trim().parse::<f64>().map_err(|e| {
                    Error::Config(format!("row {}: {e}", row + 2))
                })?);
            }
            if points.len() - before != dim {
                return Err(Error::Config(format!(
                    "row {}: expected {dim} fields",
                    row + 2
                )));
            }
        }
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let domain = match domain {
            Some(d) => d,
            None => {
                let mut lo = vec![f64::INFINITY; dim];
                let mut hi = vec![f64::NEG_INFINITY; dim];
                for p in points.chunks_exact(dim) {
                    for i in 0..dim {
                        lo[i] = lo[i].min(p[i]);
                        hi[i] = hi[i].max(p[i]);
                    }
                }
                for i in 0..dim {
                    if lo[i] == hi[i] {
                        lo[i] -= 0.5;
                        hi[i] += 0.5;
                    }
                }
                DomainBox::new(lo, hi)?
            }
        };
        PointCloud::new(points, domain)
    }
}

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut factor = inv_base;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * factor;
        index /= base;
        factor *= inv_base;
    }
    value
}

/// Plain (unscrambled) Halton points; row `m` is the radical inverse of index
/// `skip + m + 1` in the first `dim` prime bases. Returned flat, `count * dim`.
pub fn halton_sequence(count: usize, dim: usize, skip: usize) -> Result<Vec<f64>> {
    if dim == 0 || dim > MAX_HALTON_DIM {
        return Err(Error::UnsupportedDimension {
            dim,
            max: MAX_HALTON_DIM,
        });
    }
    let mut out = Vec::with_capacity(count * dim);
    for m in 0..count {
        let index = (skip + m + 1) as u64;
        for &base in &PRIMES[..dim] {
            out.push(radical_inverse(index, base));
        }
    }
    Ok(out)
}

/// Affine map of unit-cube points `lower + u * (upper - lower)`.
pub fn scale_to_box(unit_points: &[f64], domain: &DomainBox) -> Result<PointCloud> {
    let dim = domain.dim();
    if unit_points.len() % dim != 0 {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: unit_points.len() % dim,
        });
    }
    let mut points = vec![0.0; unit_points.len()];
    for (u, x) in unit_points
        .chunks_exact(dim)
        .zip(points.chunks_exact_mut(dim))
    {
        domain.from_unit(u, x);
        // rounding may nudge u close to 1 past the upper face
        for i in 0..dim {
            x[i] = x[i].clamp(domain.lower()[i], domain.upper()[i]);
        }
    }
    PointCloud::new(points, domain.clone())
}

/// Halton points mapped into `domain`.
pub fn halton_cloud(count: usize, domain: &DomainBox) -> Result<PointCloud> {
    scale_to_box(&halton_sequence(count, domain.dim(), 0)?, domain)
}

/// Uniform lattice with `points_per_dim` nodes per axis, corners included.
pub fn tensor_grid(points_per_dim: usize, domain: &DomainBox) -> Result<PointCloud> {
    if points_per_dim < 2 {
        return Err(Error::InvalidArgument(
            "tensor grid needs at least 2 points per axis".into(),
        ));
    }
    let dim = domain.dim();
    let total = points_per_dim
        .checked_pow(dim as u32)
        .ok_or_else(|| Error::InvalidArgument("tensor grid too large".into()))?;
    let mut points = Vec::with_capacity(total * dim);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        for i in 0..dim {
            let s = idx[i] as f64 / (points_per_dim - 1) as f64;
            let v = if idx[i] == points_per_dim - 1 {
                domain.upper()[i]
            } else {
                domain.lower()[i] + s * domain.width(i)
            };
            points.push(v);
        }
        for i in 0..dim {
            idx[i] += 1;
            if idx[i] < points_per_dim {
                break;
            }
            idx[i] = 0;
        }
    }
    let mut cloud = PointCloud::new(points, domain.clone())?;
    cloud.grid_shape = Some(vec![points_per_dim; dim]);
    Ok(cloud)
}

/// Probe points used by [`fill_distance`]: a uniform lattice with at least
/// `probe_count` nodes when `dim <= 3`, otherwise `probe_count` Halton points.
pub fn probe_points(domain: &DomainBox, probe_count: usize) -> Result<Vec<f64>> {
    let dim = domain.dim();
    if dim <= 3 {
        let mut per_dim = 2usize;
        while per_dim.pow(dim as u32) < probe_count {
            per_dim += 1;
        }
        Ok(tensor_grid(per_dim, domain)?.points)
    } else {
        Ok(scale_to_box(&halton_sequence(probe_count, dim, 0)?, domain)?.points)
    }
}

/// Largest nearest-data distance over a probe set. A lower bound on the true
/// fill distance.
pub fn fill_distance_on(cloud: &PointCloud, probes: &[f64]) -> Result<f64> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let dim = cloud.dim();
    let mut worst: f64 = 0.0;
    for probe in probes.chunks_exact(dim) {
        let mut best = f64::INFINITY;
        for p in cloud.iter() {
            let mut d2 = 0.0;
            for i in 0..dim {
                let t = probe[i] - p[i];
                d2 += t * t;
            }
            if d2 < best {
                best = d2;
            }
        }
        worst = worst.max(best);
    }
    Ok(worst.sqrt())
}

/// Approximate fill distance of `cloud` over its domain box.
pub fn fill_distance(cloud: &PointCloud, probe_count: usize) -> Result<f64> {
    if probe_count == 0 {
        return Err(Error::InvalidArgument("probe_count must be positive".into()));
    }
    let probes = probe_points(cloud.domain(), probe_count)?;
    fill_distance_on(cloud, &probes)
}

/// Default probe budget, `10^4 * dim`.
pub fn default_probe_count(dim: usize) -> usize {
    10_000 * dim
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_first_points() {
        assert_eq!(halton_sequence(3, 1, 0).unwrap(), vec![0.5, 0.25, 0.75]);
        let p = halton_sequence(1, 2, 0).unwrap();
        assert_eq!(p[0], 0.5);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(halton_sequence(0, 3, 0).unwrap().is_empty());
        assert_eq!(
            halton_sequence(4, 21, 0),
            Err(Error::UnsupportedDimension { dim: 21, max: 20 })
        );
    }

    #[test]
    fn halton_skip_shifts_index() {
        let a = halton_sequence(5, 3, 0).unwrap();
        let b = halton_sequence(3, 3, 2).unwrap();
        assert_eq!(&a[6..], &b[..]);
    }

    #[test]
    fn scale_examples() {
        let b = DomainBox::new(vec![0.0], vec![2.0]).unwrap();
        assert_eq!(scale_to_box(&[0.5], &b).unwrap().point(0), &[1.0]);
        let b = DomainBox::cube(2, -1.0, 1.0).unwrap();
        assert_eq!(scale_to_box(&[0.0, 0.0], &b).unwrap().point(0), &[-1.0, -1.0]);
        let b = DomainBox::new(vec![0.0, 2.0], vec![4.0, 4.0]).unwrap();
        assert_eq!(scale_to_box(&[0.25, 0.5], &b).unwrap().point(0), &[1.0, 3.0]);
        assert!(matches!(
            scale_to_box(&[0.1, 0.2, 0.3], &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn box_validation() {
        assert!(DomainBox::new(vec![1.0], vec![1.0]).is_err());
        assert!(DomainBox::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn tensor_grid_examples() {
        let b = DomainBox::cube(1, 0.0, 1.0).unwrap();
        assert_eq!(tensor_grid(3, &b).unwrap().points(), &[0.0, 0.5, 1.0]);
        let b2 = DomainBox::cube(2, 0.0, 1.0).unwrap();
        let g = tensor_grid(2, &b2).unwrap();
        assert_eq!(g.points(), &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b3 = DomainBox::cube(3, 0.0, 1.0).unwrap();
        assert_eq!(tensor_grid(9, &b3).unwrap().len(), 729);
        assert!(tensor_grid(1, &b).is_err());
    }

    #[test]
    fn fill_distance_examples() {
        let b = DomainBox::cube(1, 0.0, 1.0).unwrap();
        let c = PointCloud::new(vec![0.0, 1.0], b.clone()).unwrap();
        assert!((fill_distance(&c, 1001).unwrap() - 0.5).abs() < 1e-12);
        let c = PointCloud::new(vec![0.0, 0.5, 1.0], b).unwrap();
        assert!((fill_distance(&c, 1001).unwrap() - 0.25).abs() < 1e-12);

        let b2 = DomainBox::cube(2, 0.0, 1.0).unwrap();
        let c = PointCloud::new(vec![0.0, 0.0, 1.0, 1.0], b2).unwrap();
        assert!((fill_distance(&c, 101 * 101).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let b = DomainBox::cube(2, 0.0, 1.0).unwrap();
        let c = halton_cloud(7, &b).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2\n"));
        let back = PointCloud::read_csv(&buf[..], Some(b)).unwrap();
        assert_eq!(back.points(), c.points());
    }
}
