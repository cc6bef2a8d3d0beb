//! Shepard's method: a normalized average with nonnegative compactly
//! supported weights.

use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;

use super::index::{nearest, NeighborIndex};
use super::mls::{check_inputs, wendland_c2};

/// Relative distance below which a query counts as hitting a node.
const EXACT_HIT: f64 = 1e-12;

/// Inverse-square-distance taper of the Wendland bump; unbounded at 0 and
/// zero at `t >= 1`.
fn shepard_weight(t: f64) -> f64 {
    wendland_c2(t) / (t * t)
}

pub(crate) fn shepard_weights(
    cloud: &PointCloud,
    index: Option<&NeighborIndex>,
    x: &[f64],
    radius: f64,
    out: &mut Vec<(usize, f64)>,
) {
    out.clear();
    let mut hit = None;
    let mut visit = |k: usize, d2: f64| {
        let t = d2.sqrt() / radius;
        if t < EXACT_HIT {
            hit = Some(k);
        } else {
            let w = shepard_weight(t);
            if w > 0.0 {
                out.push((k, w));
            }
        }
    };
    match index {
        Some(index) => index.for_each_within(cloud, x, radius, &mut visit),
        None => {
            let r2 = radius * radius;
            for (k, p) in cloud.iter().enumerate() {
                let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 < r2 {
                    visit(k, d2);
                }
            }
        }
    }
    if let Some(k) = hit {
        out.clear();
        out.push((k, 1.0));
        return;
    }
    let total: f64 = out.iter().map(|(_, w)| w).sum();
    if out.is_empty() || !(total > 0.0) {
        out.clear();
        out.push((nearest(cloud, x), 1.0));
        return;
    }
    for (_, w) in out.iter_mut() {
        *w /= total;
    }
}

/// Shepard value at `x`; nearest node when nothing lies within `radius`.
pub fn shepard_eval(cloud: &PointCloud, values: &[f64], x: &[f64], radius: f64) -> Result<f64> {
    check_inputs(cloud, values, x)?;
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("Shepard radius must be positive".into()));
    }
    let mut w = Vec::new();
    shepard_weights(cloud, None, x, radius, &mut w);
    Ok(w.iter().map(|(k, a)| a * values[*k]).sum())
}
