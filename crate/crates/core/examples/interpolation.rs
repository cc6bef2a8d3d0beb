//! Meshfree back-ends on scattered data: accuracy under refinement.
//!
//! cargo run --example interpolation

use meshctrl::meshfree::{InterpConfig, Interpolator};
use meshctrl::pointcloud::{halton_cloud, tensor_grid, DomainBox};

fn target(x: &[f64]) -> f64 {
    x[0].sin() * x[1].cos()
}

fn max_error(interp: &Interpolator) -> meshctrl::Result<f64> {
    let values: Vec<f64> = interp.cloud().iter().map(target).collect();
    let field = interp.fit(&values, 1)?;
    let mut worst = 0.0f64;
    for i in 0..50 {
        for j in 0..50 {
            let x = [i as f64 / 49.0, j as f64 / 49.0];
            worst = worst.max((field.value(&x) - target(&x)).abs());
        }
    }
    Ok(worst)
}

fn main() -> meshctrl::Result<()> {
    let unit = DomainBox::cube(2, 0.0, 1.0)?;
    println!("{:>12} {:>6} {:>12} {:>10}", "backend", "M", "max error", "cond");
    for backend in [InterpConfig::mls(), InterpConfig::shepard(), InterpConfig::rbf()] {
        for m in [64, 256, 1024] {
            let cloud = halton_cloud(m, &unit)?.with_fill_distance(20_000)?;
            let interp = Interpolator::new(&cloud, &backend)?;
            let cond = interp
                .condition_estimate()
                .map_or_else(|| "-".to_string(), |c| format!("{c:.2e}"));
            println!("{:>12} {m:6} {:12.4e} {cond:>10}", backend.name(), max_error(&interp)?);
        }
    }
    for k in [8, 16, 32] {
        let interp = Interpolator::new(&tensor_grid(k, &unit)?, &InterpConfig::Multilinear)?;
        println!("{:>12} {:6} {:12.4e}", "multilinear", k * k, max_error(&interp)?);
    }
    Ok(())
}
