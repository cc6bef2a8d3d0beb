//! Halton clouds, tensor grids and their fill distances.
//!
//! cargo run --example point_clouds -- [out.csv]

use meshctrl::pointcloud::{fill_distance, halton_cloud, tensor_grid, DomainBox};

fn main() -> meshctrl::Result<()> {
    let domain = DomainBox::new(vec![0.0, -1.0], vec![2.0, 1.0])?;
    println!("{:>6} {:>12} {:>12}", "M", "h halton", "h grid");
    for k in [4, 8, 16, 32] {
        let m = k * k;
        let halton = halton_cloud(m, &domain)?;
        let grid = tensor_grid(k, &domain)?;
        println!(
            "{m:6} {:12.4e} {:12.4e}",
            fill_distance(&halton, 20_000)?,
            fill_distance(&grid, 20_000)?
        );
    }
    if let Some(path) = std::env::args().nth(1) {
        let cloud = halton_cloud(256, &domain)?;
        cloud.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
        println!("wrote {} points to {path}", cloud.len());
    }
    Ok(())
}
