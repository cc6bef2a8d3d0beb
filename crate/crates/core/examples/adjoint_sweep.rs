//! Backward sweep for the adjoint pair (p, q) of the benchmark at its exact
//! control, refined in time.

use meshctrl::bsde::solve_bsde;
use meshctrl::meshfree::{InterpConfig, VectorField};
use meshctrl::pointcloud::{halton_cloud, DomainBox};
use meshctrl::problems::{make_benchmark, BenchmarkCase, Case};
use meshctrl::quadrature::gauss_hermite;

fn main() -> meshctrl::Result<()> {
    let case = BenchmarkCase::new(Case::Case1, vec![0.1, 0.15], 0.5, 1.0)?;
    let problem = make_benchmark(case.clone())?;
    let cloud = halton_cloud(144, &DomainBox::cube(2, 0.2, 1.2)?)?;
    let rule = gauss_hermite(4)?;
    let x0 = [0.5, 0.5];
    println!("{:>4} {:>14} {:>14} {:>8} {:>8}", "N", "p1(0,x0)", "p2(0,x0)", "picard", "outside");
    for n in [10, 20, 40, 80] {
        let u = case.exact_trajectory(n)?;
        let grid = solve_bsde(&problem, &u, &cloud, &rule, &InterpConfig::mls())?;
        let mut p = [0.0; 2];
        grid.p_field(0).eval(&x0, &mut p);
        println!(
            "{n:4} {:14.8} {:14.8} {:8} {:8}",
            p[0],
            p[1],
            grid.picard_iterations(),
            grid.out_of_domain()
        );
    }
    if let Some(path) = std::env::args().nth(1) {
        let u = case.exact_trajectory(10)?;
        solve_bsde(&problem, &u, &cloud, &rule, &InterpConfig::mls())?.write_csv_file(path.as_ref())?;
    }
    Ok(())
}
