//! Solve the d=2 benchmark (Case 1) and compare against the exact control.
//!
//! cargo run --example solve_benchmark -- [N] [mls|rbf|shepard] [1|2] [tolerance]

use meshctrl::meshfree::InterpConfig;
use meshctrl::optimizer::{solve, CloudRule, ControlTrajectory, OptimizerConfig, ProjectionSpec};
use meshctrl::problems::{l2_control_error, make_benchmark, BenchmarkCase, Case};

fn main() -> meshctrl::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(11);
    let backend = InterpConfig::from_name(args.get(2).map(String::as_str).unwrap_or("mls"))?;

    let which = match args.get(3).map(String::as_str) {
        Some("2") => Case::Case2,
        _ => Case::Case1,
    };
    let case = BenchmarkCase::new(which, vec![0.1, 0.15], 0.5, 1.0)?;
    let problem = make_benchmark(case.clone())?;
    let config = OptimizerConfig {
        interp: backend,
        cloud: CloudRule::Halton { count: n * n },
        seed: 7,
        tolerance: args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1e-3),
        ..OptimizerConfig::default()
    };
    let initial = ControlTrajectory::zeros(case.horizon, n, 1)?;
    let start = std::time::Instant::now();
    let result = solve(&problem, &config, &ProjectionSpec::Unconstrained, &initial)?;

    for r in &result.history {
        println!(
            "iter {:3}  cost {:.6}  |g| {:.3e}  change {:.3e}  {:.0} ms",
            r.iter, r.cost, r.grad_norm, r.control_change, r.wall_ms
        );
    }
    println!("{:>6} {:>10} {:>10}", "t", "u_num", "u_exact");
    for k in 0..n {
        let t = result.control.time(k);
        println!("{t:6.3} {:10.5} {:10.5}", result.control.piece(k)[0], case.exact_control(t)?);
    }
    println!(
        "converged={} L2 error {:.4e} in {:.1} s",
        result.converged,
        l2_control_error(&result.control, &case)?,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
