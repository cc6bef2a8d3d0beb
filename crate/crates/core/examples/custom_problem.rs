//! A user-defined control problem with a box constraint on the control.
//!
//! Mean reversion towards a moving target, steered by an additive control:
//! dX = (u - k X) dt + s dW, cost = E[int (X - 1)^2 + c u^2 dt], u in [0, 1].

use meshctrl::condexp::Dynamics;
use meshctrl::optimizer::{solve, CloudRule, ControlTrajectory, OptimizerConfig, ProjectionSpec};
use meshctrl::problems::ControlProblem;

struct Steering {
    k: f64,
    s: f64,
    c: f64,
    x0: Vec<f64>,
}

impl Dynamics for Steering {
    fn state_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = u[0] - self.k * x[0];
    }
    fn diffusion(&self, _x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = self.s;
    }
}

impl ControlProblem for Steering {
    fn control_dim(&self) -> usize {
        1
    }
    fn horizon(&self) -> f64 {
        1.0
    }
    fn x0(&self) -> &[f64] {
        &self.x0
    }
    fn drift_dx(&self, _x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = -self.k;
    }
    fn diffusion_dx(&self, _x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn drift_du(&self, _x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }
    fn diffusion_du(&self, _x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn running_cost(&self, _t: f64, x: &[f64], u: &[f64]) -> f64 {
        (x[0] - 1.0).powi(2) + self.c * u[0] * u[0]
    }
    fn running_cost_dx(&self, _t: f64, x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * (x[0] - 1.0);
    }
    fn running_cost_du(&self, _t: f64, _x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * self.c * u[0];
    }
    fn terminal_cost(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn terminal_cost_dx(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn diffusion_depends_on_control(&self) -> bool {
        false
    }
}

fn main() -> meshctrl::Result<()> {
    let problem = Steering {
        k: 0.5,
        s: 0.2,
        c: 0.5,
        x0: vec![0.0],
    };
    let config = OptimizerConfig {
        samples: 20_000,
        cloud: CloudRule::Halton { count: 40 },
        tolerance: 1e-4,
        resample: false,
        ..OptimizerConfig::default()
    };
    let initial = ControlTrajectory::zeros(1.0, 20, 1)?;
    for (name, projection) in [
        ("unconstrained", ProjectionSpec::Unconstrained),
        ("u in [0, 1]", ProjectionSpec::bounds(vec![0.0], vec![1.0])?),
    ] {
        let result = solve(&problem, &config, &projection, &initial)?;
        let last = result.history.last().map(|r| r.cost).unwrap_or(f64::NAN);
        println!("{name}: {} iterations, cost {last:.5}, converged {}", result.history.len(), result.converged);
        let u: Vec<String> = result.control.values().iter().step_by(4).map(|v| format!("{v:.3}")).collect();
        println!("  u(t) at t = 0, 0.2, ..., 0.8: {}", u.join(" "));
    }
    Ok(())
}
