//! Control-problem interface and the geometric-Brownian benchmark family
//! with closed-form optimal controls.

use crate::condexp::Dynamics;
use crate::error::{Error, Result};
use crate::optimizer::ControlTrajectory;

/// A finite-horizon stochastic control problem
/// `dX = b(X,u) dt + sigma(X,u) dW`, cost `E[int j(t,X,u) dt + k(X_T)]`.
///
/// Array layouts (all row-major, flat):
/// - `drift_dx`: `d x d`, entry `[i*d + j] = db_i/dx_j`
/// - `diffusion_dx`: `d x d x m`, entry `[(j*d + i)*m + k] = dsigma_ik/dx_j`
/// - `drift_du`: `d x d1`, entry `[i*d1 + a] = db_i/du_a`
/// - `diffusion_du`: `d1 x d x m`, entry `[(a*d + i)*m + k] = dsigma_ik/du_a`
pub trait ControlProblem: Dynamics {
    fn control_dim(&self) -> usize;
    fn horizon(&self) -> f64;
    fn x0(&self) -> &[f64];

    fn drift_dx(&self, x: &[f64], u: &[f64], out: &mut [f64]);
    fn diffusion_dx(&self, x: &[f64], u: &[f64], out: &mut [f64]);
    fn drift_du(&self, x: &[f64], u: &[f64], out: &mut [f64]);
    fn diffusion_du(&self, x: &[f64], u: &[f64], out: &mut [f64]);

    fn running_cost(&self, t: f64, x: &[f64], u: &[f64]) -> f64;
    fn running_cost_dx(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]);
    fn running_cost_du(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]);

    fn terminal_cost(&self, x: &[f64]) -> f64;
    fn terminal_cost_dx(&self, x: &[f64], out: &mut [f64]);

    /// Whether `sigma` varies with the control. When false, the `q` term of
    /// the gradient vanishes and need not be evaluated.
    fn diffusion_depends_on_control(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    Case1,
    Case2,
}

/// Benchmark parameters: `dY_i = u Y_i dt + sigma_i Y_i dW_i`, tracking a
/// target `y*(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkCase {
    pub case: Case,
    pub sigmas: Vec<f64>,
    pub y0: f64,
    pub horizon: f64,
}

impl BenchmarkCase {
    pub fn new(case: Case, sigmas: Vec<f64>, y0: f64, horizon: f64) -> Result<Self> {
        let c = Self {
            case,
            sigmas,
            y0,
            horizon,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.sigmas.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() {
            return Err(Error::InvalidArgument("benchmark needs at least one volatility".into()));
        }
        if self.sigmas.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("volatilities must be finite".into()));
        }
        if !(self.y0 > 0.0) || !self.y0.is_finite() {
            return Err(Error::InvalidArgument(format!("y0 must be positive, got {}", self.y0)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        const SAMPLES: usize = 1000;
        for i in 0..=SAMPLES {
            let t = self.horizon * i as f64 / SAMPLES as f64;
            if !(self.denominator(t) > 0.0) {
                return Err(Error::InvalidCase { t });
            }
        }
        Ok(())
    }

    /// `D(t)` for Case 1, `E(t)` for Case 2.
    pub fn denominator(&self, t: f64) -> f64 {
        let big_t = self.horizon;
        match self.case {
            Case::Case1 => 1.0 / self.y0 - big_t * t + 0.5 * t * t,
            Case::Case2 => 1.0 / self.y0 + 1.0 - (-t).exp() - (-big_t).exp() * t,
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// Optimal control `u*(t)`.
    pub fn exact_control(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.exact_control_unchecked(t))
    }

    fn exact_control_unchecked(&self, t: f64) -> f64 {
        let big_t = self.horizon;
        let num = match self.case {
            Case::Case1 => big_t - t,
            Case::Case2 => (-big_t).exp() - (-t).exp(),
        };
        num / self.denominator(t)
    }

    /// Tracking target `y*(t)`.
    pub fn ystar(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.ystar_unchecked(t))
    }

    fn ystar_unchecked(&self, t: f64) -> f64 {
        let d = self.dim() as f64;
        let big_t = self.horizon;
        let growth: f64 = self.sigmas.iter().map(|s| (s * s * t).exp()).sum();
        let den = self.denominator(t);
        match self.case {
            Case::Case1 => (1.0 - (t - big_t).powi(2) / den + growth / den) / d,
            Case::Case2 => {
                let a = (-big_t).exp() - (-t).exp();
                ((growth - a * a) / den - (-t).exp()) / d
            }
        }
    }

    /// Exact control sampled at the left endpoints of `pieces` intervals.
    pub fn exact_trajectory(&self, pieces: usize) -> Result<ControlTrajectory> {
        ControlTrajectory::from_fn(self.horizon, pieces, 1, |t, out| {
            out[0] = self.exact_control_unchecked(t)
        })
    }
}

/// `sqrt(dt * sum_m (alpha_m - u*(t_{m-1}))^2)` over the pieces.
pub fn l2_control_error(numeric: &ControlTrajectory, case: &BenchmarkCase) -> Result<f64> {
    if (numeric.horizon() - case.horizon).abs() > 1e-12 * case.horizon {
        return Err(Error::InvalidArgument(format!(
            "horizon mismatch: control {} vs case {}",
            numeric.horizon(),
            case.horizon
        )));
    }
    if numeric.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: numeric.dim(),
        });
    }
    let dt = numeric.dt();
    let sum: f64 = (0..numeric.pieces())
        .map(|n| {
            let e = numeric.piece(n)[0] - case.exact_control_unchecked(numeric.time(n));
            e * e
        })
        .sum();
    Ok((dt * sum).sqrt())
}

/// Max over pieces of `|alpha_m - u*(t_{m-1})|`.
pub fn max_control_error(numeric: &ControlTrajectory, case: &BenchmarkCase) -> f64 {
    (0..numeric.pieces())
        .map(|n| (numeric.piece(n)[0] - case.exact_control_unchecked(numeric.time(n))).abs())
        .fold(0.0, f64::max)
}

/// The benchmark as a [`ControlProblem`].
#[derive(Debug, Clone)]
pub struct BenchmarkProblem {
    case: BenchmarkCase,
    x0: Vec<f64>,
}

impl BenchmarkProblem {
    pub fn new(case: BenchmarkCase) -> Result<Self> {
        case.validate()?;
        let x0 = vec![case.y0; case.dim()];
        Ok(Self { case, x0 })
    }

    pub fn case(&self) -> &BenchmarkCase {
        &self.case
    }
}

/// Builds the benchmark problem.
pub fn make_benchmark(case: BenchmarkCase) -> Result<BenchmarkProblem> {
    BenchmarkProblem::new(case)
}

impl Dynamics for BenchmarkProblem {
    fn state_dim(&self) -> usize {
        self.case.dim()
    }

    fn noise_dim(&self) -> usize {
        self.case.dim()
    }

    fn drift(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = u[0] * xi;
        }
    }

    fn diffusion(&self, x: &[f64], _u: &[f64], out: &mut [f64]) {
        let d = self.case.dim();
        out[..d * d].fill(0.0);
        for i in 0..d {
            out[i * d + i] = self.case.sigmas[i] * x[i];
        }
    }
}

impl ControlProblem for BenchmarkProblem {
    fn control_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> f64 {
        self.case.horizon
    }

    fn x0(&self) -> &[f64] {
        &self.x0
    }

    fn drift_dx(&self, _x: &[f64], u: &[f64], out: &mut [f64]) {
        let d = self.case.dim();
        out[..d * d].fill(0.0);
        for i in 0..d {
            out[i * d + i] = u[0];
        }
    }

    fn diffusion_dx(&self, _x: &[f64], _u: &[f64], out: &mut [f64]) {
        let d = self.case.dim();
        out[..d * d * d].fill(0.0);
        for i in 0..d {
            out[(i * d + i) * d + i] = self.case.sigmas[i];
        }
    }

    fn drift_du(&self, x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[..x.len()].copy_from_slice(x);
    }

    fn diffusion_du(&self, _x: &[f64], _u: &[f64], out: &mut [f64]) {
        let d = self.case.dim();
        out[..d * d].fill(0.0);
    }

    fn running_cost(&self, t: f64, x: &[f64], u: &[f64]) -> f64 {
        let ys = self.case.ystar_unchecked(t);
        0.5 * x.iter().map(|xi| (xi - ys) * (xi - ys)).sum::<f64>() + 0.5 * u[0] * u[0]
    }

    fn running_cost_dx(&self, t: f64, x: &[f64], _u: &[f64], out: &mut [f64]) {
        let ys = self.case.ystar_unchecked(t);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi - ys;
        }
    }

    fn running_cost_du(&self, _t: f64, _x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
    }

    fn terminal_cost(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn terminal_cost_dx(&self, x: &[f64], out: &mut [f64]) {
        out[..x.len()].fill(0.0);
    }

    fn diffusion_depends_on_control(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case1() -> BenchmarkCase {
        BenchmarkCase::new(Case::Case1, vec![0.1, 0.15], 0.5, 1.0).unwrap()
    }

    fn case2() -> BenchmarkCase {
        BenchmarkCase::new(Case::Case2, vec![0.1, 0.15], 0.5, 1.0).unwrap()
    }

    #[test]
    fn exact_control_values() {
        let c = case1();
        assert!((c.exact_control(0.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(c.exact_control(1.0).unwrap(), 0.0);
        assert_eq!(case2().exact_control(1.0).unwrap(), 0.0);
        assert!(matches!(c.exact_control(1.5), Err(Error::TimeOutOfRange { .. })));
    }

    #[test]
    fn ystar_values() {
        assert!((case1().ystar(0.0).unwrap() - 0.75).abs() < 1e-15);
        let a: f64 = (-1.0f64).exp() - 1.0;
        let expect = 0.5 * ((2.0 - a * a) / 2.0 - 1.0);
        let got = case2().ystar(0.0).unwrap();
        assert!((got - expect).abs() < 1e-15);
        assert!((got + 0.0999).abs() < 1e-3);
    }

    #[test]
    fn denominators_positive() {
        for c in [case1(), case2()] {
            for i in 0..=1000 {
                assert!(c.denominator(i as f64 / 1000.0) > 0.0);
            }
        }
    }

    #[test]
    fn invalid_case_names_time() {
        // 1/y0 - t + t^2/2 hits zero before t = 1 when y0 = 2.5
        let err = BenchmarkCase::new(Case::Case1, vec![0.1], 2.5, 1.0);
        assert!(matches!(err, Err(Error::InvalidCase { t }) if t > 0.0 && t <= 1.0));
    }

    #[test]
    fn l2_error_norm_arithmetic() {
        let c = case1();
        let exact = c.exact_trajectory(10).unwrap();
        assert_eq!(l2_control_error(&exact, &c).unwrap(), 0.0);
        let shifted = exact.map(|v| v + 0.01);
        assert!((l2_control_error(&shifted, &c).unwrap() - 0.01).abs() < 1e-14);
        assert!((max_control_error(&shifted, &c) - 0.01).abs() < 1e-14);
    }

    #[test]
    fn benchmark_callbacks() {
        let p = make_benchmark(case1()).unwrap();
        let x = [0.7, 1.3];
        let u = [0.4];
        let mut b = [0.0; 2];
        p.drift(&x, &u, &mut b);
        assert!((b[0] - 0.28).abs() < 1e-15 && (b[1] - 0.52).abs() < 1e-15);
        let mut s = [0.0; 4];
        p.diffusion(&x, &u, &mut s);
        assert!((s[0] - 0.07).abs() < 1e-15 && s[1] == 0.0 && s[2] == 0.0);
        assert!((s[3] - 0.195).abs() < 1e-15);
        let mut g = [1.0; 2];
        p.terminal_cost_dx(&x, &mut g);
        assert_eq!(g, [0.0, 0.0]);
        let ys = p.case().ystar(0.3).unwrap();
        let mut jx = [0.0; 2];
        p.running_cost_dx(0.3, &x, &u, &mut jx);
        assert!((jx[0] - (0.7 - ys)).abs() < 1e-15);
        let mut ds = [9.0; 8];
        p.diffusion_dx(&x, &u, &mut ds);
        assert_eq!(ds, [0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.15]);
    }
}
