//! Backward sweep for the adjoint pair `(p, q)` on a point cloud.

use std::io::Write;
use std::path::Path;

use crate::condexp::{OneStepModel, StepExpectation};
use crate::csvio::{fmt_f64, CsvWriter};
use crate::error::{Error, Result};
use crate::meshfree::{InterpConfig, Interpolant, Interpolator, VectorField};
use crate::optimizer::ControlTrajectory;
use crate::pointcloud::PointCloud;
use crate::problems::ControlProblem;
use crate::quadrature::GaussHermiteRule;

pub const PICARD_TOL: f64 = 1e-12;
pub const PICARD_MAX_ITERS: usize = 50;
/// Consecutive growing Picard updates treated as divergence.
pub const PICARD_GROWTH_LIMIT: usize = 5;

/// Generator `f(t, x, p, q, u)` of the backward equation.
pub trait Driver: Sync {
    /// Writes `f` (length `d`); `q` is `d x m` row-major.
    fn eval(&self, t: f64, x: &[f64], p: &[f64], q: &[f64], u: &[f64], out: &mut [f64]);
}

/// `f_i = dj/dx_i + sum_k db_k/dx_i p_k + sum_kl q_kl dsigma_kl/dx_i`.
pub struct AdjointDriver<'a> {
    problem: &'a dyn ControlProblem,
}

impl<'a> AdjointDriver<'a> {
    pub fn new(problem: &'a dyn ControlProblem) -> Self {
        Self { problem }
    }
}

impl Driver for AdjointDriver<'_> {
    fn eval(&self, t: f64, x: &[f64], p: &[f64], q: &[f64], u: &[f64], out: &mut [f64]) {
        let d = self.problem.state_dim();
        let m = self.problem.noise_dim();
        self.problem.running_cost_dx(t, x, u, out);
        let mut bx = vec![0.0; d * d];
        self.problem.drift_dx(x, u, &mut bx);
        let mut sx = vec![0.0; d * d * m];
        self.problem.diffusion_dx(x, u, &mut sx);
        for i in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += bx[k * d + i] * p[k];
            }
            let slab = &sx[i * d * m..(i + 1) * d * m];
            acc += slab.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
            out[i] += acc;
        }
    }
}

/// Closure driver, mainly for tests and toy problems.
pub struct FnDriver<F>(pub F);

impl<F> Driver for FnDriver<F>
where
    F: Fn(f64, &[f64], &[f64], &[f64], &[f64], &mut [f64]) + Sync,
{
    fn eval(&self, t: f64, x: &[f64], p: &[f64], q: &[f64], u: &[f64], out: &mut [f64]) {
        (self.0)(t, x, p, q, u, out)
    }
}

/// `p_N[k] = D_x k(x_k)`, node-major `M x d`.
pub fn terminal_condition(
    cloud: &PointCloud,
    d: usize,
    terminal_gradient: impl Fn(&[f64], &mut [f64]),
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; cloud.len() * d];
    for (k, x) in cloud.iter().enumerate() {
        terminal_gradient(x, &mut out[k * d..(k + 1) * d]);
        if out[k * d..(k + 1) * d].iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow {
                context: format!("terminal condition at node {k} {x:?}"),
            });
        }
    }
    Ok(out)
}

/// Nodal values of one backward step.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelValues {
    /// `M x d`, node-major.
    pub p: Vec<f64>,
    /// `M x d x m`, node-major.
    pub q: Vec<f64>,
    pub out_of_domain: usize,
    /// Largest Picard iteration count over the nodes.
    pub picard_iterations: usize,
}

/// Everything one backward step needs besides the next-level field.
pub struct StepContext<'a> {
    pub cloud: &'a PointCloud,
    pub driver: &'a dyn Driver,
    pub model: OneStepModel<'a>,
    pub quadrature: &'a StepExpectation,
    /// time `t_n` of the level being computed
    pub t: f64,
}

/// Computes `(p_n, q_n)` at every node from the level-`n+1` field of `p`.
pub fn backward_step(next: &dyn VectorField, ctx: &StepContext) -> Result<LevelValues> {
    let d = ctx.model.state_dim();
    let m = ctx.model.noise_dim();
    let dt = ctx.model.dt();
    if next.components() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: next.components(),
        });
    }
    let mm = ctx.cloud.len();
    let mut p = vec![0.0; mm * d];
    let mut q = vec![0.0; mm * d * m];
    let mut out_of_domain = 0;
    let mut picard_iterations = 0;
    let mut f = vec![0.0; d];
    let mut cur = vec![0.0; d];
    for (k, x) in ctx.cloud.iter().enumerate() {
        let ce = ctx
            .quadrature
            .eval(next, &ctx.model, x, Some(ctx.cloud.domain()), true)?;
        out_of_domain += ce.out_of_domain;
        let qk = &mut q[k * d * m..(k + 1) * d * m];
        for (qv, e) in qk.iter_mut().zip(&ce.dw) {
            *qv = e / dt;
        }
        cur.copy_from_slice(&ce.mean);
        let mut last_change = f64::INFINITY;
        let mut growth = 0;
        let mut iters = 0;
        while iters < PICARD_MAX_ITERS {
            iters += 1;
            ctx.driver.eval(ctx.t, x, &cur, qk, ctx.model.control(), &mut f);
            let mut change: f64 = 0.0;
            for i in 0..d {
                let next_i = ce.mean[i] + dt * f[i];
                change = change.max((next_i - cur[i]).abs());
                cur[i] = next_i;
            }
            if !change.is_finite() || cur.iter().any(|v| !v.is_finite()) {
                return Err(Error::PicardDivergence { node: k, x: x.to_vec() });
            }
            if change <= PICARD_TOL {
                break;
            }
            if change > last_change {
                growth += 1;
                if growth >= PICARD_GROWTH_LIMIT {
                    return Err(Error::PicardDivergence { node: k, x: x.to_vec() });
                }
            } else {
                growth = 0;
            }
            last_change = change;
        }
        picard_iterations = picard_iterations.max(iters);
        p[k * d..(k + 1) * d].copy_from_slice(&cur);
    }
    Ok(LevelValues {
        p,
        q,
        out_of_domain,
        picard_iterations,
    })
}

/// Nodal adjoint values on every level plus their interpolants.
#[derive(Debug, Clone)]
pub struct AdjointGrid {
    interpolator: Interpolator,
    levels: usize,
    dt: f64,
    d: usize,
    m: usize,
    p: Vec<f64>,
    q: Vec<f64>,
    p_fields: Vec<Interpolant>,
    q_fields: Vec<Interpolant>,
    out_of_domain: usize,
    picard_iterations: usize,
}

impl AdjointGrid {
    pub fn cloud(&self) -> &PointCloud {
        self.interpolator.cloud()
    }

    /// Number of time steps `N`; levels run `0..=N`.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `p_n` at node `k`.
    pub fn p(&self, n: usize, k: usize) -> &[f64] {
        let mm = self.cloud().len();
        let start = (n * mm + k) * self.d;
        &self.p[start..start + self.d]
    }

    /// `q_n` at node `k` as a `d x m` row-major matrix; zero on level `N`.
    pub fn q(&self, n: usize, k: usize) -> &[f64] {
        let mm = self.cloud().len();
        let w = self.d * self.m;
        let start = (n * mm + k) * w;
        &self.q[start..start + w]
    }

    /// Interpolant of `p_n`, `n` in `0..=N`.
    pub fn p_field(&self, n: usize) -> &Interpolant {
        &self.p_fields[n]
    }

    /// Interpolant of `q_n` (`d*m` components), `n` in `0..N`.
    pub fn q_field(&self, n: usize) -> &Interpolant {
        &self.q_fields[n]
    }

    /// Total quadrature proposals that left the cloud's box.
    pub fn out_of_domain(&self) -> usize {
        self.out_of_domain
    }

    /// Largest Picard iteration count over all nodes and levels.
    pub fn picard_iterations(&self) -> usize {
        self.picard_iterations
    }

    /// Writes `n,k,x...,p...,q...` for every level and node.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dim = self.cloud().dim();
        let mut header = vec!["n".to_string(), "k".to_string()];
        header.extend((1..=dim).map(|i| format!("x{i}")));
        header.extend((1..=self.d).map(|i| format!("p{i}")));
        for i in 1..=self.d {
            header.extend((1..=self.m).map(|j| format!("q{i}_{j}")));
        }
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut w = CsvWriter::new(out, &header)?;
        for n in 0..=self.levels {
            for (k, x) in self.cloud().iter().enumerate() {
                let mut row = vec![n.to_string(), k.to_string()];
                row.extend(x.iter().map(|v| fmt_f64(*v)));
                row.extend(self.p(n, k).iter().map(|v| fmt_f64(*v)));
                row.extend(self.q(n, k).iter().map(|v| fmt_f64(*v)));
                w.row(&row)?;
            }
        }
        w.finish()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn at_level(level: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Level {
        level,
        source: Box::new(e),
    }
}

/// Full backward sweep `n = N-1 .. 0` with a prepared interpolator.
pub fn solve_bsde_with(
    problem: &dyn ControlProblem,
    control: &ControlTrajectory,
    interpolator: &Interpolator,
    rule: &GaussHermiteRule,
) -> Result<AdjointGrid> {
    let cloud = interpolator.cloud();
    let d = problem.state_dim();
    let m = problem.noise_dim();
    if cloud.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: cloud.dim(),
        });
    }
    if control.dim() != problem.control_dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.control_dim(),
            got: control.dim(),
        });
    }
    if (control.horizon() - problem.horizon()).abs() > 1e-12 * problem.horizon() {
        return Err(Error::InvalidArgument("control horizon differs from the problem's".into()));
    }
    let n_levels = control.pieces();
    let dt = control.dt();
    let mm = cloud.len();
    let quadrature = StepExpectation::new(rule, m)?;
    let driver = AdjointDriver::new(problem);

    let mut p = vec![0.0; (n_levels + 1) * mm * d];
    let mut q = vec![0.0; (n_levels + 1) * mm * d * m];
    let terminal = terminal_condition(cloud, d, |x, o| problem.terminal_cost_dx(x, o))
        .map_err(at_level(n_levels))?;
    p[n_levels * mm * d..].copy_from_slice(&terminal);

    let mut p_fields: Vec<Option<Interpolant>> = vec![None; n_levels + 1];
    let mut q_fields: Vec<Option<Interpolant>> = vec![None; n_levels];
    p_fields[n_levels] = Some(interpolator.fit(&terminal, d).map_err(at_level(n_levels))?);
    let mut out_of_domain = 0;
    let mut picard_iterations = 0;

    for n in (0..n_levels).rev() {
        let model = OneStepModel::new(problem, control.piece(n), dt)?;
        let ctx = StepContext {
            cloud,
            driver: &driver,
            model,
            quadrature: &quadrature,
            t: control.time(n),
        };
        let next = p_fields[n + 1].as_ref().expect("level built");
        let level = backward_step(next, &ctx).map_err(at_level(n))?;
        out_of_domain += level.out_of_domain;
        picard_iterations = picard_iterations.max(level.picard_iterations);
        p_fields[n] = Some(interpolator.fit(&level.p, d).map_err(at_level(n))?);
        q_fields[n] = Some(interpolator.fit(&level.q, d * m).map_err(at_level(n))?);
        p[n * mm * d..(n + 1) * mm * d].copy_from_slice(&level.p);
        q[n * mm * d * m..(n + 1) * mm * d * m].copy_from_slice(&level.q);
    }

    Ok(AdjointGrid {
        interpolator: interpolator.clone(),
        levels: n_levels,
        dt,
        d,
        m,
        p,
        q,
        p_fields: p_fields.into_iter().map(|f| f.expect("level built")).collect(),
        q_fields: q_fields.into_iter().map(|f| f.expect("level built")).collect(),
        out_of_domain,
        picard_iterations,
    })
}

/// Full backward sweep, preparing the interpolator from `config`.
pub fn solve_bsde(
    problem: &dyn ControlProblem,
    control: &ControlTrajectory,
    cloud: &PointCloud,
    rule: &GaussHermiteRule,
    config: &InterpConfig,
) -> Result<AdjointGrid> {
    let interpolator = Interpolator::new(cloud, config)?;
    solve_bsde_with(problem, control, &interpolator, rule)
}
