//! Gradient projection over piecewise-constant controls.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bsde::{solve_bsde_with, AdjointGrid};
use crate::condexp::OneStepModel;
use crate::csvio::{fmt_f64, CsvWriter};
use crate::error::{Error, Result};
use crate::meshfree::{InterpConfig, Interpolator, VectorField};
use crate::pointcloud::{default_probe_count, halton_cloud, tensor_grid, DomainBox, PointCloud};
use crate::problems::ControlProblem;
use crate::quadrature::{gauss_hermite, GaussHermiteRule};

/// Piecewise-constant control: piece `n` holds on `[n dt, (n+1) dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTrajectory {
    horizon: f64,
    dim: usize,
    values: Vec<f64>,
}

impl ControlTrajectory {
    pub fn new(horizon: f64, dim: usize, values: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        if dim == 0 || values.is_empty() || values.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} control values do not form pieces of dimension {dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow {
                context: "control values".into(),
            });
        }
        Ok(Self { horizon, dim, values })
    }

    pub fn constant(horizon: f64, pieces: usize, value: &[f64]) -> Result<Self> {
        Self::new(horizon, value.len(), value.repeat(pieces))
    }

    pub fn zeros(horizon: f64, pieces: usize, dim: usize) -> Result<Self> {
        Self::new(horizon, dim, vec![0.0; pieces * dim])
    }

    /// Samples `f(t_n)` at the left endpoint of each piece.
    pub fn from_fn(horizon: f64, pieces: usize, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Result<Self> {
        if pieces == 0 {
            return Err(Error::InvalidArgument("control needs at least one piece".into()));
        }
        let dt = horizon / pieces as f64;
        let mut values = vec![0.0; pieces * dim];
        for (n, chunk) in values.chunks_exact_mut(dim.max(1)).enumerate() {
            f(n as f64 * dt, chunk);
        }
        Self::new(horizon, dim, values)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.pieces() as f64
    }

    /// Left endpoint `t_n`.
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn piece(&self, n: usize) -> &[f64] {
        &self.values[n * self.dim..(n + 1) * self.dim]
    }

    pub fn piece_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.values[n * self.dim..(n + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            horizon: self.horizon,
            dim: self.dim,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    /// Discrete `L^2[0,T]` distance `sqrt(dt sum |a_n - b_n|^2)`.
    pub fn l2_distance(&self, other: &Self) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (self.dt() * s).sqrt()
    }
}

/// Convex control set.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionSpec {
    Unconstrained,
    Box { low: Vec<f64>, high: Vec<f64> },
}

impl ProjectionSpec {
    pub fn bounds(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.len() != high.len() {
            return Err(Error::DimensionMismatch {
                expected: low.len(),
                got: high.len(),
            });
        }
        if low.iter().zip(&high).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidArgument("box bounds need low <= high".into()));
        }
        Ok(ProjectionSpec::Box { low, high })
    }
}

/// Componentwise clamp onto the box; identity when unconstrained.
pub fn project(control: &ControlTrajectory, spec: &ProjectionSpec) -> ControlTrajectory {
    match spec {
        ProjectionSpec::Unconstrained => control.clone(),
        ProjectionSpec::Box { low, high } => {
            let mut out = control.clone();
            for n in 0..out.pieces() {
                for (a, v) in out.piece_mut(n).iter_mut().enumerate() {
                    *v = v.clamp(low[a], high[a]);
                }
            }
            out
        }
    }
}

/// Spatial point rule over the estimated domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudRule {
    Halton { count: usize },
    Tensor { per_dim: usize },
}

impl CloudRule {
    pub fn build(&self, domain: &DomainBox) -> Result<PointCloud> {
        match *self {
            CloudRule::Halton { count } => halton_cloud(count, domain),
            CloudRule::Tensor { per_dim } => tensor_grid(per_dim, domain),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub step_size: f64,
    /// Halvings of the step allowed per iteration on cost increase.
    pub max_halvings: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub samples: usize,
    pub seed: u64,
    pub interp: InterpConfig,
    pub quadrature_order: usize,
    pub cloud: CloudRule,
    /// Paths used to estimate the spatial domain.
    pub pilot_paths: usize,
    /// Fraction of the pilot width added on each side of the box.
    pub box_expansion: f64,
    /// Draw a fresh Monte Carlo ensemble every iteration.
    pub resample: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            step_size: 0.5,
            max_halvings: 10,
            tolerance: 1e-3,
            max_iterations: 100,
            samples: 50_000,
            seed: 0,
            interp: InterpConfig::mls(),
            quadrature_order: 4,
            cloud: CloudRule::Halton { count: 441 },
            pilot_paths: 2000,
            box_expansion: 0.2,
            resample: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidArgument("step size must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if self.samples == 0 || self.pilot_paths == 0 {
            return Err(Error::InvalidArgument("sample counts must be at least 1".into()));
        }
        if !(self.box_expansion >= 0.0) {
            return Err(Error::InvalidArgument("box expansion must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Forward Euler-Maruyama paths, `samples x (N+1) x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    samples: usize,
    levels: usize,
    d: usize,
    states: Vec<f64>,
}

impl PathEnsemble {
    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn state(&self, sample: usize, n: usize) -> &[f64] {
        let start = (sample * (self.levels + 1) + n) * self.d;
        &self.states[start..start + self.d]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    /// Per-coordinate `[min, max]` over all samples and levels.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.d];
        let mut hi = vec![f64::NEG_INFINITY; self.d];
        for x in self.states.chunks_exact(self.d) {
            for i in 0..self.d {
                lo[i] = lo[i].min(x[i]);
                hi[i] = hi[i].max(x[i]);
            }
        }
        (lo, hi)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one sample's private stream; independent of evaluation order.
fn substream(seed: u64, stream: u64, sample: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ sample)
}

/// Euler-Maruyama paths from `x0` under the piecewise-constant control.
pub fn simulate_paths(
    problem: &dyn ControlProblem,
    control: &ControlTrajectory,
    samples: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    simulate_paths_stream(problem, control, samples, seed, 0)
}

/// As [`simulate_paths`], drawing from substream `stream` of `seed`.
pub fn simulate_paths_stream(
    problem: &dyn ControlProblem,
    control: &ControlTrajectory,
    samples: usize,
    seed: u64,
    stream: u64,
) -> Result<PathEnsemble> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let d = problem.state_dim();
    let m = problem.noise_dim();
    let levels = control.pieces();
    let dt = control.dt();
    let models: Vec<OneStepModel> = (0..levels)
        .map(|n| OneStepModel::new(problem, control.piece(n), dt))
        .collect::<Result<_>>()?;
    let mut states = vec![0.0; samples * (levels + 1) * d];
    let mut xi = vec![0.0; m];
    for s in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, stream, s as u64));
        let base = s * (levels + 1) * d;
        states[base..base + d].copy_from_slice(problem.x0());
        for (n, model) in models.iter().enumerate() {
            for z in xi.iter_mut() {
                *z = StandardNormal.sample(&mut rng);
            }
            let (head, tail) = states[base + n * d..].split_at_mut(d);
            let step = model.freeze(head)?;
            if !step.propose(&xi, &mut tail[..d]) {
                return Err(Error::NumericOverflow {
                    context: format!("path sample {s} at level {}", n + 1),
                });
            }
        }
    }
    Ok(PathEnsemble {
        samples,
        levels,
        d,
        states,
    })
}

/// Left-point running cost plus terminal cost, averaged over paths.
pub fn cost_estimate(problem: &dyn ControlProblem, control: &ControlTrajectory, paths: &PathEnsemble) -> f64 {
    let dt = control.dt();
    let mut total = 0.0;
    for s in 0..paths.samples() {
        let mut c = 0.0;
        for n in 0..control.pieces() {
            c += dt * problem.running_cost(control.time(n), paths.state(s, n), control.piece(n));
        }
        c += problem.terminal_cost(paths.state(s, control.pieces()));
        total += c;
    }
    total / paths.samples() as f64
}

/// Gradient `g_1..g_N` of the discrete cost.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTrajectory {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl GradientTrajectory {
    pub fn piece(&self, n: usize) -> &[f64] {
        &self.values[n * self.dim..(n + 1) * self.dim]
    }

    /// `sqrt(dt sum |g_n|^2)`.
    pub fn l2_norm(&self, dt: f64) -> f64 {
        (dt * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
}

/// `g_n = mean_s [p_n(X_n)^T D_u b + tr(q_n(X_n)^T D_u sigma) + D_u j]`.
pub fn gradient(
    problem: &dyn ControlProblem,
    control: &ControlTrajectory,
    grid: &AdjointGrid,
    paths: &PathEnsemble,
) -> Result<GradientTrajectory> {
    let d = problem.state_dim();
    let m = problem.noise_dim();
    let d1 = problem.control_dim();
    let levels = control.pieces();
    if grid.levels() != levels || paths.levels() != levels {
        return Err(Error::DimensionMismatch {
            expected: levels,
            got: if grid.levels() != levels { grid.levels() } else { paths.levels() },
        });
    }
    let with_q = problem.diffusion_depends_on_control();
    let mut values = vec![0.0; levels * d1];
    let mut p = vec![0.0; d];
    let mut q = vec![0.0; d * m];
    let mut bu = vec![0.0; d * d1];
    let mut su = vec![0.0; d1 * d * m];
    let mut ju = vec![0.0; d1];
    let mut acc = vec![0.0; d1];
    for n in 0..levels {
        let u = control.piece(n);
        let t = control.time(n);
        let p_field = grid.p_field(n);
        let q_field = grid.q_field(n);
        acc.fill(0.0);
        for s in 0..paths.samples() {
            let x = paths.state(s, n);
            p_field.eval(x, &mut p);
            problem.drift_du(x, u, &mut bu);
            problem.running_cost_du(t, x, u, &mut ju);
            for a in 0..d1 {
                let mut g = ju[a];
                for i in 0..d {
                    g += p[i] * bu[i * d1 + a];
                }
                acc[a] += g;
            }
            if with_q {
                q_field.eval(x, &mut q);
                problem.diffusion_du(x, u, &mut su);
                for a in 0..d1 {
                    let slab = &su[a * d * m..(a + 1) * d * m];
                    acc[a] += slab.iter().zip(&q).map(|(x, y)| x * y).sum::<f64>();
                }
            }
        }
        for a in 0..d1 {
            let g = acc[a] / paths.samples() as f64;
            if !g.is_finite() {
                return Err(Error::NumericOverflow {
                    context: format!("gradient at level {n}"),
                });
            }
            values[n * d1 + a] = g;
        }
    }
    Ok(GradientTrajectory { dim: d1, values })
}

/// Box enclosing `paths`, widened by `expansion` times the width per side.
pub fn expanded_box(paths: &PathEnsemble, expansion: f64) -> Result<DomainBox> {
    let (mut lo, mut hi) = paths.bounding_box();
    for i in 0..lo.len() {
        let width = hi[i] - lo[i];
        let pad = if width > 0.0 {
            expansion * width
        } else {
            expansion.max(0.1) * lo[i].abs().max(1.0)
        };
        lo[i] -= pad;
        hi[i] += pad;
    }
    DomainBox::new(lo, hi)
}

/// Cloud, interpolator and quadrature for one problem, fixed across
/// gradient iterations.
pub struct Solver<'a> {
    problem: &'a dyn ControlProblem,
    config: OptimizerConfig,
    rule: GaussHermiteRule,
    interpolator: Interpolator,
}

/// Stream index reserved for the pilot ensemble.
const PILOT_STREAM: u64 = u64::MAX;

impl<'a> Solver<'a> {
    /// Estimates the domain from pilot paths under `pilot_control` and
    /// prepares the interpolation machinery on it.
    pub fn new(problem: &'a dyn ControlProblem, config: OptimizerConfig, pilot_control: &ControlTrajectory) -> Result<Self> {
        config.validate()?;
        let pilot = simulate_paths_stream(problem, pilot_control, config.pilot_paths, config.seed, PILOT_STREAM)?;
        let domain = expanded_box(&pilot, config.box_expansion)?;
        Self::on_domain(problem, config, &domain)
    }

    /// Uses a caller-supplied domain instead of a pilot estimate.
    pub fn on_domain(problem: &'a dyn ControlProblem, config: OptimizerConfig, domain: &DomainBox) -> Result<Self> {
        config.validate()?;
        if domain.dim() != problem.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: problem.state_dim(),
                got: domain.dim(),
            });
        }
        let rule = gauss_hermite(config.quadrature_order)?;
        let cloud = config.cloud.build(domain)?;
        let cloud = match config.interp {
            InterpConfig::Mls { radius: None, .. } | InterpConfig::Shepard { radius: None } => {
                let probes = default_probe_count(cloud.dim());
                cloud.with_fill_distance(probes)?
            }
            _ => cloud,
        };
        let interpolator = Interpolator::new(&cloud, &config.interp)?;
        Ok(Self {
            problem,
            config,
            rule,
            interpolator,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn cloud(&self) -> &PointCloud {
        self.interpolator.cloud()
    }

    pub fn interpolator(&self) -> &Interpolator {
        &self.interpolator
    }

    pub fn paths(&self, control: &ControlTrajectory, stream: u64) -> Result<PathEnsemble> {
        simulate_paths_stream(self.problem, control, self.config.samples, self.config.seed, stream)
    }

    pub fn adjoint(&self, control: &ControlTrajectory) -> Result<AdjointGrid> {
        solve_bsde_with(self.problem, control, &self.interpolator, &self.rule)
    }

    /// Gradient at `control` using Monte Carlo stream `stream`.
    pub fn gradient_at(&self, control: &ControlTrajectory, stream: u64) -> Result<GradientTrajectory> {
        let grid = self.adjoint(control)?;
        let paths = self.paths(control, stream)?;
        gradient(self.problem, control, &grid, &paths)
    }

    /// Cost estimate at `control` using Monte Carlo stream `stream`.
    pub fn cost_at(&self, control: &ControlTrajectory, stream: u64) -> Result<f64> {
        Ok(cost_estimate(self.problem, control, &self.paths(control, stream)?))
    }

    /// Runs gradient projection from `initial`.
    pub fn run(&self, projection: &ProjectionSpec, initial: &ControlTrajectory) -> Result<SolveResult> {
        let cfg = &self.config;
        let mut u = initial.clone();
        let mut history = Vec::new();
        let mut converged = false;
        for iter in 0..cfg.max_iterations {
            let start = Instant::now();
            let stream = if cfg.resample { iter as u64 } else { 0 };
            let paths = self.paths(&u, stream)?;
            let grid = self.adjoint(&u)?;
            let g = gradient(self.problem, &u, &grid, &paths)?;
            let cost = cost_estimate(self.problem, &u, &paths);
            let step = |rho: f64| -> Result<ControlTrajectory> {
                let values = u.values().iter().zip(&g.values).map(|(a, b)| a - rho * b).collect();
                Ok(project(&ControlTrajectory::new(u.horizon(), u.dim(), values)?, projection))
            };
            let nominal = step(cfg.step_size)?;
            let residual = nominal.l2_distance(&u);
            let mut rho = cfg.step_size;
            let mut next = nominal.clone();
            let mut descended = false;
            for _ in 0..=cfg.max_halvings {
                if self.cost_at(&next, stream)? <= cost {
                    descended = true;
                    break;
                }
                rho *= 0.5;
                next = step(rho)?;
            }
            // no halving descended: fall back to the nominal step
            if !descended {
                rho = cfg.step_size;
                next = nominal;
            }
            let change = next.l2_distance(&u);
            history.push(IterationRecord {
                iter,
                cost,
                grad_norm: g.l2_norm(u.dt()),
                control_change: change,
                residual,
                step_size: rho,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
            u = next;
            if residual <= cfg.tolerance {
                converged = true;
                break;
            }
        }
        Ok(SolveResult {
            control: u,
            history,
            converged,
            cloud_size: self.cloud().len(),
            domain: self.cloud().domain().clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub control_change: f64,
    /// `||P(u - rho_0 g) - u||` at the nominal step size.
    pub residual: f64,
    pub step_size: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub control: ControlTrajectory,
    pub history: Vec<IterationRecord>,
    /// False when the iteration cap was hit before the tolerance.
    pub converged: bool,
    pub cloud_size: usize,
    pub domain: DomainBox,
}

/// Writes `iter,cost,grad_norm,control_change,wall_ms`.
pub fn write_diagnostics<W: Write>(history: &[IterationRecord], out: W) -> Result<()> {
    let mut w = CsvWriter::new(out, &["iter", "cost", "grad_norm", "control_change", "wall_ms"])?;
    for r in history {
        w.row(&[
            r.iter.to_string(),
            fmt_f64(r.cost),
            fmt_f64(r.grad_norm),
            fmt_f64(r.control_change),
            fmt_f64(r.wall_ms),
        ])?;
    }
    w.finish()?;
    Ok(())
}

/// Gradient projection: pilot domain from `initial`, then [`Solver::run`].
pub fn solve(
    problem: &dyn ControlProblem,
    config: &OptimizerConfig,
    projection: &ProjectionSpec,
    initial: &ControlTrajectory,
) -> Result<SolveResult> {
    Solver::new(problem, config.clone(), initial)?.run(projection, initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_benchmark, BenchmarkCase, Case};

    fn bench() -> crate::problems::BenchmarkProblem {
        make_benchmark(BenchmarkCase::new(Case::Case1, vec![0.1, 0.15], 0.5, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn projection_examples() {
        let c = ControlTrajectory::new(1.0, 1, vec![1.5, 0.5, -0.2]).unwrap();
        assert_eq!(project(&c, &ProjectionSpec::Unconstrained), c);
        let spec = ProjectionSpec::bounds(vec![0.0], vec![1.0]).unwrap();
        let p = project(&c, &spec);
        assert_eq!(p.values(), &[1.0, 0.5, 0.0]);
        assert_eq!(project(&p, &spec), p);
        assert!(ProjectionSpec::bounds(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn deterministic_paths() {
        let case = BenchmarkCase::new(Case::Case1, vec![0.0, 0.0], 0.5, 1.0).unwrap();
        let p = make_benchmark(case).unwrap();
        let u = ControlTrajectory::constant(1.0, 10, &[0.3]).unwrap();
        let paths = simulate_paths(&p, &u, 3, 1).unwrap();
        let expect = 0.5 * 1.03f64.powi(10);
        for s in 0..3 {
            assert!((paths.state(s, 10)[0] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn seeded_paths_are_bitwise_stable() {
        let p = bench();
        let u = ControlTrajectory::constant(1.0, 5, &[0.2]).unwrap();
        let a = simulate_paths(&p, &u, 50, 42).unwrap();
        let b = simulate_paths(&p, &u, 50, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_paths(&p, &u, 50, 43).unwrap();
        assert_ne!(a, c);
        // a prefix of a larger ensemble is the smaller ensemble
        let big = simulate_paths(&p, &u, 80, 42).unwrap();
        assert_eq!(&big.states()[..a.states().len()], a.states());
    }

    #[test]
    fn l2_distance_arithmetic() {
        let a = ControlTrajectory::constant(2.0, 4, &[1.0]).unwrap();
        let b = ControlTrajectory::constant(2.0, 4, &[0.5]).unwrap();
        assert!((a.l2_distance(&b) - 0.5 * 2f64.sqrt()).abs() < 1e-15);
    }
}
