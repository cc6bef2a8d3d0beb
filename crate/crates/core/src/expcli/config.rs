//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # Case 1 convergence study
//! case = 1
//! sigma = 0.1, 0.15
//! y0 = 0.5
//! horizon = 1.0
//! N_list = 9, 11, 13, 16, 19, 21
//! points = N^2
//! backend = mls
//! method.rbf.backend = rbf
//! method.rbf.points = 216
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::meshfree::{InterpConfig, RbfKernel};
use crate::optimizer::{CloudRule, OptimizerConfig};
use crate::problems::{BenchmarkCase, Case};

/// How many spatial points a solve uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointRule {
    /// `M = N^2`
    NSquared,
    /// Explicit `M`
    Count(usize),
    /// Tensor grid with this many points per axis
    Grid(usize),
}

impl PointRule {
    fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        match s {
            "N^2" | "N²" | "N2" | "n^2" => Some(PointRule::NSquared),
            _ => {
                if let Some(k) = s.strip_prefix("grid:") {
                    k.trim().parse().ok().filter(|k| *k >= 2).map(PointRule::Grid)
                } else {
                    s.parse().ok().filter(|m| *m >= 1).map(PointRule::Count)
                }
            }
        }
    }

    /// Point count for `n` time steps.
    pub fn count(&self, n: usize, dim: usize) -> usize {
        match *self {
            PointRule::NSquared => n * n,
            PointRule::Count(m) => m,
            PointRule::Grid(k) => k.pow(dim as u32),
        }
    }

    /// Concrete cloud rule; the multilinear back-end needs a tensor grid with
    /// `M` an exact `dim`-th power.
    pub fn resolve(&self, n: usize, dim: usize, backend: &InterpConfig) -> Result<CloudRule> {
        let needs_grid = matches!(backend, InterpConfig::Multilinear);
        match *self {
            PointRule::Grid(k) => Ok(CloudRule::Tensor { per_dim: k }),
            _ if needs_grid => {
                let m = self.count(n, dim);
                let k = (m as f64).powf(1.0 / dim as f64).round() as usize;
                if k < 2 || k.pow(dim as u32) != m {
                    return Err(Error::Config(format!(
                        "multilinear needs a tensor grid; {m} points is not a {dim}-th power"
                    )));
                }
                Ok(CloudRule::Tensor { per_dim: k })
            }
            _ => Ok(CloudRule::Halton {
                count: self.count(n, dim),
            }),
        }
    }
}

/// One named back-end block of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodBlock {
    pub name: String,
    pub backend: InterpConfig,
    pub points: PointRule,
}

/// Analytic test functions for the interpolation benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    /// `sin(x_1) cos(x_2)`; `sin(x_1)` in one dimension
    SinCos,
    /// `exp(-|x|^2)`
    Gaussian,
    Constant,
}

impl TestFunction {
    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "sincos" => Some(TestFunction::SinCos),
            "gaussian" => Some(TestFunction::Gaussian),
            "constant" => Some(TestFunction::Constant),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::SinCos => x[0].sin() * x.get(1).map_or(1.0, |y| y.cos()),
            TestFunction::Gaussian => (-x.iter().map(|v| v * v).sum::<f64>()).exp(),
            TestFunction::Constant => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpBenchConfig {
    pub function: TestFunction,
    pub dim: usize,
    /// Halton point counts, one per refinement level.
    pub counts: Vec<usize>,
    pub backends: Vec<InterpConfig>,
    /// Probe lattice points per axis.
    pub probes_per_dim: usize,
}

impl Default for InterpBenchConfig {
    fn default() -> Self {
        Self {
            function: TestFunction::SinCos,
            dim: 2,
            counts: vec![64, 256, 1024],
            backends: vec![InterpConfig::mls(), InterpConfig::rbf()],
            probes_per_dim: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub case: BenchmarkCase,
    pub n: usize,
    pub n_list: Vec<usize>,
    pub points: PointRule,
    pub backend: InterpConfig,
    pub optimizer: OptimizerConfig,
    pub methods: Vec<MethodBlock>,
    pub interp: InterpBenchConfig,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            case: BenchmarkCase {
                case: Case::Case1,
                sigmas: vec![0.1, 0.15],
                y0: 0.5,
                horizon: 1.0,
            },
            n: 21,
            n_list: vec![9, 11, 13, 16, 19, 21],
            points: PointRule::NSquared,
            backend: InterpConfig::mls(),
            optimizer: OptimizerConfig::default(),
            methods: Vec::new(),
            interp: InterpBenchConfig::default(),
            out: None,
        }
    }
}

fn bad(line: usize, key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}, field '{key}': {msg}"))
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| bad(line, key, format!("cannot parse '{}'", v.trim())))
}

fn parse_list<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(line, key, s))
        .collect()
}

#[derive(Default)]
struct BackendParams {
    name: Option<(usize, String)>,
    degree: Option<usize>,
    radius: Option<f64>,
    ridge: Option<f64>,
    kernel_power: Option<u32>,
    kernel_log: Option<bool>,
    kernel_order: Option<usize>,
}

impl BackendParams {
    fn set(&mut self, line: usize, key: &str, field: &str, v: &str) -> Result<bool> {
        match field {
            "backend" => self.name = Some((line, v.trim().to_string())),
            "mls.degree" => self.degree = Some(parse_num(line, key, v)?),
            "radius" => self.radius = Some(parse_num(line, key, v)?),
            "rbf.ridge" => self.ridge = Some(parse_num(line, key, v)?),
            "rbf.power" => self.kernel_power = Some(parse_num(line, key, v)?),
            "rbf.log" => self.kernel_log = Some(parse_num(line, key, v)?),
            "rbf.order" => self.kernel_order = Some(parse_num(line, key, v)?),
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn build(&self, dim: usize, default: InterpConfig) -> Result<InterpConfig> {
        let base = match &self.name {
            Some((line, name)) => {
                InterpConfig::from_name(name).map_err(|_| bad(*line, "backend", format!("unknown back-end '{name}'")))?
            }
            None => default,
        };
        Ok(match base {
            InterpConfig::Mls { degree, radius } => InterpConfig::Mls {
                degree: self.degree.unwrap_or(degree),
                radius: self.radius.or(radius),
            },
            InterpConfig::Shepard { radius } => InterpConfig::Shepard {
                radius: self.radius.or(radius),
            },
            InterpConfig::Rbf { kernel, ridge } => {
                let kernel = if self.kernel_power.is_some() || self.kernel_log.is_some() || self.kernel_order.is_some() {
                    let d = RbfKernel::default_for_dim(dim);
                    Some(
                        RbfKernel::polyharmonic(
                            self.kernel_power.unwrap_or(d.power()),
                            self.kernel_log.unwrap_or(d.is_log()),
                            self.kernel_order.unwrap_or(d.order()),
                        )
                        .map_err(|e| Error::Config(format!("rbf kernel: {e}")))?,
                    )
                } else {
                    kernel
                };
                InterpConfig::Rbf {
                    kernel,
                    ridge: self.ridge.or(ridge),
                }
            }
            InterpConfig::Multilinear => InterpConfig::Multilinear,
        })
    }
}

impl ExperimentConfig {
    /// Parses the flat config text; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut case_tag = None;
        let mut backend = BackendParams::default();
        let mut methods: BTreeMap<String, (BackendParams, Option<PointRule>, usize)> = BTreeMap::new();
        let mut interp_backends: Option<(usize, String)> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line}: expected 'key = value'")))?;
            let key = key.trim();
            let value = value.trim();

            if let Some(rest) = key.strip_prefix("method.") {
                let (name, field) = rest
                    .split_once('.')
                    .ok_or_else(|| bad(line, key, "expected method.<name>.<field>"))?;
                let order = methods.len();
                let entry = methods
                    .entry(name.to_string())
                    .or_insert_with(|| (BackendParams::default(), None, order));
                if field == "points" {
                    entry.1 = Some(PointRule::parse(value).ok_or_else(|| bad(line, key, "bad point rule"))?);
                } else if !entry.0.set(line, key, field, value)? {
                    return Err(bad(line, key, "unknown method field"));
                }
                continue;
            }
            if backend.set(line, key, key, value)? {
                continue;
            }
            let opt = &mut cfg.optimizer;
            match key {
                "command" => {}
                "case" => {
                    case_tag = Some(match value {
                        "1" | "case1" => Case::Case1,
                        "2" | "case2" => Case::Case2,
                        _ => return Err(bad(line, key, "expected 1 or 2")),
                    })
                }
                "sigma" => cfg.case.sigmas = parse_list(line, key, value)?,
                "d" | "dim" => {
                    let d: usize = parse_num(line, key, value)?;
                    if d == 0 {
                        return Err(bad(line, key, "dimension must be positive"));
                    }
                    let s = cfg.case.sigmas.first().copied().unwrap_or(0.1);
                    cfg.case.sigmas.resize(d, s);
                }
                "y0" => cfg.case.y0 = parse_num(line, key, value)?,
                "horizon" | "T" => cfg.case.horizon = parse_num(line, key, value)?,
                "N" => cfg.n = parse_num(line, key, value)?,
                "N_list" => cfg.n_list = parse_list(line, key, value)?,
                "points" => cfg.points = PointRule::parse(value).ok_or_else(|| bad(line, key, "bad point rule"))?,
                "quadrature_L" | "L" => opt.quadrature_order = parse_num(line, key, value)?,
                "samples" => opt.samples = parse_num(line, key, value)?,
                "seed" => opt.seed = parse_num(line, key, value)?,
                "tolerance" => opt.tolerance = parse_num(line, key, value)?,
                "step_size" => opt.step_size = parse_num(line, key, value)?,
                "max_halvings" => opt.max_halvings = parse_num(line, key, value)?,
                "max_iters" => opt.max_iterations = parse_num(line, key, value)?,
                "pilot_paths" => opt.pilot_paths = parse_num(line, key, value)?,
                "box_expansion" => opt.box_expansion = parse_num(line, key, value)?,
                "resample" => opt.resample = parse_num(line, key, value)?,
                "out" => cfg.out = Some(PathBuf::from(value)),
                "interp.function" => {
                    cfg.interp.function = TestFunction::parse(value).ok_or_else(|| bad(line, key, "unknown test function"))?
                }
                "interp.dim" => cfg.interp.dim = parse_num(line, key, value)?,
                "interp.counts" => cfg.interp.counts = parse_list(line, key, value)?,
                "interp.probes" => cfg.interp.probes_per_dim = parse_num(line, key, value)?,
                "interp.backends" => interp_backends = Some((line, value.to_string())),
                _ => return Err(bad(line, key, "unknown key")),
            }
        }

        if let Some(c) = case_tag {
            cfg.case.case = c;
        }
        cfg.case
            .validate()
            .map_err(|e| Error::Config(format!("benchmark case: {e}")))?;
        let dim = cfg.case.dim();
        cfg.backend = backend.build(dim, InterpConfig::mls())?;
        let mut blocks: Vec<_> = methods.into_iter().collect();
        blocks.sort_by_key(|(_, (_, _, order))| *order);
        for (name, (params, points, _)) in blocks {
            cfg.methods.push(MethodBlock {
                backend: params.build(dim, cfg.backend)?,
                points: points.unwrap_or(cfg.points),
                name,
            });
        }
        if let Some((line, list)) = interp_backends {
            cfg.interp.backends = list
                .split(',')
                .map(|s| InterpConfig::from_name(s).map_err(|e| bad(line, "interp.backends", e)))
                .collect::<Result<_>>()?;
        }
        cfg.optimizer.interp = cfg.backend;
        cfg.optimizer
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if cfg.n == 0 {
            return Err(Error::Config("N must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Optimizer settings for one solve with `n` steps and the given back-end.
    pub fn optimizer_for(&self, n: usize, backend: InterpConfig, points: PointRule) -> Result<OptimizerConfig> {
        Ok(OptimizerConfig {
            interp: backend,
            cloud: points.resolve(n, self.case.dim(), &backend)?,
            ..self.optimizer.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = "\
# comment
case = 2
sigma = 0.1, 0.15, 0.2
y0 = 0.5
N = 21
N_list = 11,16,21
points = 216
backend = rbf
rbf.ridge = 0
samples = 1000
seed = 9
method.a.backend = rbf
method.a.points = 216
method.b.backend = multilinear
method.b.points = grid:9
";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.case.case, Case::Case2);
        assert_eq!(c.case.dim(), 3);
        assert_eq!(c.n_list, vec![11, 16, 21]);
        assert_eq!(c.points, PointRule::Count(216));
        assert_eq!(c.backend, InterpConfig::Rbf { kernel: None, ridge: Some(0.0) });
        assert_eq!(c.optimizer.samples, 1000);
        assert_eq!(c.methods.len(), 2);
        assert_eq!(c.methods[0].name, "a");
        assert_eq!(c.methods[1].backend, InterpConfig::Multilinear);
        assert_eq!(
            c.methods[1].points.resolve(21, 3, &InterpConfig::Multilinear).unwrap(),
            CloudRule::Tensor { per_dim: 9 }
        );
    }

    #[test]
    fn errors_name_line_and_field() {
        let err = ExperimentConfig::parse("case = 1\nsamples = many\n").unwrap_err();
        match err {
            Error::Config(msg) => {
                assert!(msg.contains("line 2"));
                assert!(msg.contains("samples"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(ExperimentConfig::parse("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("no equals sign"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("y0 = 3"), Err(Error::Config(_))));
    }

    #[test]
    fn point_rules() {
        assert_eq!(PointRule::parse("N^2"), Some(PointRule::NSquared));
        assert_eq!(PointRule::NSquared.count(11, 2), 121);
        assert_eq!(
            PointRule::NSquared.resolve(11, 2, &InterpConfig::Multilinear).unwrap(),
            CloudRule::Tensor { per_dim: 11 }
        );
        assert!(PointRule::Count(200).resolve(11, 2, &InterpConfig::Multilinear).is_err());
    }
}
