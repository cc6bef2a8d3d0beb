//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line to the real stdout (not captured by the harness).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use meshctrl::bsde::{backward_step, FnDriver, StepContext};
use meshctrl::condexp::{OneStepModel, StepExpectation};
use meshctrl::expcli::{
    cmd_compare, cmd_converge, default_converge_solver, interp_error, ExperimentConfig, InterpBenchConfig,
};
use meshctrl::meshfree::{InterpConfig, Interpolator, VectorField};
use meshctrl::optimizer::{CloudRule, ControlTrajectory, OptimizerConfig, Solver};
use meshctrl::pointcloud::{halton_cloud, DomainBox};
use meshctrl::problems::{make_benchmark, BenchmarkCase, Case};
use meshctrl::quadrature::gauss_hermite;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: u32, pass: bool, detail: String) {
    let line = format!("criterion {criterion}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Long criteria run one at a time so wall-clock measurements are not
/// distorted by concurrent tests.
fn heavy() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_file(&repo_root().join("configs").join(name)).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("meshctrl-acceptance-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn case1_d2() -> BenchmarkCase {
    BenchmarkCase::new(Case::Case1, vec![0.1, 0.15], 0.5, 1.0).unwrap()
}

#[test]
fn criterion_01_quadrature_exactness() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for order in 1..=10 {
        let rule = gauss_hermite(order).unwrap();
        let mut even_moment = 1.0;
        for p in 0..=(2 * order - 1) {
            let exact = if p % 2 == 1 {
                0.0
            } else {
                if p >= 2 {
                    even_moment *= (p - 1) as f64;
                }
                even_moment
            };
            let q = rule.integrate(|x| x.powi(p as i32));
            // relative for large even moments, absolute otherwise
            worst = worst.max((q - exact).abs() / exact.max(1.0));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(1, worst <= 1e-10 && secs < 1.0, format!("max rel error {worst:.2e}, {secs:.3} s"));
}

#[test]
fn criterion_02_interpolation_orders() {
    let start = Instant::now();
    let cfg = InterpBenchConfig::default();
    let unit = DomainBox::cube(2, 0.0, 1.0).unwrap();
    let mut detail = Vec::new();
    let mut pass = true;
    for backend in [InterpConfig::mls(), InterpConfig::rbf()] {
        let mut pts = Vec::new();
        for m in [64, 256, 1024] {
            let cloud = halton_cloud(m, &unit).unwrap().with_fill_distance(20_000).unwrap();
            let h = cloud.fill_distance().unwrap();
            pts.push((h, interp_error(&cfg, &cloud, &backend).unwrap()));
        }
        let orders: Vec<f64> = pts
            .windows(2)
            .map(|w| (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln())
            .collect();
        let observed = (pts[2].1 / pts[0].1).ln() / (pts[2].0 / pts[0].0).ln();
        pass &= observed >= 1.7;
        detail.push(format!("{} order {observed:.2} (pairwise {:.2}, {:.2})", backend.name(), orders[0], orders[1]));
    }
    let secs = start.elapsed().as_secs_f64();
    report(2, pass && secs < 30.0, format!("{}, {secs:.1} s", detail.join("; ")));
}

#[test]
fn criterion_03_shepard_expectation_properties() {
    let start = Instant::now();
    let unit = DomainBox::cube(2, 0.0, 1.0).unwrap();
    let cloud = halton_cloud(100, &unit).unwrap();
    let interp = Interpolator::new(&cloud, &InterpConfig::shepard()).unwrap();
    let problem = make_benchmark(case1_d2()).unwrap();
    let model = OneStepModel::new(&problem, &[0.3], 0.05).unwrap();
    let se = StepExpectation::new(&gauss_hermite(4).unwrap(), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    for _ in 0..200 {
        let phi: Vec<f64> = (0..cloud.len()).map(|_| rng.gen_range(0.0..5.0)).collect();
        let bump: Vec<f64> = phi.iter().map(|v| v + rng.gen_range(0.0..1.0)).collect();
        let sq: Vec<f64> = phi.iter().map(|v| v * v).collect();
        let (f, g, f2) = (
            interp.fit(&phi, 1).unwrap(),
            interp.fit(&bump, 1).unwrap(),
            interp.fit(&sq, 1).unwrap(),
        );
        for _ in 0..10 {
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let e = se.eval(&f, &model, &x, None, false).unwrap().mean[0];
            let eg = se.eval(&g, &model, &x, None, false).unwrap().mean[0];
            let e2 = se.eval(&f2, &model, &x, None, false).unwrap().mean[0];
            let tol = 1e-14 * (1.0 + e2);
            if e < 0.0 || eg + tol < e || e * e > e2 + tol {
                violations += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(3, violations == 0 && secs < 10.0, format!("{violations} violations in 2000 queries, {secs:.2} s"));
}

#[test]
fn criterion_04_zero_driver() {
    let start = Instant::now();
    let problem = make_benchmark(case1_d2()).unwrap();
    let cloud = halton_cloud(200, &DomainBox::cube(2, 0.0, 1.5).unwrap()).unwrap();
    let interp = Interpolator::new(&cloud, &InterpConfig::shepard()).unwrap();
    let se = StepExpectation::new(&gauss_hermite(4).unwrap(), 2).unwrap();
    let zero = FnDriver(|_t: f64, _x: &[f64], _p: &[f64], _q: &[f64], _u: &[f64], out: &mut [f64]| out.fill(0.0));
    let c = [0.7, -1.3];
    let n_levels = 20;
    let dt = 1.0 / n_levels as f64;
    let u = case1_d2().exact_trajectory(n_levels).unwrap();
    let mut values: Vec<f64> = (0..cloud.len()).flat_map(|_| c).collect();
    let mut worst = 0.0f64;
    for n in (0..n_levels).rev() {
        let next = interp.fit(&values, 2).unwrap();
        let ctx = StepContext {
            cloud: &cloud,
            driver: &zero,
            model: OneStepModel::new(&problem, u.piece(n), dt).unwrap(),
            quadrature: &se,
            t: n as f64 * dt,
        };
        let level = backward_step(&next, &ctx).unwrap();
        for k in 0..cloud.len() {
            for i in 0..2 {
                worst = worst.max((level.p[k * 2 + i] - c[i]).abs());
            }
        }
        worst = worst.max(level.q.iter().fold(0.0, |m, v| m.max(v.abs())));
        values = level.p;
    }
    let secs = start.elapsed().as_secs_f64();
    report(4, worst <= 1e-12 && secs < 10.0, format!("max deviation {worst:.2e}, {secs:.2} s"));
}

#[test]
fn criterion_05_gradient_matches_finite_differences() {
    let _guard = heavy();
    let start = Instant::now();
    let problem = make_benchmark(case1_d2()).unwrap();
    let n_levels = 11;
    let config = OptimizerConfig {
        samples: 50_000,
        cloud: CloudRule::Halton { count: n_levels * n_levels },
        seed: 2,
        resample: false,
        ..OptimizerConfig::default()
    };
    let u = ControlTrajectory::zeros(1.0, n_levels, 1).unwrap();
    let solver = Solver::new(&problem, config, &u).unwrap();
    let g = solver.gradient_at(&u, 0).unwrap();
    let grid = solver.adjoint(&u).unwrap();
    let paths = solver.paths(&u, 0).unwrap();
    let mut p = [0.0; 2];
    let delta = 1e-4;
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for n in [1, 3, 5, 7, 9] {
        let mut plus = u.clone();
        plus.piece_mut(n)[0] += delta;
        let mut minus = u.clone();
        minus.piece_mut(n)[0] -= delta;
        let fd = (solver.cost_at(&plus, 0).unwrap() - solver.cost_at(&minus, 0).unwrap()) / (2.0 * delta);
        let analytic = u.dt() * g.piece(n)[0];
        let rel = (analytic - fd).abs() / fd.abs();
        worst = worst.max(rel);
        // same adjoint, read one level later along the path
        let mut acc = 0.0;
        for s in 0..paths.samples() {
            grid.p_field(n + 1).eval(paths.state(s, n + 1), &mut p);
            let x = paths.state(s, n);
            acc += p[0] * x[0] + p[1] * x[1];
        }
        let shifted = u.dt() * acc / paths.samples() as f64;
        let rel_shifted = (shifted - fd).abs() / fd.abs();
        detail.push(format!("n={n} fd={fd:.4e} g={analytic:.4e} rel={rel:.3} (p_(n+1) form rel={rel_shifted:.1e})"));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        5,
        worst <= 0.05 && secs < 300.0,
        format!("max rel error {worst:.3} [{}], {secs:.1} s", detail.join("; ")),
    );
}

struct DecayRun {
    slopes: Vec<(String, Option<f64>)>,
    tables: Vec<Vec<u8>>,
    secs: f64,
}

fn converge_case1(tag: &str) -> DecayRun {
    let start = Instant::now();
    let mut slopes = Vec::new();
    let mut tables = Vec::new();
    for backend in ["mls", "rbf"] {
        let mut cfg = load("converge_case1.conf");
        cfg.backend = InterpConfig::from_name(backend).unwrap();
        let out = scratch(&format!("{tag}-{backend}"));
        let r = cmd_converge(&cfg, &out, default_converge_solver).unwrap();
        slopes.push((backend.to_string(), r.slope));
        tables.push(std::fs::read(out.join("decay.csv")).unwrap());
    }
    DecayRun {
        slopes,
        tables,
        secs: start.elapsed().as_secs_f64(),
    }
}

fn case1_decay() -> &'static DecayRun {
    static RUN: OnceLock<DecayRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let _guard = heavy();
        converge_case1("c6")
    })
}

fn fmt_slopes(slopes: &[(String, Option<f64>)]) -> String {
    slopes
        .iter()
        .map(|(b, s)| match s {
            Some(s) => format!("{b} slope {s:.3}"),
            None => format!("{b} slope undefined"),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

#[test]
fn criterion_06_case1_convergence() {
    let run = case1_decay();
    let s: Vec<f64> = run.slopes.iter().map(|(_, s)| s.unwrap_or(f64::NAN)).collect();
    let pass = s.iter().any(|v| *v >= 1.0) && s.iter().all(|v| *v >= 0.8);
    report(6, pass, format!("{}, {:.0} s", fmt_slopes(&run.slopes), run.secs));
}

#[test]
fn criterion_07_case2_convergence() {
    let _guard = heavy();
    let start = Instant::now();
    let mut slopes = Vec::new();
    for backend in ["mls", "rbf"] {
        let mut cfg = load("converge_case2.conf");
        cfg.backend = InterpConfig::from_name(backend).unwrap();
        let r = cmd_converge(&cfg, &scratch(&format!("c7-{backend}")), default_converge_solver).unwrap();
        slopes.push((backend.to_string(), r.slope));
    }
    let pass = slopes
        .iter()
        .all(|(_, s)| s.is_some_and(|v| (0.8..=1.4).contains(&v)));
    report(7, pass, format!("{}, {:.0} s", fmt_slopes(&slopes), start.elapsed().as_secs_f64()));
}

#[test]
fn criterion_08_d3_rbf_vs_multilinear() {
    let _guard = heavy();
    let cfg = load("compare_d3.conf");
    let rows = cmd_compare(&cfg, &scratch("c8")).unwrap();
    let rbf = rows.iter().find(|r| r.method == "rbf").unwrap();
    let tri = rows.iter().find(|r| r.method == "trilinear").unwrap();
    let ratio = rbf.wall_ms / tri.wall_ms;
    let pass = ratio <= 0.5 && rbf.max_error <= tri.max_error;
    report(
        8,
        pass,
        format!(
            "time ratio {ratio:.3} (rbf {:.0} ms, M={}; multilinear {:.0} ms, M={}), max error rbf {:.3e} vs multilinear {:.3e}",
            rbf.wall_ms, rbf.points, tri.wall_ms, tri.points, rbf.max_error, tri.max_error
        ),
    );
}

#[test]
fn criterion_09_optimality_residual() {
    let _guard = heavy();
    let start = Instant::now();
    let case = case1_d2();
    let problem = make_benchmark(case.clone()).unwrap();
    let norms: Vec<f64> = [11, 22]
        .iter()
        .map(|&n| {
            let u = case.exact_trajectory(n).unwrap();
            let config = OptimizerConfig {
                samples: 50_000,
                cloud: CloudRule::Halton { count: n * n },
                seed: 4,
                ..OptimizerConfig::default()
            };
            let solver = Solver::new(&problem, config, &u).unwrap();
            solver.gradient_at(&u, 0).unwrap().l2_norm(u.dt())
        })
        .collect();
    let factor = norms[0] / norms[1];
    let secs = start.elapsed().as_secs_f64();
    report(
        9,
        factor >= 1.5 && secs < 600.0,
        format!("|J'(u*)| {:.4e} (N=11) -> {:.4e} (N=22), factor {factor:.2}, {secs:.1} s", norms[0], norms[1]),
    );
}

#[test]
fn criterion_10_determinism() {
    let first = case1_decay();
    let second = {
        let _guard = heavy();
        converge_case1("c10")
    };
    let identical = first.tables == second.tables;
    report(10, identical, format!("decay.csv bitwise identical across reruns: {identical}"));
}
