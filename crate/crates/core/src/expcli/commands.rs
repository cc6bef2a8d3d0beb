//! The four experiment commands and their CSV / gnuplot artifacts.

use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::csvio::{fmt_f64, CsvWriter};
use crate::error::{Error, Result};
use crate::meshfree::{Interpolator, VectorField};
use crate::optimizer::{write_diagnostics, ControlTrajectory, IterationRecord, ProjectionSpec, Solver};
use crate::pointcloud::{default_probe_count, fill_distance, halton_cloud, tensor_grid, DomainBox, PointCloud};
use crate::problems::{l2_control_error, make_benchmark, max_control_error, BenchmarkCase};

use super::config::{ExperimentConfig, InterpBenchConfig, PointRule};

/// One finished benchmark solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub control: ControlTrajectory,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub points: usize,
    /// Fill distance of the spatial cloud.
    pub h: f64,
    /// Wall-clock of the solve itself, excluding I/O and reporting.
    pub wall_ms: f64,
}

fn cloud_fill_distance(cloud: &PointCloud) -> Result<f64> {
    match cloud.fill_distance() {
        Some(h) => Ok(h),
        None => fill_distance(cloud, default_probe_count(cloud.dim())),
    }
}

/// Solves the configured benchmark with `n` steps from `u = 0`.
pub fn solve_case(
    cfg: &ExperimentConfig,
    n: usize,
    backend: crate::meshfree::InterpConfig,
    points: PointRule,
) -> Result<SolveOutcome> {
    let problem = make_benchmark(cfg.case.clone())?;
    let opt = cfg.optimizer_for(n, backend, points)?;
    let initial = ControlTrajectory::zeros(cfg.case.horizon, n, 1)?;
    let start = Instant::now();
    let solver = Solver::new(&problem, opt, &initial)?;
    let result = solver.run(&ProjectionSpec::Unconstrained, &initial)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(SolveOutcome {
        control: result.control,
        history: result.history,
        converged: result.converged,
        points: result.cloud_size,
        h: cloud_fill_distance(solver.cloud())?,
        wall_ms,
    })
}

fn write_control_csv(path: &Path, control: &ControlTrajectory, case: Option<&BenchmarkCase>) -> Result<()> {
    let header: &[&str] = if case.is_some() {
        &["t", "u_num", "u_exact"]
    } else {
        &["t", "u_num"]
    };
    let mut w = CsvWriter::create(path, header)?;
    for n in 0..control.pieces() {
        let t = control.time(n);
        let mut row = vec![fmt_f64(t), fmt_f64(control.piece(n)[0])];
        if let Some(c) = case {
            row.push(fmt_f64(c.exact_control(t)?));
        }
        w.row(&row)?;
    }
    w.finish()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcome: SolveOutcome,
    pub l2_error: f64,
}

/// Single solve: `control.csv`, `iters.csv`, `control.gp`.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    fs::create_dir_all(out)?;
    let outcome = solve_case(cfg, cfg.n, cfg.backend, cfg.points)?;
    write_control_csv(&out.join("control.csv"), &outcome.control, Some(&cfg.case))?;
    write_diagnostics(&outcome.history, std::io::BufWriter::new(fs::File::create(out.join("iters.csv"))?))?;
    write_text(
        &out.join("control.gp"),
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\nset ylabel 'u'\n\
         plot 'control.csv' using 1:2 with points pt 7 lc rgb 'blue' title 'numerical', \\\n     \
         '' using 1:3 with lines lc rgb 'red' title 'exact'\n",
    )?;
    let l2_error = l2_control_error(&outcome.control, &cfg.case)?;
    Ok(RunReport { outcome, l2_error })
}

/// One row of `decay.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayRow {
    pub n: usize,
    pub dt: f64,
    pub h: f64,
    /// `None` when the solve failed.
    pub l2_error: Option<f64>,
    /// Observed order against the previous successful row.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeReport {
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of `log error` against `log dt`.
    pub slope: Option<f64>,
    pub failures: Vec<(usize, String)>,
}

/// Least-squares slope of `log y` against `log x` over positive pairs.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn opt_field(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Convergence study over `N_list`, solving each level with `solver`.
///
/// Writes `decay.csv` (`N,dt,h,l2_error,rate`), `decay_summary.txt` with the
/// fitted slope, and `decay.gp`. Failed levels are recorded and skipped.
pub fn cmd_converge<F>(cfg: &ExperimentConfig, out: &Path, mut solver: F) -> Result<ConvergeReport>
where
    F: FnMut(&ExperimentConfig, usize) -> Result<SolveOutcome>,
{
    if cfg.n_list.len() < 3 {
        return Err(Error::Config("N_list needs at least 3 values".into()));
    }
    if cfg.n_list.windows(2).any(|w| w[0] >= w[1]) || cfg.n_list[0] == 0 {
        return Err(Error::Config("N_list must be positive and increasing".into()));
    }
    fs::create_dir_all(out)?;
    let mut rows: Vec<DecayRow> = Vec::new();
    let mut failures = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for &n in &cfg.n_list {
        let dt = cfg.case.horizon / n as f64;
        match solver(cfg, n).and_then(|o| Ok((o.h, l2_control_error(&o.control, &cfg.case)?))) {
            Ok((h, err)) => {
                let rate = last.and_then(|(pdt, perr)| {
                    let r = (perr / err).ln() / (pdt / dt).ln();
                    (err > 0.0 && perr > 0.0 && r.is_finite()).then_some(r)
                });
                rows.push(DecayRow {
                    n,
                    dt,
                    h,
                    l2_error: Some(err),
                    rate,
                });
                last = Some((dt, err));
            }
            Err(e) => {
                failures.push((n, e.to_string()));
                rows.push(DecayRow {
                    n,
                    dt,
                    h: f64::NAN,
                    l2_error: None,
                    rate: None,
                });
            }
        }
    }
    let pairs: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.l2_error.map(|e| (r.dt, e)))
        .collect();
    let slope = loglog_slope(&pairs);

    let mut w = CsvWriter::create(&out.join("decay.csv"), &["N", "dt", "h", "l2_error", "rate"])?;
    for r in &rows {
        w.row(&[
            r.n.to_string(),
            fmt_f64(r.dt),
            fmt_f64(r.h),
            r.l2_error.map(fmt_f64).unwrap_or_else(|| "failed".into()),
            opt_field(r.rate),
        ])?;
    }
    w.finish()?;

    let mut summary = match slope {
        Some(s) => format!("slope {}\n", fmt_f64(s)),
        None => "slope undefined\n".to_string(),
    };
    if pairs.iter().any(|(_, e)| *e <= 0.0) {
        summary.push_str("flag: zero errors present; rates undefined\n");
    }
    for (n, msg) in &failures {
        summary.push_str(&format!("failed N={n}: {msg}\n"));
    }
    write_text(&out.join("decay_summary.txt"), &summary)?;
    write_text(
        &out.join("decay.gp"),
        "set datafile separator ','\nset logscale xy\nset xlabel 'dt'\nset ylabel 'L2 error'\n\
         plot 'decay.csv' using 2:4 with points pt 7 lc rgb 'blue' title 'error', \
         x with lines lc rgb 'red' title 'slope 1'\n",
    )?;
    Ok(ConvergeReport { rows, slope, failures })
}

/// Default solver for [`cmd_converge`]: the configured back-end and point rule.
pub fn default_converge_solver(cfg: &ExperimentConfig, n: usize) -> Result<SolveOutcome> {
    solve_case(cfg, n, cfg.backend, cfg.points)
}

#[derive(Debug, Clone)]
pub struct CompareRow {
    pub method: String,
    pub points: usize,
    pub l2_error: f64,
    pub max_error: f64,
    pub wall_ms: f64,
    pub outcome: SolveOutcome,
}

/// Runs both method blocks on the same case, `N` and seed; writes
/// `compare.csv` and one `control_<method>.csv` per block.
pub fn cmd_compare(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<CompareRow>> {
    if cfg.methods.len() != 2 {
        return Err(Error::Config(format!(
            "compare needs exactly two method blocks, found {}",
            cfg.methods.len()
        )));
    }
    fs::create_dir_all(out)?;
    let mut rows = Vec::new();
    for block in &cfg.methods {
        let outcome = solve_case(cfg, cfg.n, block.backend, block.points)?;
        write_control_csv(&out.join(format!("control_{}.csv", block.name)), &outcome.control, Some(&cfg.case))?;
        rows.push(CompareRow {
            method: block.name.clone(),
            points: outcome.points,
            l2_error: l2_control_error(&outcome.control, &cfg.case)?,
            max_error: max_control_error(&outcome.control, &cfg.case),
            wall_ms: outcome.wall_ms,
            outcome,
        });
    }
    let mut w = CsvWriter::create(&out.join("compare.csv"), &["method", "M", "l2_error", "max_error", "wall_ms"])?;
    for r in &rows {
        w.row(&[
            r.method.clone(),
            r.points.to_string(),
            fmt_f64(r.l2_error),
            fmt_f64(r.max_error),
            fmt_f64(r.wall_ms),
        ])?;
    }
    w.finish()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpRow {
    pub backend: String,
    pub points: usize,
    pub h: f64,
    pub max_err: f64,
    pub rate: Option<f64>,
}

/// Max error of one back-end on one cloud over a probe lattice.
pub fn interp_error(cfg: &InterpBenchConfig, cloud: &PointCloud, backend: &crate::meshfree::InterpConfig) -> Result<f64> {
    let values: Vec<f64> = cloud.iter().map(|x| cfg.function.eval(x)).collect();
    let f = Interpolator::new(cloud, backend)?.fit(&values, 1)?;
    let probes = tensor_grid(cfg.probes_per_dim, cloud.domain())?;
    let mut out = [0.0];
    let mut worst: f64 = 0.0;
    for x in probes.iter() {
        f.eval(x, &mut out);
        worst = worst.max((out[0] - cfg.function.eval(x)).abs());
    }
    Ok(worst)
}

/// Interpolation accuracy study on `[0,1]^dim`; writes `interp.csv` and
/// `interp.gp`.
pub fn cmd_interp_bench(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<InterpRow>> {
    let ib = &cfg.interp;
    if ib.counts.len() < 3 {
        return Err(Error::Config("interp.counts needs at least 3 refinement levels".into()));
    }
    fs::create_dir_all(out)?;
    let domain = DomainBox::cube(ib.dim, 0.0, 1.0)?;
    let mut rows = Vec::new();
    for backend in &ib.backends {
        let mut prev: Option<(f64, f64)> = None;
        for &count in &ib.counts {
            let cloud = match backend {
                crate::meshfree::InterpConfig::Multilinear => {
                    let k = ((count as f64).powf(1.0 / ib.dim as f64).round() as usize).max(2);
                    tensor_grid(k, &domain)?
                }
                _ => halton_cloud(count, &domain)?,
            };
            let cloud = cloud.with_fill_distance(default_probe_count(ib.dim))?;
            let h = cloud.fill_distance().unwrap_or(f64::NAN);
            let err = interp_error(ib, &cloud, backend)?;
            let rate = prev.and_then(|(ph, pe)| {
                let r = (pe / err).ln() / (ph / h).ln();
                (err > 0.0 && pe > 0.0 && r.is_finite()).then_some(r)
            });
            rows.push(InterpRow {
                backend: backend.name().to_string(),
                points: cloud.len(),
                h,
                max_err: err,
                rate,
            });
            prev = Some((h, err));
        }
    }
    let mut w = CsvWriter::create(&out.join("interp.csv"), &["backend", "h", "max_err", "rate"])?;
    for r in &rows {
        w.row(&[r.backend.clone(), fmt_f64(r.h), fmt_f64(r.max_err), opt_field(r.rate)])?;
    }
    w.finish()?;
    write_text(
        &out.join("interp.gp"),
        "set datafile separator ','\nset logscale xy\nset xlabel 'h'\nset ylabel 'max error'\n\
         plot 'interp.csv' using 2:3 with points pt 7 title 'max error'\n",
    )?;
    Ok(rows)
}
