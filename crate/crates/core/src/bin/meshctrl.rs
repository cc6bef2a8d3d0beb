use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use meshctrl::expcli::{
    cmd_compare, cmd_converge, cmd_interp_bench, cmd_run, default_converge_solver, exit_code, ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "meshctrl", version, about = "Meshfree stochastic optimal control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Single solve: control.csv and iters.csv
    Run(Common),
    /// Error decay over N_list: decay.csv
    Converge(Common),
    /// Two back-ends side by side: compare.csv
    Compare(Common),
    /// Interpolation accuracy study: interp.csv
    InterpBench(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, which) = match &cli.command {
        Command::Run(c) => (c, "run"),
        Command::Converge(c) => (c, "converge"),
        Command::Compare(c) => (c, "compare"),
        Command::InterpBench(c) => (c, "interp-bench"),
    };
    let result = ExperimentConfig::from_file(&common.config).and_then(|mut cfg| {
        if let Some(seed) = common.seed {
            cfg.optimizer.seed = seed;
        }
        let out = common
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        match which {
            "run" => cmd_run(&cfg, &out).map(|r| {
                println!("L2 error {:.6e} ({} iterations)", r.l2_error, r.outcome.history.len())
            }),
            "converge" => cmd_converge(&cfg, &out, default_converge_solver).map(|r| match r.slope {
                Some(s) => println!("fitted slope {s:.4}"),
                None => println!("fitted slope undefined"),
            }),
            "compare" => cmd_compare(&cfg, &out).map(|rows| {
                for r in rows {
                    println!("{:<12} M={:<5} L2 {:.4e} max {:.4e} {:.0} ms", r.method, r.points, r.l2_error, r.max_error, r.wall_ms);
                }
            }),
            _ => cmd_interp_bench(&cfg, &out).map(|rows| {
                for r in rows {
                    println!("{:<12} h={:.4e} err={:.4e}", r.backend, r.h, r.max_err);
                }
            }),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("meshctrl: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
