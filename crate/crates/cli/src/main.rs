use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use wetres::config::ExperimentConfig;
use wetres::experiment;
use wetres::Error;

/// Hybrid artificial-cell / bacterial reservoir: simulate, train readouts, plot.
#[derive(Parser)]
#[command(name = "wetres", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the reservoir and write the state trajectory.
    Simulate(SimArgs),
    /// Sweep horizons H and delay depths k over a trajectory.
    Evaluate(EvalArgs),
    /// Memory curve R²(d) and capacity of a trajectory.
    Memory(MemoryArgs),
    /// Render SVG charts from the result tables in --out-dir.
    Plot(PlotArgs),
    /// simulate, evaluate, memory and plot in one go.
    Sweep(SimArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the config's `out_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Trajectory CSV written by `simulate`.
    #[arg(long)]
    trajectory: PathBuf,
    /// Comma-separated horizons, e.g. 1,2,5.
    #[arg(long, value_delimiter = ',')]
    h_list: Option<Vec<usize>>,
    /// Comma-separated delay depths, e.g. 0,1,3.
    #[arg(long, value_delimiter = ',')]
    k_list: Option<Vec<usize>>,
}

#[derive(Args)]
struct MemoryArgs {
    #[command(flatten)]
    common: Common,
    /// Trajectory CSV written by `simulate`.
    #[arg(long)]
    trajectory: PathBuf,
    /// Largest delay d; defaults to the config's readout.d_max.
    #[arg(long)]
    d_max: Option<usize>,
}

#[derive(Args)]
struct PlotArgs {
    /// Directory holding the CSV tables; SVGs are written next to them.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain { .. } | Error::Json(_) => 2,
        Error::Extinct { .. } => 3,
        Error::InsufficientData(_) | Error::Metric(_) => 4,
        Error::Schema(_) => 5,
        Error::Io(_) => 1,
    }
}

fn load(common: &Common) -> wetres::Result<(ExperimentConfig, PathBuf)> {
    let cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let out = common.out_dir.clone().unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    Ok((cfg, out))
}

fn with_seed(args: &SimArgs) -> wetres::Result<(ExperimentConfig, PathBuf)> {
    let (mut cfg, out) = load(&args.common)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok((cfg, out))
}

fn show(path: &Path) -> String {
    path.display().to_string()
}

fn run(cli: Cli) -> wetres::Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let (cfg, out) = with_seed(&args)?;
            let traj = experiment::simulate(&cfg, &out)?;
            println!(
                "wrote {} ({} windows, {} state values each, digest {})",
                show(&out.join(experiment::TRAJECTORY_FILE)),
                traj.len(),
                traj.state_dim(),
                traj.meta.config_digest
            );
        }
        Command::Evaluate(args) => {
            let (cfg, out) = load(&args.common)?;
            let traj = experiment::read_trajectory(&args.trajectory)?;
            let hs = args.h_list.unwrap_or(cfg.h_list);
            let ks = args.k_list.unwrap_or(cfg.k_list);
            let evals = experiment::evaluate(&traj, &hs, &ks, &cfg.readout, &out)?;
            println!("{:>4} {:>4} {:>10} {:>12}", "H", "k", "nrmse", "correlation");
            for e in &evals {
                println!("{:>4} {:>4} {:>10.4} {:>12.4}", e.h, e.k, e.median_nrmse, e.median_correlation);
            }
            println!("tables in {}", show(&out));
        }
        Command::Memory(args) => {
            let (cfg, out) = load(&args.common)?;
            let traj = experiment::read_trajectory(&args.trajectory)?;
            let d_max = args.d_max.unwrap_or(cfg.readout.d_max);
            let (_, summary) = experiment::memory(&traj, d_max, &cfg.readout, &out)?;
            println!("MC = {}", summary.mc);
            println!("H* = {}", summary.h_star);
        }
        Command::Plot(args) => {
            for path in experiment::plot(&args.out_dir, &args.out_dir)? {
                println!("wrote {}", show(&path));
            }
        }
        Command::Sweep(args) => {
            let (cfg, out) = with_seed(&args)?;
            experiment::sweep(&cfg, &out)?;
            println!("sweep outputs in {}", show(&out));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
