use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use splitiv::error::{HarnessError, Result};
use splitiv::io::{
    read_measurements_csv, write_filters_csv, write_json, write_trajectory_csv, EstimateReport,
};
use splitiv::{run_benchmark, run_trial, Execution, ExperimentConfig};
use splitiv_core::bounds::{
    corollary_rate, gamma, ideal_window, mc_check_gamma, GammaCheck, GammaParams, GammaValue,
};
use splitiv_core::dynamics::add_noise;
use splitiv_core::pipeline::estimate_both;
use splitiv_core::splitfilters::Mode;

#[derive(Parser)]
#[command(
    name = "splitiv",
    version,
    about = "Sample-split instrumental variables for noisy dynamics"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment manifest; unspecified fields keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    mode: Option<Mode>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Master seed for all noise and bootstrap draws.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file, or directory for `benchmark`. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Field override, e.g. `--set p=8 --set x0=[1,1,1]`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the system and write `t, x1..x3, z1..z3` as CSV.
    Simulate {
        /// Noise stream (trial index) for the measurement columns.
        #[arg(long, default_value_t = 0)]
        stream: u64,
    },
    /// Write the split-filter stencils as CSV.
    Filters,
    /// Estimate from one data set and write both estimates as JSON.
    Estimate {
        /// Measurement CSV (`z1..z3` or `x1..x3` columns); simulated when absent.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Full Monte Carlo run writing trials.csv, summary.json and kde.csv.
    Benchmark {
        /// Run trials on one thread.
        #[arg(long)]
        serial: bool,
    },
    /// Moment bound decomposition and convergence rates as JSON.
    Bounds {
        #[arg(long, default_value_t = 2.0)]
        r: f64,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 10.0)]
        b: f64,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        /// Also estimate the moment by Monte Carlo with this many samples.
        #[arg(long)]
        mc_trials: Option<usize>,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.apply_overrides(&common.overrides)?;
    if let Some(mode) = common.mode {
        config.pipeline.mode = mode;
    }
    if let Some(trials) = common.trials {
        config.trials = trials;
    }
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| HarnessError::io(p, e))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[derive(Serialize)]
struct BoundsReport {
    params: GammaParams,
    gamma: GammaValue,
    monte_carlo: Option<GammaCheck>,
    /// Rate for the configured `n`, `h`, `p`, by derivative order.
    corollary_rate: Vec<f64>,
    ideal_window: f64,
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli.common)?;
    let out = cli.common.out.as_deref();
    let pipeline = &config.pipeline;
    match cli.command {
        Command::Simulate { stream } => {
            let traj = pipeline.simulate()?;
            let noisy = add_noise(&traj, config.eta(), config.master_seed, stream)?;
            let mut w = output(out)?;
            write_trajectory_csv(&mut w, &traj, Some(&noisy.values))?;
            w.flush().map_err(|e| HarnessError::io("output", e))?;
        }
        Command::Filters => {
            let (bank, _) = pipeline.build_bank_with_fallback()?;
            let mut w = output(out)?;
            write_filters_csv(&mut w, &bank)?;
            w.flush().map_err(|e| HarnessError::io("output", e))?;
        }
        Command::Estimate { input } => {
            let (bank, _) = pipeline.build_bank_with_fallback()?;
            let effective_p = bank.hat_g.spec().exactness;
            let report = match input {
                Some(path) => {
                    let values = read_measurements_csv(&path)?;
                    let est = estimate_both(&values, &bank, pipeline)?;
                    EstimateReport {
                        n_regression: est.rows,
                        effective_p,
                        iv: (&est.iv).into(),
                        ls: (&est.ls).into(),
                        excitation: est.excitation,
                    }
                }
                None => {
                    let setup = splitiv::Setup::new(&config)?;
                    let trial = run_trial(&setup, 0);
                    let est = trial.outcome.map_err(|f| HarnessError::Config(f.message))?;
                    EstimateReport {
                        n_regression: setup.rows,
                        effective_p,
                        iv: (&est.iv).into(),
                        ls: (&est.ls).into(),
                        excitation: est.excitation,
                    }
                }
            };
            write_json(output(out)?, &report)?;
        }
        Command::Benchmark { serial } => {
            let execution = if serial {
                Execution::Serial
            } else {
                Execution::Parallel
            };
            let started = std::time::Instant::now();
            let bench = run_benchmark(&config, execution)?;
            log::info!("{} trials in {:.1?}", config.trials, started.elapsed());
            let dir = out
                .map(Path::to_path_buf)
                .unwrap_or_else(|| Path::new("results").join(config.mode().as_str()));
            let files = bench.write(&dir)?;
            let s = &bench.summary;
            println!("wrote {}", files.summary.display());
            println!(
                "iv  bias {} rmse {}",
                s.iv.formatted.bias_pct, s.iv.formatted.rmse_pct
            );
            println!(
                "ls  bias {} rmse {}",
                s.ls.formatted.bias_pct, s.ls.formatted.rmse_pct
            );
        }
        Command::Bounds {
            r,
            a,
            b,
            k,
            mc_trials,
        } => {
            let params = GammaParams { r, a, b, k };
            let report = BoundsReport {
                gamma: gamma(&params)?,
                monte_carlo: mc_trials
                    .map(|t| mc_check_gamma(&params, t, config.master_seed))
                    .transpose()?,
                params,
                corollary_rate: (0..pipeline.p.min(3))
                    .map(|d| corollary_rate(pipeline.n, pipeline.h, pipeline.p, d))
                    .collect::<splitiv_core::Result<_>>()?,
                ideal_window: ideal_window(pipeline.h, pipeline.p)?,
            };
            write_json(output(out)?, &report)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
