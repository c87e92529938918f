use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use perfsim::rng::parse_seed;
use perfsim::targets::{NormalParams, TwoStateParams};
use perfsim_cli::output::{write_report, Format, Tabular};
use perfsim_cli::plot::hole_decay_svg;
use perfsim_cli::{
    calibrate_b, normal, survival, twostate, twostate_sets, CalibrateConfig, CalibrationTarget,
    CliError, NormalConfig, SetsConfig, SurvivalConfig, TwoStateConfig,
};

#[derive(Parser)]
#[command(name = "perfsim", version, about = "Perfect simulation experiments from coupled MCMC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Master seed, decimal or 0x-prefixed hex.
    #[arg(long, default_value = "1", value_parser = seed_arg)]
    seed: u64,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct TwoStateArgs {
    #[arg(long, default_value_t = 1.0 / 9.0)]
    theta: f64,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Unbiased-estimator table for the two-state chain, one row per k.
    Twostate {
        #[arg(long = "ks", alias = "k", value_delimiter = ',', default_value = "5,10,20,50,100,110")]
        ks: Vec<usize>,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        /// Also write an SVG of holes per simulation against k.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[command(flatten)]
        chain: TwoStateArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Empirical P(tau > i) for lag-one coupled two-state pairs.
    Survival {
        #[arg(long, value_delimiter = ',', default_value = "5,20,100")]
        at: Vec<usize>,
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        #[command(flatten)]
        chain: TwoStateArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Two-state sample sets: serial correlation within and across sets.
    TwostateSets {
        #[arg(long = "K", default_value_t = 20)]
        set_size: usize,
        #[arg(long = "B", default_value_t = 25)]
        block_len: usize,
        #[arg(long = "n-sets", alias = "n", default_value_t = 10_000)]
        n_sets: usize,
        #[command(flatten)]
        chain: TwoStateArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Sample sets for a d-dimensional standard normal with maximal coupling.
    Normal {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long = "B", default_value_t = 5)]
        block_len: usize,
        #[arg(long = "K", default_value_t = 20)]
        set_size: usize,
        #[arg(long = "n-sets", alias = "n", default_value_t = 500)]
        n_sets: usize,
        /// Random-walk step s.d. per coordinate (default 2 / sqrt(d)).
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 3.0)]
        r: f64,
        #[arg(long = "M", default_value_t = 1)]
        interval: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Non-coalescence fraction after one block for trial block lengths.
    CalibrateB {
        /// Normal target dimension; omit with --twostate.
        #[arg(long, required_unless_present = "twostate")]
        d: Option<usize>,
        /// Calibrate the two-state chain instead.
        #[arg(long, conflicts_with = "d")]
        twostate: bool,
        #[arg(long = "trial-bs", value_delimiter = ',', default_value = "1,2,3,4,5,6,8,10,12,14,16,20,25,30")]
        trial_bs: Vec<usize>,
        #[arg(long = "target-p", default_value_t = 0.1)]
        target_p: f64,
        #[arg(long = "n-pairs", alias = "n", default_value_t = 10_000)]
        n_pairs: usize,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 3.0)]
        r: f64,
        #[arg(long = "M", default_value_t = 1)]
        interval: usize,
        #[command(flatten)]
        chain: TwoStateArgs,
        #[command(flatten)]
        common: Common,
    },
}

fn seed_arg(s: &str) -> Result<u64, String> {
    parse_seed(s).map_err(|e| e.to_string())
}

fn emit<R: Tabular>(report: &R, common: &Common) -> Result<(), CliError> {
    let format = match common.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    match &common.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_report(report, format, &mut w)?;
            w.flush()?;
        }
        None => write_report(report, format, io::stdout().lock())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Twostate {
            ks,
            n,
            plot,
            chain,
            common,
        } => {
            let report = twostate(&TwoStateConfig {
                ks,
                n,
                theta: chain.theta,
                p: chain.p,
                seed: common.seed,
                jobs: common.jobs,
            })?;
            emit(&report, &common)?;
            if let Some(path) = plot {
                std::fs::write(path, hole_decay_svg(&report.hole_decay))?;
            }
        }
        Command::Survival {
            at,
            n,
            chain,
            common,
        } => {
            let report = survival(&SurvivalConfig {
                at,
                n,
                theta: chain.theta,
                p: chain.p,
                seed: common.seed,
                jobs: common.jobs,
            })?;
            emit(&report, &common)?;
        }
        Command::TwostateSets {
            set_size,
            block_len,
            n_sets,
            chain,
            common,
        } => {
            let report = twostate_sets(&SetsConfig {
                set_size,
                block_len,
                n_sets,
                theta: chain.theta,
                p: chain.p,
                seed: common.seed,
                jobs: common.jobs,
            })?;
            emit(&report, &common)?;
        }
        Command::Normal {
            d,
            block_len,
            set_size,
            n_sets,
            sigma,
            r,
            interval,
            common,
        } => {
            let report = normal(&NormalConfig {
                d,
                block_len,
                set_size,
                n_sets,
                sigma,
                radius: r,
                coupling_interval: interval,
                seed: common.seed,
                jobs: common.jobs,
            })?;
            emit(&report, &common)?;
        }
        Command::CalibrateB {
            d,
            twostate,
            trial_bs,
            target_p,
            n_pairs,
            sigma,
            r,
            interval,
            chain,
            common,
        } => {
            let target = if twostate {
                CalibrationTarget::TwoState(TwoStateParams::new(chain.theta, chain.p)?)
            } else {
                let mut params = NormalParams::for_dimension(d.unwrap_or(1))?;
                if let Some(sigma) = sigma {
                    params.sigma = sigma;
                }
                params.r = r;
                params.validate()?;
                CalibrationTarget::Normal(params)
            };
            let report = calibrate_b(&CalibrateConfig {
                target,
                trial_bs,
                target_p,
                n_pairs,
                coupling_interval: interval,
                seed: common.seed,
                jobs: common.jobs,
            })?;
            if !report.achieved {
                eprintln!(
                    "warning: no trial B reached target {target_p}; best is B = {}",
                    report.recommended
                );
            }
            emit(&report, &common)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(if e.kind() == "argument" { 2 } else { 1 })
        }
    }
}
