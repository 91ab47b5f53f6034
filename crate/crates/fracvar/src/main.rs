use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fracvar::harness::{
    builtin_example, emit_report, run_experiment, ExperimentConfig, ReportFormat,
};
use fracvar::estimators::EstimateRecord;
use fracvar::{
    estimate_theta_known_hurst, estimate_theta_unknown_hurst, subsample, Error, SampledPath,
};

#[derive(Parser)]
#[command(name = "fracvar", version, about = "Hurst index and noise-coefficient estimation for fractional diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence experiment and write box-plot statistics.
    Run {
        /// Builtin example id: nonlinear1d, linear2d, or nonlinear2d.
        #[arg(long)]
        example: String,
        /// Comma-separated Hurst values, e.g. 0.35,0.5,0.7.
        #[arg(long, value_delimiter = ',', required = true)]
        hurst: Vec<f64>,
        /// Dyadic level of the simulation grid.
        #[arg(long, default_value_t = 16)]
        fine_level: u32,
        /// Observation levels: a range `2..14` (inclusive) or a list `4,8,12`.
        #[arg(long)]
        levels: String,
        /// Realizations per Hurst value.
        #[arg(long, default_value_t = 100)]
        realizations: usize,
        /// Master seed; every realization derives its own stream.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Time horizon.
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        /// Output file for the statistics.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        /// Also write per-realization samples to a `.raw` sibling file.
        #[arg(long)]
        raw: bool,
    },
    /// Estimate the Hurst index and noise coefficients from a path CSV.
    Estimate {
        /// Input CSV with header `t,x1,...,xd` on a dyadic grid.
        #[arg(long)]
        input: PathBuf,
        /// Builtin example id providing the vector fields and observables.
        #[arg(long)]
        fields: String,
        /// Observation level n; the design is built on this grid.
        #[arg(long)]
        level: u32,
        /// Hurst index, if known. When absent it is estimated from levels
        /// n and n + 1 of the input.
        #[arg(long)]
        hurst: Option<f64>,
    },
}

fn parse_levels(spec: &str) -> Result<Vec<u32>, Error> {
    let parse_one = |s: &str| {
        s.trim()
            .parse::<u32>()
            .map_err(|_| Error::Config(format!("bad level `{s}` in `{spec}`")))
    };
    if let Some((start, end)) = spec.split_once("..") {
        let start = parse_one(start)?;
        let end = parse_one(end)?;
        if start > end {
            return Err(Error::Config(format!("empty level range `{spec}`")));
        }
        return Ok((start..=end).collect());
    }
    spec.split(',').map(parse_one).collect()
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            example,
            hurst,
            fine_level,
            levels,
            realizations,
            seed,
            horizon,
            out,
            format,
            raw,
        } => {
            let cfg = ExperimentConfig {
                example,
                hurst,
                fine_level,
                sub_levels: parse_levels(&levels)?,
                realizations,
                master_seed: seed,
                horizon,
            };
            cfg.validate()?;
            let report = run_experiment(&cfg)?;
            let format = match format {
                FormatArg::Csv => ReportFormat::Csv,
                FormatArg::Json => ReportFormat::Json,
            };
            emit_report(&report, &out, format, raw)?;
            Ok(())
        }
        Command::Estimate { input, fields, level, hurst } => {
            let file = File::open(&input)
                .map_err(|source| Error::Io { path: input.clone(), source })?;
            let path = SampledPath::read_csv(BufReader::new(file))?;
            let example = builtin_example(&fields)?;
            if path.dim() != example.fields.dim() {
                return Err(Error::Config(format!(
                    "input has dimension {}, example `{}` expects {}",
                    path.dim(),
                    fields,
                    example.fields.dim()
                )));
            }
            let estimate = match hurst {
                Some(h) => {
                    if level > path.level() {
                        return Err(Error::LevelTooFine { target: level, level: path.level() });
                    }
                    let observed = subsample(&path, level)?;
                    estimate_theta_known_hurst(
                        &observed,
                        &example.fields,
                        &example.test_functions,
                        h,
                    )?
                }
                None => estimate_theta_unknown_hurst(
                    &path,
                    &example.fields,
                    &example.test_functions,
                    level,
                )?,
            };
            if let Some(h) = estimate.used_hurst {
                if estimate.hurst_was_estimated && !(0.0..1.0).contains(&h) {
                    eprintln!("warning: estimated Hurst index {h} lies outside (0, 1)");
                }
            }
            let record = EstimateRecord::from(&estimate);
            println!(
                "{}",
                serde_json::to_string_pretty(&record)
                    .map_err(|e| Error::Parse(format!("serializing estimate: {e}")))?
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_config() {
                ExitCode::from(2)
            } else if err.is_io() {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
