//! `bladepress`: simulate, process, analyze and compare blade pressure campaigns.
//!
//! Exit status is 0 on success, 1 on I/O or per-run processing failures and 2
//! on invalid input.

use std::path::PathBuf;
use std::process::ExitCode;

use bladepress::analysis::{OnsetParams, DEFAULT_PAIRING_DISTANCE};
use bladepress::campaign::{
    analyze_campaign, compare_campaigns, process_campaign, simulate_campaign, CompareOptions, ProcessConfig,
};
use bladepress::{BladeState, CampaignManifest, Error, SensorKind};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bladepress", version, about = "Blade surface-pressure campaign toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,

    /// Seed overriding the manifest seed (simulate).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Fixed α instead of calibrating it (process).
    #[arg(long, global = true)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct OutDir {
    /// Output directory.
    #[arg(long, env = "BLADEPRESS_OUT", default_value = "bladepress-out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a campaign into per-channel CSV files plus a run index.
    Simulate {
        /// Campaign manifest (JSON); defaults apply when omitted.
        #[arg(long, visible_alias = "input")]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Turn a run index into per-station aggregates and a calibration record.
    Process {
        /// Run index written by `simulate`.
        #[arg(long, visible_alias = "manifest")]
        input: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Derive curves, profiles, separation estimates, comparison and impact reports.
    Analyze {
        /// Aggregates CSV written by `process`.
        #[arg(long, visible_alias = "manifest")]
        input: PathBuf,
        #[command(flatten)]
        out: OutDir,
        /// Onset threshold multiplier.
        #[arg(long, default_value_t = bladepress::analysis::DEFAULT_ONSET_K)]
        onset_k: f64,
        /// Upper AoA of the attached window, deg.
        #[arg(long, default_value_t = bladepress::analysis::DEFAULT_ATTACHED_MAX)]
        attached_max: f64,
        /// Lower bound on the threshold spread as a fraction of the attached median.
        #[arg(long, default_value_t = bladepress::analysis::DEFAULT_MIN_RELATIVE_SPREAD)]
        min_relative_spread: f64,
    },
    /// Compare the stations of one aggregates file with the nearest stations of another.
    Compare {
        /// Candidate, then reference aggregates CSV.
        #[arg(long = "input", visible_alias = "manifest", num_args = 1, required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        out: OutDir,
        /// Maximum pairing distance, chord fraction.
        #[arg(long, default_value_t = DEFAULT_PAIRING_DISTANCE)]
        max_distance: f64,
        /// Restrict to one blade state (clean or instrumented).
        #[arg(long)]
        blade_state: Option<BladeState>,
        /// Only candidate stations of this kind (mems or tap).
        #[arg(long)]
        candidate_kind: Option<SensorKind>,
        /// Only reference stations of this kind (mems or tap).
        #[arg(long)]
        reference_kind: Option<SensorKind>,
    },
}

fn exit_for(e: &Error) -> ExitCode {
    if e.is_validation() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Simulate { manifest, out } => {
            let mut m = match manifest {
                Some(path) => CampaignManifest::load(&path)?,
                None => CampaignManifest::default(),
            };
            if let Some(seed) = cli.seed {
                m.seed = seed;
            }
            let index = simulate_campaign(&m, &out.out)?;
            println!("simulated {} runs into {}", index.runs.len(), out.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Process { input, out } => {
            let config = ProcessConfig {
                alpha_override: cli.alpha,
                ..Default::default()
            };
            let outcome = process_campaign(&input, &out.out, &config)?;
            println!(
                "alpha = {} ({:?}); {} aggregates written to {}",
                outcome.calibration.alpha,
                outcome.calibration.source,
                outcome.records.len(),
                out.out.display()
            );
            if outcome.failures().is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                for f in outcome.failures() {
                    eprintln!("run {} failed: {}", f.run_id, f.error);
                }
                Ok(ExitCode::from(1))
            }
        }
        Command::Analyze {
            input,
            out,
            onset_k,
            attached_max,
            min_relative_spread,
        } => {
            let params = OnsetParams {
                k: onset_k,
                attached_max,
                min_relative_spread,
            };
            let summary = analyze_campaign(&input, &out.out, &params)?;
            for note in &summary.notes {
                println!("note: {note}");
            }
            println!("{} outputs written to {}", summary.outputs.len(), out.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare {
            inputs,
            out,
            max_distance,
            blade_state,
            candidate_kind,
            reference_kind,
        } => {
            let [candidate, reference] = inputs.as_slice() else {
                return Err(Error::validation(
                    "input",
                    format!("compare takes exactly two --input files, got {}", inputs.len()),
                ));
            };
            let options = CompareOptions {
                max_distance,
                blade_state,
                candidate_kind,
                reference_kind,
            };
            let report = compare_campaigns(candidate, reference, &out.out, &options)?;
            for r in &report.rows {
                println!(
                    "x/c {} vs {}: mean error {:.3} %, std error {:.3} %",
                    r.station_xc, r.reference_xc, r.mean_error_pct, r.std_error_pct
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}
