//! Scenario-driven command line for the waveform toolkit.
//!
//! Verbs: `generate`, `check`, `simulate`, `image`, `decode`, `metrics`,
//! `sweep`. Every verb takes `--config <path-or-preset>`; artifacts land in
//! `--out` (default `out/<scenario name>`). Exit codes: 0 success, 2
//! validation failure, 3 runtime failure.

mod runner;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cosmic_core::encoder::WaveformFamily;
use runner::{RunError, SweepAxis};
use scenario::{config_hash, load_config, ScenarioConfig};

#[derive(Parser)]
#[command(name = "cosmic", version, about = "Joint radar-imaging and communication waveform toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario config: a JSON file path or a bundled preset name.
    #[arg(long)]
    config: String,
    /// Artifact directory (default: out/<scenario name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the waveform (master basis) seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the waveform set and its metadata artifacts.
    Generate(Common),
    /// Print the zone-constraint feasibility report as JSON.
    Check(Common),
    /// Run the full pipeline: generate, channels, receivers, metrics.
    Simulate(Common),
    /// Back-project an image from a stored range-compressed cube.
    Image(Common),
    /// Decode a stored communication capture and score it.
    Decode(Common),
    /// Recompute the metrics report from stored artifacts.
    Metrics(Common),
    /// Evaluate a metrics row per value of a swept parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Swept parameter: n, snr_db, k_z, or d.
        #[arg(long)]
        axis: String,
        /// Comma-separated numeric values, e.g. 0,5,10,15.
        #[arg(long)]
        values: String,
        /// Comma-separated families (cosmic, ofdm, zero_shift); defaults to
        /// the config's family.
        #[arg(long)]
        families: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Validation(msg)) => {
            eprintln!("validation failure:\n{msg}");
            ExitCode::from(2)
        }
        Err(RunError::Runtime(msg)) => {
            eprintln!("runtime failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn setup(common: &Common) -> Result<(ScenarioConfig, PathBuf, PathBuf), RunError> {
    let (mut cfg, base) = load_config(&common.config).map_err(RunError::Validation)?;
    if let Some(seed) = common.seed {
        cfg.waveform.seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    Ok((cfg, base, out))
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Generate(common) => {
            let (cfg, base, out) = setup(&common)?;
            runner::validate_or_fail(&cfg)?;
            // Reuse the pipeline with every downstream stage disabled.
            let mut gen_cfg = cfg.clone();
            gen_cfg.scene = scenario::SceneConfig::None;
            gen_cfg.metrics.ser = false;
            gen_cfg.metrics.se = false;
            gen_cfg.metrics.islr = false;
            gen_cfg.metrics.image_snr = false;
            let outcome = runner::run_pipeline(&gen_cfg, &base, Some(&out))?;
            print_outcome(&out, &outcome.artifacts, &outcome.warnings);
            Ok(())
        }
        Command::Check(common) => {
            let (cfg, _, _) = setup(&common)?;
            let report = match cfg.waveform.family {
                WaveformFamily::Cosmic => {
                    let w = &cfg.waveform;
                    let r = cosmic_core::encoder::feasibility_check(w.k, w.n, w.k_s(), w.k_z, w.mode)
                        .map_err(|e| RunError::Validation(e.to_string()))?;
                    serde_json::to_string_pretty(&r).expect("report serializes")
                }
                other => {
                    let feasible = runner::validate_or_fail(&cfg).is_ok();
                    serde_json::to_string_pretty(&serde_json::json!({
                        "family": format!("{other:?}").to_lowercase(),
                        "feasible": feasible,
                    }))
                    .expect("report serializes")
                }
            };
            println!("{report}");
            Ok(())
        }
        Command::Simulate(common) => {
            let (cfg, base, out) = setup(&common)?;
            runner::validate_or_fail(&cfg)?;
            let outcome = runner::run_pipeline(&cfg, &base, Some(&out))?;
            print_outcome(&out, &outcome.artifacts, &outcome.warnings);
            println!(
                "{}",
                serde_json::to_string_pretty(&outcome.metrics).expect("metrics serialize")
            );
            Ok(())
        }
        Command::Image(common) => {
            let (cfg, base, out) = setup(&common)?;
            runner::validate_or_fail(&cfg)?;
            let artifacts = runner::image_from_artifacts(&cfg, &base, &out)?;
            print_outcome(&out, &artifacts, &[]);
            Ok(())
        }
        Command::Decode(common) => {
            let (cfg, _, out) = setup(&common)?;
            runner::validate_or_fail(&cfg)?;
            let artifacts = runner::decode_from_artifacts(&cfg, &out)?;
            print_outcome(&out, &artifacts, &[]);
            Ok(())
        }
        Command::Metrics(common) => {
            let (cfg, base, out) = setup(&common)?;
            runner::validate_or_fail(&cfg)?;
            let metrics = runner::metrics_from_artifacts(&cfg, &base, &out)?;
            println!("{}", serde_json::to_string_pretty(&metrics).expect("metrics serialize"));
            Ok(())
        }
        Command::Sweep { common, axis, values, families } => {
            let (cfg, base, out) = setup(&common)?;
            runner::validate_or_fail(&cfg)?;
            let axis = SweepAxis::parse(&axis).ok_or_else(|| {
                RunError::Validation(format!(
                    "axis {axis:?} is not sweepable (choose n, snr_db, k_z, or d)"
                ))
            })?;
            let values = parse_values(&values).map_err(RunError::Validation)?;
            let families = match families {
                Some(f) => parse_families(&f).map_err(RunError::Validation)?,
                None => vec![cfg.waveform.family],
            };
            let rows = runner::run_sweep(&cfg, &base, axis, &values, &families);
            std::fs::create_dir_all(&out)
                .map_err(|e| RunError::Runtime(format!("creating {out:?}: {e}")))?;
            let path = out.join("sweep.csv");
            runner::write_sweep_csv(&rows, &path)?;
            let failures = rows.iter().filter(|r| !r.error.is_empty()).count();
            println!(
                "sweep: {} rows ({} failed) -> {} [config {}]",
                rows.len(),
                failures,
                path.display(),
                &config_hash(&cfg)[..12]
            );
            Ok(())
        }
    }
}

fn print_outcome(out: &PathBuf, artifacts: &[String], warnings: &[String]) {
    println!("artifacts in {}:", out.display());
    for a in artifacts {
        println!("  {a}");
    }
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn parse_values(s: &str) -> Result<Vec<f64>, String> {
    let vals: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|e| format!("cannot parse --values {s:?}: {e}"))?;
    if vals.is_empty() {
        return Err("--values must list at least one number".into());
    }
    Ok(vals)
}

fn parse_families(s: &str) -> Result<Vec<WaveformFamily>, String> {
    s.split(',')
        .map(|t| match t.trim().to_ascii_lowercase().as_str() {
            "cosmic" => Ok(WaveformFamily::Cosmic),
            "ofdm" => Ok(WaveformFamily::Ofdm),
            "zero_shift" | "zeroshift" | "zero-shift" => Ok(WaveformFamily::ZeroShift),
            other => Err(format!("unknown family {other:?}")),
        })
        .collect()
}
