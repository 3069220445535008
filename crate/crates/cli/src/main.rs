use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phasesource::experiments::{run, write_outputs, ExperimentConfig, ExperimentKind, ExperimentOutput};
use phasesource::Error;

#[derive(Parser)]
#[command(name = "phasesource", version, about = "Phase-modulated QKD source simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phase shift against modulation voltage.
    PhaseVoltage(RunArgs),
    /// Interference statistics within and across coherence blocks.
    Randomization(RunArgs),
    /// BB84 sifted rate, QBER and secure rate against channel loss.
    Bb84Sweep(RunArgs),
    /// DPS sifted rate, QBER and secure rate against channel loss.
    DpsSweep(RunArgs),
    /// Shot-noise QBER fluctuations over a long run.
    Stability(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `rng_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output_path`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Invalid { .. } => 2,
        Error::Diverged { .. } | Error::UndefinedPhase { .. } => 3,
        Error::Io(_) | Error::Json(_) => 1,
    }
}

fn summary(out: &ExperimentOutput) -> Vec<String> {
    match out {
        ExperimentOutput::PhaseVoltage(r) => {
            let mut s = vec![format!("phase at halfwave voltage: {:.6} rad", r.halfwave_phase)];
            if let Some(d) = r.physical_deviation {
                s.push(format!("laser model vs encoder: max relative deviation {d:.2e}"));
            }
            s
        }
        ExperimentOutput::Randomization(r) => vec![
            format!("intra-block std/mean: {:.3e}", r.intra_std_over_mean),
            format!(
                "cross-block KS vs arcsine: D = {:.4}, p = {:.3}",
                r.cross_ks.statistic, r.cross_ks.p_value
            ),
        ],
        ExperimentOutput::Sweep(r) => {
            let mut s: Vec<String> = r
                .rows
                .iter()
                .map(|row| {
                    format!(
                        "{:>6.2} dB  qber {:.4} (analytic {:.4})  sifted {:.3e} bps  secure {:.3e} bps",
                        row.loss_db, row.mc.qber, row.analytic.qber, row.mc.sifted_rate, row.secure_rate_bps
                    )
                })
                .collect();
            if let Some(c) = r.cutoff_db {
                s.push(format!("secure-rate cutoff: {c:.2} dB"));
            }
            s
        }
        ExperimentOutput::Stability(r) => vec![format!(
            "{} bins, n_sift {}: mean {:.4}%, std {:.4}% (shot noise {:.4}%)",
            r.series.len(),
            r.n_sift,
            100.0 * r.mean,
            100.0 * r.std_dev,
            100.0 * r.model_std_dev
        )],
    }
}

fn execute(kind: ExperimentKind, args: &RunArgs) -> phasesource::Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(kind, path)?,
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(seed) = args.seed {
        cfg.rng_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_path = out.to_string_lossy().into_owned();
    }
    let out = run(&cfg)?;
    for line in summary(&out) {
        println!("{line}");
    }
    for path in write_outputs(&cfg, &out, cfg.output_path.as_ref())? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::PhaseVoltage(a) => (ExperimentKind::PhaseVoltage, a),
        Command::Randomization(a) => (ExperimentKind::Randomization, a),
        Command::Bb84Sweep(a) => (ExperimentKind::Bb84Sweep, a),
        Command::DpsSweep(a) => (ExperimentKind::DpsSweep, a),
        Command::Stability(a) => (ExperimentKind::Stability, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
