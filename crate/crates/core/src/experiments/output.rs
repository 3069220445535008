//! CSV tables and JSON summaries. Every file starts with the resolved
//! configuration so a run can be replayed from its outputs alone.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use super::{ExperimentConfig, ExperimentOutput};
use crate::error::Result;
use crate::keyrate::write_rate_csv;

fn config_json(cfg: &ExperimentConfig) -> Value {
    Value::Object(cfg.entries().into_iter().map(|(k, v)| (k, Value::String(v))).collect::<Map<_, _>>())
}

fn create(dir: &Path, name: &str, cfg: &ExperimentConfig, written: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    if name.ends_with(".csv") {
        for (k, v) in cfg.entries() {
            writeln!(w, "# {k} = {v}")?;
        }
    }
    written.push(path);
    Ok(w)
}

fn write_json(dir: &Path, cfg: &ExperimentConfig, results: Value, written: &mut Vec<PathBuf>) -> Result<()> {
    let name = format!("{}.json", cfg.experiment.name());
    let mut w = create(dir, &name, cfg, written)?;
    let doc = json!({
        "experiment": cfg.experiment.name(),
        "rng_seed": cfg.rng_seed,
        "config": config_json(cfg),
        "results": results,
    });
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the files for a finished run into `dir`, creating it if needed.
/// Returns the paths written.
pub fn write_outputs(cfg: &ExperimentConfig, out: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let name = cfg.experiment.name();
    match out {
        ExperimentOutput::PhaseVoltage(r) => {
            let mut w = create(dir, &format!("{name}.csv"), cfg, &mut written)?;
            writeln!(w, "voltage_v,encoder_phase_rad,physical_phase_rad")?;
            for row in &r.rows {
                writeln!(w, "{},{},{}", row.voltage, row.encoder_phase, opt(row.physical_phase))?;
            }
            w.flush()?;
            write_json(
                dir,
                cfg,
                json!({
                    "halfwave_phase_rad": r.halfwave_phase,
                    "encoder_nonlinearity": r.encoder_nonlinearity,
                    "drive_per_volt": r.drive_per_volt,
                    "physical_deviation": r.physical_deviation,
                }),
                &mut written,
            )?;
        }
        ExperimentOutput::Randomization(r) => {
            let mut w = create(dir, &format!("{name}_samples.csv"), cfg, &mut written)?;
            writeln!(w, "index,intra_intensity,cross_intensity")?;
            for (i, (a, b)) in r.intra.iter().zip(&r.cross).enumerate() {
                writeln!(w, "{i},{a},{b}")?;
            }
            w.flush()?;
            let mut w = create(dir, &format!("{name}_histogram.csv"), cfg, &mut written)?;
            writeln!(w, "bin_center,intra_count,cross_count")?;
            for (i, (a, b)) in r
                .intra_histogram
                .counts
                .iter()
                .zip(&r.cross_histogram.counts)
                .enumerate()
            {
                writeln!(w, "{},{a},{b}", r.intra_histogram.bin_center(i))?;
            }
            w.flush()?;
            write_json(
                dir,
                cfg,
                json!({
                    "samples": r.intra.len(),
                    "intra_std_over_mean": r.intra_std_over_mean,
                    "cross_std_over_mean": r.cross_std_over_mean,
                    "cross_ks": r.cross_ks,
                }),
                &mut written,
            )?;
        }
        ExperimentOutput::Sweep(r) => {
            let mut w = create(dir, &format!("{name}.csv"), cfg, &mut written)?;
            writeln!(
                w,
                "loss_db,clocks,sifted_count,error_count,gain,qber,qber_sigma,sifted_rate_bps,secure_rate_bps,\
                 analytic_gain,analytic_qber,analytic_sifted_rate_bps,analytic_secure_rate_bps,gain_z,qber_z"
            )?;
            for row in &r.rows {
                writeln!(
                    w,
                    "{},{},{},{},{:e},{},{:e},{:e},{:e},{:e},{},{:e},{:e},{},{}",
                    row.loss_db,
                    row.mc.clocks,
                    row.mc.sifted_count,
                    row.mc.error_count,
                    row.mc.gain(),
                    row.mc.qber,
                    row.qber_sigma,
                    row.mc.sifted_rate,
                    row.secure_rate_bps,
                    row.analytic.gain,
                    row.analytic.qber,
                    row.analytic_sifted_rate_bps,
                    row.analytic_secure_rate_bps,
                    row.gain_z(),
                    row.qber_z(),
                )?;
            }
            w.flush()?;
            let mut w = create(dir, &format!("{name}_rate_curve.csv"), cfg, &mut written)?;
            write_rate_csv(&r.curve, &mut w)?;
            w.flush()?;
            let points: Vec<Value> = r
                .rows
                .iter()
                .map(|row| {
                    json!({
                        "rng_seed": row.rng_seed,
                        "clocks": row.mc.clocks,
                        "sift": row.mc.record(r.protocol, row.loss_db),
                        "secure_rate_bps": row.secure_rate_bps,
                        "analytic_gain": row.analytic.gain,
                        "analytic_qber": row.analytic.qber,
                        "analytic_secure_rate_bps": row.analytic_secure_rate_bps,
                        "gain_z": row.gain_z(),
                        "qber_z": row.qber_z(),
                    })
                })
                .collect();
            write_json(
                dir,
                cfg,
                json!({ "protocol": r.protocol, "cutoff_db": r.cutoff_db, "points": points }),
                &mut written,
            )?;
        }
        ExperimentOutput::Stability(r) => {
            let mut w = create(dir, &format!("{name}_series.csv"), cfg, &mut written)?;
            writeln!(w, "bin,qber")?;
            for (i, q) in r.series.iter().enumerate() {
                writeln!(w, "{i},{q}")?;
            }
            w.flush()?;
            let mut w = create(dir, &format!("{name}_histogram.csv"), cfg, &mut written)?;
            writeln!(w, "bin_center,count,model_count")?;
            for (i, (c, m)) in r.histogram.counts.iter().zip(&r.model_counts).enumerate() {
                writeln!(w, "{},{c},{m}", r.histogram.bin_center(i))?;
            }
            w.flush()?;
            write_json(
                dir,
                cfg,
                json!({
                    "bins": r.series.len(),
                    "n_sift": r.n_sift,
                    "mean": r.mean,
                    "std_dev": r.std_dev,
                    "model_std_dev": r.model_std_dev,
                }),
                &mut written,
            )?;
        }
    }
    Ok(written)
}
