//! The five experiment recipes and their file outputs.

mod config;
mod output;

pub use config::{
    ExperimentConfig, ExperimentKind, PhaseVoltageConfig, RandomizationConfig, StabilityConfig, SweepConfig,
};
pub use output::write_outputs;

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::keyrate::{decoy_bb84_rate, dps_rate, max_loss, rate_curve, DecoyInputs, RatePoint};
use crate::laser::{integrate, DriveWaveform, LaserParams, Noise};
use crate::optics::{interfere, ChannelParams};
use crate::protocol::{
    expected_gain_qber, expected_sifted_rate, simulate_link, vacuum_yield, GainQber, Protocol, SiftResult,
};
use crate::seed::{derive_seed, rng_from, TAG_CHUNK, TAG_POINT};
use crate::source::{emit_train, voltage_to_phase};
use crate::stats::{ks_test, mean_std, scaled_arcsine_cdf, Histogram, KsResult};

/// Result of any recipe.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentOutput {
    PhaseVoltage(PhaseVoltageResult),
    Randomization(RandomizationResult),
    Sweep(SweepResult),
    Stability(StabilityResult),
}

/// Runs the recipe selected by `config.experiment`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    Ok(match config.experiment {
        ExperimentKind::PhaseVoltage => ExperimentOutput::PhaseVoltage(run_phase_voltage(config)?),
        ExperimentKind::Randomization => ExperimentOutput::Randomization(run_randomization(config)?),
        ExperimentKind::Bb84Sweep | ExperimentKind::DpsSweep => ExperimentOutput::Sweep(run_sweep(config)?),
        ExperimentKind::Stability => ExperimentOutput::Stability(run_stability(config)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseVoltageRow {
    pub voltage: f64,
    pub encoder_phase: f64,
    pub physical_phase: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVoltageResult {
    pub rows: Vec<PhaseVoltageRow>,
    /// Encoder phase at the halfwave voltage.
    pub halfwave_phase: f64,
    /// Largest relative departure of the encoder phase from `πV/V_π`.
    pub encoder_nonlinearity: f64,
    pub drive_per_volt: Option<f64>,
    /// Largest relative difference between laser-model and encoder phases.
    pub physical_deviation: Option<f64>,
}

/// Settling time before a drive perturbation, seconds.
const SETTLE: f64 = 3e-9;
/// Time after the perturbation ends before the phase is read, seconds.
const READOUT_DELAY: f64 = 0.5e-9;
/// Drive step used to calibrate drive per volt.
const CALIBRATION_STEP: f64 = 0.1;

/// Unwrapped optical phase at the end of a run that holds `bias` (threshold
/// units) after a settling period, apart from a square step of `delta` lasting
/// `duration`.
pub fn final_phase(laser: &LaserParams<f64>, bias: f64, delta: f64, duration: f64, dt: f64) -> Result<f64> {
    let end = SETTLE + duration + READOUT_DELAY;
    let drive = DriveWaveform::from_fn(0.0, end, 1e-12, |t| {
        if (SETTLE..SETTLE + duration).contains(&t) {
            bias + delta
        } else {
            bias
        }
    })?;
    let trace = integrate(laser, &drive, None, Noise::Off, dt)?;
    Ok(*trace.phase.last().expect("non-empty trace"))
}

/// Net phase left behind by a drive perturbation, relative to an unperturbed
/// run.
pub fn perturbation_phase(laser: &LaserParams<f64>, bias: f64, delta: f64, duration: f64, dt: f64) -> Result<f64> {
    Ok(final_phase(laser, bias, delta, duration, dt)? - final_phase(laser, bias, 0.0, duration, dt)?)
}

pub fn run_phase_voltage(config: &ExperimentConfig) -> Result<PhaseVoltageResult> {
    let src = &config.source;
    let pv = &config.phase_voltage;
    let ideal = |v: f64| std::f64::consts::PI * v / src.halfwave_voltage;
    let mut rows: Vec<PhaseVoltageRow> = pv
        .voltages
        .iter()
        .map(|&v| {
            Ok(PhaseVoltageRow {
                voltage: v,
                encoder_phase: voltage_to_phase(v, src)?,
                physical_phase: None,
            })
        })
        .collect::<Result<_>>()?;
    let encoder_nonlinearity = rows
        .iter()
        .filter(|r| r.voltage != 0.0)
        .map(|r| (r.encoder_phase / ideal(r.voltage) - 1.0).abs())
        .fold(0.0, f64::max);
    let mut drive_per_volt = None;
    let mut physical_deviation = None;
    if pv.physical {
        let laser = &config.laser;
        let t_m = src.perturbation_duration;
        let base = final_phase(laser, pv.bias, 0.0, t_m, pv.time_step)?;
        let k = if pv.drive_per_volt > 0.0 {
            pv.drive_per_volt
        } else {
            let per_drive =
                (final_phase(laser, pv.bias, CALIBRATION_STEP, t_m, pv.time_step)? - base) / CALIBRATION_STEP;
            if per_drive.abs() < 1e-12 {
                return Err(Error::invalid("laser", "drive perturbations produce no phase shift"));
            }
            ideal(1.0) / per_drive
        };
        let phases: Vec<Result<f64>> = rows
            .par_iter()
            .map(|r| Ok(final_phase(laser, pv.bias, r.voltage * k, t_m, pv.time_step)? - base))
            .collect();
        for (row, p) in rows.iter_mut().zip(phases) {
            row.physical_phase = Some(p?);
        }
        drive_per_volt = Some(k);
        physical_deviation = Some(
            rows.iter()
                .filter(|r| r.voltage != 0.0)
                .map(|r| (r.physical_phase.unwrap_or(0.0) - r.encoder_phase).abs() / r.encoder_phase.abs())
                .fold(0.0, f64::max),
        );
    }
    Ok(PhaseVoltageResult {
        rows,
        halfwave_phase: voltage_to_phase(src.halfwave_voltage, src)?,
        encoder_nonlinearity,
        drive_per_volt,
        physical_deviation,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomizationResult {
    /// Normalised port-0 intensity of the two pulses within each block.
    pub intra: Vec<f64>,
    /// Normalised port-0 intensity of pulses from adjacent blocks.
    pub cross: Vec<f64>,
    pub intra_histogram: Histogram,
    pub cross_histogram: Histogram,
    /// KS test of the cross-block intensities against the arcsine law
    /// spanning the fringe `[(1 − V)/2, (1 + V)/2]`.
    pub cross_ks: KsResult,
    pub intra_std_over_mean: f64,
    pub cross_std_over_mean: f64,
}

pub fn run_randomization(config: &ExperimentConfig) -> Result<RandomizationResult> {
    let r = &config.randomization;
    let src = &config.source;
    let mzi = &config.mzi;
    let phases: Vec<f64> = (0..=r.samples).flat_map(|_| [0.0, r.phase]).collect();
    let train = emit_train(src, &phases, r.randomize, config.rng_seed)?;
    let out = interfere(&train, mzi)?;
    let scale = mzi.transmission() * src.mean_photon_number;
    if !(scale > 0.0) {
        return Err(Error::Config("source.mean_photon_number: must be > 0 for this experiment".into()));
    }
    let (mut intra, mut cross) = (Vec::with_capacity(r.samples), Vec::with_capacity(r.samples));
    for s in &out {
        let v = s.port0 / scale;
        if s.slot % 2 == 1 {
            if intra.len() < r.samples {
                intra.push(v);
            }
        } else {
            cross.push(v);
        }
    }
    let v = mzi.visibility;
    let (lo, hi) = ((1.0 - v) / 2.0, (1.0 + v) / 2.0);
    let cross_ks = ks_test(&cross, |x| scaled_arcsine_cdf(x, lo, hi))?;
    let ratio = |xs: &[f64]| -> Result<f64> {
        let (m, s) = mean_std(xs)?;
        Ok(if m > 0.0 { s / m } else { f64::INFINITY })
    };
    Ok(RandomizationResult {
        intra_histogram: Histogram::new(&intra, 0.0, 1.0, r.bins)?,
        cross_histogram: Histogram::new(&cross, 0.0, 1.0, r.bins)?,
        intra_std_over_mean: ratio(&intra)?,
        cross_std_over_mean: ratio(&cross)?,
        cross_ks,
        intra,
        cross,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub loss_db: f64,
    pub rng_seed: u64,
    pub mc: SiftResult<f64>,
    pub analytic: GainQber<f64>,
    pub analytic_sifted_rate_bps: f64,
    /// Standard error of the gain for this many symbols.
    pub gain_sigma: f64,
    /// Standard error of the QBER for the sifted bits obtained.
    pub qber_sigma: f64,
    /// Secure rate from the Monte Carlo gain and QBER.
    pub secure_rate_bps: f64,
    pub analytic_secure_rate_bps: f64,
}

impl SweepRow {
    pub fn gain_z(&self) -> f64 {
        (self.mc.gain() - self.analytic.gain) / self.gain_sigma
    }

    pub fn qber_z(&self) -> f64 {
        (self.mc.qber - self.analytic.qber) / self.qber_sigma
    }

    pub fn rate_point(&self) -> RatePoint<f64> {
        RatePoint {
            loss_db: self.loss_db,
            sifted_rate_bps: self.mc.sifted_rate,
            qber: self.mc.qber,
            secure_rate_bps: self.secure_rate_bps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub protocol: Protocol,
    pub rows: Vec<SweepRow>,
    /// Analytic curve on a regular loss grid.
    pub curve: Vec<RatePoint<f64>>,
    /// Largest loss with a positive analytic secure rate.
    pub cutoff_db: Option<f64>,
}

/// Per-point seed; a function of the loss value only, so equal losses reached
/// through different routes (attenuator or fibre length) replay identically.
pub fn point_seed(rng_seed: u64, loss_db: f64) -> u64 {
    derive_seed(rng_seed, TAG_POINT, loss_db.to_bits())
}

/// Symbols to simulate so that `min_sifted` sifted bits are expected.
pub fn clocks_for(sweep: &SweepConfig, protocol: Protocol, analytic_gain: f64) -> u64 {
    let per_clock = analytic_gain * protocol.sift_factor::<f64>();
    let needed = if per_clock > 0.0 {
        (sweep.min_sifted as f64 / per_clock).ceil()
    } else {
        f64::INFINITY
    };
    (sweep.trials as f64).max(needed).min(sweep.max_clocks as f64) as u64
}

fn secure_rate(
    protocol: Protocol,
    config: &ExperimentConfig,
    channel: &ChannelParams<f64>,
    gain: f64,
    qber: f64,
) -> Result<f64> {
    let mu = protocol.signal_mean_photons(&config.source);
    let clock = protocol.effective_clock(config.source.clock_rate);
    let f_ec = config.keyrate.f_ec;
    let fraction = match protocol {
        Protocol::Bb84 => {
            let nu = config.keyrate.decoy_nu;
            let decoy = expected_gain_qber(protocol, nu, channel, &config.mzi, &config.detector);
            decoy_bb84_rate(&DecoyInputs {
                mu,
                nu,
                q_mu: gain,
                q_nu: decoy.gain,
                e_mu: qber,
                e_nu: decoy.qber,
                y0: vacuum_yield(&config.detector),
                f_ec,
                sift_factor: protocol.sift_factor(),
            })?
            .rate
        }
        Protocol::Dps => dps_rate(gain, qber.min(0.5), mu, f_ec)?,
    };
    Ok(fraction * clock)
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    let protocol = config
        .experiment
        .protocol()
        .ok_or_else(|| Error::Config(format!("experiment: `{}` is not a sweep", config.experiment.name())))?;
    let base = config.link_setup(protocol);
    let losses = config.sweep_losses();
    let rows: Vec<Result<SweepRow>> = losses
        .par_iter()
        .map(|&loss_db| {
            let mut setup = base;
            setup.channel.loss_db = loss_db;
            let mu = protocol.signal_mean_photons(&setup.source);
            let analytic = expected_gain_qber(protocol, mu, &setup.channel, &setup.mzi, &setup.detector);
            let clocks = clocks_for(&config.sweep, protocol, analytic.gain);
            let seed = point_seed(config.rng_seed, loss_db);
            let mc = simulate_link(&setup, clocks, config.sweep.engine, seed)?;
            let gain_sigma = (analytic.gain * (1.0 - analytic.gain) / clocks as f64).sqrt();
            let qber_sigma = if mc.sifted_count > 0 {
                (analytic.qber * (1.0 - analytic.qber) / mc.sifted_count as f64).sqrt()
            } else {
                f64::INFINITY
            };
            Ok(SweepRow {
                loss_db,
                rng_seed: seed,
                mc,
                analytic,
                analytic_sifted_rate_bps: expected_sifted_rate(protocol, analytic.gain, setup.source.clock_rate),
                gain_sigma,
                qber_sigma,
                secure_rate_bps: secure_rate(protocol, config, &setup.channel, mc.gain(), mc.qber)?,
                analytic_secure_rate_bps: secure_rate(protocol, config, &setup.channel, analytic.gain, analytic.qber)?,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let last = losses.last().copied().unwrap_or(0.0).max(50.0);
    let steps = (last / config.sweep.curve_step).floor() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| i as f64 * config.sweep.curve_step).collect();
    let curve = rate_curve(&base, &config.keyrate, &grid)?;
    let cutoff_db = max_loss(&base, &config.keyrate, 0.0, 200.0).ok();
    Ok(SweepResult {
        protocol,
        rows,
        curve,
        cutoff_db,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityResult {
    /// Sifted bits per integration bin.
    pub n_sift: u64,
    /// QBER of every bin.
    pub series: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
    /// Shot-noise prediction `√(E(1 − E)/n)`.
    pub model_std_dev: f64,
    pub histogram: Histogram,
    /// Normal-approximation counts per histogram bin.
    pub model_counts: Vec<f64>,
}

/// Bins per independently seeded shard.
const STABILITY_SHARD: usize = 4096;

pub fn run_stability(config: &ExperimentConfig) -> Result<StabilityResult> {
    let s = &config.stability;
    let bins = (s.duration / s.integration_time).floor() as usize;
    let n_sift = (s.sifted_rate_bps * s.integration_time).round() as u64;
    let dist = Binomial::new(n_sift, s.true_qber).map_err(|e| Error::invalid("stability.true_qber", e.to_string()))?;
    let shards = bins.div_ceil(STABILITY_SHARD);
    let series: Vec<f64> = (0..shards)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = rng_from(derive_seed(config.rng_seed, TAG_CHUNK, c as u64));
            let len = STABILITY_SHARD.min(bins - c * STABILITY_SHARD);
            (0..len)
                .map(|_| dist.sample(&mut rng) as f64 / n_sift as f64)
                .collect::<Vec<_>>()
        })
        .collect();
    let (mean, std_dev) = mean_std(&series)?;
    let model_std_dev = (s.true_qber * (1.0 - s.true_qber) / n_sift as f64).sqrt();
    let half_span = 5.0 * model_std_dev.max(1e-12);
    let histogram = Histogram::new(&series, s.true_qber - half_span, s.true_qber + half_span, s.bins)?;
    let width = histogram.bin_width();
    let model_counts = (0..s.bins)
        .map(|i| {
            let z = (histogram.bin_center(i) - s.true_qber) / model_std_dev;
            bins as f64 * width * (-0.5 * z * z).exp() / (model_std_dev * (2.0 * std::f64::consts::PI).sqrt())
        })
        .collect();
    Ok(StabilityResult {
        n_sift,
        series,
        mean,
        std_dev,
        model_std_dev,
        histogram,
        model_counts,
    })
}
