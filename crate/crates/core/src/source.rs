//! Phenomenological model of the directly phase-modulated source: drive
//! voltage to chirp to phase, and the emitted pulse train with per-block
//! global phase randomisation.

use std::io::{BufRead, Write};

use crate::error::{ensure, Error, Result};
use crate::num::Real;
use crate::seed::{derive_seed, mix64, unit_from_hash, TAG_GLOBAL_PHASE};

/// Visibility reported for a seed laser with a 150 kHz linewidth.
pub const NARROW_LINEWIDTH_V_MAX: f64 = 0.9992;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceConfig<T> {
    /// Pulse clock, Hz.
    pub clock_rate: T,
    /// Metadata only; pulses are modelled as slot-wide deltas.
    pub pulse_width: T,
    pub wavelength: T,
    pub halfwave_voltage: T,
    /// Duration of the drive perturbation that sets one phase value, seconds.
    pub perturbation_duration: T,
    /// Pulses seeded by one quasi steady-state emission period.
    pub block_length: usize,
    /// Mean photons per pulse at the source output.
    pub mean_photon_number: T,
}

impl<T: Real> Default for SourceConfig<T> {
    fn default() -> Self {
        Self {
            clock_rate: T::lit(2e9),
            pulse_width: T::lit(70e-12),
            wavelength: T::lit(1551e-9),
            halfwave_voltage: T::lit(0.35),
            perturbation_duration: T::lit(250e-12),
            block_length: 2,
            mean_photon_number: T::lit(0.25),
        }
    }
}

impl<T: Real> SourceConfig<T> {
    pub fn validate(&self) -> Result<()> {
        ensure(self.clock_rate.is_finite() && self.clock_rate > T::zero(), "clock_rate", || {
            format!("must be > 0, got {}", self.clock_rate)
        })?;
        ensure(
            self.pulse_width > T::zero() && self.pulse_width < self.slot_period(),
            "pulse_width",
            || format!("must lie in (0, 1/clock_rate), got {}", self.pulse_width),
        )?;
        ensure(self.wavelength > T::zero(), "wavelength", || "must be > 0".into())?;
        ensure(
            self.halfwave_voltage.is_finite() && self.halfwave_voltage > T::zero(),
            "halfwave_voltage",
            || format!("must be > 0, got {}", self.halfwave_voltage),
        )?;
        ensure(
            self.perturbation_duration.is_finite() && self.perturbation_duration > T::zero(),
            "perturbation_duration",
            || format!("must be > 0, got {}", self.perturbation_duration),
        )?;
        ensure(self.block_length >= 1, "block_length", || "must be >= 1".into())?;
        ensure(
            self.mean_photon_number.is_finite() && self.mean_photon_number >= T::zero(),
            "mean_photon_number",
            || format!("must be >= 0, got {}", self.mean_photon_number),
        )
    }

    pub fn slot_period(&self) -> T {
        T::one() / self.clock_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalPulse<T> {
    pub slot_index: u64,
    /// Phase in `[0, 2π)`, including the block's global phase.
    pub phase: T,
    pub mean_photons: T,
    /// Pulses sharing a block id are mutually coherent.
    pub block_id: u64,
    pub global_phase: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrain<T> {
    pub pulses: Vec<OpticalPulse<T>>,
    pub config: SourceConfig<T>,
}

impl<T: Real> PulseTrain<T> {
    /// Checks the train invariants: increasing slots, non-decreasing blocks,
    /// one global phase per block, non-negative photon numbers.
    pub fn validate(&self) -> Result<()> {
        for w in self.pulses.windows(2) {
            ensure(w[1].slot_index > w[0].slot_index, "slot_index", || {
                format!("not strictly increasing at slot {}", w[1].slot_index)
            })?;
            ensure(w[1].block_id >= w[0].block_id, "block_id", || {
                format!("decreasing at slot {}", w[1].slot_index)
            })?;
            if w[1].block_id == w[0].block_id {
                ensure(w[1].global_phase == w[0].global_phase, "global_phase", || {
                    format!("differs within block {}", w[0].block_id)
                })?;
            }
        }
        if let Some(p) = self.pulses.iter().find(|p| !(p.mean_photons >= T::zero())) {
            return Err(Error::invalid("mean_photons", format!("negative at slot {}", p.slot_index)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    /// Writes `slot,phase_rad,mean_photons,block_id` CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "slot,phase_rad,mean_photons,block_id")?;
        for p in &self.pulses {
            writeln!(out, "{},{:e},{:e},{}", p.slot_index, p.phase, p.mean_photons, p.block_id)?;
        }
        Ok(())
    }
}

/// Phase accumulated by a frequency shift held for `t_m`: `2π Δν t_m`.
pub fn chirp_to_phase<T: Real>(delta_nu: T, t_m: T) -> Result<T> {
    ensure(t_m > T::zero(), "t_m", || format!("must be > 0, got {t_m}"))?;
    Ok(T::TAU() * (delta_nu * t_m))
}

/// Linear voltage-to-chirp conversion calibrated so that the halfwave voltage
/// held for the perturbation duration yields a phase of π.
pub fn voltage_to_chirp<T: Real>(voltage: T, config: &SourceConfig<T>) -> T {
    voltage / (T::lit(2.0) * config.halfwave_voltage * config.perturbation_duration)
}

/// Signed phase shift produced by a drive perturbation of `voltage`.
pub fn voltage_to_phase<T: Real>(voltage: T, config: &SourceConfig<T>) -> Result<T> {
    chirp_to_phase(voltage_to_chirp(voltage, config), config.perturbation_duration)
}

/// Global phase of a block, a pure function of `(seed, block_id)` so trains
/// generated in block-aligned chunks agree with one generated in one piece.
pub fn block_global_phase<T: Real>(seed: u64, block_id: u64) -> T {
    let h = mix64(derive_seed(seed, TAG_GLOBAL_PHASE, 0) ^ mix64(block_id));
    T::lit(unit_from_hash(h)) * T::TAU()
}

/// Emits one pulse per symbol starting at slot 0.
pub fn emit_train<T: Real>(
    config: &SourceConfig<T>,
    phase_symbols: &[T],
    randomize_blocks: bool,
    rng_seed: u64,
) -> Result<PulseTrain<T>> {
    emit_train_at(config, phase_symbols, randomize_blocks, rng_seed, 0)
}

/// Emits one pulse per symbol starting at `first_slot`, which must sit on a
/// block boundary.
pub fn emit_train_at<T: Real>(
    config: &SourceConfig<T>,
    phase_symbols: &[T],
    randomize_blocks: bool,
    rng_seed: u64,
    first_slot: u64,
) -> Result<PulseTrain<T>> {
    config.validate()?;
    ensure(!phase_symbols.is_empty(), "phase_symbols", || "must not be empty".into())?;
    let block_len = config.block_length as u64;
    ensure(first_slot % block_len == 0, "first_slot", || {
        format!("{first_slot} is not a multiple of block_length {block_len}")
    })?;
    let mut pulses = Vec::with_capacity(phase_symbols.len());
    let mut current: Option<(u64, T)> = None;
    for (i, &symbol) in phase_symbols.iter().enumerate() {
        let slot_index = first_slot + i as u64;
        let block_id = slot_index / block_len;
        let global_phase = match current {
            Some((b, g)) if b == block_id => g,
            _ => {
                let g = if randomize_blocks {
                    block_global_phase(rng_seed, block_id)
                } else {
                    T::zero()
                };
                current = Some((block_id, g));
                g
            }
        };
        pulses.push(OpticalPulse {
            slot_index,
            phase: (symbol + global_phase).wrap_phase(),
            mean_photons: config.mean_photon_number,
            block_id,
            global_phase,
        });
    }
    Ok(PulseTrain {
        pulses,
        config: *config,
    })
}

/// Saturating seeding-visibility curve `V(P) = v_max (1 − e^{−P/p0})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityCalibration<T> {
    pub v_max: T,
    pub p0_watts: T,
}

impl<T: Real> Default for VisibilityCalibration<T> {
    fn default() -> Self {
        // p0 = 10 µW puts V(50 µW) at 99.3 % of v_max.
        Self {
            v_max: T::lit(0.9906),
            p0_watts: T::lit(10e-6),
        }
    }
}

impl<T: Real> VisibilityCalibration<T> {
    pub fn validate(&self) -> Result<()> {
        ensure(self.v_max >= T::zero() && self.v_max <= T::one(), "v_max", || {
            format!("must lie in [0, 1], got {}", self.v_max)
        })?;
        ensure(self.p0_watts.is_finite() && self.p0_watts > T::zero(), "p0_watts", || {
            format!("must be > 0, got {}", self.p0_watts)
        })
    }

    /// Parses `key = value` lines with keys `v_max` and `p0_watts`; `#` starts
    /// a comment. Both keys are required.
    pub fn parse<R: BufRead>(input: R) -> Result<Self> {
        let (mut v_max, mut p0) = (None, None);
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("calibration line {}: expected key = value", lineno + 1)))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("calibration line {}: bad number", lineno + 1)))?;
            match key.trim() {
                "v_max" => v_max = Some(T::lit(value)),
                "p0_watts" => p0 = Some(T::lit(value)),
                other => return Err(Error::Config(format!("calibration: unknown key `{other}`"))),
            }
        }
        let cal = Self {
            v_max: v_max.ok_or_else(|| Error::Config("calibration: missing v_max".into()))?,
            p0_watts: p0.ok_or_else(|| Error::Config("calibration: missing p0_watts".into()))?,
        };
        cal.validate()?;
        Ok(cal)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "v_max = {}", self.v_max)?;
        writeln!(out, "p0_watts = {:e}", self.p0_watts)?;
        Ok(())
    }
}

/// First-order interference visibility transferred to the seeded pulses for
/// a given injection power.
pub fn seeding_visibility<T: Real>(injection_power: T, curve: &VisibilityCalibration<T>) -> Result<T> {
    ensure(injection_power >= T::zero(), "injection_power", || {
        format!("must be >= 0, got {injection_power}")
    })?;
    Ok(curve.v_max * (T::one() - (-injection_power / curve.p0_watts).exp()))
}
