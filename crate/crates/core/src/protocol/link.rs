//! Monte Carlo simulation of a complete link: symbols, source, channel,
//! decoder, detectors and sifting.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;

use super::{
    bb84_encode, bb84_receiver_intensities, bb84_sift, decide_bit, dps_encode, dps_sift, generate_bases,
    generate_bb84_symbols, generate_dps_symbols, Basis, Bb84Symbol, Protocol, SiftContext, SiftResult,
};
use crate::error::{ensure, Error, Result};
use crate::num::Real;
use crate::optics::{attenuate, click_probability, detect, interfere, ChannelParams, DetectorParams, InterferometerParams};
use crate::seed::{derive_seed, rng_from, TAG_CHUNK, TAG_COIN};
use crate::source::{emit_train_at, SourceConfig};

/// Symbols per shard in the pulse-by-pulse engine.
const PIPELINE_CHUNK: u64 = 1 << 16;
/// Symbols per shard in the event-driven engine.
const EVENT_SHARD: u64 = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// Builds every pulse, interferes, and samples every detector gate.
    Pipeline,
    /// Samples only the gates that click. The per-symbol click probability
    /// does not depend on the symbol, so the gaps between clicked symbols are
    /// geometric; the symbol and outcome are then drawn conditionally.
    EventDriven,
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pipeline" => Ok(Engine::Pipeline),
            "event" | "event-driven" => Ok(Engine::EventDriven),
            other => Err(Error::Config(format!("unknown engine `{other}`"))),
        }
    }
}

/// Everything needed to simulate one link setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSetup<T> {
    pub protocol: Protocol,
    pub source: SourceConfig<T>,
    pub channel: ChannelParams<T>,
    pub mzi: InterferometerParams<T>,
    pub detector: DetectorParams<T>,
    /// Draw a fresh global phase for every coherence block.
    pub randomize_global_phase: bool,
}

impl<T: Real> LinkSetup<T> {
    /// BB84 with 0.25 photons per pulse and a 95.2 % visibility decoder.
    pub fn bb84() -> Self {
        Self {
            protocol: Protocol::Bb84,
            source: SourceConfig::default(),
            channel: ChannelParams::default(),
            mzi: InterferometerParams {
                visibility: T::lit(0.952),
                ..Default::default()
            },
            detector: DetectorParams::default(),
            randomize_global_phase: true,
        }
    }

    /// DPS with 0.2 photons per pulse and a 96.2 % visibility decoder.
    pub fn dps() -> Self {
        Self {
            protocol: Protocol::Dps,
            source: SourceConfig {
                mean_photon_number: T::lit(0.2),
                ..Default::default()
            },
            channel: ChannelParams::default(),
            mzi: InterferometerParams {
                visibility: T::lit(0.962),
                ..Default::default()
            },
            detector: DetectorParams::default(),
            randomize_global_phase: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.channel.validate()?;
        self.mzi.validate()?;
        self.detector.validate()?;
        ensure(self.mzi.delay_slots(self.source.clock_rate)? == 1, "delay", || {
            "decoder delay must equal one pulse period".into()
        })?;
        if self.protocol == Protocol::Bb84 {
            ensure(self.source.block_length == 2, "block_length", || {
                format!("BB84 needs block_length 2, got {}", self.source.block_length)
            })?;
        }
        Ok(())
    }
}

/// Simulates `clocks` symbols (pulse pairs for BB84, pulses for DPS).
pub fn simulate_link<T: Real>(setup: &LinkSetup<T>, clocks: u64, engine: Engine, rng_seed: u64) -> Result<SiftResult<T>> {
    setup.validate()?;
    ensure(clocks >= 2, "clocks", || "must be >= 2".into())?;
    let shard = match engine {
        Engine::Pipeline => PIPELINE_CHUNK,
        Engine::EventDriven => EVENT_SHARD,
    };
    let shards = clocks.div_ceil(shard);
    let parts: Vec<Result<SiftResult<T>>> = (0..shards)
        .into_par_iter()
        .map(|c| {
            let start = c * shard;
            let len = shard.min(clocks - start);
            let seed = derive_seed(rng_seed, TAG_CHUNK, c);
            match (engine, setup.protocol) {
                (Engine::Pipeline, Protocol::Bb84) => bb84_pipeline(setup, start, len, seed, rng_seed),
                (Engine::Pipeline, Protocol::Dps) => dps_pipeline(setup, start, len, seed, rng_seed),
                (Engine::EventDriven, protocol) => {
                    let eligible = if protocol == Protocol::Dps && c == 0 { len - 1 } else { len };
                    event_shard(setup, len, eligible, seed)
                }
            }
        })
        .collect();
    let mut total: Option<SiftResult<T>> = None;
    for part in parts {
        let part = part?;
        total = Some(match total {
            Some(t) => t.merge(&part),
            None => part,
        });
    }
    Ok(total.expect("at least one shard"))
}

fn bb84_pipeline<T: Real>(setup: &LinkSetup<T>, start: u64, len: u64, seed: u64, phase_seed: u64) -> Result<SiftResult<T>> {
    let n = len as usize;
    let symbols = generate_bb84_symbols(n, seed);
    let bases = generate_bases(n, seed);
    let phases = bb84_encode(&symbols, &setup.source)?;
    let first_slot = 2 * start;
    let train = emit_train_at(&setup.source, &phases, setup.randomize_global_phase, phase_seed, first_slot)?;
    let train = attenuate(&train, &setup.channel);
    let intensities = bb84_receiver_intensities(&train, &setup.mzi, &bases)?;
    let clicks = detect(&intensities, &setup.detector, seed);
    let ctx = SiftContext {
        pulse_clock: setup.source.clock_rate,
        first_slot,
        block_length: 2,
        coin_seed: derive_seed(seed, TAG_COIN, 0),
    };
    bb84_sift(&symbols, &bases, &clicks, &ctx)
}

fn dps_pipeline<T: Real>(setup: &LinkSetup<T>, start: u64, len: u64, seed: u64, phase_seed: u64) -> Result<SiftResult<T>> {
    // Each shard is one coherence block: the DPS source runs continuously.
    let source = SourceConfig {
        block_length: PIPELINE_CHUNK as usize,
        ..setup.source
    };
    let symbols = generate_dps_symbols(len as usize, seed);
    let phases = dps_encode::<T>(&symbols);
    let train = emit_train_at(&source, &phases, setup.randomize_global_phase, phase_seed, start)?;
    let train = attenuate(&train, &setup.channel);
    let intensities = interfere(&train, &setup.mzi)?;
    let clicks = detect(&intensities, &setup.detector, seed);
    let ctx = SiftContext {
        pulse_clock: setup.source.clock_rate,
        first_slot: start,
        block_length: PIPELINE_CHUNK,
        coin_seed: derive_seed(seed, TAG_COIN, 0),
    };
    dps_sift(&symbols, &clicks, &ctx)
}

/// Draws a click pattern given that at least one of two independent
/// detectors fired.
fn conditional_clicks<T: Real, R: Rng + ?Sized>(p0: T, p1: T, rng: &mut R) -> [bool; 2] {
    let only0 = p0 * (T::one() - p1);
    let only1 = (T::one() - p0) * p1;
    let both = p0 * p1;
    let u = T::sample_unit(rng) * (only0 + only1 + both);
    if u < only0 {
        [true, false]
    } else if u < only0 + only1 {
        [false, true]
    } else {
        [true, true]
    }
}

fn event_shard<T: Real>(setup: &LinkSetup<T>, clocks: u64, eligible: u64, seed: u64) -> Result<SiftResult<T>> {
    let protocol = setup.protocol;
    let mzi = &setup.mzi;
    let det = &setup.detector;
    // Both pulses feeding an interference slot carry the same attenuated
    // mean, so the slot mean equals the pulse mean.
    let slot_mean = setup.source.mean_photon_number * setup.channel.transmission();
    let (a, b) = mzi.split(slot_mean, T::zero());
    let p_any = T::one() - (T::one() - click_probability(a, det)) * (T::one() - click_probability(b, det));
    let effective_clock = protocol.effective_clock(setup.source.clock_rate);
    if p_any <= T::zero() || eligible == 0 {
        return Ok(SiftResult::from_counts(clocks, 0, 0, 0, effective_clock));
    }
    let gaps = Geometric::new(p_any.as_f64().min(1.0))
        .map_err(|e| Error::invalid("click probability", e.to_string()))?;
    let mut rng = rng_from(seed);
    let (mut clicked, mut sifted, mut errors) = (0u64, 0u64, 0u64);
    let mut pos = 0u64;
    loop {
        pos = pos.saturating_add(gaps.sample(&mut rng));
        if pos >= eligible {
            break;
        }
        pos += 1;
        clicked += 1;
        let (delta, basis_match, bit) = match protocol {
            Protocol::Bb84 => {
                let sym = Bb84Symbol::random(&mut rng);
                let basis = Basis::random(&mut rng);
                (
                    sym.phase_delta::<T>() + basis.receiver_phase::<T>(),
                    basis == sym.basis,
                    sym.bit,
                )
            }
            Protocol::Dps => {
                let bit: bool = rng.random();
                let delta = if bit { T::PI() } else { T::zero() };
                (delta, true, bit)
            }
        };
        let (m0, m1) = mzi.split(slot_mean, delta + mzi.internal_phase);
        let click = conditional_clicks(click_probability(m0, det), click_probability(m1, det), &mut rng);
        let read = decide_bit(click, &mut rng).expect("conditioned on a click");
        if !basis_match {
            continue;
        }
        sifted += 1;
        if read != bit {
            errors += 1;
        }
    }
    Ok(SiftResult::from_counts(clocks, clicked, sifted, errors, effective_clock))
}
