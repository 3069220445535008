//! BB84 (phase pairs) and differential-phase-shift symbol streams, sifting,
//! and the analytic gain/QBER model the Monte Carlo links are checked against.

mod link;

pub use link::{simulate_link, Engine, LinkSetup};

use rand::Rng;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::num::Real;
use crate::optics::{ChannelParams, ClickRecord, DetectorParams, InterferometerParams, SlotIntensities};
use crate::seed::{derive_seed, rng_from, TAG_BOB, TAG_SYMBOLS};
use crate::source::{PulseTrain, SourceConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Bb84,
    Dps,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Bb84 => "bb84",
            Protocol::Dps => "dps",
        }
    }

    /// Symbols per second for a pulse clock: BB84 uses one pulse pair per
    /// symbol, DPS one pulse.
    pub fn effective_clock<T: Real>(self, pulse_clock: T) -> T {
        match self {
            Protocol::Bb84 => pulse_clock / T::lit(2.0),
            Protocol::Dps => pulse_clock,
        }
    }

    /// Fraction of a symbol's energy that lands in the sifted interference
    /// slot. A BB84 pair puts half its energy into the central slot and the
    /// rest into the discarded satellites; every DPS slot is used.
    pub fn slot_duty<T: Real>(self) -> T {
        match self {
            Protocol::Bb84 => T::lit(0.5),
            Protocol::Dps => T::one(),
        }
    }

    /// Fraction of detection events kept by sifting (passive basis choice).
    pub fn sift_factor<T: Real>(self) -> T {
        match self {
            Protocol::Bb84 => T::lit(0.5),
            Protocol::Dps => T::one(),
        }
    }

    /// Mean photon number per symbol for a source setting.
    pub fn signal_mean_photons<T: Real>(self, source: &SourceConfig<T>) -> T {
        match self {
            Protocol::Bb84 => source.mean_photon_number * T::lit(2.0),
            Protocol::Dps => source.mean_photon_number,
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bb84" => Ok(Protocol::Bb84),
            "dps" => Ok(Protocol::Dps),
            other => Err(Error::Config(format!("unknown protocol `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random::<bool>() {
            Basis::X
        } else {
            Basis::Z
        }
    }

    /// Decoder phase offset that maps this basis' two states onto the
    /// constructive and destructive outputs.
    pub fn receiver_phase<T: Real>(self) -> T {
        match self {
            Basis::Z => T::zero(),
            Basis::X => -T::FRAC_PI_2(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bb84Symbol {
    pub basis: Basis,
    pub bit: bool,
}

impl Bb84Symbol {
    /// (Z,0)→0, (Z,1)→π, (X,0)→π/2, (X,1)→3π/2.
    pub fn phase_delta<T: Real>(self) -> T {
        let basis = match self.basis {
            Basis::Z => T::zero(),
            Basis::X => T::FRAC_PI_2(),
        };
        if self.bit {
            basis + T::PI()
        } else {
            basis
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let basis = Basis::random(rng);
        Self {
            basis,
            bit: rng.random(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DpsSymbol {
    pub bit: bool,
}

impl DpsSymbol {
    /// Phase relative to the preceding pulse: 0 or π.
    pub fn phase_delta<T: Real>(self) -> T {
        if self.bit {
            T::PI()
        } else {
            T::zero()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Symbols {
    Bb84(Vec<Bb84Symbol>),
    Dps(Vec<DpsSymbol>),
}

impl Symbols {
    pub fn len(&self) -> usize {
        match self {
            Symbols::Bb84(s) => s.len(),
            Symbols::Dps(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn generate_symbols(protocol: Protocol, count: usize, rng_seed: u64) -> Result<Symbols> {
    ensure(count >= 1, "count", || "must be >= 1".into())?;
    Ok(match protocol {
        Protocol::Bb84 => Symbols::Bb84(generate_bb84_symbols(count, rng_seed)),
        Protocol::Dps => Symbols::Dps(generate_dps_symbols(count, rng_seed)),
    })
}

pub fn generate_bb84_symbols(count: usize, rng_seed: u64) -> Vec<Bb84Symbol> {
    let mut rng = rng_from(derive_seed(rng_seed, TAG_SYMBOLS, 0));
    (0..count).map(|_| Bb84Symbol::random(&mut rng)).collect()
}

pub fn generate_dps_symbols(count: usize, rng_seed: u64) -> Vec<DpsSymbol> {
    let mut rng = rng_from(derive_seed(rng_seed, TAG_SYMBOLS, 0));
    (0..count).map(|_| DpsSymbol { bit: rng.random() }).collect()
}

/// Receiver basis choices, one fair coin per pair.
pub fn generate_bases(count: usize, rng_seed: u64) -> Vec<Basis> {
    let mut rng = rng_from(derive_seed(rng_seed, TAG_BOB, 0));
    (0..count).map(|_| Basis::random(&mut rng)).collect()
}

/// Pulse phases for a BB84 stream: each pair is `(0, phase_delta)`.
pub fn bb84_encode<T: Real>(symbols: &[Bb84Symbol], config: &SourceConfig<T>) -> Result<Vec<T>> {
    ensure(config.block_length == 2, "block_length", || {
        format!("BB84 pair encoding needs block_length 2, got {}", config.block_length)
    })?;
    Ok(symbols
        .iter()
        .flat_map(|s| [T::zero(), s.phase_delta::<T>()])
        .collect())
}

/// Pulse phases for a DPS stream: each pulse advances the previous one by its
/// symbol's phase delta. The first pulse has no reference.
pub fn dps_encode<T: Real>(symbols: &[DpsSymbol]) -> Vec<T> {
    let mut phase = T::zero();
    symbols
        .iter()
        .map(|s| {
            phase = (phase + s.phase_delta::<T>()).wrap_phase();
            phase
        })
        .collect()
}

/// Central-slot decoder outputs for BB84 pairs, using the receiver basis
/// chosen for each pair. Pair `j` is pulses `2j` and `2j+1` of the train.
pub fn bb84_receiver_intensities<T: Real>(
    train: &PulseTrain<T>,
    mzi: &InterferometerParams<T>,
    bob_bases: &[Basis],
) -> Result<Vec<SlotIntensities<T>>> {
    ensure(train.len() == 2 * bob_bases.len(), "bob_bases", || {
        format!("{} bases for {} pulses", bob_bases.len(), train.len())
    })?;
    ensure(mzi.delay_slots(train.config.clock_rate)? == 1, "delay", || {
        "BB84 pair decoding needs a one-slot delay".into()
    })?;
    let half = T::lit(0.5);
    Ok(train
        .pulses
        .chunks_exact(2)
        .zip(bob_bases)
        .map(|(pair, basis)| {
            let delta = pair[1].phase - pair[0].phase + mzi.internal_phase + basis.receiver_phase::<T>();
            let (port0, port1) = mzi.split(half * (pair[0].mean_photons + pair[1].mean_photons), delta);
            SlotIntensities {
                slot: pair[1].slot_index,
                port0,
                port1,
            }
        })
        .collect())
}

/// Raw-key statistics after sifting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiftResult<T> {
    /// Symbols sent.
    pub clocks: u64,
    /// Symbols with at least one click in the sifting slot.
    pub clicked_clocks: u64,
    pub sifted_count: u64,
    pub error_count: u64,
    pub qber: T,
    pub sifted_rate: T,
    pub effective_clock: T,
}

impl<T: Real> SiftResult<T> {
    pub fn from_counts(clocks: u64, clicked_clocks: u64, sifted_count: u64, error_count: u64, effective_clock: T) -> Self {
        let qber = if sifted_count > 0 {
            T::lit(error_count as f64) / T::lit(sifted_count as f64)
        } else {
            T::zero()
        };
        let sifted_rate = if clocks > 0 {
            T::lit(sifted_count as f64) * effective_clock / T::lit(clocks as f64)
        } else {
            T::zero()
        };
        Self {
            clocks,
            clicked_clocks,
            sifted_count,
            error_count,
            qber,
            sifted_rate,
            effective_clock,
        }
    }

    /// Combines tallies from disjoint shards.
    pub fn merge(&self, other: &Self) -> Self {
        Self::from_counts(
            self.clocks + other.clocks,
            self.clicked_clocks + other.clicked_clocks,
            self.sifted_count + other.sifted_count,
            self.error_count + other.error_count,
            self.effective_clock,
        )
    }

    /// Fraction of symbols with a click.
    pub fn gain(&self) -> T {
        if self.clocks == 0 {
            T::zero()
        } else {
            T::lit(self.clicked_clocks as f64) / T::lit(self.clocks as f64)
        }
    }

    pub fn record(&self, protocol: Protocol, loss_db: T) -> SiftRecord {
        SiftRecord {
            protocol: protocol.name(),
            loss_db: loss_db.as_f64(),
            sifted_count: self.sifted_count,
            error_count: self.error_count,
            qber: self.qber.as_f64(),
            sifted_rate_bps: self.sifted_rate.as_f64(),
        }
    }
}

/// JSON export form of a [`SiftResult`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiftRecord {
    pub protocol: &'static str,
    pub loss_db: f64,
    pub sifted_count: u64,
    pub error_count: u64,
    pub qber: f64,
    pub sifted_rate_bps: f64,
}

/// Where the symbol stream sits in slot space and how ties are broken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiftContext<T> {
    pub pulse_clock: T,
    /// Slot index of the first pulse of symbol 0.
    pub first_slot: u64,
    /// Coherence block length of the train (DPS edge handling).
    pub block_length: u64,
    /// Seed for the fair coin that resolves double clicks.
    pub coin_seed: u64,
}

impl<T: Real> SiftContext<T> {
    pub fn new(pulse_clock: T, block_length: u64, coin_seed: u64) -> Self {
        Self {
            pulse_clock,
            first_slot: 0,
            block_length,
            coin_seed,
        }
    }
}

/// Bit read from a click pattern; `None` when nothing fired. Double clicks
/// get a fair coin.
pub(crate) fn decide_bit<R: Rng + ?Sized>(click: [bool; 2], rng: &mut R) -> Option<bool> {
    match click {
        [false, false] => None,
        [true, false] => Some(false),
        [false, true] => Some(true),
        [true, true] => Some(rng.random()),
    }
}

/// Keeps central-slot clicks of pairs whose receiver basis matches the
/// sender's and counts disagreements with the sender's bits.
pub fn bb84_sift<T: Real>(
    symbols: &[Bb84Symbol],
    bob_bases: &[Basis],
    clicks: &ClickRecord,
    ctx: &SiftContext<T>,
) -> Result<SiftResult<T>> {
    ensure(symbols.len() == bob_bases.len(), "bob_bases", || {
        format!("{} bases for {} symbols", bob_bases.len(), symbols.len())
    })?;
    ensure(clicks.len() == symbols.len(), "clicks", || {
        format!("{} click slots for {} symbols", clicks.len(), symbols.len())
    })?;
    let mut coin = rng_from(ctx.coin_seed);
    let (mut clicked, mut sifted, mut errors) = (0u64, 0u64, 0u64);
    for (j, ((sym, basis), (&slot, &click))) in symbols
        .iter()
        .zip(bob_bases)
        .zip(clicks.slots.iter().zip(&clicks.clicks))
        .enumerate()
    {
        let central = ctx.first_slot + 2 * j as u64 + 1;
        ensure(slot == central, "clicks", || {
            format!("slot {slot} recorded where central slot {central} expected")
        })?;
        let Some(bit) = decide_bit(click, &mut coin) else {
            continue;
        };
        clicked += 1;
        if *basis != sym.basis {
            continue;
        }
        sifted += 1;
        if bit != sym.bit {
            errors += 1;
        }
    }
    Ok(SiftResult::from_counts(
        symbols.len() as u64,
        clicked,
        sifted,
        errors,
        Protocol::Bb84.effective_clock(ctx.pulse_clock),
    ))
}

/// Reads one bit per clicked interference slot; slots whose two pulses lie in
/// different coherence blocks are discarded.
pub fn dps_sift<T: Real>(symbols: &[DpsSymbol], clicks: &ClickRecord, ctx: &SiftContext<T>) -> Result<SiftResult<T>> {
    ensure(ctx.block_length >= 2, "block_length", || {
        "DPS needs at least two pulses per coherence block".into()
    })?;
    let mut coin = rng_from(ctx.coin_seed);
    let (mut clicked, mut sifted, mut errors) = (0u64, 0u64, 0u64);
    for (&slot, &click) in clicks.slots.iter().zip(&clicks.clicks) {
        let idx = slot
            .checked_sub(ctx.first_slot)
            .filter(|&i| (i as usize) < symbols.len())
            .ok_or_else(|| Error::invalid("clicks", format!("slot {slot} outside the symbol stream")))?;
        if slot % ctx.block_length == 0 {
            continue;
        }
        let Some(bit) = decide_bit(click, &mut coin) else {
            continue;
        };
        clicked += 1;
        sifted += 1;
        if bit != symbols[idx as usize].bit {
            errors += 1;
        }
    }
    Ok(SiftResult::from_counts(
        symbols.len() as u64,
        clicked,
        sifted,
        errors,
        Protocol::Dps.effective_clock(ctx.pulse_clock),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainQber<T> {
    /// Probability per symbol of at least one click in the sifting slot.
    pub gain: T,
    pub qber: T,
}

/// Overall transmittance from source to detection for the sifting slot:
/// channel × decoder loss × detector efficiency × slot duty.
pub fn total_transmittance<T: Real>(
    protocol: Protocol,
    channel: &ChannelParams<T>,
    mzi: &InterferometerParams<T>,
    det: &DetectorParams<T>,
) -> T {
    channel.transmission() * mzi.transmission() * det.efficiency * protocol.slot_duty::<T>()
}

/// Background yield per symbol from the two detectors watching the slot.
pub fn vacuum_yield<T: Real>(det: &DetectorParams<T>) -> T {
    let pd = det.dark_probability();
    T::one() - (T::one() - pd) * (T::one() - pd)
}

/// Closed-form gain and QBER for a weak coherent signal of `mu` photons per
/// symbol: `Q = 1 − (1 − Y₀) e^{−μη}`, `E = [e_det (1 − e^{−μη}) + Y₀/2] / Q`.
pub fn expected_gain_qber<T: Real>(
    protocol: Protocol,
    mu: T,
    channel: &ChannelParams<T>,
    mzi: &InterferometerParams<T>,
    det: &DetectorParams<T>,
) -> GainQber<T> {
    let eta = total_transmittance(protocol, channel, mzi, det);
    let y0 = vacuum_yield(det);
    let signal = -(-mu * eta).exp_m1();
    let gain = y0 + (T::one() - y0) * signal;
    let e_det = (T::one() - mzi.visibility) / T::lit(2.0);
    let qber = if gain > T::zero() {
        (e_det * signal + T::lit(0.5) * y0) / gain
    } else {
        T::zero()
    };
    GainQber { gain, qber }
}

/// Sifted bits per second implied by an expected gain.
pub fn expected_sifted_rate<T: Real>(protocol: Protocol, gain: T, pulse_clock: T) -> T {
    protocol.effective_clock(pulse_clock) * gain * protocol.sift_factor::<T>()
}

#[cfg(test)]
mod tests;
