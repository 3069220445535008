//! Fibre/attenuator channel, asymmetric Mach-Zehnder decoder and gated
//! threshold detectors.

use std::io::Write;

use rand::Rng;

use crate::error::{ensure, Result};
use crate::num::{db_to_transmission, Real};
use crate::seed::{derive_seed, rng_from, TAG_DETECT};
use crate::source::PulseTrain;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams<T> {
    pub loss_db: T,
    /// Fibre attenuation used by [`ChannelParams::fiber`].
    pub loss_per_km: T,
}

impl<T: Real> Default for ChannelParams<T> {
    fn default() -> Self {
        Self {
            loss_db: T::zero(),
            loss_per_km: T::lit(0.2),
        }
    }
}

impl<T: Real> ChannelParams<T> {
    pub fn attenuator(loss_db: T) -> Self {
        Self {
            loss_db,
            ..Default::default()
        }
    }

    /// Fibre spool of `km` kilometres at `loss_per_km` dB/km.
    pub fn fiber(km: T, loss_per_km: T) -> Self {
        Self {
            loss_db: km * loss_per_km,
            loss_per_km,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.loss_db.is_finite() && self.loss_db >= T::zero(), "loss_db", || {
            format!("must be finite and >= 0, got {}", self.loss_db)
        })?;
        ensure(self.loss_per_km.is_finite() && self.loss_per_km >= T::zero(), "loss_per_km", || {
            format!("must be finite and >= 0, got {}", self.loss_per_km)
        })
    }

    pub fn transmission(&self) -> T {
        db_to_transmission(self.loss_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerParams<T> {
    /// Arm delay, seconds; must be a whole number of slots.
    pub delay: T,
    pub internal_phase: T,
    pub insertion_loss_db: T,
    /// Effective visibility folding source seeding and decoder imperfection.
    pub visibility: T,
}

impl<T: Real> Default for InterferometerParams<T> {
    fn default() -> Self {
        Self {
            delay: T::lit(500e-12),
            internal_phase: T::zero(),
            insertion_loss_db: T::lit(3.0),
            visibility: T::lit(0.9906),
        }
    }
}

impl<T: Real> InterferometerParams<T> {
    pub fn validate(&self) -> Result<()> {
        ensure(self.delay.is_finite() && self.delay > T::zero(), "delay", || {
            format!("must be > 0, got {}", self.delay)
        })?;
        ensure(self.internal_phase.is_finite(), "internal_phase", || "must be finite".into())?;
        ensure(
            self.insertion_loss_db.is_finite() && self.insertion_loss_db >= T::zero(),
            "insertion_loss_db",
            || format!("must be >= 0, got {}", self.insertion_loss_db),
        )?;
        ensure(
            self.visibility >= T::zero() && self.visibility <= T::one(),
            "visibility",
            || format!("must lie in [0, 1], got {}", self.visibility),
        )
    }

    pub fn transmission(&self) -> T {
        db_to_transmission(self.insertion_loss_db)
    }

    /// Visibility giving an intrinsic error `(1 − V)/2 = e_det`.
    pub fn visibility_for_error(e_det: T) -> T {
        T::one() - T::lit(2.0) * e_det
    }

    /// Delay in slots for a pulse clock.
    pub fn delay_slots(&self, clock_rate: T) -> Result<u64> {
        self.validate()?;
        let slots = self.delay * clock_rate;
        let k = slots.round();
        ensure(
            k >= T::one() && (slots - k).abs() <= T::lit(1e-6) * k,
            "delay",
            || format!("{} s is not a whole number of slots at {} Hz", self.delay, clock_rate),
        )?;
        Ok(k.as_f64() as u64)
    }

    /// Mean photons at `(port0, port1)` for a total phase difference and the
    /// mean of the two interfering pulses.
    pub fn split(&self, mean_photons: T, delta_phi: T) -> (T, T) {
        let total = self.transmission() * mean_photons;
        let half = T::lit(0.5);
        let fringe = self.visibility * delta_phi.cos();
        (total * half * (T::one() + fringe), total * half * (T::one() - fringe))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams<T> {
    pub efficiency: T,
    /// Dark counts per second.
    pub dark_rate: T,
    pub gate_width: T,
    pub gate_period: T,
}

impl<T: Real> Default for DetectorParams<T> {
    fn default() -> Self {
        Self {
            efficiency: T::lit(0.14),
            dark_rate: T::lit(150.0),
            gate_width: T::lit(0.25e-9),
            gate_period: T::lit(0.5e-9),
        }
    }
}

impl<T: Real> DetectorParams<T> {
    pub fn validate(&self) -> Result<()> {
        ensure(self.efficiency >= T::zero() && self.efficiency <= T::one(), "efficiency", || {
            format!("must lie in [0, 1], got {}", self.efficiency)
        })?;
        ensure(self.dark_rate.is_finite() && self.dark_rate >= T::zero(), "dark_rate", || {
            format!("must be >= 0, got {}", self.dark_rate)
        })?;
        ensure(self.gate_width > T::zero(), "gate_width", || "must be > 0".into())?;
        ensure(self.gate_width <= self.gate_period, "gate_width", || {
            format!("{} exceeds gate_period {}", self.gate_width, self.gate_period)
        })?;
        ensure(self.dark_probability() <= T::one(), "dark_rate", || {
            "dark_rate * gate_width exceeds 1".into()
        })
    }

    /// Dark-count probability per gate.
    pub fn dark_probability(&self) -> T {
        self.dark_rate * self.gate_width
    }
}

/// Threshold-detector click probability `1 − (1 − p_dark) e^{−μη}`.
pub fn click_probability<T: Real>(mean_photons: T, det: &DetectorParams<T>) -> T {
    let dark = det.dark_probability();
    let p = dark - (T::one() - dark) * (-mean_photons * det.efficiency).exp_m1();
    p.max(T::zero()).min(T::one())
}

/// Scales every pulse by the channel transmission.
pub fn attenuate<T: Real>(train: &PulseTrain<T>, channel: &ChannelParams<T>) -> PulseTrain<T> {
    let t = channel.transmission();
    let mut out = train.clone();
    for p in &mut out.pulses {
        p.mean_photons = p.mean_photons * t;
    }
    out
}

/// Mean photon numbers at the two decoder outputs for one interference slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotIntensities<T> {
    pub slot: u64,
    pub port0: T,
    pub port1: T,
}

/// Interferes every pulse with the one `delay` earlier.
///
/// Produces one entry per pulse that has a predecessor `k` slots back in the
/// train; the phase difference includes any global-phase difference between
/// blocks.
pub fn interfere<T: Real>(train: &PulseTrain<T>, mzi: &InterferometerParams<T>) -> Result<Vec<SlotIntensities<T>>> {
    let k = mzi.delay_slots(train.config.clock_rate)? as usize;
    let half = T::lit(0.5);
    Ok(train
        .pulses
        .iter()
        .skip(k)
        .zip(&train.pulses)
        .map(|(late, early)| {
            let delta = late.phase - early.phase + mzi.internal_phase;
            let mean = half * (late.mean_photons + early.mean_photons);
            let (port0, port1) = mzi.split(mean, delta);
            SlotIntensities {
                slot: late.slot_index,
                port0,
                port1,
            }
        })
        .collect())
}

/// Gated detector outcomes, one entry per interference slot.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClickRecord {
    pub slots: Vec<u64>,
    pub clicks: Vec<[bool; 2]>,
    pub port0_total: u64,
    pub port1_total: u64,
    pub double_total: u64,
}

impl ClickRecord {
    pub fn from_clicks(slots: Vec<u64>, clicks: Vec<[bool; 2]>) -> Self {
        let mut rec = Self {
            slots,
            clicks,
            ..Default::default()
        };
        rec.retotal();
        rec
    }

    fn retotal(&mut self) {
        self.port0_total = self.clicks.iter().filter(|c| c[0]).count() as u64;
        self.port1_total = self.clicks.iter().filter(|c| c[1]).count() as u64;
        self.double_total = self.clicks.iter().filter(|c| c[0] && c[1]).count() as u64;
    }

    /// True when the stored totals agree with the per-slot outcomes.
    pub fn totals_consistent(&self) -> bool {
        let mut copy = self.clone();
        copy.retotal();
        copy == *self
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Slots in which at least one detector fired.
    pub fn clicked_slots(&self) -> u64 {
        self.port0_total + self.port1_total - self.double_total
    }

    /// Outcome for an absolute slot index, if recorded.
    pub fn get(&self, slot: u64) -> Option<[bool; 2]> {
        let first = *self.slots.first()?;
        let idx = slot.checked_sub(first)? as usize;
        match self.slots.get(idx) {
            Some(&s) if s == slot => Some(self.clicks[idx]),
            _ => self
                .slots
                .binary_search(&slot)
                .ok()
                .map(|i| self.clicks[i]),
        }
    }

    /// Writes `slot,port0,port1` CSV with 0/1 outcomes.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "slot,port0,port1")?;
        for (s, c) in self.slots.iter().zip(&self.clicks) {
            writeln!(out, "{},{},{}", s, c[0] as u8, c[1] as u8)?;
        }
        Ok(())
    }
}

/// Samples independent threshold-detector clicks on both ports of every slot.
pub fn detect<T: Real>(intensities: &[SlotIntensities<T>], det: &DetectorParams<T>, rng_seed: u64) -> ClickRecord {
    let mut rng = rng_from(derive_seed(rng_seed, TAG_DETECT, 0));
    detect_with(intensities, det, &mut rng)
}

pub(crate) fn detect_with<T: Real, R: Rng + ?Sized>(
    intensities: &[SlotIntensities<T>],
    det: &DetectorParams<T>,
    rng: &mut R,
) -> ClickRecord {
    let mut slots = Vec::with_capacity(intensities.len());
    let mut clicks = Vec::with_capacity(intensities.len());
    for s in intensities {
        let c0 = T::sample_unit(rng) < click_probability(s.port0, det);
        let c1 = T::sample_unit(rng) < click_probability(s.port1, det);
        slots.push(s.slot);
        clicks.push([c0, c1]);
    }
    ClickRecord::from_clicks(slots, clicks)
}
