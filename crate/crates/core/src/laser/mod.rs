//! Single-mode semiconductor laser rate equations with optical injection and
//! spontaneous-emission noise.
//!
//! Normalisation: the field `E` is a complex amplitude with `|E|²` equal to the
//! intracavity photon number, the carrier `N` is a dimensionless carrier number
//! and the drive is expressed in the same units as
//! [`LaserParams::threshold_current`], so a drive of `1.5 * threshold_current`
//! pumps carriers at 1.5 times the threshold rate `N_th / τ_n`.
//!
//! ```text
//! dE/dt = ½ [(G − 1/τ_p) + iα g (N − N_th)] E + κ E_inj(t) e^{i2πΔt} + F(t)
//! dN/dt = P(t) − N/τ_n − G |E|²
//! G     = g (N − N_tr) / (1 + ε |E|²),   N_th = N_tr + 1/(g τ_p)
//! ```
//!
//! `F(t)` is a circular complex Gaussian Langevin force with
//! `⟨|F|²⟩ dt = β N / τ_n · dt`. The field is expressed in the frame rotating at
//! the threshold emission frequency, so the carrier-referenced phase term makes
//! the adiabatic chirp follow the carrier density.

mod analysis;
mod integrate;

pub use analysis::{instantaneous_frequency, locked_phase_offset, phase_difference_series};
pub use integrate::{integrate, Noise};

use std::io::Write;

use num_complex::Complex;

use crate::error::{ensure, Error, Result};
use crate::num::Real;

/// Largest accepted master/slave detuning magnitude.
pub const MAX_DETUNING_HZ: f64 = 20e9;

/// Intensity below this fraction of the reference steady state marks the phase
/// as undefined.
pub const EXTINCTION_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserParams<T> {
    /// τ_n, seconds.
    pub carrier_lifetime: T,
    /// τ_p, seconds.
    pub photon_lifetime: T,
    /// g, per second per unit carrier above transparency.
    pub gain_slope: T,
    /// N_tr.
    pub transparency_carrier: T,
    /// ε, per photon.
    pub gain_compression: T,
    /// α.
    pub linewidth_enhancement: T,
    /// β.
    pub spontaneous_fraction: T,
    /// κ, per second.
    pub injection_coupling: T,
    /// Drive level that pumps exactly the threshold carrier rate.
    pub threshold_current: T,
    /// Master minus slave optical frequency, Hz.
    pub detuning: T,
}

impl<T: Real> Default for LaserParams<T> {
    fn default() -> Self {
        Self {
            carrier_lifetime: T::lit(1e-9),
            photon_lifetime: T::lit(2e-12),
            gain_slope: T::lit(1e9),
            transparency_carrier: T::lit(500.0),
            gain_compression: T::lit(1e-2),
            linewidth_enhancement: T::lit(3.0),
            spontaneous_fraction: T::lit(1e-4),
            injection_coupling: T::lit(2e11),
            threshold_current: T::one(),
            detuning: T::zero(),
        }
    }
}

impl<T: Real> LaserParams<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_lifetime", self.carrier_lifetime),
            ("photon_lifetime", self.photon_lifetime),
            ("gain_slope", self.gain_slope),
            ("transparency_carrier", self.transparency_carrier),
            ("threshold_current", self.threshold_current),
        ];
        for (name, v) in positive {
            ensure(v.is_finite() && v > T::zero(), name, || {
                format!("must be finite and > 0, got {v}")
            })?;
        }
        let non_negative = [
            ("gain_compression", self.gain_compression),
            ("linewidth_enhancement", self.linewidth_enhancement),
            ("injection_coupling", self.injection_coupling),
        ];
        for (name, v) in non_negative {
            ensure(v.is_finite() && v >= T::zero(), name, || {
                format!("must be finite and >= 0, got {v}")
            })?;
        }
        let beta = self.spontaneous_fraction;
        ensure(beta >= T::zero() && beta <= T::one(), "spontaneous_fraction", || {
            format!("must lie in [0, 1], got {beta}")
        })?;
        let det = self.detuning;
        ensure(
            det.is_finite() && det.abs() <= T::lit(MAX_DETUNING_HZ),
            "detuning",
            || format!("must satisfy |detuning| <= {MAX_DETUNING_HZ:e} Hz, got {det}"),
        )
    }

    /// N_th = N_tr + 1/(g τ_p).
    pub fn threshold_carrier(&self) -> T {
        self.transparency_carrier + T::one() / (self.gain_slope * self.photon_lifetime)
    }

    /// Carrier injection rate (per second) for a drive level.
    pub fn pump_rate(&self, drive: T) -> T {
        drive / self.threshold_current * self.threshold_carrier() / self.carrier_lifetime
    }

    /// Net modal gain rate G for a carrier number and photon number.
    pub fn gain(&self, carrier: T, photons: T) -> T {
        self.gain_slope * (carrier - self.transparency_carrier)
            / (T::one() + self.gain_compression * photons)
    }

    /// Stationary `(carrier, photons)` of the noiseless equations for a
    /// constant drive, or `None` at or below threshold.
    pub fn steady_state(&self, drive: T) -> Option<(T, T)> {
        let excess = self.pump_rate(drive) - self.threshold_carrier() / self.carrier_lifetime;
        if excess <= T::zero() {
            return None;
        }
        let gtp = self.gain_slope * self.photon_lifetime;
        let photons = excess
            / (T::one() / self.photon_lifetime
                + self.gain_compression / (gtp * self.carrier_lifetime));
        let carrier = self.transparency_carrier + (T::one() + self.gain_compression * photons) / gtp;
        Some((carrier, photons))
    }

    /// Stationary frequency offset from the threshold frequency, Hz.
    pub fn steady_frequency(&self, drive: T) -> Option<T> {
        self.steady_state(drive).map(|(n, _)| {
            self.linewidth_enhancement * self.gain_slope * (n - self.threshold_carrier())
                / (T::lit(4.0) * T::PI())
        })
    }
}

/// Uniformly sampled drive current.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveWaveform<T> {
    start: T,
    sample_interval: T,
    currents: Vec<T>,
}

impl<T: Real> DriveWaveform<T> {
    pub fn new(start: T, sample_interval: T, currents: Vec<T>) -> Result<Self> {
        ensure(
            sample_interval.is_finite() && sample_interval > T::zero(),
            "sample_interval",
            || format!("must be finite and > 0, got {sample_interval}"),
        )?;
        ensure(start.is_finite(), "start", || "must be finite".into())?;
        ensure(currents.len() >= 2, "currents", || {
            "need at least two samples".into()
        })?;
        if let Some(i) = currents.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid("currents", format!("non-finite sample at {i}")));
        }
        Ok(Self {
            start,
            sample_interval,
            currents,
        })
    }

    /// Samples `f(t)` on `[start, end]` at the given interval.
    pub fn from_fn(start: T, end: T, sample_interval: T, f: impl Fn(T) -> T) -> Result<Self> {
        ensure(end > start, "end", || "must exceed start".into())?;
        let n = ((end - start) / sample_interval + T::lit(1e-9)).floor().as_f64() as usize;
        let currents = (0..=n)
            .map(|i| f(start + T::lit(i as f64) * sample_interval))
            .collect();
        Self::new(start, sample_interval, currents)
    }

    pub fn constant(level: T, duration: T, sample_interval: T) -> Result<Self> {
        Self::from_fn(T::zero(), duration, sample_interval, |_| level)
    }

    pub fn start(&self) -> T {
        self.start
    }

    pub fn end(&self) -> T {
        self.start + T::lit((self.currents.len() - 1) as f64) * self.sample_interval
    }

    pub fn sample_interval(&self) -> T {
        self.sample_interval
    }

    pub fn samples(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.currents
            .iter()
            .enumerate()
            .map(move |(i, &c)| (self.start + T::lit(i as f64) * self.sample_interval, c))
    }

    pub fn max_current(&self) -> T {
        self.currents.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Linear interpolation, clamped to the end samples.
    pub fn value_at(&self, t: T) -> T {
        let x = (t - self.start) / self.sample_interval;
        if x <= T::zero() {
            return self.currents[0];
        }
        let last = self.currents.len() - 1;
        let i = x.floor().as_f64() as usize;
        if i >= last {
            return self.currents[last];
        }
        let frac = x - T::lit(i as f64);
        self.currents[i] + (self.currents[i + 1] - self.currents[i]) * frac
    }
}

/// Simulated complex-field time series.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrace<T> {
    pub times: Vec<T>,
    pub field: Vec<Complex<T>>,
    pub carrier: Vec<T>,
    /// Unwrapped argument of `field`.
    pub phase: Vec<T>,
    /// Absolute intensity below which the phase is treated as undefined.
    pub extinction_floor: T,
}

impl<T: Real> FieldTrace<T> {
    /// Builds a trace from intensity and phase samples (carrier left at zero).
    pub fn from_intensity_phase(times: Vec<T>, intensity: &[T], phase: Vec<T>, extinction_floor: T) -> Result<Self> {
        ensure(
            times.len() == intensity.len() && times.len() == phase.len(),
            "trace",
            || "times, intensity and phase lengths differ".into(),
        )?;
        let field = intensity
            .iter()
            .zip(&phase)
            .map(|(&i, &p)| Complex::from_polar(i.max(T::zero()).sqrt(), p))
            .collect();
        let carrier = vec![T::zero(); times.len()];
        Ok(Self {
            times,
            field,
            carrier,
            phase,
            extinction_floor,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn intensity(&self, i: usize) -> T {
        self.field[i].norm_sqr()
    }

    pub fn intensities(&self) -> Vec<T> {
        self.field.iter().map(|e| e.norm_sqr()).collect()
    }

    pub fn phase_defined(&self, i: usize) -> bool {
        self.intensity(i) >= self.extinction_floor
    }

    /// Index range of samples whose time lies in `[from, to]`.
    pub fn window(&self, from: T, to: T) -> std::ops::Range<usize> {
        let lo = self.times.partition_point(|&t| t < from);
        let hi = self.times.partition_point(|&t| t <= to);
        lo..hi.max(lo)
    }

    /// Copy of the samples inside `[from, to]`.
    pub fn slice(&self, from: T, to: T) -> Self {
        let r = self.window(from, to);
        Self {
            times: self.times[r.clone()].to_vec(),
            field: self.field[r.clone()].to_vec(),
            carrier: self.carrier[r.clone()].to_vec(),
            phase: self.phase[r].to_vec(),
            extinction_floor: self.extinction_floor,
        }
    }

    /// Linearly interpolated complex field; `None` outside the sampled span.
    pub fn field_at(&self, t: T) -> Option<Complex<T>> {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return None;
        }
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            return Some(self.field[0]);
        }
        if i >= n {
            return Some(self.field[n - 1]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        Some(self.field[i - 1] + (self.field[i] - self.field[i - 1]) * w)
    }

    /// Writes `time_s,intensity,carrier,phase_rad` CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time_s,intensity,carrier,phase_rad")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{:e},{:e},{:e},{:e}",
                self.times[i],
                self.intensity(i),
                self.carrier[i],
                self.phase[i]
            )?;
        }
        Ok(())
    }
}

/// Incrementally unwraps `arg` values into a continuous phase.
pub(crate) fn unwrap_next<T: Real>(previous: T, wrapped: T) -> T {
    previous + (wrapped - previous).wrap_signed()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: bisection on the photon number with the carrier
    /// eliminated through the gain-clamping condition.
    fn stationary_by_bisection(p: &LaserParams<f64>, drive: f64) -> (f64, f64) {
        let residual = |s: f64| {
            let n = p.transparency_carrier
                + (1.0 + p.gain_compression * s) / (p.gain_slope * p.photon_lifetime);
            let pump = drive / p.threshold_current * p.threshold_carrier() / p.carrier_lifetime;
            pump - n / p.carrier_lifetime - p.gain(n, s) * s
        };
        let (mut lo, mut hi) = (0.0, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = 0.5 * (lo + hi);
        let n = p.transparency_carrier + (1.0 + p.gain_compression * s) / (p.gain_slope * p.photon_lifetime);
        (n, s)
    }

    #[test]
    fn closed_form_steady_state_matches_bisection() {
        let p = LaserParams::<f64>::default();
        for drive in [1.1, 1.5, 3.0] {
            let (n, s) = p.steady_state(drive).unwrap();
            let (n_ref, s_ref) = stationary_by_bisection(&p, drive);
            assert!((n - n_ref).abs() / n_ref < 1e-10);
            assert!((s - s_ref).abs() / s_ref < 1e-9, "{s} vs {s_ref}");
        }
        assert!(p.steady_state(1.0).is_none());
        assert!(p.steady_state(0.4).is_none());
    }

    #[test]
    fn default_params_validate() {
        LaserParams::<f64>::default().validate().unwrap();
        LaserParams::<f32>::default().validate().unwrap();
        let mut p = LaserParams::<f64>::default();
        p.spontaneous_fraction = 1.5;
        assert!(matches!(p.validate(), Err(Error::Invalid { name: "spontaneous_fraction", .. })));
        p = LaserParams::default();
        p.detuning = 1e12;
        assert!(matches!(p.validate(), Err(Error::Invalid { name: "detuning", .. })));
        p = LaserParams::default();
        p.photon_lifetime = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn drive_interpolation() {
        let d = DriveWaveform::new(0.0, 1.0, vec![0.0, 2.0, 4.0]).unwrap();
        assert_eq!(d.value_at(0.5), 1.0);
        assert_eq!(d.value_at(-3.0), 0.0);
        assert_eq!(d.value_at(10.0), 4.0);
        assert_eq!(d.end(), 2.0);
        assert!(DriveWaveform::new(0.0, 0.0, vec![1.0, 1.0]).is_err());
        assert!(DriveWaveform::new(0.0, 1.0, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn trace_csv_header() {
        let t = FieldTrace::from_intensity_phase(vec![0.0, 1e-12], &[1.0, 4.0], vec![0.0, 0.5], 1e-3).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("time_s,intensity,carrier,phase_rad"));
        assert_eq!(lines.count(), 2);
    }
}
