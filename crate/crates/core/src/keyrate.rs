//! Secure key rates: the vacuum + weak decoy bound for BB84 and a pluggable
//! individual-attack bound for DPS, evaluated on the analytic channel model.

use std::io::Write;

use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::num::Real;
use crate::optics::ChannelParams;
use crate::protocol::{expected_gain_qber, expected_sifted_rate, vacuum_yield, LinkSetup, Protocol};

/// Shannon entropy of a Bernoulli(x) variable, in bits.
pub fn binary_entropy<T: Real>(x: T) -> Result<T> {
    ensure(x >= T::zero() && x <= T::one(), "x", || format!("must lie in [0, 1], got {x}"))?;
    if x == T::zero() || x == T::one() {
        return Ok(T::zero());
    }
    let y = T::one() - x;
    Ok(-(x * x.log2()) - y * y.log2())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyInputs<T> {
    pub mu: T,
    pub nu: T,
    pub q_mu: T,
    pub q_nu: T,
    pub e_mu: T,
    pub e_nu: T,
    pub y0: T,
    pub f_ec: T,
    pub sift_factor: T,
}

impl<T: Real> DecoyInputs<T> {
    pub fn validate(&self) -> Result<()> {
        ensure(self.nu > T::zero() && self.nu < self.mu, "nu", || {
            format!("need 0 < nu < mu, got nu = {}, mu = {}", self.nu, self.mu)
        })?;
        for (name, v) in [
            ("q_mu", self.q_mu),
            ("q_nu", self.q_nu),
            ("e_mu", self.e_mu),
            ("e_nu", self.e_nu),
            ("y0", self.y0),
            ("sift_factor", self.sift_factor),
        ] {
            ensure(v >= T::zero() && v <= T::one(), name, || format!("must lie in [0, 1], got {v}"))?;
        }
        ensure(self.f_ec >= T::one(), "f_ec", || format!("must be >= 1, got {}", self.f_ec))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoyStatus {
    Ok,
    /// The single-photon yield bound is not positive.
    NoSingleYield,
    /// The single-photon phase-error bound exceeds one half.
    PhaseErrorTooHigh,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyBound<T> {
    /// Secure bits per signal.
    pub rate: T,
    pub y1_lower: T,
    pub e1_upper: T,
    pub q1: T,
    pub status: DecoyStatus,
}

/// Vacuum + weak decoy lower bound on the secure fraction per signal.
pub fn decoy_bb84_rate<T: Real>(inputs: &DecoyInputs<T>) -> Result<DecoyBound<T>> {
    inputs.validate()?;
    let DecoyInputs {
        mu,
        nu,
        q_mu,
        q_nu,
        e_mu,
        e_nu,
        y0,
        f_ec,
        sift_factor,
    } = *inputs;
    let half = T::lit(0.5);
    let mu2 = mu * mu;
    let nu2 = nu * nu;
    let y1 = mu / (mu * nu - nu2) * (q_nu * nu.exp() - q_mu * mu.exp() * nu2 / mu2 - (mu2 - nu2) / mu2 * y0);
    let mut out = DecoyBound {
        rate: T::zero(),
        y1_lower: y1,
        e1_upper: T::one(),
        q1: T::zero(),
        status: DecoyStatus::NoSingleYield,
    };
    if y1 <= T::zero() {
        return Ok(out);
    }
    let e1 = ((e_nu * q_nu * nu.exp() - half * y0) / (y1 * nu)).max(T::zero());
    out.e1_upper = e1;
    out.q1 = y1 * mu * (-mu).exp();
    if e1 > half {
        out.status = DecoyStatus::PhaseErrorTooHigh;
        return Ok(out);
    }
    out.status = DecoyStatus::Ok;
    let r = -q_mu * f_ec * binary_entropy(e_mu)? + out.q1 * (T::one() - binary_entropy(e1)?);
    out.rate = sift_factor * r.max(T::zero());
    Ok(out)
}

/// A DPS secure-fraction formula.
pub trait DpsSecurity<T: Real> {
    /// Secure bits per pulse; zero at and beyond the error threshold.
    fn secure_fraction(&self, gain: T, qber: T, mu: T, f_ec: T) -> Result<T>;

    /// Smallest QBER at which the secure fraction vanishes.
    fn error_threshold(&self, mu: T, f_ec: T) -> T;
}

/// Individual-attack bound including photon-number splitting:
/// `R = Q [(1 − 2μ)(−log₂ P_c) − f h(e)]`, with collision probability
/// `P_c = 1 − e² − (1 − 6e)²/2`. The collision term is only monotone for
/// `e < 6/38`; beyond that the fraction is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IndividualAttack;

impl IndividualAttack {
    const E_MAX: f64 = 6.0 / 38.0;

    fn raw<T: Real>(qber: T, mu: T, f_ec: T) -> T {
        let six_e = T::lit(6.0) * qber;
        let pc = T::one() - qber * qber - (T::one() - six_e).powi(2) / T::lit(2.0);
        let h = binary_entropy(qber).unwrap_or(T::one());
        (T::one() - T::lit(2.0) * mu) * (-pc.log2()) - f_ec * h
    }
}

impl<T: Real> DpsSecurity<T> for IndividualAttack {
    fn secure_fraction(&self, gain: T, qber: T, mu: T, f_ec: T) -> Result<T> {
        ensure(gain >= T::zero() && gain <= T::one(), "gain", || format!("must lie in [0, 1], got {gain}"))?;
        ensure(qber >= T::zero() && qber <= T::lit(0.5), "qber", || {
            format!("must lie in [0, 0.5], got {qber}")
        })?;
        ensure(mu > T::zero(), "mu", || format!("must be > 0, got {mu}"))?;
        ensure(f_ec >= T::one(), "f_ec", || format!("must be >= 1, got {f_ec}"))?;
        if qber >= <Self as DpsSecurity<T>>::error_threshold(self, mu, f_ec) {
            return Ok(T::zero());
        }
        Ok(gain * Self::raw(qber, mu, f_ec).max(T::zero()))
    }

    fn error_threshold(&self, mu: T, f_ec: T) -> T {
        let e_max = T::lit(Self::E_MAX);
        if Self::raw(T::zero(), mu, f_ec) <= T::zero() {
            return T::zero();
        }
        if Self::raw(e_max, mu, f_ec) > T::zero() {
            return e_max;
        }
        let (mut lo, mut hi) = (T::zero(), e_max);
        for _ in 0..200 {
            let mid = (lo + hi) / T::lit(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            if Self::raw(mid, mu, f_ec) > T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Secure bits per pulse for DPS under [`IndividualAttack`].
pub fn dps_rate<T: Real>(gain: T, qber: T, mu: T, f_ec: T) -> Result<T> {
    IndividualAttack.secure_fraction(gain, qber, mu, f_ec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateParams<T> {
    pub f_ec: T,
    /// Weak decoy mean photon number per BB84 symbol.
    pub decoy_nu: T,
}

impl<T: Real> Default for KeyRateParams<T> {
    fn default() -> Self {
        Self {
            f_ec: T::lit(1.16),
            decoy_nu: T::lit(0.1),
        }
    }
}

impl<T: Real> KeyRateParams<T> {
    pub fn validate(&self) -> Result<()> {
        ensure(self.f_ec >= T::one(), "f_ec", || format!("must be >= 1, got {}", self.f_ec))?;
        ensure(self.decoy_nu > T::zero(), "decoy_nu", || {
            format!("must be > 0, got {}", self.decoy_nu)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint<T> {
    pub loss_db: T,
    pub sifted_rate_bps: T,
    pub qber: T,
    pub secure_rate_bps: T,
}

/// Analytic rate point for one link setting.
pub fn rate_point<T: Real>(setup: &LinkSetup<T>, keyrate: &KeyRateParams<T>) -> Result<RatePoint<T>> {
    setup.validate()?;
    keyrate.validate()?;
    let protocol = setup.protocol;
    let mu = protocol.signal_mean_photons(&setup.source);
    let signal = expected_gain_qber(protocol, mu, &setup.channel, &setup.mzi, &setup.detector);
    let clock = protocol.effective_clock(setup.source.clock_rate);
    let fraction = match protocol {
        Protocol::Bb84 => {
            let decoy = expected_gain_qber(protocol, keyrate.decoy_nu, &setup.channel, &setup.mzi, &setup.detector);
            let inputs = DecoyInputs {
                mu,
                nu: keyrate.decoy_nu,
                q_mu: signal.gain,
                q_nu: decoy.gain,
                e_mu: signal.qber,
                e_nu: decoy.qber,
                y0: vacuum_yield(&setup.detector),
                f_ec: keyrate.f_ec,
                sift_factor: protocol.sift_factor(),
            };
            decoy_bb84_rate(&inputs)?.rate
        }
        Protocol::Dps => dps_rate(signal.gain, signal.qber.min(T::lit(0.5)), mu, keyrate.f_ec)?,
    };
    Ok(RatePoint {
        loss_db: setup.channel.loss_db,
        sifted_rate_bps: expected_sifted_rate(protocol, signal.gain, setup.source.clock_rate),
        qber: signal.qber,
        secure_rate_bps: fraction * clock,
    })
}

/// Analytic rate curve over a list of channel losses.
pub fn rate_curve<T: Real>(setup: &LinkSetup<T>, keyrate: &KeyRateParams<T>, losses_db: &[T]) -> Result<Vec<RatePoint<T>>> {
    ensure(losses_db.windows(2).all(|w| w[0] < w[1]), "losses", || "must be increasing".into())?;
    losses_db
        .iter()
        .map(|&loss| {
            let s = LinkSetup {
                channel: ChannelParams {
                    loss_db: loss,
                    ..setup.channel
                },
                ..*setup
            };
            rate_point(&s, keyrate)
        })
        .collect()
}

/// Largest loss (dB) with a positive secure rate, found by bisection on
/// `[lo, hi]`. Fails if the rate is zero at `lo` or positive at `hi`.
pub fn max_loss<T: Real>(setup: &LinkSetup<T>, keyrate: &KeyRateParams<T>, lo: T, hi: T) -> Result<T> {
    let positive = |loss: T| -> Result<bool> {
        let s = LinkSetup {
            channel: ChannelParams {
                loss_db: loss,
                ..setup.channel
            },
            ..*setup
        };
        Ok(rate_point(&s, keyrate)?.secure_rate_bps > T::zero())
    };
    if !positive(lo)? || positive(hi)? {
        return Err(Error::invalid("loss range", format!("[{lo}, {hi}] does not bracket the cutoff")));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > T::lit(1e-6) {
        let m = (a + b) / T::lit(2.0);
        if positive(m)? {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(a)
}

/// Writes `loss_db,sifted_rate_bps,qber,secure_rate_bps` CSV.
pub fn write_rate_csv<T: Real, W: Write>(points: &[RatePoint<T>], mut out: W) -> Result<()> {
    writeln!(out, "loss_db,sifted_rate_bps,qber,secure_rate_bps")?;
    for p in points {
        writeln!(
            out,
            "{},{:e},{:e},{:e}",
            p.loss_db, p.sifted_rate_bps, p.qber, p.secure_rate_bps
        )?;
    }
    Ok(())
}
