use num_complex::Complex;

use super::{unwrap_next, DriveWaveform, FieldTrace, LaserParams, EXTINCTION_RATIO};
use crate::error::{ensure, Error, Result};
use crate::num::Real;
use crate::seed::{derive_seed, rng_from, TAG_NOISE};

/// Spontaneous-emission noise switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    Off,
    Seeded(u64),
}

#[derive(Clone, Copy)]
struct State<T> {
    field: Complex<T>,
    carrier: T,
}

struct Model<'a, T> {
    p: &'a LaserParams<T>,
    drive: &'a DriveWaveform<T>,
    injection: Option<&'a FieldTrace<T>>,
    threshold_carrier: T,
    half: T,
    two_pi_detuning: T,
}

impl<T: Real> Model<'_, T> {
    fn injected(&self, t: T) -> Complex<T> {
        match self.injection {
            None => Complex::new(T::zero(), T::zero()),
            Some(master) => {
                let e = master.field_at(t).unwrap_or_default();
                let rot = Complex::from_polar(T::one(), self.two_pi_detuning * t);
                e * rot * self.p.injection_coupling
            }
        }
    }

    fn derivative(&self, t: T, s: State<T>) -> State<T> {
        let p = self.p;
        let photons = s.field.norm_sqr();
        let g = p.gain(s.carrier, photons);
        let amp = self.half * (g - T::one() / p.photon_lifetime);
        let freq =
            self.half * p.linewidth_enhancement * p.gain_slope * (s.carrier - self.threshold_carrier);
        let field = s.field * Complex::new(amp, freq) + self.injected(t);
        let carrier = p.pump_rate(self.drive.value_at(t)) - s.carrier / p.carrier_lifetime - g * photons;
        State { field, carrier }
    }

    /// Langevin amplitude per unit Wiener increment on each quadrature.
    fn noise_amplitude(&self, s: State<T>) -> T {
        let p = self.p;
        (self.half * p.spontaneous_fraction * s.carrier.max(T::zero()) / p.carrier_lifetime).sqrt()
    }
}

/// Integrates the rate equations over the span of `drive` with a fixed-step
/// stochastic Heun scheme.
///
/// The initial state is the below-threshold carrier equilibrium for the first
/// drive sample (capped at `N_th`) with the field at its spontaneous-emission
/// level. The initial field phase is zero without noise and uniformly random
/// with it. The injected master field is interpolated from `injection`, which
/// must cover the drive span.
pub fn integrate<T: Real>(
    params: &LaserParams<T>,
    drive: &DriveWaveform<T>,
    injection: Option<&FieldTrace<T>>,
    noise: Noise,
    dt: T,
) -> Result<FieldTrace<T>> {
    params.validate()?;
    ensure(dt.is_finite() && dt > T::zero(), "dt", || format!("must be > 0, got {dt}"))?;
    let max_dt = params.photon_lifetime / T::lit(10.0);
    ensure(dt <= max_dt * T::lit(1.0 + 1e-9), "dt", || {
        format!("{dt} exceeds photon_lifetime / 10 = {max_dt}")
    })?;
    let (t0, t_end) = (drive.start(), drive.end());
    if let Some(master) = injection {
        let covers = !master.is_empty()
            && master.times[0] <= t0
            && master.times[master.len() - 1] >= t_end - dt * T::lit(1e-6);
        ensure(covers, "injection", || "master trace does not cover the drive span".into())?;
    }

    let steps = ((t_end - t0) / dt + T::lit(1e-6)).floor().as_f64() as usize;
    let model = Model {
        p: params,
        drive,
        injection,
        threshold_carrier: params.threshold_carrier(),
        half: T::lit(0.5),
        two_pi_detuning: T::TAU() * params.detuning,
    };

    let mut rng = match noise {
        Noise::Off => None,
        Noise::Seeded(seed) => Some(rng_from(derive_seed(seed, TAG_NOISE, 0))),
    };

    let n_th = model.threshold_carrier;
    let carrier0 = (params.pump_rate(drive.value_at(t0)) * params.carrier_lifetime).min(n_th);
    let photons0 = params.spontaneous_fraction * carrier0.max(T::zero()) * params.photon_lifetime
        / params.carrier_lifetime;
    let phase0 = match rng.as_mut() {
        Some(r) => T::sample_unit(r) * T::TAU(),
        None => T::zero(),
    };
    let mut state = State {
        field: Complex::from_polar(photons0.sqrt(), phase0),
        carrier: carrier0,
    };

    let reference = params
        .steady_state(drive.max_current())
        .or_else(|| params.steady_state(params.threshold_current * T::lit(1.5)))
        .map(|(_, s)| s)
        .unwrap_or_else(T::one);

    let mut trace = FieldTrace {
        times: Vec::with_capacity(steps + 1),
        field: Vec::with_capacity(steps + 1),
        carrier: Vec::with_capacity(steps + 1),
        phase: Vec::with_capacity(steps + 1),
        extinction_floor: reference * T::lit(EXTINCTION_RATIO),
    };
    trace.times.push(t0);
    trace.field.push(state.field);
    trace.carrier.push(state.carrier);
    trace.phase.push(state.field.arg());

    let half = model.half;
    let sqrt_dt = dt.sqrt();
    for i in 1..=steps {
        let t = t0 + T::lit((i - 1) as f64) * dt;
        let k1 = model.derivative(t, state);
        let (xi, sigma1) = match rng.as_mut() {
            Some(r) => (
                Complex::new(T::sample_normal(r), T::sample_normal(r)) * sqrt_dt,
                model.noise_amplitude(state),
            ),
            None => (Complex::new(T::zero(), T::zero()), T::zero()),
        };
        let predictor = State {
            field: state.field + k1.field * dt + xi * sigma1,
            carrier: state.carrier + k1.carrier * dt,
        };
        let k2 = model.derivative(t + dt, predictor);
        let sigma2 = if rng.is_some() {
            model.noise_amplitude(predictor)
        } else {
            T::zero()
        };
        state = State {
            field: state.field + (k1.field + k2.field) * (half * dt) + xi * (half * (sigma1 + sigma2)),
            carrier: state.carrier + (k1.carrier + k2.carrier) * (half * dt),
        };
        if !(state.field.re.is_finite() && state.field.im.is_finite() && state.carrier.is_finite()) {
            return Err(Error::Diverged { index: i });
        }
        let prev_phase = trace.phase[i - 1];
        trace.times.push(t0 + T::lit(i as f64) * dt);
        trace.field.push(state.field);
        trace.carrier.push(state.carrier);
        trace.phase.push(unwrap_next(prev_phase, state.field.arg()));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> LaserParams<f64> {
        LaserParams::default()
    }

    #[test]
    fn rejects_coarse_step() {
        let p = params();
        let d = DriveWaveform::constant(1.5, 1e-10, 1e-12).unwrap();
        let err = integrate(&p, &d, None, Noise::Off, 1e-12).unwrap_err();
        assert!(matches!(err, Error::Invalid { name: "dt", .. }));
    }

    #[test]
    fn divergence_is_reported_with_index() {
        let p = params();
        let d = DriveWaveform::constant(1e305, 2e-11, 1e-13).unwrap();
        match integrate(&p, &d, None, Noise::Off, 1e-13) {
            Err(Error::Diverged { index }) => assert!(index > 0),
            other => panic!("expected divergence, got {:?}", other.map(|t| t.len())),
        }
    }

    #[test]
    fn no_pumping_decays_to_floor() {
        let p = params();
        let d = DriveWaveform::constant(0.0, 2e-9, 1e-12).unwrap();
        let tr = integrate(&p, &d, None, Noise::Seeded(3), 1e-13).unwrap();
        let last = tr.len() - 1;
        assert!(tr.intensity(last) < tr.extinction_floor);
        assert!(!tr.phase_defined(last));
        assert!(tr.carrier[last] < 0.2 * p.transparency_carrier);
    }

    #[test]
    fn seed_determinism_is_bit_exact() {
        let p = params();
        let d = DriveWaveform::from_fn(0.0, 5e-10, 1e-12, |t| if t < 1e-10 { 0.5 } else { 1.5 }).unwrap();
        let a = integrate(&p, &d, None, Noise::Seeded(42), 1e-13).unwrap();
        let b = integrate(&p, &d, None, Noise::Seeded(42), 1e-13).unwrap();
        let c = integrate(&p, &d, None, Noise::Seeded(43), 1e-13).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.field, c.field);
    }

    #[test]
    fn single_precision_runs() {
        let p = LaserParams::<f32>::default();
        let d = DriveWaveform::constant(1.5f32, 3e-9, 1e-12).unwrap();
        let tr = integrate(&p, &d, None, Noise::Off, 1e-13).unwrap();
        let (_, s) = p.steady_state(1.5).unwrap();
        let last = tr.intensity(tr.len() - 1);
        assert!((last - s).abs() / s < 1e-2, "{last} vs {s}");
    }
}
