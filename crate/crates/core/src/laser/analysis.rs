use super::FieldTrace;
use crate::error::{ensure, Error, Result};
use crate::num::Real;

/// Chirp `(1/2π) dφ/dt` by central differences, one value per interior sample.
///
/// Fails if any sample of the trace is below the extinction floor.
pub fn instantaneous_frequency<T: Real>(trace: &FieldTrace<T>) -> Result<Vec<(T, T)>> {
    ensure(trace.len() >= 3, "trace", || "need at least three samples".into())?;
    if let Some(index) = (0..trace.len()).find(|&i| !trace.phase_defined(i)) {
        return Err(Error::UndefinedPhase { index });
    }
    let two_pi = T::TAU();
    Ok((1..trace.len() - 1)
        .map(|i| {
            let dphi = trace.phase[i + 1] - trace.phase[i - 1];
            let dt = trace.times[i + 1] - trace.times[i - 1];
            (trace.times[i], dphi / (two_pi * dt))
        })
        .collect())
}

/// Unwrapped `slave.phase − master.phase` at the slave's sample times inside
/// `window`; the master field is interpolated.
pub fn phase_difference_series<T: Real>(
    master: &FieldTrace<T>,
    slave: &FieldTrace<T>,
    window: (T, T),
) -> Result<Vec<T>> {
    let range = slave.window(window.0, window.1);
    ensure(!range.is_empty(), "window", || "contains no samples".into())?;
    let mut out = Vec::with_capacity(range.len());
    let mut prev: Option<T> = None;
    for i in range {
        if !slave.phase_defined(i) {
            return Err(Error::UndefinedPhase { index: i });
        }
        let m = master
            .field_at(slave.times[i])
            .ok_or_else(|| Error::invalid("window", "outside the master trace"))?;
        if m.norm_sqr() < master.extinction_floor {
            return Err(Error::UndefinedPhase { index: i });
        }
        let wrapped = (slave.field[i] * m.conj()).arg();
        let next = match prev {
            None => wrapped,
            Some(p) => super::unwrap_next(p, wrapped),
        };
        out.push(next);
        prev = Some(next);
    }
    Ok(out)
}

/// Circular mean of the slave-minus-master phase over `window`, in `(−π, π]`.
pub fn locked_phase_offset<T: Real>(master: &FieldTrace<T>, slave: &FieldTrace<T>, window: (T, T)) -> Result<T> {
    let diffs = phase_difference_series(master, slave, window)?;
    let (s, c) = diffs
        .iter()
        .fold((T::zero(), T::zero()), |(s, c), &d| (s + d.sin(), c + d.cos()));
    Ok(s.atan2(c).wrap_signed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn linear_phase_trace(freq: f64, offset: f64) -> FieldTrace<f64> {
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 1e-12).collect();
        let phase = times.iter().map(|t| 2.0 * PI * freq * t + offset).collect();
        FieldTrace::from_intensity_phase(times, &[1.0; 200], phase, 1e-3).unwrap()
    }

    #[test]
    fn linear_phase_gives_constant_chirp() {
        let tr = linear_phase_trace(1e9, 0.0);
        let chirp = instantaneous_frequency(&tr).unwrap();
        assert_eq!(chirp.len(), tr.len() - 2);
        for (_, c) in chirp {
            assert!((c - 1e9).abs() < 1e-3 * 1e9 * 1e-6);
        }
    }

    #[test]
    fn flat_phase_gives_zero_chirp() {
        let tr = linear_phase_trace(0.0, 0.3);
        assert!(instantaneous_frequency(&tr).unwrap().iter().all(|&(_, c)| c == 0.0));
    }

    #[test]
    fn extinguished_sample_is_rejected() {
        let mut tr = linear_phase_trace(1e9, 0.0);
        tr.field[17] = num_complex::Complex::new(0.0, 0.0);
        assert!(matches!(instantaneous_frequency(&tr), Err(Error::UndefinedPhase { index: 17 })));
    }

    #[test]
    fn offsets() {
        let m = linear_phase_trace(2e9, 0.1);
        assert!(locked_phase_offset(&m, &m, (0.0, 1e-10)).unwrap().abs() < 1e-12);
        let s = linear_phase_trace(2e9, 0.1 + FRAC_PI_2);
        assert!((locked_phase_offset(&m, &s, (0.0, 1e-10)).unwrap() - FRAC_PI_2).abs() < 1e-9);
        let s = linear_phase_trace(2e9, 0.1 + PI);
        assert!((locked_phase_offset(&m, &s, (0.0, 1e-10)).unwrap() - PI).abs() < 1e-9);
        assert!(locked_phase_offset(&m, &s, (1.0, 2.0)).is_err());
    }
}
