//! Acceptance checks, one line per criterion. Exits non-zero if any fails.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use rand::Rng;

use phasesource::experiments::*;
use phasesource::keyrate::{decoy_bb84_rate, DecoyInputs, DecoyStatus, KeyRateParams};
use phasesource::laser::{integrate, phase_difference_series, DriveWaveform, LaserParams, Noise};
use phasesource::optics::ChannelParams;
use phasesource::protocol::{expected_gain_qber, total_transmittance, vacuum_yield, LinkSetup, Protocol};
use phasesource::seed::rng_from;
use phasesource::source::{chirp_to_phase, voltage_to_phase, SourceConfig};
use phasesource::stats::{chi_square_uniform, mean_std};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn halfwave() -> Outcome {
    let cfg = ExperimentConfig::defaults(ExperimentKind::PhaseVoltage);
    let start = Instant::now();
    let r = run_phase_voltage(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let at_vpi = r.rows.iter().find(|row| (row.voltage - 0.35).abs() < 1e-9).unwrap();
    let phys = r.physical_deviation.unwrap();
    let pass = (at_vpi.encoder_phase - PI).abs() < 1e-12 && r.encoder_nonlinearity < 0.01 && phys < 0.01 && secs < 1.0;
    outcome(
        pass,
        format!(
            "phase(0.35 V) = {:.12} rad, encoder nonlinearity {:.1e}, laser model deviation {:.1e}, {:.2} s",
            at_vpi.encoder_phase, r.encoder_nonlinearity, phys, secs
        ),
    )
}

fn chirp_phase() -> Outcome {
    let half = chirp_to_phase(2e9, 250e-12).unwrap();
    let exact = (half - PI).abs() <= 2.0 * f64::EPSILON * PI;
    let cfg = SourceConfig::<f64>::default();
    let mut rng = rng_from(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (n1, n2) = (rng.random_range(-5e9..5e9), rng.random_range(-5e9..5e9));
        let (t1, t2) = (rng.random_range(10e-12..500e-12), rng.random_range(10e-12..500e-12));
        let sum = chirp_to_phase(n1, t1).unwrap() + chirp_to_phase(n2, t2).unwrap();
        let direct = TAU * (n1 * t1 + n2 * t2);
        worst = worst.max((sum - direct).abs() / (1.0 + direct.abs()));
        let (v1, v2) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let split = voltage_to_phase(v1, &cfg).unwrap() + voltage_to_phase(v2, &cfg).unwrap();
        let joint = voltage_to_phase(v1 + v2, &cfg).unwrap();
        worst = worst.max((split - joint).abs() / (1.0 + joint.abs()));
    }
    outcome(
        exact && worst < 1e-12,
        format!("|phase - pi| = {:.1e}, worst additivity residual {:.1e} over 1000 pairs", (half - PI).abs(), worst),
    )
}

fn randomization() -> Outcome {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Randomization);
    let start = Instant::now();
    let r = run_randomization(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        r.cross_ks.p_value > 0.01 && r.intra_std_over_mean < 0.02 && r.cross.len() >= 10_000 && secs < 10.0,
        format!(
            "cross-block KS p = {:.3} (n = {}), intra-block std/mean = {:.1e}, {:.2} s",
            r.cross_ks.p_value, r.cross_ks.n, r.intra_std_over_mean, secs
        ),
    )
}

fn bb84_sweep(r: &SweepResult, secs: f64) -> Outcome {
    let floor_ok = r.rows.iter().filter(|row| row.loss_db <= 30.0).all(|row| (row.mc.qber - 0.024).abs() <= 0.003);
    let tail: Vec<f64> = r.rows.iter().filter(|row| row.loss_db >= 30.0).map(|row| row.mc.qber).collect();
    let rising = tail.len() >= 2 && tail.windows(2).all(|w| w[1] > w[0]);
    let at30 = r.rows.iter().find(|row| row.loss_db == 30.0).unwrap();
    let cutoff = r.cutoff_db.unwrap_or(f64::NAN);
    let last = r.rows.last().unwrap();
    let pass = floor_ok
        && rising
        && at30.secure_rate_bps > 0.0
        && (38.0..=45.0).contains(&cutoff)
        && last.loss_db >= 45.0
        && last.analytic_secure_rate_bps == 0.0;
    let worst = r
        .rows
        .iter()
        .filter(|row| row.loss_db <= 30.0)
        .map(|row| (row.mc.qber - 0.024).abs())
        .fold(0.0, f64::max);
    let min_clocks = r.rows.iter().map(|row| row.mc.clocks).min().unwrap();
    outcome(
        pass,
        format!(
            "max |QBER - 2.4%| to 30 dB = {:.3}%, rising beyond 30 dB: {rising}, secure(30 dB) = {:.3e} bps, cutoff {cutoff:.2} dB, >= {min_clocks} pairs/point, {secs:.1} s",
            100.0 * worst, at30.secure_rate_bps
        ),
    )
}

fn dps_sweep(r: &SweepResult) -> Outcome {
    let base: Vec<&SweepRow> = r.rows.iter().filter(|row| row.loss_db <= 20.0).collect();
    let worst = base.iter().map(|row| (row.mc.qber - 0.019).abs()).fold(0.0, f64::max);
    let mut by_loss = ExperimentConfig::defaults(ExperimentKind::DpsSweep);
    by_loss.sweep.losses = vec![20.0];
    let mut by_km = by_loss.clone();
    by_km.sweep.fiber_km = vec![100.0];
    let a = run_sweep(&by_loss).unwrap();
    let b = run_sweep(&by_km).unwrap();
    let identical = a.rows == b.rows;
    outcome(
        worst <= 0.003 && identical,
        format!(
            "max |QBER - 1.9%| to 20 dB = {:.3}%, 100 km vs 20 dB identical: {identical} (qber {:.5}, sifted {})",
            100.0 * worst, b.rows[0].mc.qber, b.rows[0].mc.sifted_count
        ),
    )
}

fn stability() -> Outcome {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Stability);
    let start = Instant::now();
    let r = run_stability(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        (r.mean - 0.0241).abs() <= 1e-4 && (r.std_dev - 0.001).abs() <= 1e-4 && r.series.len() == 86_400 && secs < 30.0,
        format!(
            "mean {:.4}%, std {:.4}% over {} bins (n_sift {}), {:.2} s",
            100.0 * r.mean,
            100.0 * r.std_dev,
            r.series.len(),
            r.n_sift,
            secs
        ),
    )
}

fn decoy() -> Outcome {
    let setup = LinkSetup::<f64>::bb84();
    let kr = KeyRateParams::<f64>::default();
    let mu = Protocol::Bb84.signal_mean_photons(&setup.source);
    let e_det = (1.0 - setup.mzi.visibility) / 2.0;
    let y0 = vacuum_yield(&setup.detector);
    let mut pass = true;
    let mut notes = Vec::new();
    for loss in [0.0, 10.0, 20.0, 30.0] {
        let ch = ChannelParams::attenuator(loss);
        let eta = total_transmittance(Protocol::Bb84, &ch, &setup.mzi, &setup.detector);
        // Exact single-photon yield and error of the Poisson channel.
        let y1 = 1.0 - (1.0 - y0) * (1.0 - eta);
        let e1 = (0.5 * y0 + e_det * eta) / y1;
        let s = expected_gain_qber(Protocol::Bb84, mu, &ch, &setup.mzi, &setup.detector);
        let d = expected_gain_qber(Protocol::Bb84, kr.decoy_nu, &ch, &setup.mzi, &setup.detector);
        let b = decoy_bb84_rate(&DecoyInputs {
            mu,
            nu: kr.decoy_nu,
            q_mu: s.gain,
            q_nu: d.gain,
            e_mu: s.qber,
            e_nu: d.qber,
            y0,
            f_ec: kr.f_ec,
            sift_factor: 0.5,
        })
        .unwrap();
        pass &= b.status == DecoyStatus::Ok && b.y1_lower <= y1 && b.e1_upper >= e1;
        notes.push(format!("{loss} dB: Y1 lower/true {:.4}, e1 upper {:.4} vs true {:.4}", b.y1_lower / y1, b.e1_upper, e1));
    }
    outcome(pass, notes.join("; "))
}

fn laser() -> Outcome {
    let p = LaserParams::<f64>::default();
    let dt = 0.1e-12;
    let steady = p.steady_state(1.5).unwrap().1;

    let flat = integrate(&p, &DriveWaveform::constant(1.5, 12e-9, 1e-12).unwrap(), None, Noise::Off, dt).unwrap();
    let tail = flat.window(11e-9, 1.0);
    let s_mean = tail.clone().map(|i| flat.intensity(i)).sum::<f64>() / tail.len() as f64;
    let fixed = (s_mean / steady - 1.0).abs();

    let step = DriveWaveform::from_fn(0.0, 5e-9, 1e-12, |t| if t < 2e-9 { 0.9 } else { 1.5 }).unwrap();
    let on = integrate(&p, &step, None, Noise::Seeded(3), dt).unwrap();
    let overshoot = on.window(2e-9, 4e-9).map(|i| on.intensity(i)).fold(0.0, f64::max) / steady;

    let master = integrate(&p, &DriveWaveform::constant(1.5, 6e-9, 1e-12).unwrap(), None, Noise::Off, dt).unwrap();
    let slave = integrate(&p, &DriveWaveform::constant(1.5, 6e-9, 1e-12).unwrap(), Some(&master), Noise::Seeded(8), dt).unwrap();
    let lock_sd = mean_std(&phase_difference_series(&master, &slave, (3e-9, 6e-9)).unwrap()).unwrap().1;

    let switched = DriveWaveform::from_fn(0.0, 2e-9, 1e-12, |t| if t < 1e-9 { 0.9 } else { 2.0 }).unwrap();
    let mut counts = [0u64; 10];
    for seed in 0..1000 {
        let tr = integrate(&p, &switched, None, Noise::Seeded(seed), 0.2e-12).unwrap();
        let u = tr.field[tr.len() - 1].arg().rem_euclid(TAU) / TAU;
        counts[((u * 10.0) as usize).min(9)] += 1;
    }
    let chi = chi_square_uniform(&counts).unwrap();
    outcome(
        fixed < 1e-3 && overshoot > 1.5 && lock_sd < 0.05 && chi.p_value > 0.01,
        format!(
            "fixed point error {fixed:.1e}, overshoot {overshoot:.2}x, locked phase std {lock_sd:.3} rad, unseeded phase chi-square p = {:.3} (1000 seeds)",
            chi.p_value
        ),
    )
}

fn agreement(sweeps: &[&SweepResult]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for r in sweeps {
        for row in &r.rows {
            worst = worst.max(row.gain_z().abs()).max(row.qber_z().abs());
            points += 1;
        }
    }
    outcome(worst < 5.0, format!("max |z| = {worst:.2} over {points} (gain, QBER) points"))
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "halfwave calibration", halfwave()));
    results.push((2, "chirp-to-phase exactness", chirp_phase()));
    results.push((3, "phase randomization", randomization()));

    let start = Instant::now();
    let bb84 = run_sweep(&ExperimentConfig::defaults(ExperimentKind::Bb84Sweep)).unwrap();
    let bb84_secs = start.elapsed().as_secs_f64();
    let dps = run_sweep(&ExperimentConfig::defaults(ExperimentKind::DpsSweep)).unwrap();
    results.push((4, "BB84 sweep", bb84_sweep(&bb84, bb84_secs)));
    results.push((5, "DPS sweep", dps_sweep(&dps)));
    results.push((6, "24 h stability", stability()));
    results.push((7, "decoy conservativeness", decoy()));
    results.push((8, "laser dynamics", laser()));
    results.push((9, "Monte Carlo vs analytic", agreement(&[&bb84, &dps])));

    let mut failed = 0;
    for (n, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n} [{tag}] {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
