use super::*;
use crate::optics::detect;
use crate::source::emit_train;
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI};

fn lossless() -> LinkSetup<f64> {
    let mut s = LinkSetup::bb84();
    s.mzi.insertion_loss_db = 0.0;
    s.detector.efficiency = 1.0;
    s.detector.dark_rate = 0.0;
    s
}

#[test]
fn bb84_phase_table() {
    let cases = [
        (Basis::Z, false, 0.0),
        (Basis::Z, true, PI),
        (Basis::X, false, FRAC_PI_2),
        (Basis::X, true, 3.0 * FRAC_PI_2),
    ];
    for (basis, bit, want) in cases {
        assert_eq!(Bb84Symbol { basis, bit }.phase_delta::<f64>(), want);
    }
}

#[test]
fn bb84_encode_pairs_and_requires_two_pulse_blocks() {
    let syms = generate_bb84_symbols(50, 3);
    let cfg = SourceConfig::<f64>::default();
    let phases = bb84_encode(&syms, &cfg).unwrap();
    assert_eq!(phases.len(), 100);
    for (pair, s) in phases.chunks(2).zip(&syms) {
        assert_eq!(pair[0], 0.0);
        assert_eq!(pair[1], s.phase_delta::<f64>());
    }
    let bad = SourceConfig {
        block_length: 4,
        ..cfg
    };
    assert!(bb84_encode(&syms, &bad).is_err());
}

#[test]
fn dps_encode_differences_match_symbols() {
    let syms = generate_dps_symbols(200, 9);
    let phases = dps_encode::<f64>(&syms);
    for i in 1..phases.len() {
        let d = (phases[i] - phases[i - 1]).wrap_phase();
        let want = syms[i].phase_delta::<f64>();
        assert!((d - want).abs() < 1e-12 || (d - want).abs() > 2.0 * PI - 1e-12);
    }
}

#[test]
fn receiver_phase_maps_matching_basis_to_fixed_ports() {
    let mzi = InterferometerParams::<f64> {
        visibility: 1.0,
        insertion_loss_db: 0.0,
        ..Default::default()
    };
    for basis in [Basis::Z, Basis::X] {
        for bit in [false, true] {
            let s = Bb84Symbol { basis, bit };
            let (p0, p1) = mzi.split(1.0, s.phase_delta::<f64>() + basis.receiver_phase::<f64>());
            let (right, wrong) = if bit { (p1, p0) } else { (p0, p1) };
            assert!((right - 1.0).abs() < 1e-12 && wrong.abs() < 1e-12);
        }
    }
}

#[test]
fn perfect_link_has_zero_qber() {
    let mut s = lossless();
    s.mzi.visibility = 1.0;
    for engine in [Engine::Pipeline, Engine::EventDriven] {
        let r = simulate_link(&s, 20_000, engine, 1).unwrap();
        assert!(r.sifted_count > 1000);
        assert_eq!(r.error_count, 0);
    }
    let mut d = LinkSetup::<f64>::dps();
    d.mzi.visibility = 1.0;
    d.detector.dark_rate = 0.0;
    for engine in [Engine::Pipeline, Engine::EventDriven] {
        let r = simulate_link(&d, 20_000, engine, 1).unwrap();
        assert!(r.sifted_count > 100);
        assert_eq!(r.error_count, 0);
    }
}

#[test]
fn mismatched_bases_give_no_sifted_bits() {
    let cfg = SourceConfig::<f64> {
        mean_photon_number: 5.0,
        ..Default::default()
    };
    let syms = generate_bb84_symbols(2000, 4);
    let flipped: Vec<Basis> = syms
        .iter()
        .map(|s| if s.basis == Basis::Z { Basis::X } else { Basis::Z })
        .collect();
    let train = emit_train(&cfg, &bb84_encode(&syms, &cfg).unwrap(), true, 2).unwrap();
    let intens = bb84_receiver_intensities(&train, &InterferometerParams::default(), &flipped).unwrap();
    let clicks = detect(&intens, &DetectorParams::default(), 5);
    let r = bb84_sift(&syms, &flipped, &clicks, &SiftContext::new(2e9, 2, 0)).unwrap();
    assert!(r.clicked_clocks > 100);
    assert_eq!(r.sifted_count, 0);
    assert_eq!(r.error_count, 0);
}

#[test]
fn sift_rejects_misaligned_records() {
    let syms = generate_bb84_symbols(4, 1);
    let bases = generate_bases(4, 1);
    let rec = ClickRecord::from_clicks(vec![0, 2, 4, 6], vec![[true, false]; 4]);
    assert!(bb84_sift(&syms, &bases, &rec, &SiftContext::new(2e9, 2, 0)).is_err());
    let short = ClickRecord::from_clicks(vec![1, 3], vec![[true, false]; 2]);
    assert!(bb84_sift(&syms, &bases, &short, &SiftContext::new(2e9, 2, 0)).is_err());
}

#[test]
fn dps_sift_drops_block_edges() {
    let syms = generate_dps_symbols(8, 2);
    let slots: Vec<u64> = (1..8).collect();
    let rec = ClickRecord::from_clicks(slots, vec![[true, false]; 7]);
    let r = dps_sift(&syms, &rec, &SiftContext::new(2e9, 4, 0)).unwrap();
    // Slot 4 straddles the boundary between blocks 0 and 1.
    assert_eq!(r.sifted_count, 6);
    let zeros = syms.iter().enumerate().filter(|(i, s)| *i != 4 && *i != 0 && !s.bit).count();
    assert_eq!(r.sifted_count - r.error_count, zeros as u64);
}

#[test]
fn merge_adds_counts() {
    let a = SiftResult::<f64>::from_counts(100, 10, 5, 1, 1e9);
    let b = SiftResult::from_counts(300, 30, 15, 1, 1e9);
    let m = a.merge(&b);
    assert_eq!((m.clocks, m.clicked_clocks, m.sifted_count, m.error_count), (400, 40, 20, 2));
    assert!((m.qber - 0.1).abs() < 1e-15);
    assert!((m.sifted_rate - 20.0 * 1e9 / 400.0).abs() < 1e-6);
}

#[test]
fn record_serializes_expected_keys() {
    let r = SiftResult::from_counts(100, 10, 5, 1, 1e9).record(Protocol::Bb84, 10.0);
    let v = serde_json::to_value(&r).unwrap();
    for key in ["protocol", "loss_db", "sifted_count", "error_count", "qber", "sifted_rate_bps"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["protocol"], "bb84");
}

#[test]
fn analytic_model_limits() {
    let ch = ChannelParams::attenuator(0.0);
    let mzi = InterferometerParams::<f64> {
        visibility: 0.952,
        ..Default::default()
    };
    let det = DetectorParams::default();
    let strong = expected_gain_qber(Protocol::Bb84, 50.0, &ch, &mzi, &det);
    assert!((strong.qber - 0.024).abs() < 1e-6);
    let dark_only = expected_gain_qber(Protocol::Bb84, 0.0, &ch, &mzi, &det);
    assert!((dark_only.qber - 0.5).abs() < 1e-12);
    assert!((dark_only.gain - vacuum_yield(&det)).abs() < 1e-20);
}

#[test]
fn protocol_and_engine_parse() {
    assert_eq!("dps".parse::<Protocol>().unwrap(), Protocol::Dps);
    assert_eq!("event".parse::<Engine>().unwrap(), Engine::EventDriven);
    assert!("b92".parse::<Protocol>().is_err());
}

#[test]
fn simulation_is_seed_deterministic() {
    let s = LinkSetup::<f64>::bb84();
    let a = simulate_link(&s, 70_000, Engine::Pipeline, 11).unwrap();
    let b = simulate_link(&s, 70_000, Engine::Pipeline, 11).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sifting_never_creates_events(seed in any::<u64>(), mu in 0.0f64..3.0, loss in 0.0f64..20.0) {
        let mut s = LinkSetup::<f64>::bb84();
        s.source.mean_photon_number = mu;
        s.channel.loss_db = loss;
        s.detector.dark_rate = 1e6;
        for engine in [Engine::Pipeline, Engine::EventDriven] {
            let r = simulate_link(&s, 3000, engine, seed).unwrap();
            prop_assert!(r.sifted_count <= r.clicked_clocks);
            prop_assert!(r.clicked_clocks <= r.clocks);
            prop_assert!(r.error_count <= r.sifted_count);
        }
        let mut d = LinkSetup::<f64>::dps();
        d.source.mean_photon_number = mu;
        d.channel.loss_db = loss;
        let r = simulate_link(&d, 3000, Engine::Pipeline, seed).unwrap();
        prop_assert!(r.sifted_count <= r.clicked_clocks && r.clicked_clocks < r.clocks);
    }
}
