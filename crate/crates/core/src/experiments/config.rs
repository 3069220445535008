//! Flat `group.key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::keyrate::KeyRateParams;
use crate::laser::LaserParams;
use crate::optics::{ChannelParams, DetectorParams, InterferometerParams};
use crate::protocol::{Engine, LinkSetup, Protocol};
use crate::source::SourceConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    PhaseVoltage,
    Randomization,
    Bb84Sweep,
    DpsSweep,
    Stability,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::PhaseVoltage,
        ExperimentKind::Randomization,
        ExperimentKind::Bb84Sweep,
        ExperimentKind::DpsSweep,
        ExperimentKind::Stability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::PhaseVoltage => "phase_voltage",
            ExperimentKind::Randomization => "randomization",
            ExperimentKind::Bb84Sweep => "bb84_sweep",
            ExperimentKind::DpsSweep => "dps_sweep",
            ExperimentKind::Stability => "stability",
        }
    }

    pub fn protocol(self) -> Option<Protocol> {
        match self {
            ExperimentKind::Bb84Sweep => Some(Protocol::Bb84),
            ExperimentKind::DpsSweep => Some(Protocol::Dps),
            _ => None,
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVoltageConfig {
    pub voltages: Vec<f64>,
    /// Also drive the rate-equation laser model.
    pub physical: bool,
    /// Bias drive in units of the threshold current.
    pub bias: f64,
    /// Drive change per volt; 0 calibrates it from a reference perturbation.
    pub drive_per_volt: f64,
    pub time_step: f64,
}

impl Default for PhaseVoltageConfig {
    fn default() -> Self {
        Self {
            voltages: (0..=20).map(|i| -0.5 + 0.05 * i as f64).collect(),
            physical: true,
            bias: 3.0,
            drive_per_volt: 0.0,
            time_step: 0.1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizationConfig {
    /// Pulse pairs emitted.
    pub samples: usize,
    pub bins: usize,
    /// Phase difference set within each pair, radians.
    pub phase: f64,
    pub randomize: bool,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            bins: 50,
            phase: 0.0,
            randomize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConfig {
    pub duration: f64,
    pub integration_time: f64,
    pub sifted_rate_bps: f64,
    pub true_qber: f64,
    pub bins: usize,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            duration: 86_400.0,
            integration_time: 1.0,
            sifted_rate_bps: 23_500.0,
            true_qber: 0.0241,
            bins: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub losses: Vec<f64>,
    /// Fibre lengths; when non-empty they replace `losses`.
    pub fiber_km: Vec<f64>,
    pub engine: Engine,
    /// Lower bound on symbols per point.
    pub trials: u64,
    /// Symbols per point are raised until this many sifted bits are expected.
    pub min_sifted: u64,
    pub max_clocks: u64,
    pub randomize: bool,
    /// Step of the analytic rate curve, dB.
    pub curve_step: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            losses: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 33.0, 36.0, 39.0, 42.0, 45.0],
            fiber_km: Vec::new(),
            engine: Engine::EventDriven,
            trials: 10_000_000,
            min_sifted: 100_000,
            max_clocks: 1_000_000_000_000,
            randomize: true,
            curve_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub rng_seed: u64,
    pub output_path: String,
    pub laser: LaserParams<f64>,
    pub source: SourceConfig<f64>,
    pub channel: ChannelParams<f64>,
    pub mzi: InterferometerParams<f64>,
    pub detector: DetectorParams<f64>,
    pub keyrate: KeyRateParams<f64>,
    pub sweep: SweepConfig,
    pub phase_voltage: PhaseVoltageConfig,
    pub randomization: RandomizationConfig,
    pub stability: StabilityConfig,
}

enum Field<'a> {
    F64(&'a mut f64),
    U64(&'a mut u64),
    Usize(&'a mut usize),
    Bool(&'a mut bool),
    Str(&'a mut String),
    List(&'a mut Vec<f64>),
    Engine(&'a mut Engine),
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{raw}`")))
}

impl Field<'_> {
    fn set(self, key: &str, raw: &str) -> Result<()> {
        match self {
            Field::F64(v) => *v = parse_value(key, raw)?,
            Field::U64(v) => *v = parse_value::<f64>(key, raw).and_then(|x| whole(key, x))?,
            Field::Usize(v) => *v = parse_value::<f64>(key, raw).and_then(|x| whole(key, x))? as usize,
            Field::Bool(v) => *v = parse_value(key, raw)?,
            Field::Str(v) => *v = raw.to_string(),
            Field::List(v) => {
                *v = raw
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_value(key, s))
                    .collect::<Result<_>>()?
            }
            Field::Engine(v) => *v = raw.parse()?,
        }
        Ok(())
    }

    fn show(&self) -> String {
        match self {
            Field::F64(v) => show_f64(**v),
            Field::U64(v) => v.to_string(),
            Field::Usize(v) => v.to_string(),
            Field::Bool(v) => v.to_string(),
            Field::Str(v) => (*v).clone(),
            Field::List(v) => v.iter().map(|x| show_f64(*x)).collect::<Vec<_>>().join(","),
            Field::Engine(v) => match v {
                Engine::Pipeline => "pipeline".into(),
                Engine::EventDriven => "event".into(),
            },
        }
    }
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or large magnitudes.
fn show_f64(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e7) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

/// Accepts integers written as `1e7` as long as they are whole.
fn whole(key: &str, x: f64) -> Result<u64> {
    if x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 {
        Ok(x as u64)
    } else {
        Err(Error::Config(format!("{key}: expected a non-negative integer, got {x}")))
    }
}

impl ExperimentConfig {
    /// Defaults for an experiment, including its decoder visibility and
    /// photon number.
    pub fn defaults(experiment: ExperimentKind) -> Self {
        let mut mzi = InterferometerParams::default();
        let mut source = SourceConfig::default();
        match experiment {
            ExperimentKind::Bb84Sweep => mzi = LinkSetup::<f64>::bb84().mzi,
            ExperimentKind::DpsSweep => {
                let d = LinkSetup::<f64>::dps();
                mzi = d.mzi;
                source = d.source;
            }
            _ => {}
        }
        Self {
            experiment,
            rng_seed: 1,
            output_path: "out".into(),
            laser: LaserParams::default(),
            source,
            channel: ChannelParams::default(),
            mzi,
            detector: DetectorParams::default(),
            keyrate: KeyRateParams::default(),
            sweep: SweepConfig::default(),
            phase_voltage: PhaseVoltageConfig::default(),
            randomization: RandomizationConfig::default(),
            stability: StabilityConfig::default(),
        }
    }

    fn visit(&mut self, mut f: impl FnMut(&'static str, Field<'_>)) {
        f("rng_seed", Field::U64(&mut self.rng_seed));
        f("output_path", Field::Str(&mut self.output_path));
        let l = &mut self.laser;
        f("laser.carrier_lifetime", Field::F64(&mut l.carrier_lifetime));
        f("laser.photon_lifetime", Field::F64(&mut l.photon_lifetime));
        f("laser.gain_slope", Field::F64(&mut l.gain_slope));
        f("laser.transparency_carrier", Field::F64(&mut l.transparency_carrier));
        f("laser.gain_compression", Field::F64(&mut l.gain_compression));
        f("laser.linewidth_enhancement", Field::F64(&mut l.linewidth_enhancement));
        f("laser.spontaneous_fraction", Field::F64(&mut l.spontaneous_fraction));
        f("laser.injection_coupling", Field::F64(&mut l.injection_coupling));
        f("laser.threshold_current", Field::F64(&mut l.threshold_current));
        f("laser.detuning", Field::F64(&mut l.detuning));
        let s = &mut self.source;
        f("source.clock_rate", Field::F64(&mut s.clock_rate));
        f("source.pulse_width", Field::F64(&mut s.pulse_width));
        f("source.wavelength", Field::F64(&mut s.wavelength));
        f("source.halfwave_voltage", Field::F64(&mut s.halfwave_voltage));
        f("source.perturbation_duration", Field::F64(&mut s.perturbation_duration));
        f("source.block_length", Field::Usize(&mut s.block_length));
        f("source.mean_photon_number", Field::F64(&mut s.mean_photon_number));
        let c = &mut self.channel;
        f("channel.loss_db", Field::F64(&mut c.loss_db));
        f("channel.loss_per_km", Field::F64(&mut c.loss_per_km));
        let m = &mut self.mzi;
        f("mzi.delay", Field::F64(&mut m.delay));
        f("mzi.internal_phase", Field::F64(&mut m.internal_phase));
        f("mzi.insertion_loss_db", Field::F64(&mut m.insertion_loss_db));
        f("mzi.visibility", Field::F64(&mut m.visibility));
        let d = &mut self.detector;
        f("detector.efficiency", Field::F64(&mut d.efficiency));
        f("detector.dark_rate", Field::F64(&mut d.dark_rate));
        f("detector.gate_width", Field::F64(&mut d.gate_width));
        f("detector.gate_period", Field::F64(&mut d.gate_period));
        f("keyrate.f_ec", Field::F64(&mut self.keyrate.f_ec));
        f("keyrate.decoy_nu", Field::F64(&mut self.keyrate.decoy_nu));
        let w = &mut self.sweep;
        f("sweep.losses", Field::List(&mut w.losses));
        f("sweep.fiber_km", Field::List(&mut w.fiber_km));
        f("sweep.engine", Field::Engine(&mut w.engine));
        f("sweep.trials", Field::U64(&mut w.trials));
        f("sweep.min_sifted", Field::U64(&mut w.min_sifted));
        f("sweep.max_clocks", Field::U64(&mut w.max_clocks));
        f("sweep.randomize", Field::Bool(&mut w.randomize));
        f("sweep.curve_step", Field::F64(&mut w.curve_step));
        let p = &mut self.phase_voltage;
        f("phase_voltage.voltages", Field::List(&mut p.voltages));
        f("phase_voltage.physical", Field::Bool(&mut p.physical));
        f("phase_voltage.bias", Field::F64(&mut p.bias));
        f("phase_voltage.drive_per_volt", Field::F64(&mut p.drive_per_volt));
        f("phase_voltage.time_step", Field::F64(&mut p.time_step));
        let r = &mut self.randomization;
        f("randomization.samples", Field::Usize(&mut r.samples));
        f("randomization.bins", Field::Usize(&mut r.bins));
        f("randomization.phase", Field::F64(&mut r.phase));
        f("randomization.randomize", Field::Bool(&mut r.randomize));
        let t = &mut self.stability;
        f("stability.duration", Field::F64(&mut t.duration));
        f("stability.integration_time", Field::F64(&mut t.integration_time));
        f("stability.sifted_rate_bps", Field::F64(&mut t.sifted_rate_bps));
        f("stability.true_qber", Field::F64(&mut t.true_qber));
        f("stability.bins", Field::Usize(&mut t.bins));
    }

    /// Applies `key = value` lines on top of the experiment's defaults.
    /// Blank lines and `#` comments are ignored; unknown keys are errors.
    pub fn parse(experiment: ExperimentKind, text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if entries.insert(k.clone(), v).is_some() {
                return Err(Error::Config(format!("{k}: set more than once")));
            }
        }
        if let Some(named) = entries.remove("experiment") {
            let named: ExperimentKind = named.parse()?;
            if named != experiment {
                return Err(Error::Config(format!(
                    "experiment: file is for `{}`, not `{}`",
                    named.name(),
                    experiment.name()
                )));
            }
        }
        let mut cfg = Self::defaults(experiment);
        let mut result = Ok(());
        cfg.visit(|key, field| {
            if let Some(raw) = entries.remove(key) {
                if result.is_ok() {
                    result = field.set(key, &raw);
                }
            }
        });
        result?;
        if let Some(k) = entries.keys().next() {
            return Err(Error::Config(format!("{k}: unknown key")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(experiment: ExperimentKind, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(experiment, &text)
    }

    /// Every resolved setting as `(key, value)`, in a fixed order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut copy = self.clone();
        let mut out = vec![("experiment".to_string(), self.experiment.name().to_string())];
        copy.visit(|k, f| out.push((k.to_string(), f.show())));
        out
    }

    /// The resolved configuration in the same format [`parse`](Self::parse)
    /// reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Loss points of a sweep: fibre lengths times dB/km when given.
    pub fn sweep_losses(&self) -> Vec<f64> {
        if self.sweep.fiber_km.is_empty() {
            self.sweep.losses.clone()
        } else {
            self.sweep
                .fiber_km
                .iter()
                .map(|km| km * self.channel.loss_per_km)
                .collect()
        }
    }

    pub fn link_setup(&self, protocol: Protocol) -> LinkSetup<f64> {
        LinkSetup {
            protocol,
            source: self.source,
            channel: self.channel,
            mzi: self.mzi,
            detector: self.detector,
            randomize_global_phase: self.sweep.randomize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, e: Error| match e {
            Error::Invalid { name: inner, reason } => Error::Config(format!("{name}.{inner}: {reason}")),
            other => other,
        };
        self.laser.validate().map_err(|e| field("laser", e))?;
        self.source.validate().map_err(|e| field("source", e))?;
        self.channel.validate().map_err(|e| field("channel", e))?;
        self.mzi.validate().map_err(|e| field("mzi", e))?;
        self.detector.validate().map_err(|e| field("detector", e))?;
        self.keyrate.validate().map_err(|e| field("keyrate", e))?;
        let bad = |k: &str, why: String| Err(Error::Config(format!("{k}: {why}")));
        match self.experiment {
            ExperimentKind::Bb84Sweep | ExperimentKind::DpsSweep => {
                let w = &self.sweep;
                let losses = self.sweep_losses();
                let key = if w.fiber_km.is_empty() { "sweep.losses" } else { "sweep.fiber_km" };
                if losses.is_empty() {
                    return bad(key, "must not be empty".into());
                }
                if losses.iter().any(|l| !l.is_finite() || *l < 0.0) {
                    return bad(key, "must be finite and >= 0".into());
                }
                if losses.windows(2).any(|p| p[0] >= p[1]) {
                    return bad(key, "must be increasing".into());
                }
                if w.trials < 2 {
                    return bad("sweep.trials", format!("must be >= 2, got {}", w.trials));
                }
                if w.max_clocks < w.trials {
                    return bad("sweep.max_clocks", "must be >= sweep.trials".into());
                }
                if !(w.curve_step > 0.0) {
                    return bad("sweep.curve_step", format!("must be > 0, got {}", w.curve_step));
                }
                let protocol = self.experiment.protocol().expect("sweep");
                if protocol == Protocol::Bb84 && self.source.block_length != 2 {
                    return bad("source.block_length", "BB84 needs 2".into());
                }
                if !(self.keyrate.decoy_nu < protocol.signal_mean_photons(&self.source)) {
                    return bad("keyrate.decoy_nu", "must be below the signal photon number".into());
                }
                self.mzi
                    .delay_slots(self.source.clock_rate)
                    .map_err(|e| field("mzi", e))?;
            }
            ExperimentKind::PhaseVoltage => {
                let p = &self.phase_voltage;
                if p.voltages.is_empty() || p.voltages.iter().any(|v| !v.is_finite()) {
                    return bad("phase_voltage.voltages", "must be a non-empty list of numbers".into());
                }
                if !(p.bias > 1.0) {
                    return bad("phase_voltage.bias", format!("must be above threshold (> 1), got {}", p.bias));
                }
                if !(p.drive_per_volt >= 0.0) {
                    return bad("phase_voltage.drive_per_volt", "must be >= 0".into());
                }
                if !(p.time_step > 0.0) {
                    return bad("phase_voltage.time_step", "must be > 0".into());
                }
            }
            ExperimentKind::Randomization => {
                let r = &self.randomization;
                if self.source.block_length != 2 {
                    return bad("source.block_length", "randomization test needs 2".into());
                }
                if r.samples < 2 {
                    return bad("randomization.samples", "must be >= 2".into());
                }
                if r.bins < 1 {
                    return bad("randomization.bins", "must be >= 1".into());
                }
                if !r.phase.is_finite() {
                    return bad("randomization.phase", "must be finite".into());
                }
            }
            ExperimentKind::Stability => {
                let t = &self.stability;
                if !(t.integration_time > 0.0) {
                    return bad("stability.integration_time", "must be > 0".into());
                }
                if !(t.duration >= t.integration_time) {
                    return bad("stability.duration", "must be >= stability.integration_time".into());
                }
                if !(t.sifted_rate_bps * t.integration_time >= 1.0) {
                    return bad("stability.sifted_rate_bps", "fewer than one sifted bit per bin".into());
                }
                if !(0.0..=1.0).contains(&t.true_qber) {
                    return bad("stability.true_qber", format!("must lie in [0, 1], got {}", t.true_qber));
                }
                if t.bins < 1 {
                    return bad("stability.bins", "must be >= 1".into());
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        for kind in ExperimentKind::ALL {
            let cfg = ExperimentConfig::defaults(kind);
            cfg.validate().unwrap();
            let back = ExperimentConfig::parse(kind, &cfg.to_text()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn per_experiment_visibility() {
        assert_eq!(ExperimentConfig::defaults(ExperimentKind::Bb84Sweep).mzi.visibility, 0.952);
        let dps = ExperimentConfig::defaults(ExperimentKind::DpsSweep);
        assert_eq!(dps.mzi.visibility, 0.962);
        assert_eq!(dps.source.mean_photon_number, 0.2);
        assert_eq!(ExperimentConfig::defaults(ExperimentKind::Randomization).mzi.visibility, 0.9906);
    }

    #[test]
    fn overrides_and_comments() {
        let text = "# run\nexperiment = dps_sweep\nsweep.fiber_km = 50, 100 # spools\nrng_seed = 7\nsweep.trials = 1e6\n";
        let cfg = ExperimentConfig::parse(ExperimentKind::DpsSweep, text).unwrap();
        assert_eq!(cfg.rng_seed, 7);
        assert_eq!(cfg.sweep.trials, 1_000_000);
        assert_eq!(cfg.sweep_losses(), vec![10.0, 20.0]);
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            ("detector.efficiency = 1.5", "detector.efficiency"),
            ("detector.colour = red", "detector.colour"),
            ("sweep.losses = 10, 5", "sweep.losses"),
            ("sweep.trials = 2.5", "sweep.trials"),
            ("mzi.visibility = x", "mzi.visibility"),
            ("experiment = stability", "experiment"),
            ("rng_seed = 1\nrng_seed = 2", "rng_seed"),
        ];
        for (text, key) in cases {
            let err = ExperimentConfig::parse(ExperimentKind::Bb84Sweep, text).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}");
            assert!(err.to_string().contains(key), "{text}: {err}");
        }
    }

    #[test]
    fn recipe_specific_checks() {
        assert!(ExperimentConfig::parse(ExperimentKind::PhaseVoltage, "phase_voltage.bias = 0.5").is_err());
        assert!(ExperimentConfig::parse(ExperimentKind::Stability, "stability.duration = 0.5").is_err());
        assert!(ExperimentConfig::parse(ExperimentKind::Randomization, "source.block_length = 3").is_err());
    }
}
