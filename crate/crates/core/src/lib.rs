//! Simulator for a directly phase-modulated two-laser light source and the
//! phase-encoded QKD links built on it.
//!
//! The numeric modules are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the experiment
//! recipes and the command-line front end use.

pub mod error;
pub mod experiments;
pub mod keyrate;
pub mod laser;
pub mod num;
pub mod optics;
pub mod protocol;
pub mod seed;
pub mod source;
pub mod stats;

pub use error::{Error, Result};
pub use num::Real;

pub type LaserParamsF64 = laser::LaserParams<f64>;
pub type DriveWaveformF64 = laser::DriveWaveform<f64>;
pub type FieldTraceF64 = laser::FieldTrace<f64>;
pub type SourceConfigF64 = source::SourceConfig<f64>;
pub type PulseTrainF64 = source::PulseTrain<f64>;
pub type ChannelParamsF64 = optics::ChannelParams<f64>;
pub type InterferometerParamsF64 = optics::InterferometerParams<f64>;
pub type DetectorParamsF64 = optics::DetectorParams<f64>;
pub type LinkSetupF64 = protocol::LinkSetup<f64>;
pub type SiftResultF64 = protocol::SiftResult<f64>;
pub type RatePointF64 = keyrate::RatePoint<f64>;
