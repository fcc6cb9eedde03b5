//! Downlink multicell multi-antenna scheduling and beamforming.
//!
//! The proposed scheme alternates closed-form beamformer updates with an
//! exact per-cell user-to-beam assignment; matched filtering,
//! zero-forcing and two WMMSE variants serve as baselines.

pub mod assignment;
pub mod baselines;
pub mod config;
pub mod error;
pub mod fp;
pub mod linalg;
pub mod model;
pub mod network;
pub mod output;
pub mod simulator;
pub mod trace;

pub use config::{NetworkConfig, PowerMode};
pub use error::{Error, Result};
pub use model::{BeamformerSet, Outcome, Schedule, Weights};
pub use network::{ChannelTensor, Dims, NoiseModel, Topology};
pub use simulator::{ExperimentConfig, Scheme};
