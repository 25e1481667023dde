//! Downlink beamforming for cell-free integrated sensing and communication.
//!
//! Transmitting APs jointly serve single-antenna UEs while receiving APs
//! collect the target echo. The crate covers the system model and its exact
//! metrics ([`model`]), seeded scenario generation ([`channel`]), the
//! separately designed baselines ([`baseline`]), joint SDR beamforming with
//! rank-1 recovery and dual diagnostics ([`jsc`]), and fixed-beam power
//! allocation ([`power`]).

pub mod baseline;
pub mod channel;
mod error;
pub mod jsc;
pub mod model;
pub mod power;
mod subspace;

pub use error::CoreError;
