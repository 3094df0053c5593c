//! Hermitian-symmetric OFDM time-domain reflectometry for power-line networks.
//!
//! Modules follow the pipeline: a [`network`] is sampled on a
//! [`spectral::ChannelGrid`], [`txrx`] builds real-valued HS-OFDM symbols and
//! passes them through the channel, [`reflectogram`] turns received symbols
//! into reflectograms, [`metrics`] scores them and [`multiaccess`] schedules
//! several modems on one network.

pub mod error;
pub mod metrics;
pub mod multiaccess;
pub mod network;
pub mod presets;
pub mod reflectogram;
pub mod spectral;
pub mod txrx;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use spectral::ChannelGrid;
