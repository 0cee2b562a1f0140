//! Auto-encoders as vector fields: training, conservativeness diagnostics,
//! closed-form energies, and learned extraction of conservative components.

pub mod analysis;
pub mod autoencoder;
pub mod data;
mod error;
pub mod experiments;
pub mod fields;
pub mod numerics;

pub use error::{Error, Result};
