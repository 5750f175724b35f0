//! Controller synthesis from noisy open-loop data.

pub mod cli;
pub mod conic;
pub mod dataio;
pub mod ellipsoid;
pub mod error;
pub mod linsynth;
pub mod numkern;
pub mod petersen;
pub mod simkit;
pub mod sospoly;

pub use error::{Error, Result};
