//! Polynomial algebra, the SOS-to-SDP compiler and polynomial synthesis.

pub mod poly;
pub mod sos;
pub mod synth;
