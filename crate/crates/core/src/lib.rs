//! Numerical construction and verification of smooth Lyapunov pairs for
//! work-conserving fluid networks and other polytopic differential
//! inclusions.

pub mod error;
pub mod network;
pub mod vecops;

pub use error::{Error, NetworkViolation, Result};
pub mod io;
pub mod trajectory;
pub mod field;
pub mod lyapunov;
pub mod stability;
pub mod smoothing;
pub mod neighbor;
pub mod cli;
