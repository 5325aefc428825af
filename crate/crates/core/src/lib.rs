//! Følner-type calculus on discrete groups and duals of compact quantum groups.

pub mod calculus;
pub mod classical;
pub mod cli;
pub mod ergodic;
pub mod error;
pub mod fusion;
pub mod stabilizer;

pub use error::{Error, Result};
