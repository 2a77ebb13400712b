//! E-process based standard and comparative backtests for risk measures.

pub mod backtests;
pub mod betting;
pub mod eprocess;
pub mod error;
pub mod forecast;
pub mod io;
pub mod kernels;
pub mod simulate;
pub mod study;

pub use error::{Error, Result};
