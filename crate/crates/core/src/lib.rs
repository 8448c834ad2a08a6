pub mod alignment;
pub mod chemdata;
pub mod cli;
pub mod encoders;
pub mod error;
pub mod evaluation;
pub mod numerics;

pub use error::{Error, Result};
