pub mod alignment;
pub mod autodiff;
pub mod dataset;
pub mod encoders;
pub mod error;
pub mod evaluation;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
