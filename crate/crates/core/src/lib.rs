pub mod autograd;
pub mod error;
pub mod eval;
pub mod kg;
pub mod parallel;
pub mod predictor;
pub mod sampler;
pub mod search;
pub mod seed;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
