pub mod calibration;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod output;
pub mod policy;
pub mod rng;
pub mod seir;

pub use error::{Error, Result};
