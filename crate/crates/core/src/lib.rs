//! Distribution-free multivariate two-sample and independence tests built
//! on optimal-transport ranks.

pub mod are;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod ks;
pub mod lap;
pub mod linalg;
pub mod quadrature;
pub mod reference;
pub mod rng;
pub mod sample;
pub mod simulation;
pub mod special;
pub mod statistics;
pub mod transport;

pub use error::{Error, Result};
pub use sample::SampleMatrix;
