//! Kalman filter Q-learning (full and diagonal covariance) and projected TD
//! learning for linear Q-function approximation, with the cart-pole, cashier
//! and car-hill benchmarks and an off-line learning-curve harness.

pub mod basis;
pub mod config;
pub mod envs;
pub mod experiment;
pub mod error;
pub mod harness;
pub mod learners;
pub mod model;

pub use error::{Error, Result};
