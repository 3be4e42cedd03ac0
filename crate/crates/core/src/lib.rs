//! System-level simulation of user subscriptions in a sliced mobile radio
//! access network, plus the closed-form logit equilibrium it is compared to.

pub mod analytic;
pub mod config;
pub mod error;
pub mod grid;
pub mod harness;
pub mod logit;
pub mod radio;
pub mod report;
pub mod sim;
pub mod vec2;

pub use error::{Error, Result};
