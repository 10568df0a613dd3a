//! Crop yield regression with single-hidden-layer networks tuned by the
//! imperialist competitive algorithm (ICA) or the grey wolf optimizer (GWO).

pub mod ann;
pub mod data;
pub mod error;
pub mod experiments;
pub mod gwo;
pub mod hybrid;
pub mod ica;
pub mod metrics;
pub mod search;

pub use error::{Error, Result};
