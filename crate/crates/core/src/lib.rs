//! Social and spatial exposure measures on county panels, and fixed-effects
//! regression with cluster-robust inference.

pub mod agestd;
pub mod coredata;
mod error;
pub mod exposure;
pub mod geo;
pub mod regress;
pub mod synthlab;

pub use error::{Error, Result};
