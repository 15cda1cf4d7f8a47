//! Shared harness bodies for the fuzz targets.

pub mod checks;
