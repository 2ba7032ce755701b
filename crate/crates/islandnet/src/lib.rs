//! Std companion to `islandnet-core`: experiment configs, CSV/JSON artifacts,
//! spectral estimates, manifests and parameter sweeps.

pub mod config;
pub mod io;
pub mod manifest;
pub mod psd;
pub mod sweep;

pub use islandnet_core as core;
