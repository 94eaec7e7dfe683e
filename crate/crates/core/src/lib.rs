//! Data and evaluation pipeline for controlled multi-track symbolic music
//! infilling.

pub mod analysis;
pub mod controls;
pub mod dataset;
pub mod language;
pub mod measure;
pub mod metrics;
pub mod midi;
pub mod request;
pub mod score;
pub mod synth;
pub mod tokens;
