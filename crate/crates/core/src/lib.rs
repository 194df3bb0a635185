//! Pseudo-video instance segmentation datasets from still images.
//!
//! The pipeline turns an annotated image into a short clip with consistent
//! instance tracks: a naive clip of rotated copies ([`vmosp::make_naive_video`]),
//! optional instance splicing with smooth motion ([`vmosp`]), and optional
//! clip-consistent augmentation blends ([`augment`]). [`synth`] drives it
//! over a whole dataset and [`manifest`] writes the result.
//!
//! [`mstm`] holds an `f64` forward reference of the temporal attention module
//! trained on such data.

pub mod affine;
pub mod augment;
pub mod error;
pub mod ingest;
pub mod manifest;
pub mod mask;
pub mod mstm;
pub mod par;
pub mod preview;
pub mod synth;
pub mod validate;
pub mod video;
pub mod vmosp;

pub use error::{Error, Result};
