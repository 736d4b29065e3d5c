//! Event analytics for paired daily time series.
//!
//! The crate covers the whole analytical path from a normalized daily series
//! to a significance report:
//!
//! * [`series`]: the date-indexed container, z-scoring and rolling windows
//!   (contiguous or weekday-aligned).
//! * [`detect`]: moving-window spike detectors (ESD, Hampel, IQR).
//! * [`events`]: assembly of spike days into events with growth, peak and
//!   relaxation signatures.
//! * [`clustering`]: Euclidean, DTW and slope-feature distances plus k-means.
//! * [`predict`]: matching of signal events to the first following target
//!   event, inverse-distance weights and cumulative probability curves.
//! * [`significance`]: the randomization test over relocated target events.
//!
//! Everything here is `no_std` with `alloc`; file formats, ingestion and the
//! command line live in the `eventlag` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod clustering;
pub mod detect;
mod error;
pub mod events;
pub mod predict;
pub mod series;
pub mod significance;
pub mod stats;

pub use error::{Error, Result};
