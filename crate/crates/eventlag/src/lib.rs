//! Ingestion, synthetic data, report files and the command-line pipeline
//! around [`eventlag_core`].
//!
//! * [`ingest`]: CSV readers, daily aggregation and the sentiment ratio.
//! * [`synth`]: synthetic brands with planted, optionally coupled events.
//! * [`eventio`]: JSONL event dumps.
//! * [`report`]: curve CSVs and markdown tables.
//! * [`pipeline`]: the end-to-end run.

mod error;

pub mod eventio;
pub mod ingest;
pub mod output;
pub mod parallel;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
pub use eventlag_core as core;
