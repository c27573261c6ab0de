//! Run configuration and the end-to-end event-classification pipeline
//! behind the `gridshap` command.

pub mod config;
pub mod pipeline;

pub use config::{pair_name, RunConfig};
pub use pipeline::{explain, ingest, run, ExplainRequest, InputError, RunSummary};
