//! Metrics and anomaly detectors over interaction traces, trace cleaning,
//! and the statistical test battery.

mod clean;
mod metrics;
pub mod stats;

use thiserror::Error;

pub use clean::{clean_mask, clean_traces, CleanReport, ParticipantTrace, MAX_COMPLETION_SECS};
pub use metrics::{
    compute_metrics, concurrency_fraction, detect_flashing, detect_mismatch, detect_out_of_order, MetricReport,
    DEFAULT_FLASH_WINDOW,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("sample of {0} is too large for exact enumeration")]
    TooLargeForExact(usize),
}
