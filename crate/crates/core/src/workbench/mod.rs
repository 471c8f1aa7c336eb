//! Data ingestion, synthetic studies, reports and pipeline orchestration.

pub mod io;
pub mod simulate;
pub mod pipeline;
pub mod report;
