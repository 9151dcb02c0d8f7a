//! Batch runner for the auq kernel: configuration, seeded episode
//! execution, JSONL trajectory logs with exact replay, and reports.

pub mod cli;
pub mod config;
pub mod error;
pub mod jsonl;
pub mod report;
pub mod run;

pub use config::{Cell, GatewayConfig, ReportConfig, RunConfig};
pub use error::HarnessError;
