//! Dual-process agentic uncertainty quantification.
//!
//! System 1 acts on an uncertainty-aware memory of verbalized confidence
//! and explanations; System 2 reflects with consistency-weighted
//! Best-of-N sampling when confidence drops below a threshold. The
//! [`worldsim`] text world and the scripted [`gateway`] make the whole
//! loop runnable and reproducible without a live model.

pub mod confidence;
pub mod controller;
pub mod elicitation;
pub mod error;
pub mod gateway;
pub mod memory;
pub mod metrics;
pub mod reflection;
pub mod seed;
pub mod trajectory;
pub mod worldsim;

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use confidence::Confidence;
pub use controller::{run_episode, PolicyConfig, PolicyMode};
pub use error::ContractViolation;
pub use memory::{MemoryEntry, MemoryWindow, UncertaintyAwareMemory};
pub use trajectory::{CostLedger, TerminationReason, TrajectoryRecord};

/// Floating-point type the metric kernels are generic over.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Sum + Debug + Send + Sync + 'static {}

impl<T> Scalar for T where T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Send + Sync + 'static {}

pub type CalibrationRecord = metrics::CalibrationRecord<f64>;
pub type CalibrationRecordF32 = metrics::CalibrationRecord<f32>;
pub type CostPerSuccess = metrics::CostPerSuccess<f64>;
pub type LatencyModel = metrics::LatencyModel<f64>;
