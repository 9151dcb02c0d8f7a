use thiserror::Error;

/// A caller broke a documented precondition of a kernel operation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("contract violation in {operation}: {detail}")]
pub struct ContractViolation {
    pub operation: &'static str,
    pub detail: String,
}

impl ContractViolation {
    pub fn new(operation: &'static str, detail: impl Into<String>) -> Self {
        Self {
            operation,
            detail: detail.into(),
        }
    }
}
