use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ContractViolation;

/// A verbalized confidence value, always inside `[0, 1]`.
///
/// The only ways to obtain one are [`Confidence::new`], which rejects
/// out-of-range and non-finite input, and [`Confidence::clamped`], which
/// saturates and reports whether it had to.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Confidence(f64);

impl Confidence {
    pub const ZERO: Confidence = Confidence(0.0);
    pub const ONE: Confidence = Confidence(1.0);

    pub fn new(value: f64) -> Result<Self, ContractViolation> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            // normalise -0.0 so serialized output is stable
            Ok(Self(value + 0.0))
        } else {
            Err(ContractViolation::new(
                "Confidence::new",
                format!("value {value} is outside [0, 1]"),
            ))
        }
    }

    /// Saturate a finite value into `[0, 1]`. The flag is true when the
    /// input had to be moved. Returns `None` for NaN and infinities.
    pub fn clamped(value: f64) -> Option<(Self, bool)> {
        if !value.is_finite() {
            return None;
        }
        let c = value.clamp(0.0, 1.0) + 0.0;
        Some((Self(c), c != value))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Confidence {
    type Error = ContractViolation;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<Confidence> for f64 {
    fn from(c: Confidence) -> f64 {
        c.0
    }
}

impl fmt::Display for Confidence {
    /// Two decimals when that is exact (`0.80`), otherwise the shortest
    /// round-tripping representation.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let two = format!("{:.2}", self.0);
        match two.parse::<f64>() {
            Ok(v) if v == self.0 => f.write_str(&two),
            _ => write!(f, "{}", self.0),
        }
    }
}
