use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::confidence::Confidence;
use crate::elicitation::{HistoryFormat, Protocol};
use crate::error::ContractViolation;
use crate::gateway::{DEFAULT_MAX_OUTPUT, SAMPLING_TEMPERATURE};
use crate::memory::MemoryWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    React,
    CotSc,
    UamOnly,
    UarOnly,
    Dual,
}

impl PolicyMode {
    pub const ALL: [PolicyMode; 5] = [
        PolicyMode::React,
        PolicyMode::CotSc,
        PolicyMode::UamOnly,
        PolicyMode::UarOnly,
        PolicyMode::Dual,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyMode::React => "react",
            PolicyMode::CotSc => "cot_sc",
            PolicyMode::UamOnly => "uam_only",
            PolicyMode::UarOnly => "uar_only",
            PolicyMode::Dual => "dual",
        }
    }

    /// Baselines still report a confidence so they can be scored for
    /// calibration; explanations are only demanded by the UQ modes.
    pub fn protocol(self) -> Protocol {
        match self {
            PolicyMode::React | PolicyMode::CotSc => Protocol::ConfidenceOnly,
            _ => Protocol::ConfidencePlusExplanation,
        }
    }

    pub fn history(self) -> HistoryFormat {
        match self {
            PolicyMode::UamOnly | PolicyMode::Dual => HistoryFormat::ConfidencePlusExplanation,
            _ => HistoryFormat::Plain,
        }
    }

    pub fn uses_system2(self) -> bool {
        matches!(self, PolicyMode::UarOnly | PolicyMode::Dual)
    }
}

impl fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyMode {
    type Err = ContractViolation;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "react" => Ok(PolicyMode::React),
            "cot_sc" => Ok(PolicyMode::CotSc),
            "uam_only" | "uam" => Ok(PolicyMode::UamOnly),
            "uar_only" | "uar" => Ok(PolicyMode::UarOnly),
            "dual" | "auq" => Ok(PolicyMode::Dual),
            other => Err(ContractViolation::new("policy_mode", format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub mode: PolicyMode,
    pub tau: Confidence,
    pub n_samples: usize,
    pub reflection_depth: usize,
    pub memory_window: MemoryWindow,
    pub expansion_enabled: bool,
    pub t_max: usize,
    pub sc_votes: usize,
    pub sample_temperature: f64,
    pub max_output: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            mode: PolicyMode::Dual,
            tau: Confidence::new(0.85).expect("constant"),
            n_samples: 3,
            reflection_depth: 3,
            memory_window: MemoryWindow::last(5).expect("constant"),
            expansion_enabled: true,
            t_max: 50,
            sc_votes: 6,
            sample_temperature: SAMPLING_TEMPERATURE,
            max_output: DEFAULT_MAX_OUTPUT,
        }
    }
}

impl PolicyConfig {
    pub fn with_mode(mode: PolicyMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ContractViolation> {
        let bad = |m: &str| Err(ContractViolation::new("policy_config", m.to_string()));
        if self.tau.value() >= 1.0 {
            return bad("tau must be < 1");
        }
        if self.n_samples == 0 || self.reflection_depth == 0 || self.t_max == 0 || self.sc_votes == 0 {
            return bad("n_samples, reflection_depth, t_max and sc_votes must be >= 1");
        }
        if !(self.sample_temperature >= 0.0 && self.sample_temperature.is_finite()) {
            return bad("sample_temperature must be finite and >= 0");
        }
        if self.max_output == 0 {
            return bad("max_output must be >= 1");
        }
        Ok(())
    }
}

/// System 2 fires iff the confidence is strictly below the threshold.
pub fn switch(confidence: Confidence, tau: Confidence) -> bool {
    confidence.value() < tau.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = PolicyConfig::default();
        assert_eq!((c.n_samples, c.reflection_depth, c.t_max), (3, 3, 50));
        assert_eq!(c.sample_temperature, 0.7);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [PolicyMode::React, PolicyMode::CotSc, PolicyMode::UamOnly, PolicyMode::UarOnly, PolicyMode::Dual] {
            assert_eq!(m.as_str().parse::<PolicyMode>().unwrap(), m);
        }
        assert_eq!("cot-sc".parse::<PolicyMode>().unwrap(), PolicyMode::CotSc);
        assert!("greedy".parse::<PolicyMode>().is_err());
        assert!(PolicyMode::Dual.uses_system2() && PolicyMode::UarOnly.uses_system2());
        assert!(!PolicyMode::UamOnly.uses_system2() && !PolicyMode::CotSc.uses_system2());
    }

    #[test]
    fn strict_switch() {
        let c = |v| Confidence::new(v).unwrap();
        assert!(switch(c(0.84), c(0.85)));
        assert!(!switch(c(0.85), c(0.85)));
        assert!(!switch(c(0.0), c(0.0)));
    }

    #[test]
    fn rejects_degenerate_settings() {
        let bad = [
            PolicyConfig { tau: Confidence::ONE, ..Default::default() },
            PolicyConfig { n_samples: 0, ..Default::default() },
            PolicyConfig { reflection_depth: 0, ..Default::default() },
            PolicyConfig { t_max: 0, ..Default::default() },
            PolicyConfig { sample_temperature: f64::NAN, ..Default::default() },
            PolicyConfig { max_output: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn toml_rejects_unknown_keys() {
        let c: PolicyConfig = toml::from_str("mode = \"uar_only\"\ntau = 0.9").unwrap();
        assert_eq!(c.mode, PolicyMode::UarOnly);
        assert_eq!(c.n_samples, 3);
        assert!(toml::from_str::<PolicyConfig>("temprature = 0.3").is_err());
    }
}
