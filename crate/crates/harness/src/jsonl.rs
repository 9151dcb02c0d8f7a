//! JSONL trajectory logs: a header line, then per episode its step lines
//! followed by one terminal line.

use std::io::{BufRead, BufReader};
use std::path::Path;

use auq_core::memory::MemoryEntry;
use auq_core::trajectory::StepAudit;
use auq_core::{Confidence, CostLedger, PolicyConfig, PolicyMode, TerminationReason, TrajectoryRecord};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LogLine {
    Header {
        schema_version: u32,
        mode: PolicyMode,
        tau: Confidence,
        policy: PolicyConfig,
    },
    Step {
        episode_id: String,
        step_index: usize,
        audit: Box<StepAudit>,
        /// Absent when the step produced no executable action.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        finalized: Option<MemoryEntry>,
    },
    End {
        episode_id: String,
        scenario_id: String,
        seed: u64,
        task: String,
        success: bool,
        terminated_reason: TerminationReason,
        cost: CostLedger,
    },
}

/// A parsed log file.
#[derive(Debug, Clone, PartialEq)]
pub struct LogFile {
    pub policy: PolicyConfig,
    pub records: Vec<TrajectoryRecord>,
}

/// Lines for one episode, in order.
pub fn episode_lines(record: &TrajectoryRecord, task: &str) -> Vec<LogLine> {
    let mut out = Vec::with_capacity(record.audit.len() + 1);
    for a in &record.audit {
        out.push(LogLine::Step {
            episode_id: record.episode_id.clone(),
            step_index: a.step_index,
            audit: Box::new(a.clone()),
            finalized: record.entries.get(a.step_index).cloned(),
        });
    }
    out.push(LogLine::End {
        episode_id: record.episode_id.clone(),
        scenario_id: record.scenario_id.clone(),
        seed: record.seed,
        task: task.to_string(),
        success: record.success,
        terminated_reason: record.terminated_reason,
        cost: record.cost,
    });
    out
}

/// Serialize a whole file. Records are written sorted by episode id.
pub fn render(policy: &PolicyConfig, records: &[(TrajectoryRecord, String)]) -> Result<String, HarnessError> {
    let mut sorted: Vec<&(TrajectoryRecord, String)> = records.iter().collect();
    sorted.sort_by(|a, b| a.0.episode_id.cmp(&b.0.episode_id));
    let mut text = String::new();
    let header = LogLine::Header {
        schema_version: SCHEMA_VERSION,
        mode: policy.mode,
        tau: policy.tau,
        policy: *policy,
    };
    let mut push = |line: &LogLine| -> Result<(), HarnessError> {
        text.push_str(&serde_json::to_string(line).map_err(|e| HarnessError::Config(e.to_string()))?);
        text.push('\n');
        Ok(())
    };
    push(&header)?;
    for (r, task) in sorted {
        if r.mode != policy.mode || r.tau != policy.tau {
            return Err(HarnessError::Config(format!(
                "episode {} ran under {}/{} but the file is {}/{}",
                r.episode_id, r.mode.as_str(), r.tau, policy.mode.as_str(), policy.tau
            )));
        }
        for line in episode_lines(r, task) {
            push(&line)?;
        }
    }
    Ok(text)
}

/// Write through a sibling temp file so readers never see a partial log.
pub fn write(path: &Path, policy: &PolicyConfig, records: &[(TrajectoryRecord, String)]) -> Result<(), HarnessError> {
    let text = render(policy, records)?;
    let tmp = path.with_extension("jsonl.tmp");
    std::fs::write(&tmp, text).map_err(|e| HarnessError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

struct Open {
    episode_id: String,
    entries: Vec<MemoryEntry>,
    audit: Vec<StepAudit>,
}

/// Parse a log back into trajectory records, checking schema and order.
pub fn read(path: &Path) -> Result<LogFile, HarnessError> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    parse(path, BufReader::new(file))
}

pub fn parse(path: &Path, reader: impl BufRead) -> Result<LogFile, HarnessError> {
    let schema = |line: usize, message: String| HarnessError::Schema {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut header: Option<(PolicyMode, Confidence, PolicyConfig)> = None;
    let mut records: Vec<TrajectoryRecord> = Vec::new();
    let mut open: Option<Open> = None;
    let mut last_id: Option<String> = None;
    let mut n = 0;
    for (i, line) in reader.lines().enumerate() {
        let no = i + 1;
        n = no;
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.trim().is_empty() {
            return Err(schema(no, "blank line".into()));
        }
        let parsed: LogLine = serde_json::from_str(&line).map_err(|e| schema(no, e.to_string()))?;
        match parsed {
            LogLine::Header {
                schema_version,
                mode,
                tau,
                policy,
            } => {
                if no != 1 {
                    return Err(schema(no, "header must be the first line".into()));
                }
                if schema_version != SCHEMA_VERSION {
                    return Err(schema(no, format!("unsupported schema_version {schema_version}")));
                }
                header = Some((mode, tau, policy));
            }
            _ if header.is_none() => return Err(schema(no, "missing header line".into())),
            LogLine::Step {
                episode_id,
                step_index,
                audit,
                finalized,
            } => {
                let o = match open.as_mut() {
                    Some(o) if o.episode_id == episode_id => o,
                    Some(o) => {
                        return Err(schema(no, format!("step for {episode_id} inside unterminated {}", o.episode_id)))
                    }
                    None => {
                        if last_id.as_ref().is_some_and(|l| *l >= episode_id) {
                            return Err(schema(no, format!("episode {episode_id} is out of order")));
                        }
                        open.insert(Open {
                            episode_id: episode_id.clone(),
                            entries: Vec::new(),
                            audit: Vec::new(),
                        })
                    }
                };
                if step_index != o.audit.len() || audit.step_index != step_index {
                    return Err(schema(no, format!("expected step {}, found {step_index}", o.audit.len())));
                }
                if let Some(e) = finalized {
                    if e.step_index != step_index || o.entries.len() != step_index {
                        return Err(schema(no, "finalized entry does not match its step".into()));
                    }
                    o.entries.push(e);
                }
                o.audit.push(*audit);
            }
            LogLine::End {
                episode_id,
                scenario_id,
                seed,
                task: _,
                success,
                terminated_reason,
                cost,
            } => {
                let o = match open.take() {
                    Some(o) if o.episode_id == episode_id => o,
                    Some(o) => return Err(schema(no, format!("end of {episode_id} while {} is open", o.episode_id))),
                    None => {
                        if last_id.as_ref().is_some_and(|l| *l >= episode_id) {
                            return Err(schema(no, format!("episode {episode_id} is out of order")));
                        }
                        Open {
                            episode_id: episode_id.clone(),
                            entries: Vec::new(),
                            audit: Vec::new(),
                        }
                    }
                };
                let (mode, tau, _) = header.expect("checked above");
                last_id = Some(episode_id.clone());
                records.push(TrajectoryRecord {
                    episode_id,
                    scenario_id,
                    seed,
                    mode,
                    tau,
                    entries: o.entries,
                    audit: o.audit,
                    success,
                    terminated_reason,
                    cost,
                });
            }
        }
    }
    if let Some(o) = open {
        return Err(schema(n, format!("episode {} has no terminal line", o.episode_id)));
    }
    let (_, _, policy) = header.ok_or_else(|| schema(1, "empty log".into()))?;
    Ok(LogFile { policy, records })
}
