//! Batch execution of (cell, scenario, seed) episodes on a worker pool.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use auq_core::gateway::{Gateway, HttpGateway, ScriptedModel, ScriptedModelSpec};
use auq_core::seed::derive_seed;
use auq_core::worldsim::{load_dir, Scenario, TextWorld};
use auq_core::{run_episode, TrajectoryRecord};
use rayon::prelude::*;

use crate::config::{Cell, GatewayConfig, RunConfig};
use crate::error::HarnessError;
use crate::jsonl;

/// Seed of episode `index` of a scenario. Independent of mode and tau so
/// every cell of a sweep sees the same episodes.
pub fn episode_seed(master: u64, scenario_id: &str, index: usize) -> u64 {
    derive_seed(master, scenario_id, index as u64)
}

pub fn episode_id(scenario_id: &str, index: usize) -> String {
    format!("{scenario_id}#{index:04}")
}

/// A scenario file or every `*.toml` in a directory.
pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>, HarnessError> {
    let scenarios = if path.is_dir() {
        load_dir(path)?
    } else {
        vec![Scenario::load(path)?]
    };
    if scenarios.is_empty() {
        return Err(HarnessError::Config(format!("no scenarios under {}", path.display())));
    }
    Ok(scenarios)
}

pub fn build_gateway(config: &GatewayConfig, scenarios: &[Scenario]) -> Result<Box<dyn Gateway>, HarnessError> {
    let gateway: Box<dyn Gateway> = match config {
        GatewayConfig::Scripted { spec } => {
            let spec = ScriptedModelSpec::load(spec)?;
            Box::new(ScriptedModel::new(spec, scenarios.to_vec()))
        }
        GatewayConfig::Http(http) => Box::new(HttpGateway::new(http.clone())?),
    };
    gateway.preflight()?;
    Ok(gateway)
}

#[derive(Debug, Clone)]
pub struct CellOutput {
    pub cell: Cell,
    pub path: PathBuf,
    /// Sorted by episode id.
    pub records: Vec<TrajectoryRecord>,
}

/// Run every episode of every cell and write one log per cell.
///
/// Configuration problems, unloadable scenarios and an unreachable
/// gateway fail before the first episode. A gateway error mid-run aborts
/// the run; environment faults only end their own episode.
pub fn execute(config: &RunConfig, cells: &[Cell]) -> Result<Vec<CellOutput>, HarnessError> {
    config.validate()?;
    for c in cells {
        c.policy(&config.policy).validate()?;
    }
    let scenarios = load_scenarios(&config.scenarios)?;
    let gateway = build_gateway(&config.gateway, &scenarios)?;
    std::fs::create_dir_all(&config.out).map_err(|e| HarnessError::io(&config.out, e))?;

    let mut jobs = Vec::new();
    for (ci, _) in cells.iter().enumerate() {
        for (si, _) in scenarios.iter().enumerate() {
            for k in 0..config.seeds {
                jobs.push((ci, si, k));
            }
        }
    }
    let total = jobs.len();
    log::info!("{} cell(s), {} scenario(s), {} seed(s): {total} episodes", cells.len(), scenarios.len(), config.seeds);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    let done = AtomicUsize::new(0);
    let results: Vec<(usize, TrajectoryRecord)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(ci, si, k)| {
                let s = &scenarios[si];
                let policy = cells[ci].policy(&config.policy);
                let id = episode_id(&s.id, k);
                let mut env = TextWorld::new(s.clone());
                let r = run_episode(&mut env, &policy, gateway.as_ref(), episode_seed(config.master_seed, &s.id, k), &id)
                    .map_err(|source| HarnessError::Episode { episode_id: id, source })?;
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                if n % 100 == 0 || n == total {
                    log::info!("{n}/{total} episodes");
                }
                Ok((ci, r))
            })
            .collect::<Result<_, HarnessError>>()
    })?;

    let tasks: BTreeMap<&str, &str> = scenarios.iter().map(|s| (s.id.as_str(), s.task.as_str())).collect();
    let mut by_cell: Vec<Vec<(TrajectoryRecord, String)>> = vec![Vec::new(); cells.len()];
    for (ci, r) in results {
        let task = tasks[r.scenario_id.as_str()].to_string();
        by_cell[ci].push((r, task));
    }
    let mut out = Vec::with_capacity(cells.len());
    for (cell, mut recs) in cells.iter().zip(by_cell) {
        recs.sort_by(|a, b| a.0.episode_id.cmp(&b.0.episode_id));
        let path = config.out.join(cell.file_name());
        jsonl::write(&path, &cell.policy(&config.policy), &recs)?;
        out.push(CellOutput {
            cell: *cell,
            path,
            records: recs.into_iter().map(|(r, _)| r).collect(),
        });
    }
    Ok(out)
}
