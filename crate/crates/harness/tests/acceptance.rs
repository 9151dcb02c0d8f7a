//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use auq_core::controller::switch;
use auq_core::elicitation::{parse_tagged_response, Protocol};
use auq_core::memory::MemoryWindow;
use auq_core::metrics::{
    auroc, forward_validity, outcome_quadrants, t_brier, t_ece, trigger_rate, CalibrationRecord, ValidityMode,
};
use auq_core::reflection::{choose, cluster_actions, consistency_score, select, ReflectionCandidate};
use auq_core::{Confidence, PolicyMode, TrajectoryRecord};
use auq_harness::config::{Cell, GatewayConfig, RunConfig};
use auq_harness::jsonl;
use auq_harness::run::{execute, CellOutput};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn conf(v: f64) -> Confidence {
    Confidence::new(v).unwrap()
}

fn base_config(scenarios: &str, script: &str, seeds: usize, out: &Path) -> RunConfig {
    RunConfig {
        scenarios: data().join("scenarios").join(scenarios),
        gateway: GatewayConfig::Scripted {
            spec: data().join("scripts").join(script),
        },
        seeds,
        master_seed: 2024,
        out: out.to_path_buf(),
        ..RunConfig::default()
    }
}

fn run_cells(config: &RunConfig, cells: &[Cell]) -> Result<Vec<CellOutput>, String> {
    execute(config, cells).map_err(|e| e.to_string())
}

fn grid_cells(modes: &[PolicyMode]) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &mode in modes {
        for tau in [0.8, 0.85, 0.9, 0.95] {
            cells.push(Cell { mode, tau: conf(tau) });
        }
    }
    cells
}

// 1 -------------------------------------------------------------------------

struct OracleChoice {
    index: u32,
    score: Ratio<i64>,
    scores: BTreeMap<String, Ratio<i64>>,
}

fn canonical(a: &str) -> String {
    a.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Exhaustive evaluator over exact twentieths: every candidate is tried as
/// the answer and the one no other candidate beats survives.
fn brute_force(cands: &[(String, i64)]) -> OracleChoice {
    let n = cands.len() as i64;
    let cluster = |a: &str| -> Vec<usize> { (0..cands.len()).filter(|&j| canonical(&cands[j].0) == a).collect() };
    let score = |m: &[usize]| Ratio::new(m.iter().map(|&j| cands[j].1).sum::<i64>(), 20 * n);
    let mean = |m: &[usize]| Ratio::new(m.iter().map(|&j| cands[j].1).sum::<i64>(), 20 * m.len() as i64);
    let mut scores = BTreeMap::new();
    for (a, _) in cands {
        let c = canonical(a);
        let m = cluster(&c);
        scores.insert(c, score(&m));
    }
    // does candidate i beat candidate j as the final pick?
    let key = |i: usize| {
        let c = canonical(&cands[i].0);
        let m = cluster(&c);
        (score(&m), m.len(), mean(&m), c, cands[i].1, i)
    };
    let beats = |i: usize, j: usize| {
        let (si, ni, mi, ci, ki, ii) = key(i);
        let (sj, nj, mj, cj, kj, ij) = key(j);
        if si != sj {
            return si > sj;
        }
        if ni != nj {
            return ni > nj;
        }
        if mi != mj {
            return mi > mj;
        }
        if ci != cj {
            return ci < cj;
        }
        if ki != kj {
            return ki > kj;
        }
        ii < ij
    };
    let winner = (0..cands.len())
        .find(|&i| (0..cands.len()).all(|j| j == i || beats(i, j)))
        .expect("a strict total order has a maximum");
    OracleChoice {
        index: winner as u32 + 1,
        score: key(winner).0,
        scores,
    }
}

fn r2f(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pool = ["go to desk 1", "Go to desk 1", "go to  desk 1 ", "look", "LOOK", "open drawer 1", "take bowl 1 from desk 1"];
    let mut ties = 0;
    for case in 0..1000 {
        let n = rng.gen_range(1..=5);
        let cands: Vec<(String, i64)> = (0..n)
            .map(|_| (pool[rng.gen_range(0..pool.len())].to_string(), rng.gen_range(0..=20)))
            .collect();
        let rc: Vec<ReflectionCandidate> = cands
            .iter()
            .enumerate()
            .map(|(i, (a, k))| ReflectionCandidate::simple(i as u32 + 1, a, *k as f64 / 20.0))
            .collect();
        let oracle = brute_force(&cands);
        let clusters = cluster_actions(&rc).map_err(|e| e.to_string())?;
        let scores = consistency_score(&clusters, rc.len()).map_err(|e| e.to_string())?;
        let got = select(&scores, &rc).map_err(|e| e.to_string())?;
        let top = oracle.scores.values().max().copied().unwrap();
        if oracle.scores.values().filter(|&&s| s == top).count() > 1 {
            ties += 1;
        }
        ensure!(
            got.chosen.sample_index == oracle.index,
            "case {case}: chose #{} but the oracle chose #{} in {cands:?}",
            got.chosen.sample_index,
            oracle.index
        );
        ensure!((got.score - r2f(oracle.score)).abs() <= 1e-12, "case {case}: score {} vs {}", got.score, oracle.score);
        ensure!(scores.len() == oracle.scores.len(), "case {case}: cluster count differs");
        for (a, s) in &oracle.scores {
            let mine = scores.get(a).ok_or_else(|| format!("case {case}: missing cluster {a:?}"))?;
            ensure!((mine - r2f(*s)).abs() <= 1e-12, "case {case}: S({a}) = {mine} vs {s}");
        }
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(5), "took {took:?}");
    Ok(format!("1000 multisets, {ties} with tied top scores, {took:.2?}"))
}

// 2 -------------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let cands = [
        ReflectionCandidate::simple(1, "A", 0.9),
        ReflectionCandidate::simple(2, "A", 0.8),
        ReflectionCandidate::simple(3, "B", 0.7),
    ];
    let out = choose(&cands).map_err(|e| e.to_string())?;
    let sa = out.scores["a"];
    let sb = out.scores["b"];
    ensure!((sa - 0.5667).abs() <= 1e-4, "S(A) = {sa}");
    ensure!((sb - 0.2333).abs() <= 1e-4, "S(B) = {sb}");
    ensure!(out.chosen.canonical_action == "a" && out.chosen.sample_index == 1, "chose {:?}", out.chosen);
    ensure!(switch(conf(0.88), conf(0.95)), "0.88 under tau 0.95 must trigger");
    ensure!(!switch(conf(0.96), conf(0.95)), "0.96 under tau 0.95 must not trigger");
    ensure!(switch(conf(0.9), conf(0.95)), "0.9 under tau 0.95 must trigger");
    ensure!(!switch(conf(0.95), conf(0.95)), "the gate is strict");
    Ok(format!("S(A)={sa:.4}, S(B)={sb:.4}, gate 0.88/0.96 at 0.95"))
}

// 3 -------------------------------------------------------------------------

fn recs(v: &[(f64, bool)]) -> Vec<CalibrationRecord<f64>> {
    v.iter().map(|&(b, s)| CalibrationRecord::new(b, s)).collect()
}

fn criterion_3() -> Outcome {
    let fixture = recs(&[
        (0.95, true),
        (0.91, true),
        (0.72, false),
        (0.65, true),
        (0.40, false),
        (0.35, true),
        (0.08, true),
        (0.02, false),
    ]);
    // bins: 9 {0.95 S, 0.91 S}, 7 {0.72 F}, 6 {0.65 S}, 4 {0.40 F},
    // 3 {0.35 S}, 0 {0.08 S, 0.02 F}
    // ECE = (2*0.07 + 0.72 + 0.35 + 0.40 + 0.65 + 2*0.45) / 8 = 3.16 / 8
    let ece_expected = 3.16 / 8.0;
    // Brier = (0.0025 + 0.0081 + 0.5184 + 0.1225 + 0.16 + 0.4225 + 0.8464 + 0.0004) / 8
    let brier_expected = 2.0808 / 8.0;
    // 15 success/failure pairs, 10 ordered correctly, no ties
    let auroc_expected = 10.0 / 15.0;
    let ece = t_ece(&fixture, 10).map_err(|e| e.to_string())?;
    let brier = t_brier(&fixture).map_err(|e| e.to_string())?;
    let roc = auroc(&fixture).map_err(|e| e.to_string())?;
    ensure!((ece - ece_expected).abs() <= 1e-9, "T-ECE {ece} vs {ece_expected}");
    ensure!((brier - brier_expected).abs() <= 1e-9, "T-Brier {brier} vs {brier_expected}");
    ensure!((roc - auroc_expected).abs() <= 1e-9, "AUROC {roc} vs {auroc_expected}");

    let calibrated = recs(&[
        (0.25, true),
        (0.25, false),
        (0.25, false),
        (0.25, false),
        (0.75, true),
        (0.75, true),
        (0.75, true),
        (0.75, false),
    ]);
    let ece0 = t_ece(&calibrated, 10).map_err(|e| e.to_string())?;
    ensure!(ece0.abs() <= 1e-12, "calibrated T-ECE {ece0}");
    let separated = recs(&[(0.9, true), (0.8, true), (0.3, false), (0.1, false)]);
    let roc1 = auroc(&separated).map_err(|e| e.to_string())?;
    ensure!(roc1 == 1.0, "separated AUROC {roc1}");
    let half = recs(&[(0.5, true), (0.5, false)]);
    let b = t_brier(&half).map_err(|e| e.to_string())?;
    ensure!((b - 0.25).abs() <= 1e-12, "coin Brier {b}");
    ensure!(auroc(&recs(&[(0.5, true), (0.7, true)])).is_err(), "single-class AUROC must be an error");
    Ok(format!("T-ECE={ece:.4}, T-Brier={brier:.4}, AUROC={roc:.4}"))
}

// 4 -------------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..10_000 {
        let len = rng.gen_range(1..=60);
        let seq: Vec<f64> = (0..len)
            .map(|_| match rng.gen_range(0..10) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.gen::<f64>(),
            })
            .collect();
        let prod = forward_validity(&seq, ValidityMode::Product).map_err(|e| e.to_string())?;
        let min = forward_validity(&seq, ValidityMode::Minimum).map_err(|e| e.to_string())?;
        ensure!(prod.len() == len && min.len() == len, "case {case}: length");
        for t in 1..len {
            ensure!(prod[t] <= prod[t - 1], "case {case}: product rises at {t}");
            ensure!(min[t] <= min[t - 1], "case {case}: minimum rises at {t}");
            ensure!(prod[t] <= min[t], "case {case}: product above minimum at {t}");
        }
        // same kernels at single precision
        let s32: Vec<f32> = seq.iter().map(|&c| c as f32).collect();
        let p32 = forward_validity(&s32, ValidityMode::Product).map_err(|e| e.to_string())?;
        let m32 = forward_validity(&s32, ValidityMode::Minimum).map_err(|e| e.to_string())?;
        for t in 1..len {
            ensure!(p32[t] <= p32[t - 1] && m32[t] <= m32[t - 1] && p32[t] <= m32[t], "case {case}: f32 at {t}");
        }
    }
    Ok("10000 sequences, f64 and f32".into())
}

// 5 -------------------------------------------------------------------------

fn criterion_5() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = base_config("efficacy", "planner.toml", 10, dir.path());
    let out = run_cells(&cfg, &grid_cells(&PolicyMode::ALL))?;
    let mut rates: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut checked = 0usize;
    for o in &out {
        ensure!(o.records.len() == 50, "{}: {} episodes", o.path.display(), o.records.len());
        let tau = o.cell.tau.value();
        for r in &o.records {
            let below = r.audit.iter().filter(|a| a.initial_confidence.value() < tau).count() as u64;
            let expected = if o.cell.mode.uses_system2() { below } else { 0 };
            ensure!(
                r.cost.system2_triggers == expected,
                "{} {} tau {tau}: {} triggers, expected {expected}",
                o.cell.mode.as_str(),
                r.episode_id,
                r.cost.system2_triggers
            );
            for a in &r.audit {
                let want = o.cell.mode.uses_system2() && a.initial_confidence.value() < tau;
                ensure!(a.triggered == want, "{} step {}: triggered={}", r.episode_id, a.step_index, a.triggered);
                checked += 1;
            }
        }
        rates.entry(o.cell.mode.as_str()).or_default().push(trigger_rate(&o.records));
    }
    for (mode, r) in &rates {
        ensure!(r.windows(2).all(|w| w[0] <= w[1]), "{mode}: trigger rate not monotone over the grid: {r:?}");
    }
    let dual = &rates["dual"];
    Ok(format!("{checked} steps checked; dual trigger rate over grid {dual:.3?}"))
}

// 6 -------------------------------------------------------------------------

fn expansion_violations(records: &[TrajectoryRecord], window: MemoryWindow, enabled: bool) -> Result<usize, String> {
    let mut expansions = 0;
    for r in records {
        let tau = r.tau.value();
        let mut count = 0;
        for a in &r.audit {
            if a.expanded {
                count += 1;
            }
            if !a.triggered || a.reflection_exhausted {
                ensure!(!a.expanded, "{} step {}: expanded without a reflection outcome", r.episode_id, a.step_index);
                continue;
            }
            let first = a
                .first_pass_score
                .or(a.selection_score)
                .ok_or_else(|| format!("{} step {}: no selection score", r.episode_id, a.step_index))?;
            let limited = window.limit().is_some_and(|h| a.step_index > h);
            let want = enabled && limited && first < tau;
            ensure!(
                a.expanded == want,
                "{} step {}: expanded={} but first-pass score {first} vs tau {tau}",
                r.episode_id,
                a.step_index,
                a.expanded
            );
            if let Some(e) = r.entries.get(a.step_index) {
                ensure!(e.expanded == a.expanded, "{} step {}: entry flag differs", r.episode_id, a.step_index);
            }
        }
        ensure!(r.cost.expansions == count, "{}: ledger counts {} expansions, log {count}", r.episode_id, r.cost.expansions);
        ensure!(r.cost.is_consistent(), "{}: inconsistent ledger {:?}", r.episode_id, r.cost);
        expansions += count as usize;
    }
    Ok(expansions)
}

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut fired = 0;
    for h in [2usize, 5] {
        for enabled in [true, false] {
            let mut cfg = base_config("efficacy", "planner.toml", 10, &dir.path().join(format!("w{h}{enabled}")));
            cfg.policy.memory_window = MemoryWindow::last(h).unwrap();
            cfg.policy.expansion_enabled = enabled;
            let out = run_cells(&cfg, &grid_cells(&[PolicyMode::Dual, PolicyMode::UarOnly]))?;
            for o in &out {
                let n = expansion_violations(&o.records, cfg.policy.memory_window, enabled)?;
                if !enabled {
                    ensure!(n == 0, "expansion fired while disabled");
                }
                fired += n;
            }
        }
    }
    ensure!(fired > 0, "no expansion fired anywhere in the limited-window suite");

    let mut on = base_config("expansion", "expansion.toml", 1, &dir.path().join("on"));
    on.policy.tau = conf(0.85);
    let mut off = on.clone();
    off.out = dir.path().join("off");
    off.policy.expansion_enabled = false;
    let cell = [Cell {
        mode: PolicyMode::Dual,
        tau: conf(0.85),
    }];
    let r_on = &run_cells(&on, &cell)?[0].records[0];
    let r_off = &run_cells(&off, &cell)?[0].records[0];
    expansion_violations(std::slice::from_ref(r_on), on.policy.memory_window, true)?;
    let flip = r_on
        .audit
        .iter()
        .find(|a| a.expanded)
        .ok_or("the demo scenario never expanded")?;
    let t = flip.step_index;
    let with = &r_on.entries[t].action;
    let without = &r_off.entries[t].action;
    ensure!(with != without, "step {t}: expansion did not change the action ({with})");
    ensure!(r_on.success && !r_off.success, "demo outcome: with {} without {}", r_on.success, r_off.success);
    Ok(format!("{fired} expansions checked; demo step {t}: {without:?} -> {with:?}"))
}

// 7 -------------------------------------------------------------------------

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = base_config("golden", "golden.toml", 1, dir.path());
    let cells = [
        Cell {
            mode: PolicyMode::Dual,
            tau: conf(0.85),
        },
        Cell {
            mode: PolicyMode::React,
            tau: conf(0.85),
        },
    ];
    let out = run_cells(&cfg, &cells)?;
    let dual = &out[0].records[0];
    let react = &out[1].records[0];
    let stuck = dual
        .audit
        .iter()
        .find(|a| a.triggered && a.initial_action == "look" && dual.entries[a.step_index].action == "go to shelf 1")
        .ok_or("no reflection step selected \"go to shelf 1\" over a stuck \"look\"")?;
    ensure!(dual.success, "dual did not succeed: {:?}", dual.terminated_reason);
    ensure!(dual.entries.len() <= 10, "dual took {} steps", dual.entries.len());
    ensure!(!react.success && react.entries.len() == 50, "react: success={} steps={}", react.success, react.entries.len());
    ensure!(
        react.terminated_reason == auq_core::TerminationReason::StepLimit,
        "react ended with {:?}",
        react.terminated_reason
    );
    Ok(format!(
        "dual succeeds in {} steps (shelf 1 at step {}), react times out at {}",
        dual.entries.len(),
        stuck.step_index,
        react.entries.len()
    ))
}

// 8 -------------------------------------------------------------------------

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = base_config("efficacy", "planner.toml", 20, dir.path());
    let cells = [
        Cell {
            mode: PolicyMode::React,
            tau: conf(0.85),
        },
        Cell {
            mode: PolicyMode::Dual,
            tau: conf(0.85),
        },
    ];
    let out = run_cells(&cfg, &cells)?;
    let (react, dual) = (&out[0].records, &out[1].records);
    ensure!(react.len() == 100 && dual.len() == 100, "episode counts {} / {}", react.len(), dual.len());
    let sr = |r: &[TrajectoryRecord]| r.iter().filter(|x| x.success).count() as f64 / r.len() as f64;
    let q = outcome_quadrants(react, dual).map_err(|e| e.to_string())?;
    ensure!(sr(dual) >= sr(react), "dual SR {} < react SR {}", sr(dual), sr(react));
    ensure!(
        q.correction.count > q.regression.count,
        "corrections {} <= regressions {}",
        q.correction.count,
        q.regression.count
    );
    Ok(format!(
        "SR react {:.2} -> dual {:.2}; corrections {}, regressions {}",
        sr(react),
        sr(dual),
        q.correction.count,
        q.regression.count
    ))
}

// 9 -------------------------------------------------------------------------

fn full_suite(out: &Path) -> Result<Vec<PathBuf>, String> {
    let mut files = Vec::new();
    let eff = base_config("efficacy", "planner.toml", 10, &out.join("efficacy"));
    let golden = base_config("golden", "golden.toml", 2, &out.join("golden"));
    let demo = base_config("expansion", "expansion.toml", 2, &out.join("expansion"));
    for (cfg, cells) in [
        (&eff, grid_cells(&PolicyMode::ALL)),
        (&golden, grid_cells(&PolicyMode::ALL)),
        (&demo, grid_cells(&[PolicyMode::Dual, PolicyMode::UarOnly])),
    ] {
        for o in run_cells(cfg, &cells)? {
            // replay closure
            let text = std::fs::read_to_string(&o.path).map_err(|e| e.to_string())?;
            let back = jsonl::read(&o.path).map_err(|e| e.to_string())?;
            ensure!(back.records.len() == o.records.len(), "{}: replay lost episodes", o.path.display());
            for (a, b) in o.records.iter().zip(&back.records) {
                let (ja, jb) = (serde_json::to_string(a).unwrap(), serde_json::to_string(b).unwrap());
                ensure!(ja == jb, "{}: replay of {} differs", o.path.display(), a.episode_id);
            }
            let tasks = tasks_by_episode(&text);
            let with_tasks: Vec<(TrajectoryRecord, String)> = back
                .records
                .iter()
                .map(|r| (r.clone(), tasks.get(&r.episode_id).cloned().unwrap_or_default()))
                .collect();
            let again = jsonl::render(&back.policy, &with_tasks).map_err(|e| e.to_string())?;
            ensure!(again == text, "{}: re-rendered log differs", o.path.display());
            files.push(o.path);
        }
    }
    Ok(files)
}

fn tasks_by_episode(log: &str) -> BTreeMap<String, String> {
    log.lines()
        .filter(|l| l.starts_with("{\"type\":\"end\""))
        .filter_map(|l| match serde_json::from_str::<jsonl::LogLine>(l) {
            Ok(jsonl::LogLine::End { episode_id, task, .. }) => Some((episode_id, task)),
            _ => None,
        })
        .collect()
}

fn criterion_9() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let fa = full_suite(a.path())?;
    let first = start.elapsed();
    let fb = full_suite(b.path())?;
    let took = start.elapsed();
    ensure!(fa.len() == fb.len(), "file counts differ");
    let mut bytes = 0;
    for (x, y) in fa.iter().zip(&fb) {
        let bx = std::fs::read(x).map_err(|e| e.to_string())?;
        let by = std::fs::read(y).map_err(|e| e.to_string())?;
        ensure!(x.strip_prefix(a.path()).ok() == y.strip_prefix(b.path()).ok(), "file names differ");
        ensure!(bx == by, "{} differs between runs", x.display());
        bytes += bx.len();
    }
    ensure!(took < Duration::from_secs(60), "two runs took {took:?}");
    Ok(format!("{} files, {bytes} bytes identical; suite {first:.2?}, both runs {took:.2?}", fa.len()))
}

// 10 ------------------------------------------------------------------------

const FRAGMENTS: &[&str] = &[
    "<action>", "</action>", "<confidence>", "</confidence>", "<explanation>", "</explanation>", "<think>",
    "</think>", "<ACTION>", "</Action>", "<Confidence>", "0.85", "1.5", "-0.2", "85%", "NaN", "inf", "1e309", "0x1",
    ".", "e", "look", "go to desk 1", " ", "\n", "\t", "<", ">", "/", "é", "日本語", "\u{0130}", "\u{212A}", "\u{0}",
    "<action></action>", "<confidence> </confidence>",
];

fn fuzz_input(rng: &mut ChaCha8Rng) -> String {
    let mut s = String::new();
    for _ in 0..rng.gen_range(0..24) {
        if rng.gen_bool(0.2) {
            s.push(char::from_u32(rng.gen_range(0..0x3000)).unwrap_or('?'));
        } else {
            s.push_str(FRAGMENTS[rng.gen_range(0..FRAGMENTS.len())]);
        }
    }
    s
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let protocols = [Protocol::Baseline, Protocol::ConfidenceOnly, Protocol::ConfidencePlusExplanation];
    let mut parsed = 0;
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let result = (|| {
        for i in 0..100_000 {
            let input = fuzz_input(&mut rng);
            let protocol = protocols[i % 3];
            let r = catch_unwind(AssertUnwindSafe(|| parse_tagged_response(&input, protocol)))
                .map_err(|_| format!("panic on input {input:?}"))?;
            if let Ok(p) = r {
                parsed += 1;
                ensure!(!p.action.trim().is_empty(), "empty action accepted from {input:?}");
                if let Some(c) = p.confidence {
                    ensure!((0.0..=1.0).contains(&c.value()), "confidence {} out of range", c.value());
                }
                if protocol.requires_confidence() {
                    ensure!(p.confidence.is_some(), "missing confidence accepted from {input:?}");
                }
                if protocol.requires_explanation() {
                    ensure!(p.explanation.as_deref().is_some_and(|e| !e.is_empty()), "missing explanation accepted");
                }
            }
        }
        Ok(())
    })();
    std::panic::set_hook(hook);
    result?;

    let a = parse_tagged_response(
        "<think>...</think> <action>examine desk 1</action>\n<confidence>0.85</confidence>",
        Protocol::ConfidenceOnly,
    )
    .map_err(|e| e.to_string())?;
    ensure!(a.action == "examine desk 1", "variant A action {:?}", a.action);
    ensure!(a.confidence == Some(conf(0.85)), "variant A confidence {:?}", a.confidence);
    ensure!(a.think.as_deref() == Some("..."), "variant A think {:?}", a.think);
    let b_expl = "I see a bowl, but I do not see the desklamp required for the task. It might be in a closed container, or I might need to look elsewhere.";
    let b = parse_tagged_response(
        &format!(
            "<think>I should check the desk first.</think> <action>examine desk 1</action>\n<confidence>0.65</confidence>\n<explanation>{b_expl}</explanation>"
        ),
        Protocol::ConfidencePlusExplanation,
    )
    .map_err(|e| e.to_string())?;
    ensure!(b.action == "examine desk 1", "variant B action {:?}", b.action);
    ensure!(b.confidence == Some(conf(0.65)), "variant B confidence {:?}", b.confidence);
    ensure!(b.explanation.as_deref() == Some(b_expl), "variant B explanation {:?}", b.explanation);
    ensure!(b.think.as_deref() == Some("I should check the desk first."), "variant B think {:?}", b.think);
    let gate = parse_tagged_response("<action>plan</action><confidence>0.9</confidence>", Protocol::ConfidenceOnly)
        .map_err(|e| e.to_string())?;
    ensure!(gate.confidence == Some(conf(0.9)), "bare confidence tag");
    Ok(format!("100000 inputs without a panic ({parsed} parsed); template examples match"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("consistency score matches brute-force oracle", criterion_1),
        ("worked selection case and threshold gate", criterion_2),
        ("calibration metric fixture", criterion_3),
        ("forward validity properties", criterion_4),
        ("trigger exactness", criterion_5),
        ("expansion discipline", criterion_6),
        ("golden lamp-and-bowl trajectory", criterion_7),
        ("synthetic efficacy", criterion_8),
        ("deterministic JSONL", criterion_9),
        ("parser robustness", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("PASS [{:>2}] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{:>2}] {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
