//! Command-line surface of the `auq` binary.

use std::path::{Path, PathBuf};

use auq_core::gateway::HttpConfig;
use auq_core::memory::MemoryWindow;
use auq_core::metrics::{Aggregator, CostUnit};
use auq_core::worldsim::oracle_solve;
use auq_core::{Confidence, PolicyMode};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{GatewayConfig, RunConfig};
use crate::error::HarnessError;
use crate::report::{self, Report};
use crate::run::{self, CellOutput};

#[derive(Debug, Parser)]
#[command(name = "auq", version, about = "Run, sweep and score uncertainty-aware agent episodes")]
pub struct Cli {
    /// More log output (-v info, -vv debug including HTTP bodies).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one (mode, tau) cell over every scenario and seed.
    Run(RunArgs),
    /// Run every mode over the tau grid.
    Sweep(SweepArgs),
    /// Compute metric tables from JSONL logs.
    Report(ReportArgs),
    /// Check scenario files and print their oracle plan length.
    ValidateScenario {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CostUnitArg {
    ModelCalls,
    Characters,
}

impl From<CostUnitArg> for CostUnit {
    fn from(c: CostUnitArg) -> Self {
        match c {
            CostUnitArg::ModelCalls => CostUnit::ModelCalls,
            CostUnitArg::Characters => CostUnit::Characters,
        }
    }
}

/// Flags mirroring [`RunConfig`]; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<PolicyMode>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Reflection samples per step.
    #[arg(long)]
    pub n: Option<usize>,
    /// Reflection rounds per sample path.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Memory window: a step count or `full`.
    #[arg(long)]
    pub window: Option<MemoryWindow>,
    #[arg(long)]
    pub expand: Option<bool>,
    #[arg(long = "t-max")]
    pub t_max: Option<usize>,
    /// Scenario file or directory.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    /// Episodes per scenario.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long = "master-seed")]
    pub master_seed: Option<u64>,
    /// Scripted spec path (optionally `scripted:PATH`) or an http(s) endpoint.
    #[arg(long)]
    pub gateway: Option<String>,
    /// Model name for an HTTP gateway.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub aggregator: Vec<Aggregator>,
    #[arg(long = "cost-unit", value_enum)]
    pub cost_unit: Option<CostUnitArg>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Threshold grid, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub taus: Vec<f64>,
    /// Modes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub modes: Vec<PolicyMode>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// JSONL logs to score.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = auq_core::metrics::DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, value_delimiter = ',')]
    pub aggregator: Vec<Aggregator>,
    #[arg(long = "cost-unit", value_enum, default_value = "model-calls")]
    pub cost_unit: CostUnitArg,
    /// Baseline log for a paired quadrant comparison.
    #[arg(long, requires = "treated")]
    pub baseline: Option<PathBuf>,
    /// Treated log for a paired quadrant comparison.
    #[arg(long, requires = "baseline")]
    pub treated: Option<PathBuf>,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Also write the Markdown tables here.
    #[arg(long)]
    pub markdown: Option<PathBuf>,
}

impl RunArgs {
    /// Config file (or defaults) with every given flag applied on top.
    pub fn resolve(&self) -> Result<RunConfig, HarnessError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let p = &mut c.policy;
        if let Some(m) = self.mode {
            p.mode = m;
        }
        if let Some(t) = self.tau {
            p.tau = Confidence::new(t).map_err(|e| HarnessError::Config(format!("--tau: {e}")))?;
        }
        if let Some(n) = self.n {
            p.n_samples = n;
        }
        if let Some(d) = self.depth {
            p.reflection_depth = d;
        }
        if let Some(w) = self.window {
            p.memory_window = w;
        }
        if let Some(e) = self.expand {
            p.expansion_enabled = e;
        }
        if let Some(t) = self.t_max {
            p.t_max = t;
        }
        if let Some(s) = &self.scenarios {
            c.scenarios = s.clone();
        }
        if let Some(s) = self.seeds {
            c.seeds = s;
        }
        if let Some(s) = self.master_seed {
            c.master_seed = s;
        }
        if let Some(g) = &self.gateway {
            c.gateway = parse_gateway(g, self.model.as_deref(), &c.gateway)?;
        } else if let (Some(m), GatewayConfig::Http(h)) = (&self.model, &mut c.gateway) {
            h.model = m.clone();
        }
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        if let Some(w) = self.workers {
            c.workers = w;
        }
        if let Some(b) = self.bins {
            c.report.bins = b;
        }
        if !self.aggregator.is_empty() {
            c.report.aggregators = self.aggregator.clone();
        }
        if let Some(u) = self.cost_unit {
            c.report.cost_unit = u.into();
        }
        c.validate()?;
        Ok(c)
    }
}

fn parse_gateway(value: &str, model: Option<&str>, current: &GatewayConfig) -> Result<GatewayConfig, HarnessError> {
    if value.starts_with("http://") || value.starts_with("https://") {
        let mut h = match current {
            GatewayConfig::Http(h) => h.clone(),
            GatewayConfig::Scripted { .. } => HttpConfig::new(value, ""),
        };
        h.endpoint = value.to_string();
        if let Some(m) = model {
            h.model = m.to_string();
        }
        if h.model.is_empty() {
            return Err(HarnessError::Config("an HTTP gateway needs --model".into()));
        }
        return Ok(GatewayConfig::Http(h));
    }
    let path = value.strip_prefix("scripted:").unwrap_or(value);
    Ok(GatewayConfig::Scripted { spec: PathBuf::from(path) })
}

impl SweepArgs {
    pub fn resolve(&self) -> Result<RunConfig, HarnessError> {
        let mut c = self.run.resolve()?;
        if !self.taus.is_empty() {
            c.taus = self.taus.clone();
        }
        if !self.modes.is_empty() {
            c.modes = self.modes.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn write_reports(out: &Path, report: &Report) -> Result<(), HarnessError> {
    let md = out.join("report.md");
    std::fs::write(&md, report::to_markdown(report)).map_err(|e| HarnessError::io(&md, e))?;
    let js = out.join("report.json");
    std::fs::write(&js, report::to_json(report)).map_err(|e| HarnessError::io(&js, e))
}

fn finish(config: &RunConfig, outputs: &[CellOutput]) -> Result<String, HarnessError> {
    let records: Vec<_> = outputs.iter().flat_map(|o| o.records.iter().cloned()).collect();
    let rep = report::build(&records, &config.report)?;
    write_reports(&config.out, &rep)?;
    let mut text = String::new();
    for o in outputs {
        text.push_str(&format!("wrote {} ({} episodes)\n", o.path.display(), o.records.len()));
    }
    text.push('\n');
    text.push_str(&report::to_markdown(&rep));
    Ok(text)
}

/// Execute a parsed command and return what it prints.
pub fn dispatch(command: &Command) -> Result<String, HarnessError> {
    match command {
        Command::Run(args) => {
            let c = args.resolve()?;
            let out = run::execute(&c, &c.run_cells())?;
            finish(&c, &out)
        }
        Command::Sweep(args) => {
            let c = args.resolve()?;
            let out = run::execute(&c, &c.sweep_cells()?)?;
            finish(&c, &out)
        }
        Command::Report(args) => {
            let records = report::load_records(&args.inputs)?;
            let cfg = crate::config::ReportConfig {
                bins: args.bins,
                aggregators: if args.aggregator.is_empty() {
                    Aggregator::ALL.to_vec()
                } else {
                    args.aggregator.clone()
                },
                cost_unit: args.cost_unit.into(),
            };
            let mut rep = report::build(&records, &cfg)?;
            if let (Some(b), Some(t)) = (&args.baseline, &args.treated) {
                let base = report::load_records(&[b])?;
                let treated = report::load_records(&[t])?;
                rep.comparison = Some(report::compare(
                    &b.display().to_string(),
                    &base,
                    &t.display().to_string(),
                    &treated,
                )?);
            }
            if let Some(p) = &args.json {
                std::fs::write(p, report::to_json(&rep)).map_err(|e| HarnessError::io(p, e))?;
            }
            let md = report::to_markdown(&rep);
            if let Some(p) = &args.markdown {
                std::fs::write(p, &md).map_err(|e| HarnessError::io(p, e))?;
            }
            Ok(md)
        }
        Command::ValidateScenario { paths } => {
            let mut text = String::new();
            for p in paths {
                for s in run::load_scenarios(p)? {
                    let plan = oracle_solve(&s)?;
                    text.push_str(&format!(
                        "ok {}: shortest plan {} step(s), max_steps {}\n",
                        s.id,
                        plan.len(),
                        s.max_steps
                    ));
                }
            }
            Ok(text)
        }
    }
}
