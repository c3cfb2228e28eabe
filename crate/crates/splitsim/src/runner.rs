//! Executes experiment plans and writes their metrics.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use splitsim_core::data::Dataset;
use splitsim_core::protocols::{run_protocol, FederatedData, Protocol, RunReport, TrainingConfig};

use crate::concurrent::run_ampere_concurrent;
use crate::config::{Cell, ExperimentPlan};
use crate::metrics::{metrics_rows, write_ledger, write_metrics};
use crate::report::{CellSummary, RunFailure, RunTotals, Summary};

pub const SUMMARY_FILE: &str = "summary.json";

/// Result of executing a plan.
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub summary: Summary,
    /// Metrics CSV of every successful run, in plan order.
    pub metrics_files: Vec<PathBuf>,
    pub summary_file: PathBuf,
}

impl PlanOutcome {
    pub fn failed(&self) -> bool {
        !self.summary.failures.is_empty()
    }
}

/// One engine run on an already partitioned dataset.
pub fn run_single(
    protocol: Protocol,
    cfg: &TrainingConfig,
    plan: &ExperimentPlan,
    data: &FederatedData,
) -> splitsim_core::Result<RunReport> {
    if plan.concurrent_phase3 && protocol == Protocol::Ampere {
        run_ampere_concurrent(cfg, &plan.model, data)
    } else {
        run_protocol(protocol, cfg, &plan.model, data)
    }
}

fn run_file_stem(cell: &Cell, seed: u64) -> String {
    format!("{}_s{seed}", cell.id())
}

fn execute(
    plan: &ExperimentPlan,
    cell: &Cell,
    seed: u64,
    datasets: &mut BTreeMap<u64, Dataset>,
) -> anyhow::Result<(RunReport, PathBuf)> {
    let cfg = TrainingConfig { seed, ..cell.config.clone() };
    let dataset = match datasets.entry(seed) {
        Entry::Occupied(e) => e.into_mut(),
        Entry::Vacant(e) => e.insert(plan.dataset.materialize(seed)?),
    };
    let data = FederatedData::prepare(dataset, &cfg)?;
    let report = run_single(cell.protocol, &cfg, plan, &data)?;

    let stem = run_file_stem(cell, seed);
    let metrics_path = plan.out_dir.join(format!("{stem}.csv"));
    let rows = metrics_rows(&report, cell.alpha, seed);
    write_metrics(&rows, BufWriter::new(File::create(&metrics_path)?))
        .with_context(|| format!("writing {}", metrics_path.display()))?;
    let ledger_path = plan.out_dir.join(format!("{stem}_ledger.csv"));
    write_ledger(&report.ledger, BufWriter::new(File::create(&ledger_path)?))
        .with_context(|| format!("writing {}", ledger_path.display()))?;
    Ok((report, metrics_path))
}

/// Runs every cell and seed of `plan`, writing one metrics CSV and one
/// ledger CSV per run and a `summary.json` for the plan. A failing run is
/// recorded in the summary and the plan moves on.
pub fn run_plan(plan: &ExperimentPlan) -> anyhow::Result<PlanOutcome> {
    fs::create_dir_all(&plan.out_dir).with_context(|| format!("creating {}", plan.out_dir.display()))?;
    let mut datasets = BTreeMap::new();
    let mut cells = Vec::with_capacity(plan.cells.len());
    let mut failures = Vec::new();
    let mut metrics_files = Vec::new();

    for cell in &plan.cells {
        let mut totals = Vec::with_capacity(cell.seeds.len());
        for &seed in &cell.seeds {
            match execute(plan, cell, seed, &mut datasets) {
                Ok((report, path)) => {
                    totals.push(RunTotals::from_report(seed, &report));
                    metrics_files.push(path);
                }
                Err(e) => failures.push(RunFailure { cell: cell.id(), seed, error: format!("{e:#}") }),
            }
        }
        cells.push(CellSummary::new(cell.id(), cell.protocol.to_string(), cell.alpha, &totals));
    }

    let summary = Summary::new(plan.name.clone(), cells, failures);
    let summary_file = plan.out_dir.join(SUMMARY_FILE);
    write_summary(&summary, &summary_file)?;
    Ok(PlanOutcome { summary, metrics_files, summary_file })
}

pub fn write_summary(summary: &Summary, path: &Path) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
