//! Plan summary: per-cell statistics over seeds and the per-protocol
//! spread of accuracy across non-IID degrees.

use std::collections::BTreeMap;

use serde::Serialize;
use splitsim_core::protocols::RunReport;

/// Arithmetic mean; `None` for an empty slice.
pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two
/// values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs).unwrap_or(0.0);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Totals of one finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTotals {
    pub seed: u64,
    pub accuracy: f64,
    pub bytes: u64,
    pub rounds: u64,
    pub device_flops: u64,
    pub server_flops: u64,
    pub sim_time_s: f64,
}

impl RunTotals {
    pub fn from_report(seed: u64, r: &RunReport) -> Self {
        Self {
            seed,
            accuracy: r.final_accuracy,
            bytes: r.ledger.total(),
            rounds: r.ledger.rounds(),
            device_flops: r.total_device_flops(),
            server_flops: r.server_flops,
            sim_time_s: r.sim_time_s,
        }
    }
}

/// One cell of the summary. Totals are means over the cell's successful
/// seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: String,
    pub protocol: String,
    pub alpha: f64,
    pub seeds: Vec<u64>,
    pub acc_mean: Option<f64>,
    pub acc_std: Option<f64>,
    pub bytes_total: Option<f64>,
    pub rounds_total: Option<f64>,
    pub device_flops: Option<f64>,
    pub server_flops: Option<f64>,
    pub sim_time_s: Option<f64>,
}

impl CellSummary {
    pub fn new(cell: String, protocol: String, alpha: f64, runs: &[RunTotals]) -> Self {
        let col = |f: fn(&RunTotals) -> f64| mean(&runs.iter().map(f).collect::<Vec<_>>());
        let accs: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
        Self {
            cell,
            protocol,
            alpha,
            seeds: runs.iter().map(|r| r.seed).collect(),
            acc_mean: mean(&accs),
            acc_std: (!accs.is_empty()).then(|| sample_std(&accs)),
            bytes_total: col(|r| r.bytes as f64),
            rounds_total: col(|r| r.rounds as f64),
            device_flops: col(|r| r.device_flops as f64),
            server_flops: col(|r| r.server_flops as f64),
            sim_time_s: col(|r| r.sim_time_s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub cell: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub plan: String,
    pub cells: Vec<CellSummary>,
    /// Per protocol: sample std of the cell accuracy means across α.
    pub acc_std_across_alpha: BTreeMap<String, f64>,
    pub failures: Vec<RunFailure>,
}

impl Summary {
    pub fn new(plan: String, cells: Vec<CellSummary>, failures: Vec<RunFailure>) -> Self {
        let mut by_protocol: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for c in &cells {
            if let Some(m) = c.acc_mean {
                by_protocol.entry(c.protocol.clone()).or_default().push(m);
            }
        }
        let acc_std_across_alpha = by_protocol.into_iter().map(|(p, v)| (p, sample_std(&v))).collect();
        Self { plan, cells, acc_std_across_alpha, failures }
    }

    pub fn cell(&self, id: &str) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.cell == id)
    }
}
