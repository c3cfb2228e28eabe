//! Per-epoch metrics rows and ledger dumps as CSV.

use std::io::Write;

use serde::Serialize;
use splitsim_core::protocols::RunReport;
use splitsim_core::simnet::CommLedger;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub protocol: String,
    pub alpha: f64,
    pub seed: u64,
    pub epoch: usize,
    pub phase: String,
    pub loss: f64,
    pub val_accuracy: f64,
    pub cum_bytes_up: u64,
    pub cum_bytes_down: u64,
    pub cum_device_flops: u64,
    pub cum_server_flops: u64,
    pub sim_time_s: f64,
}

pub fn metrics_rows(report: &RunReport, alpha: f64, seed: u64) -> Vec<MetricsRow> {
    report
        .epochs
        .iter()
        .map(|e| MetricsRow {
            protocol: report.protocol.to_string(),
            alpha,
            seed,
            epoch: e.epoch,
            phase: e.phase.to_string(),
            loss: e.train_loss,
            val_accuracy: e.val_accuracy,
            cum_bytes_up: e.bytes_up,
            cum_bytes_down: e.bytes_down,
            cum_device_flops: e.device_flops,
            cum_server_flops: e.server_flops,
            sim_time_s: e.sim_time_s,
        })
        .collect()
}

pub fn write_metrics(rows: &[MetricsRow], w: impl Write) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record([
            "protocol",
            "alpha",
            "seed",
            "epoch",
            "phase",
            "loss",
            "val_accuracy",
            "cum_bytes_up",
            "cum_bytes_down",
            "cum_device_flops",
            "cum_server_flops",
            "sim_time_s",
        ])?;
    }
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// `round,device,direction,kind,bytes`, one line per entry.
pub fn write_ledger(ledger: &CommLedger, w: impl Write) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["round", "device", "direction", "kind", "bytes"])?;
    for e in ledger.entries() {
        out.write_record([
            e.round.to_string(),
            e.device.to_string(),
            e.direction.to_string(),
            e.kind.to_string(),
            e.bytes.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use splitsim_core::simnet::TransferKind;

    #[test]
    fn ledger_csv_layout() {
        let mut ledger = CommLedger::new();
        ledger.push(TransferKind::ModelUp, 40, 0, 1).unwrap();
        ledger.push(TransferKind::Gradient, 12, 3, 0).unwrap();
        let mut buf = Vec::new();
        write_ledger(&ledger, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "round,device,direction,kind,bytes\n0,1,up,model_up,40\n3,0,down,gradient,12\n"
        );
    }

    #[test]
    fn empty_metrics_still_have_a_header() {
        let mut buf = Vec::new();
        write_metrics(&[], &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("protocol,alpha,seed,epoch,phase,loss"));
    }
}
