use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{usage_err, Error, Result};
use crate::nn::Block;
use crate::simnet::{CommLedger, Direction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Centralized,
    Fl,
    Sfl,
    Ampere,
    AmpereNoConsolidation,
}

impl Protocol {
    pub const ALL: [Protocol; 5] =
        [Protocol::Centralized, Protocol::Fl, Protocol::Sfl, Protocol::Ampere, Protocol::AmpereNoConsolidation];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Centralized => "centralized",
            Protocol::Fl => "fl",
            Protocol::Sfl => "sfl",
            Protocol::Ampere => "ampere",
            Protocol::AmpereNoConsolidation => "ampere-no-consolidation",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| usage_err!("unknown protocol `{s}`"))
    }
}

/// Training phase an epoch row belongs to. FL, SFL and centralized runs
/// train everything jointly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Joint,
    Device,
    Transfer,
    Server,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Joint => "joint",
            Phase::Device => "device",
            Phase::Transfer => "transfer",
            Phase::Server => "server",
        })
    }
}

/// One row per epoch; byte, FLOP and time columns are cumulative.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub bytes_up: u64,
    pub bytes_down: u64,
    pub device_flops: u64,
    pub server_flops: u64,
    pub sim_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub protocol: Protocol,
    pub epochs: Vec<EpochRecord>,
    /// Validation accuracy of the returned model.
    pub final_accuracy: f64,
    pub ledger: CommLedger,
    /// FLOPs spent on each device.
    pub device_flops: Vec<u64>,
    pub server_flops: u64,
    pub sim_time_s: f64,
    /// Rounds (FL/SFL) or device-phase epochs actually run.
    pub device_epochs_run: usize,
    pub server_epochs_run: usize,
    /// Best auxiliary-head validation accuracy of the device phase.
    pub device_phase_accuracy: Option<f64>,
    /// Trained model, device block joined with the server block.
    pub model: Block<f32>,
}

impl RunReport {
    pub fn total_device_flops(&self) -> u64 {
        self.device_flops.iter().sum()
    }
}

/// Running totals for one engine run: ledger, FLOP counters and the rows
/// emitted so far.
#[derive(Clone, Debug)]
pub struct Meter {
    pub ledger: CommLedger,
    pub device_flops: Vec<u64>,
    pub server_flops: u64,
    pub bandwidth_bps: f64,
    pub rows: Vec<EpochRecord>,
}

impl Meter {
    pub fn new(devices: usize, bandwidth_bps: f64) -> Self {
        Self {
            ledger: CommLedger::new(),
            device_flops: vec![0; devices],
            server_flops: 0,
            bandwidth_bps,
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, phase: Phase, train_loss: f64, val_accuracy: f64) {
        let epoch = self.rows.len();
        self.rows.push(EpochRecord {
            epoch,
            phase,
            train_loss,
            val_accuracy,
            bytes_up: self.ledger.total_by_direction(Direction::Up),
            bytes_down: self.ledger.total_by_direction(Direction::Down),
            device_flops: self.device_flops.iter().sum(),
            server_flops: self.server_flops,
            sim_time_s: self.ledger.simulated_time(self.bandwidth_bps),
        });
    }

    pub fn finish(
        self,
        protocol: Protocol,
        final_accuracy: f64,
        device_epochs_run: usize,
        server_epochs_run: usize,
        device_phase_accuracy: Option<f64>,
        model: Block<f32>,
    ) -> RunReport {
        let sim_time_s = self.ledger.simulated_time(self.bandwidth_bps);
        RunReport {
            protocol,
            epochs: self.rows,
            final_accuracy,
            ledger: self.ledger,
            device_flops: self.device_flops,
            server_flops: self.server_flops,
            sim_time_s,
            device_epochs_run,
            server_epochs_run,
            device_phase_accuracy,
            model,
        }
    }
}
