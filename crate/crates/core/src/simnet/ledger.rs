use alloc::vec::Vec;
use core::fmt;

use crate::error::{usage_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransferKind {
    ModelUp,
    ModelDown,
    Activation,
    Gradient,
}

impl TransferKind {
    pub const ALL: [TransferKind; 4] =
        [TransferKind::ModelUp, TransferKind::ModelDown, TransferKind::Activation, TransferKind::Gradient];

    pub fn direction(self) -> Direction {
        match self {
            TransferKind::ModelUp | TransferKind::Activation => Direction::Up,
            TransferKind::ModelDown | TransferKind::Gradient => Direction::Down,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Up => "up",
            Direction::Down => "down",
        })
    }
}

impl fmt::Display for TransferKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransferKind::ModelUp => "model_up",
            TransferKind::ModelDown => "model_down",
            TransferKind::Activation => "activation",
            TransferKind::Gradient => "gradient",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LedgerEntry {
    pub round: u64,
    pub device: u32,
    pub direction: Direction,
    pub kind: TransferKind,
    pub bytes: u64,
}

/// Append-only log of payload transfers between devices and the server.
/// Each entry is one communication round.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommLedger {
    entries: Vec<LedgerEntry>,
    by_kind: [u64; 4],
    count_by_kind: [u64; 4],
}

impl CommLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(
        &mut self,
        direction: Direction,
        kind: TransferKind,
        bytes: u64,
        round: u64,
        device: u32,
    ) -> Result<()> {
        if bytes == 0 {
            return Err(usage_err!("empty {kind} transfer for device {device}"));
        }
        if kind.direction() != direction {
            return Err(usage_err!("{kind} transfers travel {}, not {direction}", kind.direction()));
        }
        self.entries.push(LedgerEntry { round, device, direction, kind, bytes });
        self.by_kind[kind.index()] += bytes;
        self.count_by_kind[kind.index()] += 1;
        Ok(())
    }

    /// Records a transfer in its kind's natural direction.
    pub fn push(&mut self, kind: TransferKind, bytes: u64, round: u64, device: u32) -> Result<()> {
        self.record(kind.direction(), kind, bytes, round, device)
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.by_kind.iter().sum()
    }

    pub fn total_by_kind(&self, kind: TransferKind) -> u64 {
        self.by_kind[kind.index()]
    }

    pub fn count_by_kind(&self, kind: TransferKind) -> u64 {
        self.count_by_kind[kind.index()]
    }

    pub fn total_by_direction(&self, direction: Direction) -> u64 {
        TransferKind::ALL.iter().filter(|k| k.direction() == direction).map(|&k| self.total_by_kind(k)).sum()
    }

    pub fn total_by_device(&self, device: u32) -> u64 {
        self.entries.iter().filter(|e| e.device == device).map(|e| e.bytes).sum()
    }

    /// Communication rounds: one per model or batch transfer.
    pub fn rounds(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn simulated_time(&self, bandwidth_bits_per_s: f64) -> f64 {
        simulated_time(self.total(), bandwidth_bits_per_s)
    }
}

/// Seconds to push `bytes` through a link of the given bandwidth, with no
/// protocol overhead and no overlap with computation.
pub fn simulated_time(bytes: u64, bandwidth_bits_per_s: f64) -> f64 {
    8.0 * bytes as f64 / bandwidth_bits_per_s
}
