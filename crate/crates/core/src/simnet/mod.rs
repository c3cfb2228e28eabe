//! Communication ledger, transfer-time model and closed-form cost oracles.

mod cost;
mod ledger;

pub use cost::{
    closed_form_comm, comm_difference_vs_fl, comm_difference_vs_sfl, fl_breakeven_epochs, CostModel, Variant,
};
pub use ledger::{simulated_time, CommLedger, Direction, LedgerEntry, TransferKind};

#[cfg(test)]
mod tests;
