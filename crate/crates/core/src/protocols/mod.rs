//! Training engines: centralized reference, FL, SFL and unidirectional
//! inter-block training with and without activation consolidation.

pub mod ampere;
mod common;
mod config;
mod fedavg;
mod fl;
mod report;
mod sampling;
mod sfl;

pub use ampere::{run_ampere, run_ampere_no_consolidation, ActivationSet};
pub use common::{accuracy, epoch_batches, infer_chain, mean_loss, sgd_batch, EarlyStopping, FederatedData};
pub use config::TrainingConfig;
pub use fedavg::fedavg;
pub use fl::{run_centralized, run_fl};
pub use report::{EpochRecord, Meter, Phase, Protocol, RunReport};
pub use sampling::device_sampling;
pub use sfl::run_sfl;

use crate::error::Result;
use crate::model::ModelSpec;

/// Dispatches to the engine for `protocol`.
pub fn run_protocol(
    protocol: Protocol,
    cfg: &TrainingConfig,
    spec: &ModelSpec,
    data: &FederatedData,
) -> Result<RunReport> {
    match protocol {
        Protocol::Centralized => run_centralized(cfg, spec, data),
        Protocol::Fl => run_fl(cfg, spec, data),
        Protocol::Sfl => run_sfl(cfg, spec, data),
        Protocol::Ampere => run_ampere(cfg, spec, data),
        Protocol::AmpereNoConsolidation => run_ampere_no_consolidation(cfg, spec, data),
    }
}

#[cfg(test)]
mod tests;
