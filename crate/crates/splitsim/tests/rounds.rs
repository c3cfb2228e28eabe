//! Round counts of the shipped default configuration.

use std::path::Path;

use splitsim::config::load_config;
use splitsim_core::protocols::{run_protocol, FederatedData, Protocol, TrainingConfig};

const EPOCHS: usize = 3;

fn default_plan() -> splitsim::ExperimentPlan {
    load_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")).unwrap()
}

fn rounds(protocol: Protocol, cfg: &TrainingConfig, plan: &splitsim::ExperimentPlan, data: &FederatedData) -> u64 {
    run_protocol(protocol, cfg, &plan.model, data).unwrap().ledger.rounds()
}

#[test]
fn sfl_needs_over_a_hundred_times_the_rounds_of_uit() {
    let plan = default_plan();
    let cfg =
        TrainingConfig { device_epochs: EPOCHS, server_epochs: 1, patience: EPOCHS, ..plan.cells[0].config.clone() };
    let data = FederatedData::prepare(&plan.dataset.materialize(0).unwrap(), &cfg).unwrap();
    let sfl = rounds(Protocol::Sfl, &cfg, &plan, &data);
    let uit = rounds(Protocol::Ampere, &cfg, &plan, &data);
    assert!(sfl >= 100 * uit, "sfl {sfl} uit {uit}");
}

#[test]
fn round_ordering_at_equal_total_epochs() {
    let plan = default_plan();
    let base = TrainingConfig { patience: 100, ..plan.cells[0].config.clone() };
    let data = FederatedData::prepare(&plan.dataset.materialize(0).unwrap(), &base).unwrap();
    let joint = TrainingConfig { device_epochs: EPOCHS + 1, ..base.clone() };
    let split = TrainingConfig { device_epochs: EPOCHS, server_epochs: 1, ..base };
    let sfl = rounds(Protocol::Sfl, &joint, &plan, &data);
    let fl = rounds(Protocol::Fl, &joint, &plan, &data);
    let uit = rounds(Protocol::Ampere, &split, &plan, &data);
    assert!(sfl > fl && fl >= uit, "sfl {sfl} fl {fl} uit {uit}");
}
