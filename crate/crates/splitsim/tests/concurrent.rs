use splitsim::concurrent::run_ampere_concurrent;
use splitsim_core::data::{make_synthetic, SyntheticKind};
use splitsim_core::model::ModelSpec;
use splitsim_core::protocols::{run_ampere, FederatedData, Phase, TrainingConfig};
use splitsim_core::simnet::TransferKind;

fn setup() -> (TrainingConfig, ModelSpec, FederatedData) {
    let cfg = TrainingConfig {
        devices: 6,
        devices_per_round: 6,
        split: 2,
        device_epochs: 6,
        server_epochs: 12,
        batch_device: 8,
        batch_server: 8,
        ..TrainingConfig::default()
    };
    let ds = make_synthetic(1200, 4, SyntheticKind::GaussianBlobs { dim: 8, separation: 3.0, noise: 1.0 }, 5).unwrap();
    let data = FederatedData::prepare(&ds, &cfg).unwrap();
    (cfg, ModelSpec::toy_mlp(8, 32, 4), data)
}

#[test]
fn concurrent_mode_moves_the_same_bytes() {
    let (cfg, spec, data) = setup();
    let seq = run_ampere(&cfg, &spec, &data).unwrap();
    let con = run_ampere_concurrent(&cfg, &spec, &data).unwrap();
    assert_eq!(con.ledger.total(), seq.ledger.total());
    assert_eq!(con.ledger.rounds(), seq.ledger.rounds());
    assert_eq!(con.ledger.count_by_kind(TransferKind::Gradient), 0);
    assert_eq!(con.device_flops, seq.device_flops);
    let mut a: Vec<_> = con.ledger.entries().to_vec();
    let mut b: Vec<_> = seq.ledger.entries().to_vec();
    a.sort_by_key(|e| (e.round, e.device, e.kind as u8));
    b.sort_by_key(|e| (e.round, e.device, e.kind as u8));
    assert_eq!(a, b);
}

#[test]
fn concurrent_mode_is_accuracy_equivalent() {
    let (cfg, spec, data) = setup();
    let seq = run_ampere(&cfg, &spec, &data).unwrap();
    let con = run_ampere_concurrent(&cfg, &spec, &data).unwrap();
    assert!(
        (seq.final_accuracy - con.final_accuracy).abs() <= 0.05,
        "{} vs {}",
        seq.final_accuracy,
        con.final_accuracy
    );
    assert!(con.final_accuracy > 0.8);
    let phases: Vec<Phase> = con.epochs.iter().map(|e| e.phase).collect();
    assert_eq!(phases.iter().filter(|p| **p == Phase::Transfer).count(), 1);
    let last = con.epochs.last().unwrap();
    assert_eq!(last.server_flops, con.server_flops);
    assert_eq!(last.bytes_up + last.bytes_down, con.ledger.total());
}

#[test]
fn concurrent_mode_without_server_epochs_keeps_the_initial_server() {
    let (cfg, spec, data) = setup();
    let cfg = TrainingConfig { server_epochs: 0, ..cfg };
    let seq = run_ampere(&cfg, &spec, &data).unwrap();
    let con = run_ampere_concurrent(&cfg, &spec, &data).unwrap();
    assert!(seq.model.same_params(&con.model));
    assert_eq!(con.server_flops, 0);
}
