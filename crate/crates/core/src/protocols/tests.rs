use alloc::vec;
use alloc::vec::Vec;

use super::ampere::{ampere_device_phase, regenerate_activations, transfer_activations, ActivationSet};
use super::*;
use crate::data::{make_synthetic, SyntheticKind};
use crate::model::{split_model, ModelSpec};
use crate::simnet::{closed_form_comm, CostModel, TransferKind, Variant};
use crate::tensor::Tensor;

fn blobs(n: usize, seed: u64) -> crate::data::Dataset {
    make_synthetic(n, 4, SyntheticKind::GaussianBlobs { dim: 6, separation: 3.0, noise: 1.0 }, seed).unwrap()
}

fn small_cfg() -> TrainingConfig {
    TrainingConfig {
        devices: 4,
        devices_per_round: 4,
        split: 2,
        device_epochs: 3,
        server_epochs: 3,
        batch_device: 8,
        batch_server: 8,
        patience: 1000,
        alpha: 0.5,
        ..TrainingConfig::default()
    }
}

fn setup(cfg: &TrainingConfig) -> (ModelSpec, FederatedData) {
    let spec = ModelSpec::toy_mlp(6, 16, 4);
    let data = FederatedData::prepare(&blobs(200, 3), cfg).unwrap();
    (spec, data)
}

fn cost(spec: &ModelSpec, data: &FederatedData, cfg: &TrainingConfig) -> CostModel {
    CostModel::from_spec(spec, data.train.len() as u64, cfg.aux_ratio, cfg.label_bytes).unwrap()
}

#[test]
fn ledgers_match_closed_form() {
    for labels in [true, false] {
        let cfg = TrainingConfig { label_bytes: labels, ..small_cfg() };
        let (spec, data) = setup(&cfg);
        let cm = cost(&spec, &data, &cfg);
        let (n, m) = (cfg.device_epochs as u64, cfg.devices as u64);
        for (protocol, variant) in
            [(Protocol::Fl, Variant::Fl), (Protocol::Sfl, Variant::Sfl), (Protocol::Ampere, Variant::Uit)]
        {
            let report = run_protocol(protocol, &cfg, &spec, &data).unwrap();
            let expected = closed_form_comm(&cm, variant, cfg.split, n, m).unwrap();
            assert_eq!(report.ledger.total(), expected, "{protocol} labels={labels}");
        }
    }
}

#[test]
fn ablation_ledger_equals_ampere_ledger() {
    let cfg = small_cfg();
    let (spec, data) = setup(&cfg);
    let a = run_ampere(&cfg, &spec, &data).unwrap();
    let b = run_ampere_no_consolidation(&cfg, &spec, &data).unwrap();
    assert_eq!(a.ledger, b.ledger);
}

#[test]
fn fl_single_device_is_centralized() {
    let cfg = TrainingConfig { devices: 1, devices_per_round: 1, ..small_cfg() };
    let (spec, data) = setup(&cfg);
    let fl = run_fl(&cfg, &spec, &data).unwrap();
    let central = run_centralized(&cfg, &spec, &data).unwrap();
    assert!(fl.model.same_params(&central.model));
    assert_eq!(fl.final_accuracy, central.final_accuracy);
    assert_eq!(fl.total_device_flops(), central.total_device_flops());
}

#[test]
fn zero_epochs_leave_initial_model() {
    let cfg = TrainingConfig { device_epochs: 0, server_epochs: 0, ..small_cfg() };
    let (spec, data) = setup(&cfg);
    let init = spec.init::<f32>(cfg.seed);
    for protocol in [Protocol::Centralized, Protocol::Fl, Protocol::Sfl] {
        let r = run_protocol(protocol, &cfg, &spec, &data).unwrap();
        assert!(r.model.same_params(&init), "{protocol}");
        assert_eq!(r.ledger.total(), 0);
    }
    let r = run_ampere(&cfg, &spec, &data).unwrap();
    assert!(r.model.same_params(&init));
    // Only the one-off activation upload remains.
    assert_eq!(r.ledger.count_by_kind(TransferKind::Activation), cfg.devices as u64);
    assert_eq!(r.ledger.entries().len(), cfg.devices);
}

#[test]
fn sfl_gradient_count_equals_iterations() {
    let cfg = small_cfg();
    let (spec, data) = setup(&cfg);
    let r = run_sfl(&cfg, &spec, &data).unwrap();
    let per_round: u64 = data.shards.iter().map(|s| s.len().div_ceil(cfg.batch_device) as u64).sum();
    let iterations = per_round * cfg.device_epochs as u64;
    assert_eq!(r.ledger.count_by_kind(TransferKind::Gradient), iterations);
    assert_eq!(r.ledger.count_by_kind(TransferKind::Activation), iterations);
}

#[test]
fn ampere_has_no_gradients_and_no_server_phase_traffic() {
    let cfg = small_cfg();
    let (spec, data) = setup(&cfg);
    let r = run_ampere(&cfg, &spec, &data).unwrap();
    assert_eq!(r.ledger.count_by_kind(TransferKind::Gradient), 0);
    let last_device_round = r.device_epochs_run as u64;
    assert!(r.ledger.entries().iter().all(|e| e.round <= last_device_round));
    let acts: Vec<_> = r.ledger.entries().iter().filter(|e| e.kind == TransferKind::Activation).collect();
    assert_eq!(acts.len(), cfg.devices);
    assert!(acts.iter().all(|e| e.round == last_device_round));
    assert!(r.server_epochs_run > 0);
    assert!(r.server_flops > 0);
}

#[test]
fn activation_set_is_stationary() {
    let cfg = small_cfg();
    let (spec, data) = setup(&cfg);
    let mut outcome = ampere_device_phase(&cfg, &spec, &data).unwrap();
    let frozen = outcome.device.clone();
    let sent = transfer_activations(&cfg, &data, &mut outcome).unwrap();
    assert!(sent.all_complete());
    assert!(outcome.device.same_params(&frozen));
    let again = regenerate_activations(&outcome.device, &data).unwrap();
    assert!(sent.same_records(&again));
    assert_eq!(sent.len(), data.train.len());
}

#[test]
fn activation_set_tracks_devices() {
    let mut set = ActivationSet::new(2, &[3]);
    set.append(1, Tensor::new(vec![2, 3], vec![0.0; 6]).unwrap(), &[1, 2]).unwrap();
    set.append(0, Tensor::new(vec![1, 3], vec![1.0; 3]).unwrap(), &[0]).unwrap();
    assert_eq!(set.device_records(1), &[0, 1]);
    assert_eq!(set.device_records(0), &[2]);
    assert_eq!(set.devices, vec![1, 1, 0]);
    assert!(!set.all_complete());
    set.mark_complete(0);
    set.mark_complete(1);
    assert!(set.all_complete());
    assert!(set.append(2, Tensor::zeros(vec![0, 3]), &[]).is_err());
    assert!(set.append(0, Tensor::zeros(vec![1, 3]), &[]).is_err());
}

#[test]
fn single_device_ablation_matches_ampere() {
    let cfg = TrainingConfig { devices: 1, devices_per_round: 1, ..small_cfg() };
    let (spec, data) = setup(&cfg);
    let a = run_ampere(&cfg, &spec, &data).unwrap();
    let b = run_ampere_no_consolidation(&cfg, &spec, &data).unwrap();
    assert!(a.model.same_params(&b.model));
    assert_eq!(a.final_accuracy, b.final_accuracy);
}

#[test]
fn engines_share_partition_and_initialisation() {
    let cfg = small_cfg();
    let (spec, data) = setup(&cfg);
    let again = FederatedData::prepare(&blobs(200, 3), &cfg).unwrap();
    assert_eq!(data.partition, again.partition);
    let (d, s) = split_model::<f32>(&spec, cfg.split, cfg.seed).unwrap();
    assert!(d.join(s).unwrap().same_params(&spec.init::<f32>(cfg.seed)));
}

#[test]
fn head_only_server_block_costs_nothing() {
    let spec = ModelSpec::toy_mlp(6, 16, 4);
    let cfg = TrainingConfig { split: spec.len() - 1, ..small_cfg() };
    let data = FederatedData::prepare(&blobs(200, 3), &cfg).unwrap();
    let r = run_sfl(&cfg, &spec, &data).unwrap();
    assert_eq!(r.server_flops, 0);
    assert!(r.total_device_flops() > 0);
}

#[test]
fn report_totals_match_ledger() {
    let cfg = TrainingConfig { devices_per_round: 2, patience: 2, ..small_cfg() };
    let (spec, data) = setup(&cfg);
    for protocol in Protocol::ALL {
        let r = run_protocol(protocol, &cfg, &spec, &data).unwrap();
        let last = r.epochs.last().unwrap();
        assert_eq!(last.bytes_up + last.bytes_down, r.ledger.total(), "{protocol}");
        assert_eq!(last.device_flops, r.total_device_flops());
        assert_eq!(last.server_flops, r.server_flops);
        assert_eq!(r.sim_time_s, r.ledger.simulated_time(cfg.bandwidth_bps));
        let per_device: u64 = (0..data.devices() as u32).map(|k| r.ledger.total_by_device(k)).sum();
        assert_eq!(per_device, r.ledger.total());
        assert!(r.epochs.windows(2).all(|w| w[0].bytes_up <= w[1].bytes_up && w[0].device_flops <= w[1].device_flops));
    }
}

#[test]
fn runs_are_deterministic() {
    let cfg = small_cfg();
    let (spec, data) = setup(&cfg);
    for protocol in Protocol::ALL {
        let a = run_protocol(protocol, &cfg, &spec, &data).unwrap();
        let b = run_protocol(protocol, &cfg, &spec, &data).unwrap();
        assert!(a.model.same_params(&b.model), "{protocol}");
        assert_eq!(a.epochs, b.epochs);
    }
}

#[test]
fn early_stopping_restores_best() {
    let mut s = EarlyStopping::new(2);
    assert!(s.observe(0.5));
    assert!(!s.observe(0.5));
    assert!(!s.should_stop());
    assert!(!s.observe(0.4));
    assert!(s.should_stop());
    assert_eq!(s.best(), 0.5);

    let cfg = TrainingConfig { patience: 1, device_epochs: 30, ..small_cfg() };
    let (spec, data) = setup(&cfg);
    let r = run_fl(&cfg, &spec, &data).unwrap();
    let best = r.epochs.iter().map(|e| e.val_accuracy).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(r.final_accuracy, best);
}

#[test]
fn invalid_split_is_rejected() {
    let cfg = TrainingConfig { split: 6, ..small_cfg() };
    let (spec, data) = setup(&small_cfg());
    for protocol in [Protocol::Sfl, Protocol::Ampere] {
        assert!(run_protocol(protocol, &cfg, &spec, &data).is_err());
    }
}

#[test]
fn training_learns_blobs() {
    let cfg = TrainingConfig { device_epochs: 10, server_epochs: 10, ..small_cfg() };
    let (spec, data) = setup(&cfg);
    for protocol in Protocol::ALL {
        let r = run_protocol(protocol, &cfg, &spec, &data).unwrap();
        assert!(r.final_accuracy > 0.7, "{protocol}: {}", r.final_accuracy);
    }
}
