use proptest::prelude::*;
use splitsim_core::model::{split_model, ModelSpec};
use splitsim_core::nn::Block;
use splitsim_core::protocols::fedavg;
use splitsim_core::simnet::{
    closed_form_comm, comm_difference_vs_fl, comm_difference_vs_sfl, simulated_time, CommLedger, CostModel,
    TransferKind, Variant,
};

fn kind(i: u8) -> TransferKind {
    TransferKind::ALL[i as usize % TransferKind::ALL.len()]
}

proptest! {
    #[test]
    fn ledger_totals_partition(entries in prop::collection::vec((0u8..4, 1u64..1_000_000, 0u64..50, 0u32..8), 0..64)) {
        let mut ledger = CommLedger::new();
        for &(k, bytes, round, device) in &entries {
            ledger.push(kind(k), bytes, round, device).unwrap();
        }
        let total: u64 = entries.iter().map(|e| e.1).sum();
        prop_assert_eq!(ledger.total(), total);
        prop_assert_eq!(TransferKind::ALL.iter().map(|&k| ledger.total_by_kind(k)).sum::<u64>(), total);
        prop_assert_eq!((0..8).map(|d| ledger.total_by_device(d)).sum::<u64>(), total);
        prop_assert_eq!(ledger.rounds(), entries.len() as u64);
    }

    #[test]
    fn simulated_time_is_additive(a in 0u64..1 << 40, b in 0u64..1 << 40, bw in 1.0f64..1e10) {
        let sum = simulated_time(a, bw) + simulated_time(b, bw);
        let joint = simulated_time(a + b, bw);
        prop_assert!((sum - joint).abs() <= 1e-9 * joint.max(1.0));
    }

    #[test]
    fn closed_form_differences_agree(
        hidden in 2usize..40,
        samples in 1u64..5000,
        epochs in 0u64..200,
        devices in 1u64..16,
        labels in any::<bool>(),
        p in 1usize..5,
    ) {
        let spec = ModelSpec::toy_mlp(6, hidden, 3);
        let cm = CostModel::from_spec(&spec, samples, 0.5, labels).unwrap();
        let uit = closed_form_comm(&cm, Variant::Uit, p, epochs, devices).unwrap() as i128;
        let sfl = closed_form_comm(&cm, Variant::Sfl, p, epochs, devices).unwrap() as i128;
        let fl = closed_form_comm(&cm, Variant::Fl, p, epochs, devices).unwrap() as i128;
        prop_assert_eq!(comm_difference_vs_fl(&cm, p, epochs, devices).unwrap(), fl - uit);
        prop_assert_eq!(comm_difference_vs_sfl(&cm, p, epochs, devices).unwrap(), sfl - uit);
        if epochs == 0 {
            prop_assert_eq!(uit as u64, cm.activation_bytes(p).unwrap() + cm.label_bytes());
        }
    }

    #[test]
    fn split_then_join_is_the_full_model(hidden in 1usize..12, p in 1usize..6, seed in any::<u64>()) {
        let spec = ModelSpec::toy_mlp(3, hidden, 2);
        let (d, s) = split_model::<f32>(&spec, p, seed).unwrap();
        prop_assert_eq!(d.param_count() + s.param_count(), spec.param_count());
        prop_assert!(d.join(s).unwrap().same_params(&spec.init::<f32>(seed)));
    }

    #[test]
    fn fedavg_stays_inside_the_hull(seeds in prop::collection::vec(any::<u64>(), 1..5), weight in 1u32..100) {
        let spec = ModelSpec::toy_mlp(3, 4, 2);
        let models: Vec<Block<f32>> = seeds.iter().map(|&s| spec.init(s)).collect();
        let weights: Vec<f64> = (0..models.len()).map(|i| (weight as usize + i) as f64).collect();
        let avg = fedavg(&models.iter().collect::<Vec<_>>(), &weights).unwrap();
        let inputs: Vec<Vec<_>> = models.iter().map(|m| m.params().collect()).collect();
        for (t, tensor) in avg.params().enumerate() {
            for (i, &x) in tensor.data().iter().enumerate() {
                let lo = inputs.iter().map(|p| p[t].data()[i]).fold(f32::INFINITY, f32::min);
                let hi = inputs.iter().map(|p| p[t].data()[i]).fold(f32::NEG_INFINITY, f32::max);
                prop_assert!(x >= lo && x <= hi);
            }
        }
    }
}
