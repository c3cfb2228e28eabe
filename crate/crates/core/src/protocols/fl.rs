use alloc::vec::Vec;

use super::common::{accuracy, local_epoch, EarlyStopping, FederatedData};
use super::report::{Meter, Phase, Protocol, RunReport};
use super::{device_sampling, fedavg, TrainingConfig};
use crate::error::Result;
use crate::model::ModelSpec;
use crate::rng::tag;
use crate::simnet::TransferKind;

/// Classic federated learning: every sampled device trains the full model
/// for one local epoch, uploads it, and receives the FedAvg aggregate.
pub fn run_fl(cfg: &TrainingConfig, spec: &ModelSpec, data: &FederatedData) -> Result<RunReport> {
    cfg.validate()?;
    let mut global = spec.init::<f32>(cfg.seed);
    let model_bytes = global.param_bytes();
    let mut meter = Meter::new(data.devices(), cfg.bandwidth_bps);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = global.clone();
    let mut rounds = 0;

    for round in 0..cfg.device_epochs {
        let ids = device_sampling(round as u64, data.devices(), cfg.devices_per_round, cfg.seed)?;
        let mut locals = Vec::with_capacity(ids.len());
        let (mut loss, mut seen) = (0.0, 0usize);
        for &k in &ids {
            let mut local = global.clone();
            let shard = &data.shards[k];
            let (l, flops) = local_epoch(
                &mut local,
                shard,
                cfg.batch_device,
                cfg.lr_device as f32,
                cfg.seed,
                &[tag::SHUFFLE, round as u64, k as u64],
            )?;
            loss += l;
            seen += shard.len();
            meter.device_flops[k] += flops;
            meter.ledger.push(TransferKind::ModelUp, model_bytes, round as u64, k as u32)?;
            locals.push(local);
        }
        let refs: Vec<_> = locals.iter().collect();
        global = fedavg(&refs, &data.shard_weights(&ids))?;
        for &k in &ids {
            meter.ledger.push(TransferKind::ModelDown, model_bytes, round as u64, k as u32)?;
        }
        rounds += 1;
        let acc = accuracy(&[&global], &data.val.samples, &data.val.labels)?;
        meter.row(Phase::Joint, loss / seen.max(1) as f64, acc);
        if stopper.observe(acc) {
            best = global.clone();
        }
        if stopper.should_stop() {
            break;
        }
    }
    let final_accuracy = accuracy(&[&best], &data.val.samples, &data.val.labels)?;
    Ok(meter.finish(Protocol::Fl, final_accuracy, rounds, 0, None, best))
}

/// Reference run: plain minibatch SGD on the pooled training set, shuffled
/// exactly as device 0 would shuffle it.
pub fn run_centralized(cfg: &TrainingConfig, spec: &ModelSpec, data: &FederatedData) -> Result<RunReport> {
    cfg.validate()?;
    let mut model = spec.init::<f32>(cfg.seed);
    let mut meter = Meter::new(1, cfg.bandwidth_bps);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.clone();
    let mut epochs = 0;
    for epoch in 0..cfg.device_epochs {
        let (loss, flops) = local_epoch(
            &mut model,
            &data.train,
            cfg.batch_device,
            cfg.lr_device as f32,
            cfg.seed,
            &[tag::SHUFFLE, epoch as u64, 0],
        )?;
        meter.device_flops[0] += flops;
        epochs += 1;
        let acc = accuracy(&[&model], &data.val.samples, &data.val.labels)?;
        meter.row(Phase::Joint, loss / data.train.len() as f64, acc);
        if stopper.observe(acc) {
            best = model.clone();
        }
        if stopper.should_stop() {
            break;
        }
    }
    let final_accuracy = accuracy(&[&best], &data.val.samples, &data.val.labels)?;
    Ok(meter.finish(Protocol::Centralized, final_accuracy, epochs, 0, None, best))
}
