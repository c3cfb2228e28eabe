use alloc::vec::Vec;

use super::common::{accuracy, epoch_batches, EarlyStopping, FederatedData};
use super::report::{Meter, Phase, Protocol, RunReport};
use super::{device_sampling, fedavg, TrainingConfig};
use crate::error::Result;
use crate::model::{split_model, ModelSpec, BYTES_PER_ELEMENT, BYTES_PER_LABEL};
use crate::nn::{loss_softmax_xent, Pass};
use crate::rng::tag;
use crate::simnet::TransferKind;

/// Split federated learning with one server block per participating device.
///
/// Every iteration ships the device block's activations (and labels) up and
/// the activation gradient down. After each round the device blocks and the
/// server blocks are both FedAvg-aggregated.
pub fn run_sfl(cfg: &TrainingConfig, spec: &ModelSpec, data: &FederatedData) -> Result<RunReport> {
    cfg.validate()?;
    let (mut dev_global, mut srv_global) = split_model::<f32>(spec, cfg.split, cfg.seed)?;
    let dev_bytes = dev_global.param_bytes();
    let label_bytes = if cfg.label_bytes { BYTES_PER_LABEL } else { 0 };
    let mut meter = Meter::new(data.devices(), cfg.bandwidth_bps);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = (dev_global.clone(), srv_global.clone());
    let mut rounds = 0;

    for round in 0..cfg.device_epochs {
        let r = round as u64;
        let ids = device_sampling(r, data.devices(), cfg.devices_per_round, cfg.seed)?;
        let mut devs = Vec::with_capacity(ids.len());
        let mut srvs = Vec::with_capacity(ids.len());
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for &k in &ids {
            let (mut dev, mut srv) = (dev_global.clone(), srv_global.clone());
            let shard = &data.shards[k];
            for idx in epoch_batches(shard.len(), cfg.batch_device, cfg.seed, &[tag::SHUFFLE, r, k as u64]) {
                let batch = shard.subset(&idx);
                let (act, dcache) = dev.forward(&batch.samples)?;
                meter.ledger.push(
                    TransferKind::Activation,
                    BYTES_PER_ELEMENT * act.len() as u64 + label_bytes * idx.len() as u64,
                    r,
                    k as u32,
                )?;
                let (logits, scache) = srv.forward(&act)?;
                let (loss, g) = loss_softmax_xent(&logits, &batch.labels)?;
                let (sgrads, act_grad) = srv.backward(&scache, &g)?;
                srv.sgd_step(&sgrads, cfg.lr_server as f32)?;
                meter.ledger.push(TransferKind::Gradient, BYTES_PER_ELEMENT * act_grad.len() as u64, r, k as u32)?;
                let (dgrads, _) = dev.backward(&dcache, &act_grad)?;
                dev.sgd_step(&dgrads, cfg.lr_device as f32)?;

                meter.device_flops[k] += dev.flops(idx.len(), Pass::ForwardBackward);
                meter.server_flops += srv.flops(idx.len(), Pass::ForwardBackward);
                loss_sum += loss as f64 * idx.len() as f64;
                seen += idx.len();
            }
            meter.ledger.push(TransferKind::ModelUp, dev_bytes, r, k as u32)?;
            devs.push(dev);
            srvs.push(srv);
        }
        let weights = data.shard_weights(&ids);
        dev_global = fedavg(&devs.iter().collect::<Vec<_>>(), &weights)?;
        srv_global = fedavg(&srvs.iter().collect::<Vec<_>>(), &weights)?;
        for &k in &ids {
            meter.ledger.push(TransferKind::ModelDown, dev_bytes, r, k as u32)?;
        }
        rounds += 1;
        let acc = accuracy(&[&dev_global, &srv_global], &data.val.samples, &data.val.labels)?;
        meter.row(Phase::Joint, loss_sum / seen.max(1) as f64, acc);
        if stopper.observe(acc) {
            best = (dev_global.clone(), srv_global.clone());
        }
        if stopper.should_stop() {
            break;
        }
    }
    let final_accuracy = accuracy(&[&best.0, &best.1], &data.val.samples, &data.val.labels)?;
    let model = best.0.join(best.1)?;
    Ok(meter.finish(Protocol::Sfl, final_accuracy, rounds, 0, None, model))
}
