//! Unidirectional inter-block training.
//!
//! Phase 1 trains the device block against a local auxiliary head with
//! FedAvg between epochs. Phase 2 freezes the device block and ships every
//! device's activations (with labels) to the server exactly once. Phase 3
//! trains the server block on those activations with no further device
//! traffic, either on the consolidated set or, for the ablation, as one
//! block per device with FedAvg.

use alloc::vec;
use alloc::vec::Vec;

use super::common::{accuracy, epoch_batches, infer_chain, mean_loss, sgd_batch, EarlyStopping, FederatedData};
use super::report::{Meter, Phase, Protocol, RunReport};
use super::{device_sampling, fedavg, TrainingConfig};
use crate::data::Dataset;
use crate::error::{config_err, Result};
use crate::model::{generate_auxiliary, split_model, AuxNet, ModelSpec, BYTES_PER_ELEMENT, BYTES_PER_LABEL};
use crate::nn::{loss_softmax_xent, Block, Pass};
use crate::rng::tag;
use crate::simnet::TransferKind;
use crate::tensor::Tensor;

/// Activations received by the server, tagged with their source device.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationSet {
    pub activations: Tensor<f32>,
    pub labels: Vec<u32>,
    pub devices: Vec<u32>,
    members: Vec<Vec<usize>>,
    complete: Vec<bool>,
}

impl ActivationSet {
    pub fn new(devices: usize, activation_shape: &[usize]) -> Self {
        let mut shape = vec![0];
        shape.extend_from_slice(activation_shape);
        Self {
            activations: Tensor::zeros(shape),
            labels: Vec::new(),
            devices: Vec::new(),
            members: vec![Vec::new(); devices],
            complete: vec![false; devices],
        }
    }

    /// Appends a chunk of records from `device`.
    pub fn append(&mut self, device: usize, activations: Tensor<f32>, labels: &[u32]) -> Result<()> {
        if device >= self.members.len() {
            return Err(config_err!("device {device} outside [0, {})", self.members.len()));
        }
        if activations.rows() != labels.len() {
            return Err(config_err!("{} activations but {} labels", activations.rows(), labels.len()));
        }
        let start = self.labels.len();
        self.activations =
            Tensor::concat_rows(&[core::mem::replace(&mut self.activations, Tensor::zeros(vec![0])), activations])?;
        self.labels.extend_from_slice(labels);
        self.devices.extend(core::iter::repeat_n(device as u32, labels.len()));
        self.members[device].extend(start..start + labels.len());
        Ok(())
    }

    pub fn mark_complete(&mut self, device: usize) {
        self.complete[device] = true;
    }

    pub fn is_complete(&self, device: usize) -> bool {
        self.complete[device]
    }

    pub fn all_complete(&self) -> bool {
        self.complete.iter().all(|&c| c)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn device_count(&self) -> usize {
        self.members.len()
    }

    /// Positions of `device`'s records, in arrival order.
    pub fn device_records(&self, device: usize) -> &[usize] {
        &self.members[device]
    }

    /// Bitwise equality of the records, ignoring arrival order.
    pub fn same_records(&self, other: &Self) -> bool {
        self.device_count() == other.device_count()
            && (0..self.device_count()).all(|k| {
                let (a, b) = (self.device_records(k), other.device_records(k));
                a.len() == b.len()
                    && a.iter().zip(b).all(|(&i, &j)| {
                        self.labels[i] == other.labels[j]
                            && self
                                .activations
                                .row(i)
                                .iter()
                                .zip(other.activations.row(j))
                                .all(|(x, y)| x.to_bits() == y.to_bits())
                    })
            })
    }
}

/// State handed from the device phase to the transfer and server phases.
#[derive(Clone, Debug)]
pub struct DevicePhaseOutcome {
    /// Frozen device block (best validation epoch).
    pub device: Block<f32>,
    pub aux: AuxNet<f32>,
    /// Untrained server block, identical to the one SFL starts from.
    pub server_init: Block<f32>,
    pub best_accuracy: f64,
    pub epochs_run: usize,
    pub meter: Meter,
}

/// Phase 1: device block + auxiliary head trained with the local loss and
/// aggregated with FedAvg every epoch, until early stopping or `N^(d)`.
pub fn ampere_device_phase(cfg: &TrainingConfig, spec: &ModelSpec, data: &FederatedData) -> Result<DevicePhaseOutcome> {
    cfg.validate()?;
    let (mut dev_global, server_init) = split_model::<f32>(spec, cfg.split, cfg.seed)?;
    let aux_init = generate_auxiliary(&server_init, cfg.aux_ratio, spec.classes, cfg.seed)?;
    let mut aux_global = aux_init.block.clone();
    let upload = dev_global.param_bytes() + aux_global.param_bytes();
    let lr = cfg.lr_device as f32;
    let mut meter = Meter::new(data.devices(), cfg.bandwidth_bps);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = (dev_global.clone(), aux_global.clone());
    let mut epochs_run = 0;

    for epoch in 0..cfg.device_epochs {
        let e = epoch as u64;
        let ids = if cfg.sample_device_phase {
            device_sampling(e, data.devices(), cfg.devices_per_round, cfg.seed)?
        } else {
            (0..data.devices()).collect()
        };
        let mut devs = Vec::with_capacity(ids.len());
        let mut auxes = Vec::with_capacity(ids.len());
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for &k in &ids {
            let (mut dev, mut aux) = (dev_global.clone(), aux_global.clone());
            let shard = &data.shards[k];
            for idx in epoch_batches(shard.len(), cfg.batch_device, cfg.seed, &[tag::SHUFFLE, e, k as u64]) {
                let batch = shard.subset(&idx);
                let (act, dcache) = dev.forward(&batch.samples)?;
                let (logits, acache) = aux.forward(&act)?;
                let (loss, g) = loss_softmax_xent(&logits, &batch.labels)?;
                let (agrads, act_grad) = aux.backward(&acache, &g)?;
                aux.sgd_step(&agrads, lr)?;
                let (dgrads, _) = dev.backward(&dcache, &act_grad)?;
                dev.sgd_step(&dgrads, lr)?;
                meter.device_flops[k] +=
                    dev.flops(idx.len(), Pass::ForwardBackward) + aux.flops(idx.len(), Pass::ForwardBackward);
                loss_sum += loss as f64 * idx.len() as f64;
                seen += idx.len();
            }
            meter.ledger.push(TransferKind::ModelUp, upload, e, k as u32)?;
            devs.push(dev);
            auxes.push(aux);
        }
        let weights = data.shard_weights(&ids);
        dev_global = fedavg(&devs.iter().collect::<Vec<_>>(), &weights)?;
        aux_global = fedavg(&auxes.iter().collect::<Vec<_>>(), &weights)?;
        for &k in &ids {
            meter.ledger.push(TransferKind::ModelDown, upload, e, k as u32)?;
        }
        epochs_run += 1;
        let acc = accuracy(&[&dev_global, &aux_global], &data.val.samples, &data.val.labels)?;
        meter.row(Phase::Device, loss_sum / seen.max(1) as f64, acc);
        if stopper.observe(acc) {
            best = (dev_global.clone(), aux_global.clone());
        }
        if stopper.should_stop() {
            break;
        }
    }
    let best_accuracy = accuracy(&[&best.0, &best.1], &data.val.samples, &data.val.labels)?;
    let aux = AuxNet { block: best.1, ..aux_init };
    Ok(DevicePhaseOutcome { device: best.0, aux, server_init, best_accuracy, epochs_run, meter })
}

/// Activations of `shard` through the (frozen) device block.
pub fn device_activations(device: &Block<f32>, shard: &Dataset) -> Result<Tensor<f32>> {
    if shard.is_empty() {
        let mut shape = vec![0];
        shape.extend(device.output_shape());
        return Ok(Tensor::zeros(shape));
    }
    infer_chain(&[device], &shard.samples)
}

/// Recomputes every device's activations without any accounting.
pub fn regenerate_activations(device: &Block<f32>, data: &FederatedData) -> Result<ActivationSet> {
    let mut set = ActivationSet::new(data.devices(), &device.output_shape());
    for (k, shard) in data.shards.iter().enumerate() {
        set.append(k, device_activations(device, shard)?, &shard.labels)?;
        set.mark_complete(k);
    }
    Ok(set)
}

/// Bytes of one device's activation upload.
pub fn activation_upload_bytes(cfg: &TrainingConfig, activations: &Tensor<f32>) -> u64 {
    let labels = if cfg.label_bytes { BYTES_PER_LABEL } else { 0 };
    BYTES_PER_ELEMENT * activations.len() as u64 + labels * activations.rows() as u64
}

/// Phase 2: every device (all `K`, not just sampled ones) uploads the
/// activations of its whole shard once, as a single transfer.
pub fn transfer_activations(
    cfg: &TrainingConfig,
    data: &FederatedData,
    outcome: &mut DevicePhaseOutcome,
) -> Result<ActivationSet> {
    let mut set = ActivationSet::new(data.devices(), &outcome.device.output_shape());
    let round = outcome.epochs_run as u64;
    for (k, shard) in data.shards.iter().enumerate() {
        let acts = device_activations(&outcome.device, shard)?;
        outcome.meter.device_flops[k] += outcome.device.flops(shard.len(), Pass::Forward);
        if !shard.is_empty() {
            outcome.meter.ledger.push(
                TransferKind::Activation,
                activation_upload_bytes(cfg, &acts),
                round,
                k as u32,
            )?;
        }
        set.append(k, acts, &shard.labels)?;
        set.mark_complete(k);
    }
    Ok(set)
}

/// Validation inputs mapped through the frozen device block, computed once
/// by the server for phase-3 evaluation.
pub struct ServerValidation {
    pub activations: Tensor<f32>,
    pub labels: Vec<u32>,
}

impl ServerValidation {
    pub fn new(device: &Block<f32>, val: &Dataset) -> Result<Self> {
        Ok(Self { activations: device_activations(device, val)?, labels: val.labels.clone() })
    }

    pub fn accuracy(&self, server: &Block<f32>) -> Result<f64> {
        accuracy(&[server], &self.activations, &self.labels)
    }
}

/// Emits the transfer row: the untrained server block evaluated on the
/// consolidated set and on validation.
pub fn record_transfer(
    meter: &mut Meter,
    server_init: &Block<f32>,
    set: &ActivationSet,
    val: &ServerValidation,
) -> Result<()> {
    let loss = mean_loss(&[server_init], &set.activations, &set.labels)?;
    meter.row(Phase::Transfer, loss, val.accuracy(server_init)?);
    Ok(())
}

/// Phase 3 on the consolidated set: one server block, minibatch SGD over
/// all records, early stopping. Returns the best block and epochs run.
pub fn train_server_consolidated(
    cfg: &TrainingConfig,
    server_init: &Block<f32>,
    set: &ActivationSet,
    val: &ServerValidation,
    meter: &mut Meter,
) -> Result<(Block<f32>, usize)> {
    let mut server = server_init.clone();
    let mut best = server.clone();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut epochs = 0;
    for epoch in 0..cfg.server_epochs {
        let mut loss_sum = 0.0;
        for idx in epoch_batches(set.len(), cfg.batch_server, cfg.seed, &[tag::SERVER_SHUFFLE, epoch as u64, 0]) {
            let x = set.activations.select_rows(&idx);
            let y: Vec<u32> = idx.iter().map(|&i| set.labels[i]).collect();
            loss_sum += sgd_batch(&mut server, &x, &y, cfg.lr_server as f32)? as f64 * idx.len() as f64;
            meter.server_flops += server.flops(idx.len(), Pass::ForwardBackward);
        }
        epochs += 1;
        let acc = val.accuracy(&server)?;
        meter.row(Phase::Server, loss_sum / set.len().max(1) as f64, acc);
        if stopper.observe(acc) {
            best = server.clone();
        }
        if stopper.should_stop() {
            break;
        }
    }
    Ok((best, epochs))
}

/// Phase 3 without consolidation: one server block per device, each trained
/// on that device's activations only, FedAvg-aggregated every epoch.
pub fn train_server_per_device(
    cfg: &TrainingConfig,
    server_init: &Block<f32>,
    set: &ActivationSet,
    val: &ServerValidation,
    meter: &mut Meter,
) -> Result<(Block<f32>, usize)> {
    let mut global = server_init.clone();
    let mut best = global.clone();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let ids: Vec<usize> = (0..set.device_count()).filter(|&k| !set.device_records(k).is_empty()).collect();
    let weights: Vec<f64> = ids.iter().map(|&k| set.device_records(k).len() as f64).collect();
    let mut epochs = 0;
    for epoch in 0..cfg.server_epochs {
        let mut locals = Vec::with_capacity(ids.len());
        let mut loss_sum = 0.0;
        for &k in &ids {
            let mut local = global.clone();
            let records = set.device_records(k);
            let parts = [tag::SERVER_SHUFFLE, epoch as u64, k as u64];
            for pos in epoch_batches(records.len(), cfg.batch_server, cfg.seed, &parts) {
                let idx: Vec<usize> = pos.iter().map(|&i| records[i]).collect();
                let x = set.activations.select_rows(&idx);
                let y: Vec<u32> = idx.iter().map(|&i| set.labels[i]).collect();
                loss_sum += sgd_batch(&mut local, &x, &y, cfg.lr_server as f32)? as f64 * idx.len() as f64;
                meter.server_flops += local.flops(idx.len(), Pass::ForwardBackward);
            }
            locals.push(local);
        }
        global = fedavg(&locals.iter().collect::<Vec<_>>(), &weights)?;
        epochs += 1;
        let acc = val.accuracy(&global)?;
        meter.row(Phase::Server, loss_sum / set.len().max(1) as f64, acc);
        if stopper.observe(acc) {
            best = global.clone();
        }
        if stopper.should_stop() {
            break;
        }
    }
    Ok((best, epochs))
}

fn run_with(cfg: &TrainingConfig, spec: &ModelSpec, data: &FederatedData, protocol: Protocol) -> Result<RunReport> {
    let mut outcome = ampere_device_phase(cfg, spec, data)?;
    let set = transfer_activations(cfg, data, &mut outcome)?;
    let val = ServerValidation::new(&outcome.device, &data.val)?;
    let DevicePhaseOutcome { device, server_init, best_accuracy, epochs_run, mut meter, .. } = outcome;
    record_transfer(&mut meter, &server_init, &set, &val)?;
    let (server, server_epochs) = match protocol {
        Protocol::AmpereNoConsolidation => train_server_per_device(cfg, &server_init, &set, &val, &mut meter)?,
        _ => train_server_consolidated(cfg, &server_init, &set, &val, &mut meter)?,
    };
    let final_accuracy = val.accuracy(&server)?;
    let model = device.join(server)?;
    Ok(meter.finish(protocol, final_accuracy, epochs_run, server_epochs, Some(best_accuracy), model))
}

/// Full three-phase run with activation consolidation.
pub fn run_ampere(cfg: &TrainingConfig, spec: &ModelSpec, data: &FederatedData) -> Result<RunReport> {
    run_with(cfg, spec, data, Protocol::Ampere)
}

/// Ablation: identical through the activation transfer, then `K` separate
/// server blocks aggregated each epoch.
pub fn run_ampere_no_consolidation(cfg: &TrainingConfig, spec: &ModelSpec, data: &FederatedData) -> Result<RunReport> {
    run_with(cfg, spec, data, Protocol::AmpereNoConsolidation)
}
