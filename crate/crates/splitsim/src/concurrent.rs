//! Threaded activation transfer overlapping with server training.
//!
//! After the device phase every device streams its activations to the
//! server in `batch_server`-sized chunks from its own thread. The server
//! takes one SGD step per chunk as it arrives, which forms the first server
//! epoch, then continues with ordinary shuffled epochs over the consolidated
//! set. Ledger entries are appended by the server thread only, in arrival
//! order. Results match the sequential engine in distribution, not bitwise.

use std::sync::mpsc;
use std::thread;

use splitsim_core::model::{ModelSpec, BYTES_PER_ELEMENT, BYTES_PER_LABEL};
use splitsim_core::nn::{Block, Pass};
use splitsim_core::protocols::ampere::{
    ampere_device_phase, record_transfer, ActivationSet, DevicePhaseOutcome, ServerValidation,
};
use splitsim_core::protocols::{
    epoch_batches, infer_chain, sgd_batch, EarlyStopping, FederatedData, Meter, Phase, Protocol, RunReport,
    TrainingConfig,
};
use splitsim_core::rng::tag;
use splitsim_core::simnet::TransferKind;
use splitsim_core::{Result, Tensor};

enum Message {
    Chunk { device: usize, activations: Tensor<f32>, labels: Vec<u32> },
    Done { device: usize, flops: u64 },
}

/// Streams every device's activations through `tx`, one thread per device.
fn spawn_producers<'s>(
    scope: &'s thread::Scope<'s, '_>,
    device: &'s Block<f32>,
    data: &'s FederatedData,
    chunk: usize,
    tx: mpsc::Sender<Result<Message>>,
) {
    for (k, shard) in data.shards.iter().enumerate() {
        let tx = tx.clone();
        scope.spawn(move || {
            let rows: Vec<usize> = (0..shard.len()).collect();
            for idx in rows.chunks(chunk) {
                let batch = shard.subset(idx);
                let msg = infer_chain(&[device], &batch.samples).map(|activations| Message::Chunk {
                    device: k,
                    activations,
                    labels: batch.labels,
                });
                let failed = msg.is_err();
                if tx.send(msg).is_err() || failed {
                    return;
                }
            }
            let _ = tx.send(Ok(Message::Done { device: k, flops: device.flops(shard.len(), Pass::Forward) }));
        });
    }
}

/// Phase 2 and the first phase-3 epoch, overlapped. Returns the activation
/// set, the server after the streamed epoch, and its loss sum.
fn stream_and_train(
    cfg: &TrainingConfig,
    data: &FederatedData,
    outcome: &mut DevicePhaseOutcome,
    train: bool,
) -> Result<(ActivationSet, Block<f32>, f64)> {
    let mut set = ActivationSet::new(data.devices(), &outcome.device.output_shape());
    let mut server = outcome.server_init.clone();
    let mut loss_sum = 0.0;
    let mut pending = vec![0u64; data.devices()];
    let label_bytes = if cfg.label_bytes { BYTES_PER_LABEL } else { 0 };
    let round = outcome.epochs_run as u64;
    let device = outcome.device.clone();
    let meter = &mut outcome.meter;

    thread::scope(|scope| -> Result<()> {
        let (tx, rx) = mpsc::channel();
        spawn_producers(scope, &device, data, cfg.batch_server, tx);
        for msg in rx {
            match msg? {
                Message::Chunk { device: k, activations, labels } => {
                    pending[k] += BYTES_PER_ELEMENT * activations.len() as u64 + label_bytes * labels.len() as u64;
                    if train {
                        loss_sum += sgd_batch(&mut server, &activations, &labels, cfg.lr_server as f32)? as f64
                            * labels.len() as f64;
                        meter.server_flops += server.flops(labels.len(), Pass::ForwardBackward);
                    }
                    set.append(k, activations, &labels)?;
                }
                Message::Done { device: k, flops } => {
                    meter.device_flops[k] += flops;
                    if pending[k] > 0 {
                        meter.ledger.push(TransferKind::Activation, pending[k], round, k as u32)?;
                    }
                    set.mark_complete(k);
                }
            }
        }
        Ok(())
    })?;
    Ok((set, server, loss_sum))
}

fn consolidated_epochs(
    cfg: &TrainingConfig,
    mut server: Block<f32>,
    set: &ActivationSet,
    val: &ServerValidation,
    meter: &mut Meter,
    first_loss: f64,
) -> Result<(Block<f32>, usize)> {
    let mut stopper = EarlyStopping::new(cfg.patience);
    let acc = val.accuracy(&server)?;
    meter.row(Phase::Server, first_loss / set.len().max(1) as f64, acc);
    stopper.observe(acc);
    let mut best = server.clone();
    let mut epochs = 1;
    for epoch in 1..cfg.server_epochs {
        if stopper.should_stop() {
            break;
        }
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
    }
    Ok((best, epochs))
}

/// Consolidated three-phase run with phase 2 and phase 3 overlapped.
pub fn run_ampere_concurrent(cfg: &TrainingConfig, spec: &ModelSpec, data: &FederatedData) -> Result<RunReport> {
    let mut outcome = ampere_device_phase(cfg, spec, data)?;
    let train = cfg.server_epochs > 0;
    let (set, streamed, first_loss) = stream_and_train(cfg, data, &mut outcome, train)?;
    let val = ServerValidation::new(&outcome.device, &data.val)?;
    let DevicePhaseOutcome { device, server_init, best_accuracy, epochs_run, mut meter, .. } = outcome;
    record_transfer(&mut meter, &server_init, &set, &val)?;
    let (server, server_epochs) =
        if train { consolidated_epochs(cfg, streamed, &set, &val, &mut meter, first_loss)? } else { (server_init, 0) };
    let final_accuracy = val.accuracy(&server)?;
    let model = device.join(server)?;
    Ok(meter.finish(Protocol::Ampere, final_accuracy, epochs_run, server_epochs, Some(best_accuracy), model))
}
