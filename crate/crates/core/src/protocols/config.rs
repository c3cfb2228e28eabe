use crate::data::DEFAULT_EPSILON;
use crate::error::{config_err, Result};
use crate::model::DEFAULT_AUX_RATIO;

/// Knobs shared by every protocol engine.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    /// `K`: devices holding data.
    pub devices: usize,
    /// `m`: devices sampled per round.
    pub devices_per_round: usize,
    /// `p`: layers kept on the device.
    pub split: usize,
    pub aux_ratio: f64,
    pub lr_device: f64,
    pub lr_server: f64,
    /// `N^(d)`: round budget for FL/SFL and the device phase.
    pub device_epochs: usize,
    /// `N^(s)`: epoch budget of the server phase.
    pub server_epochs: usize,
    pub batch_device: usize,
    pub batch_server: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub bandwidth_bps: f64,
    /// Ship labels (8 bytes each) alongside activations.
    pub label_bytes: bool,
    /// Sample `m` devices per device-phase epoch; otherwise all `K` train.
    pub sample_device_phase: bool,
    /// Held-out IID validation fraction of the full dataset.
    pub holdout_fraction: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            devices: 8,
            devices_per_round: 8,
            split: 1,
            aux_ratio: DEFAULT_AUX_RATIO,
            lr_device: 0.05,
            lr_server: 0.05,
            device_epochs: 100,
            server_epochs: 100,
            batch_device: 4,
            batch_server: 4,
            patience: 15,
            alpha: 0.33,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
            bandwidth_bps: 50e6,
            label_bytes: true,
            sample_device_phase: true,
            holdout_fraction: 0.1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.devices == 0 {
            return Err(config_err!("devices must be at least 1"));
        }
        if self.devices_per_round == 0 || self.devices_per_round > self.devices {
            return Err(config_err!("devices_per_round {} must lie in [1, {}]", self.devices_per_round, self.devices));
        }
        if self.split == 0 {
            return Err(config_err!("split point must be at least 1"));
        }
        if !(self.aux_ratio > 0.0 && self.aux_ratio <= 1.0) {
            return Err(config_err!("aux_ratio {} outside (0, 1]", self.aux_ratio));
        }
        for (name, lr) in [("lr_device", self.lr_device), ("lr_server", self.lr_server)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(config_err!("{name} must be positive, got {lr}"));
            }
        }
        if self.batch_device == 0 || self.batch_server == 0 {
            return Err(config_err!("batch sizes must be positive"));
        }
        if self.patience == 0 {
            return Err(config_err!("patience must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(config_err!("alpha {} outside (0, 1]", self.alpha));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1e-8) {
            return Err(config_err!("epsilon {} must be positive and below 1e-8", self.epsilon));
        }
        if !(self.bandwidth_bps > 0.0 && self.bandwidth_bps.is_finite()) {
            return Err(config_err!("bandwidth must be positive"));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(config_err!("holdout_fraction {} outside [0, 1)", self.holdout_fraction));
        }
        Ok(())
    }
}
