use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{config_err, usage_err, Error, Result};
use crate::model::{aux_layout, ModelSpec, BYTES_PER_ELEMENT, BYTES_PER_LABEL};

/// Training protocol whose communication is modelled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Unidirectional inter-block training (device phase + one-shot
    /// activation upload).
    Uit,
    Sfl,
    Fl,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Uit, Variant::Sfl, Variant::Fl];
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uit" | "ampere" => Ok(Variant::Uit),
            "sfl" => Ok(Variant::Sfl),
            "fl" => Ok(Variant::Fl),
            other => Err(usage_err!("unknown cost variant `{other}` (expected uit, sfl or fl)")),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Uit => "uit",
            Variant::Sfl => "sfl",
            Variant::Fl => "fl",
        })
    }
}

/// Per-layer sizes of a model, measured from its spec, plus the number of
/// samples whose activations cross the split.
#[derive(Clone, Debug, PartialEq)]
pub struct CostModel {
    spec: ModelSpec,
    /// Parameter bytes of each layer.
    pub layer_param_bytes: Vec<u64>,
    /// Output (activation) bytes of each layer for one sample.
    pub layer_output_bytes: Vec<u64>,
    pub samples: u64,
    pub label_bytes_per_sample: u64,
    pub aux_ratio: f64,
}

impl CostModel {
    pub fn from_spec(spec: &ModelSpec, samples: u64, aux_ratio: f64, with_labels: bool) -> Result<Self> {
        let shapes = spec.output_shapes()?;
        Ok(Self {
            layer_param_bytes: spec.layers.iter().map(|l| BYTES_PER_ELEMENT * l.param_count() as u64).collect(),
            layer_output_bytes: shapes.iter().map(|s| BYTES_PER_ELEMENT * s.iter().product::<usize>() as u64).collect(),
            spec: spec.clone(),
            samples,
            label_bytes_per_sample: if with_labels { BYTES_PER_LABEL } else { 0 },
            aux_ratio,
        })
    }

    pub fn layers(&self) -> usize {
        self.layer_param_bytes.len()
    }

    fn check_split(&self, p: usize) -> Result<()> {
        if p == 0 || p >= self.layers() {
            return Err(config_err!("split point {p} must satisfy 1 <= p < {}", self.layers()));
        }
        Ok(())
    }

    /// `s^(d)`: parameter bytes of layers `[0, p)`.
    pub fn device_bytes(&self, p: usize) -> Result<u64> {
        self.check_split(p)?;
        Ok(self.layer_param_bytes[..p].iter().sum())
    }

    /// `s^(s)`: parameter bytes of layers `[p, I)`.
    pub fn server_bytes(&self, p: usize) -> Result<u64> {
        self.check_split(p)?;
        Ok(self.layer_param_bytes[p..].iter().sum())
    }

    /// `s^(aux)`: parameter bytes of the auxiliary head generated for a
    /// split at `p`.
    pub fn aux_bytes(&self, p: usize) -> Result<u64> {
        self.check_split(p)?;
        let shapes = self.spec.output_shapes()?;
        let layout = aux_layout(&self.spec.layers[p..], &shapes[p - 1], self.aux_ratio, self.spec.classes)?;
        Ok(layout.iter().map(|l| BYTES_PER_ELEMENT * l.param_count() as u64).sum())
    }

    /// `s^(act)`: activation payload for all samples (labels excluded).
    pub fn activation_bytes(&self, p: usize) -> Result<u64> {
        self.check_split(p)?;
        Ok(self.layer_output_bytes[p - 1] * self.samples)
    }

    /// Label bytes shipped with one full pass of activations.
    pub fn label_bytes(&self) -> u64 {
        self.label_bytes_per_sample * self.samples
    }

    /// Single-device volume `2N * sum_{i<=p} s^l_i + s^o_p` (no auxiliary
    /// head, no labels).
    pub fn per_layer_volume(&self, p: usize, epochs: u64) -> Result<u64> {
        Ok(2 * epochs * self.device_bytes(p)? + self.activation_bytes(p)?)
    }
}

/// Closed-form payload bytes exchanged over `epochs` epochs with `devices`
/// participating devices per epoch:
///
/// * UIT: `2 N m (s_d + s_aux) + s_act + s_lab`
/// * SFL: `2 N m s_d + N (2 s_act + s_lab)` (activations up with labels,
///   gradients down without)
/// * FL:  `2 N m (s_d + s_s)`
///
/// With labels disabled and `m = 1` these reduce to the single-device
/// formulas `2N(s_d+s_aux)+s_act`, `2N(s_d+s_act)` and `2N(s_d+s_s)`.
pub fn closed_form_comm(cm: &CostModel, variant: Variant, p: usize, epochs: u64, devices: u64) -> Result<u64> {
    let (n, m) = (epochs, devices);
    let s_d = cm.device_bytes(p)?;
    Ok(match variant {
        Variant::Uit => 2 * n * m * (s_d + cm.aux_bytes(p)?) + cm.activation_bytes(p)? + cm.label_bytes(),
        Variant::Sfl => 2 * n * m * s_d + n * (2 * cm.activation_bytes(p)? + cm.label_bytes()),
        Variant::Fl => 2 * n * m * (s_d + cm.server_bytes(p)?),
    })
}

/// `C_FL - C_UIT = 2 N m (s_s - s_aux) - (s_act + s_lab)`. Positive when UIT
/// is cheaper.
pub fn comm_difference_vs_fl(cm: &CostModel, p: usize, epochs: u64, devices: u64) -> Result<i128> {
    let per_epoch = 2 * devices as i128 * (cm.server_bytes(p)? as i128 - cm.aux_bytes(p)? as i128);
    Ok(epochs as i128 * per_epoch - (cm.activation_bytes(p)? + cm.label_bytes()) as i128)
}

/// `C_SFL - C_UIT = (2N - 1) s_act + (N - 1) s_lab - 2 N m s_aux`.
pub fn comm_difference_vs_sfl(cm: &CostModel, p: usize, epochs: u64, devices: u64) -> Result<i128> {
    let n = epochs as i128;
    Ok((2 * n - 1) * cm.activation_bytes(p)? as i128 + (n - 1) * cm.label_bytes() as i128
        - 2 * n * devices as i128 * cm.aux_bytes(p)? as i128)
}

/// Smallest epoch count at which UIT moves fewer bytes than FL, or `None`
/// when the server block is no larger than the auxiliary head.
pub fn fl_breakeven_epochs(cm: &CostModel, p: usize, devices: u64) -> Result<Option<u64>> {
    let per_epoch = 2 * devices as i128 * (cm.server_bytes(p)? as i128 - cm.aux_bytes(p)? as i128);
    if per_epoch <= 0 {
        return Ok(None);
    }
    let act = (cm.activation_bytes(p)? + cm.label_bytes()) as i128;
    Ok(Some((act / per_epoch + 1) as u64))
}
