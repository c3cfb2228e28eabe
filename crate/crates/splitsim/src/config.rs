use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use splitsim_core::data::{make_synthetic, Dataset, SyntheticKind, DEFAULT_EPSILON};
use splitsim_core::model::{ModelSpec, DEFAULT_AUX_RATIO};
use splitsim_core::nn::LayerSpec;
use splitsim_core::protocols::{Protocol, TrainingConfig};

use crate::dataset_io;

/// Configuration problem, with the 1-based line of the offending key when
/// it can be located.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source_name: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.source_name, line, self.message),
            None => write!(f, "{}: {}", self.source_name, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    name: Option<String>,
    protocols: Option<Vec<String>>,
    seeds: Option<Vec<u64>>,
    out_dir: Option<PathBuf>,
    concurrent_phase3: Option<bool>,
    #[serde(default)]
    dataset: RawDataset,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    train: RawTrain,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    kind: Option<String>,
    samples: Option<usize>,
    classes: Option<usize>,
    dim: Option<usize>,
    separation: Option<f64>,
    noise: Option<f64>,
    turns: Option<f64>,
    channels: Option<usize>,
    side: Option<usize>,
    path: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    preset: Option<String>,
    hidden: Option<usize>,
    layers: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    devices: Option<usize>,
    devices_per_round: Option<usize>,
    split: Option<usize>,
    aux_ratio: Option<f64>,
    lr_device: Option<f64>,
    lr_server: Option<f64>,
    device_epochs: Option<usize>,
    server_epochs: Option<usize>,
    batch_device: Option<usize>,
    batch_server: Option<usize>,
    patience: Option<usize>,
    alpha: Option<OneOrMany>,
    epsilon: Option<f64>,
    bandwidth_bps: Option<f64>,
    label_bytes: Option<bool>,
    sample_device_phase: Option<bool>,
    holdout_fraction: Option<f64>,
}

/// Where the training samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    /// Regenerated from each run's seed.
    Synthetic { kind: SyntheticKind, samples: usize, classes: usize },
    /// Binary dataset file, shared by every run.
    File(PathBuf),
}

impl DatasetSpec {
    pub fn sample_shape(&self) -> Result<Vec<usize>, String> {
        match self {
            DatasetSpec::Synthetic { kind, .. } => Ok(kind.sample_shape()),
            DatasetSpec::File(path) => {
                dataset_io::read_header(path).map(|h| h.shape).map_err(|e| format!("{}: {e}", path.display()))
            }
        }
    }

    pub fn classes(&self) -> Result<usize, String> {
        match self {
            DatasetSpec::Synthetic { classes, .. } => Ok(*classes),
            DatasetSpec::File(path) => {
                dataset_io::read_header(path).map(|h| h.classes).map_err(|e| format!("{}: {e}", path.display()))
            }
        }
    }

    pub fn materialize(&self, seed: u64) -> anyhow::Result<Dataset> {
        Ok(match self {
            DatasetSpec::Synthetic { kind, samples, classes } => make_synthetic(*samples, *classes, *kind, seed)?,
            DatasetSpec::File(path) => dataset_io::load(path)?,
        })
    }
}

/// How the model was described, kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelChoice {
    Mlp { hidden: usize },
    Cnn,
    Layers,
}

/// One sweep cell: a protocol at one non-IID degree, repeated over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub protocol: Protocol,
    pub alpha: f64,
    /// Training configuration; `seed` is overwritten per repetition.
    pub config: TrainingConfig,
    pub seeds: Vec<u64>,
}

impl Cell {
    /// Stable identifier used for file names and the summary.
    pub fn id(&self) -> String {
        format!("{}_a{}", self.protocol, self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub name: String,
    pub dataset: DatasetSpec,
    pub model: ModelSpec,
    pub model_choice: ModelChoice,
    pub cells: Vec<Cell>,
    pub out_dir: PathBuf,
    pub concurrent_phase3: bool,
}

impl ExperimentPlan {
    /// Total number of single runs (cells x seeds).
    pub fn run_count(&self) -> usize {
        self.cells.iter().map(|c| c.seeds.len()).sum()
    }

    pub fn alphas(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.alpha) {
                out.push(c.alpha);
            }
        }
        out
    }

    /// Keeps only the first α and first seed of every protocol.
    pub fn single(mut self) -> Self {
        let first = self.alphas().first().copied();
        self.cells.retain(|c| Some(c.alpha) == first);
        for c in &mut self.cells {
            c.seeds.truncate(1);
        }
        self
    }

    /// Replaces each cell's seeds with `base, base+1, ...`, same count.
    pub fn with_base_seed(mut self, base: u64) -> Self {
        for c in &mut self.cells {
            let n = c.seeds.len() as u64;
            c.seeds = (base..base + n).collect();
        }
        self
    }

    pub fn without_label_bytes(mut self) -> Self {
        for c in &mut self.cells {
            c.config.label_bytes = false;
        }
        self
    }
}

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// Reads and validates an experiment plan.
pub fn load_config(path: &Path) -> Result<ExperimentPlan, ConfigError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        source_name: name.clone(),
        line: None,
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_config(&text, &name, base)
}

/// Parses plan text. Relative dataset paths resolve against `base_dir`.
pub fn parse_config(text: &str, source_name: &str, base_dir: &Path) -> Result<ExperimentPlan, ConfigError> {
    let raw: RawPlan = toml::from_str(text).map_err(|e| ConfigError {
        source_name: source_name.to_string(),
        line: e.span().map(|s| line_of_offset(text, s.start)),
        message: e.message().to_string(),
    })?;
    build_plan(raw, base_dir).map_err(|message| ConfigError {
        source_name: source_name.to_string(),
        line: locate_key(text, &message),
        message,
    })
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the first key assignment whose name appears in `message`,
/// preferring the longest key.
fn locate_key(text: &str, message: &str) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, line) in text.lines().enumerate() {
        let Some((key, _)) = line.split_once('=') else { continue };
        let key = key.trim();
        let leaf = key.rsplit('.').next().unwrap_or(key);
        if leaf.is_empty() || !mentions(message, leaf) {
            continue;
        }
        if best.is_none_or(|(len, _)| leaf.len() > len) {
            best = Some((leaf.len(), i + 1));
        }
    }
    best.map(|(_, line)| line)
}

fn mentions(message: &str, word: &str) -> bool {
    message.match_indices(word).any(|(i, _)| {
        let before = message[..i].chars().next_back();
        let after = message[i + word.len()..].chars().next();
        let boundary = |c: Option<char>| c.is_none_or(|c| !(c.is_alphanumeric() || c == '_'));
        boundary(before) && boundary(after)
    })
}

fn build_plan(raw: RawPlan, base_dir: &Path) -> Result<ExperimentPlan, String> {
    let dataset = build_dataset(&raw.dataset, base_dir)?;
    let sample_shape = dataset.sample_shape()?;
    let classes = dataset.classes()?;
    let (model, model_choice) = build_model(&raw.model, &sample_shape, classes)?;

    let t = &raw.train;
    let d = TrainingConfig::default();
    let alphas = match &t.alpha {
        None => vec![d.alpha],
        Some(OneOrMany::One(a)) => vec![*a],
        Some(OneOrMany::Many(v)) => v.clone(),
    };
    if alphas.is_empty() {
        return Err("alpha list is empty".into());
    }
    let base = TrainingConfig {
        devices: t.devices.unwrap_or(d.devices),
        devices_per_round: t.devices_per_round.unwrap_or(t.devices.unwrap_or(d.devices_per_round)),
        split: t.split.unwrap_or(d.split),
        aux_ratio: t.aux_ratio.unwrap_or(DEFAULT_AUX_RATIO),
        lr_device: t.lr_device.unwrap_or(d.lr_device),
        lr_server: t.lr_server.unwrap_or(d.lr_server),
        device_epochs: t.device_epochs.unwrap_or(d.device_epochs),
        server_epochs: t.server_epochs.unwrap_or(d.server_epochs),
        batch_device: t.batch_device.unwrap_or(d.batch_device),
        batch_server: t.batch_server.unwrap_or(d.batch_server),
        patience: t.patience.unwrap_or(d.patience),
        alpha: alphas[0],
        epsilon: t.epsilon.unwrap_or(DEFAULT_EPSILON),
        seed: 0,
        bandwidth_bps: t.bandwidth_bps.unwrap_or(d.bandwidth_bps),
        label_bytes: t.label_bytes.unwrap_or(d.label_bytes),
        sample_device_phase: t.sample_device_phase.unwrap_or(d.sample_device_phase),
        holdout_fraction: t.holdout_fraction.unwrap_or(d.holdout_fraction),
    };
    if base.split >= model.len() {
        return Err(format!("split {} must be below the model depth {}", base.split, model.len()));
    }

    let protocols = match &raw.protocols {
        None => Protocol::ALL.to_vec(),
        Some(names) => names
            .iter()
            .map(|n| n.parse::<Protocol>().map_err(|e| format!("protocols: {e}")))
            .collect::<Result<_, _>>()?,
    };
    let seeds = raw.seeds.clone().unwrap_or_else(|| DEFAULT_SEEDS.to_vec());
    if seeds.is_empty() {
        return Err("seeds list is empty".into());
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err("seeds must be distinct".into());
    }

    let mut cells = Vec::new();
    for &alpha in &alphas {
        let config = TrainingConfig { alpha, ..base.clone() };
        config.validate().map_err(|e| e.to_string())?;
        for &protocol in &protocols {
            cells.push(Cell { protocol, alpha, config: config.clone(), seeds: seeds.clone() });
        }
    }
    let name = raw.name.clone().unwrap_or_else(|| "plan".into());
    Ok(ExperimentPlan {
        out_dir: raw.out_dir.clone().unwrap_or_else(|| PathBuf::from("out").join(&name)),
        name,
        dataset,
        model,
        model_choice,
        cells,
        concurrent_phase3: raw.concurrent_phase3.unwrap_or(false),
    })
}

fn build_dataset(raw: &RawDataset, base_dir: &Path) -> Result<DatasetSpec, String> {
    let kind = raw.kind.as_deref().unwrap_or("blobs");
    let noise = raw.noise;
    let synthetic = match kind {
        "blobs" => SyntheticKind::GaussianBlobs {
            dim: raw.dim.unwrap_or(8),
            separation: raw.separation.unwrap_or(2.0),
            noise: noise.unwrap_or(1.0),
        },
        "spirals" => SyntheticKind::Spirals { turns: raw.turns.unwrap_or(1.5), noise: noise.unwrap_or(0.05) },
        "patches" => SyntheticKind::ImagePatches {
            channels: raw.channels.unwrap_or(1),
            side: raw.side.unwrap_or(8),
            noise: noise.unwrap_or(0.5),
        },
        "file" => {
            let path = raw.path.as_ref().ok_or("kind = \"file\" needs a path")?;
            let path = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
            return Ok(DatasetSpec::File(path));
        }
        other => return Err(format!("unknown dataset kind `{other}`")),
    };
    let samples = raw.samples.unwrap_or(5000);
    let classes = raw.classes.unwrap_or(4);
    if samples == 0 || classes == 0 {
        return Err("samples and classes must be positive".into());
    }
    Ok(DatasetSpec::Synthetic { kind: synthetic, samples, classes })
}

fn build_model(raw: &RawModel, sample_shape: &[usize], classes: usize) -> Result<(ModelSpec, ModelChoice), String> {
    if let Some(layers) = &raw.layers {
        if raw.preset.is_some() {
            return Err("give either preset or layers, not both".into());
        }
        let layers = layers
            .iter()
            .map(|l| l.parse::<LayerSpec>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("layers: {e}"))?;
        let spec = ModelSpec::new(layers, sample_shape.to_vec()).map_err(|e| format!("layers: {e}"))?;
        if spec.classes != classes {
            return Err(format!("layers: head has {} classes but the dataset has {classes}", spec.classes));
        }
        return Ok((spec, ModelChoice::Layers));
    }
    match raw.preset.as_deref().unwrap_or("mlp") {
        "mlp" => {
            let &[dim] = sample_shape else {
                return Err(format!("preset mlp needs flat samples, dataset has shape {sample_shape:?}"));
            };
            let hidden = raw.hidden.unwrap_or(32);
            Ok((ModelSpec::toy_mlp(dim, hidden, classes), ModelChoice::Mlp { hidden }))
        }
        "cnn" => {
            let &[channels, side, side2] = sample_shape else {
                return Err(format!("preset cnn needs [channels, side, side] samples, dataset has {sample_shape:?}"));
            };
            if side != side2 {
                return Err("preset cnn needs square images".into());
            }
            Ok((ModelSpec::toy_cnn(channels, side, classes), ModelChoice::Cnn))
        }
        other => Err(format!("unknown model preset `{other}`")),
    }
}
