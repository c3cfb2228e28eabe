use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use splitsim::config::{load_config, ConfigError, ExperimentPlan};
use splitsim::runner::run_plan;
use splitsim_core::data::{
    dirichlet_concentration, dirichlet_partition, label_histogram, make_synthetic, tv_distance, SyntheticKind,
    DEFAULT_EPSILON,
};
use splitsim_core::model::{ModelSpec, DEFAULT_AUX_RATIO};
use splitsim_core::nn::gradcheck::run_suite;
use splitsim_core::simnet::{closed_form_comm, comm_difference_vs_fl, fl_breakeven_epochs, CostModel, Variant};

const EXIT_RUN_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Parser)]
#[command(name = "splitsim", version, about = "Split federated learning simulator")]
struct Cli {
    /// Base seed; sweeps use seed, seed+1, ... in place of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding `out_dir` from the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Overlap activation transfer with server training in ampere runs.
    #[arg(long, global = true)]
    concurrent_phase3: bool,
    /// Do not charge 8 bytes per label alongside activations.
    #[arg(long, global = true)]
    no_label_bytes: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One run per protocol: first α, first seed.
    Run { config: PathBuf },
    /// Every α x protocol x seed of the config.
    Sweep { config: PathBuf },
    /// Closed-form communication per split point.
    Cost {
        /// `toy-mlp`, `toy-cnn`, or a config file whose model to use.
        #[arg(long, default_value = "toy-cnn")]
        model: String,
        /// Single split point; all valid points if omitted.
        #[arg(long)]
        split: Option<usize>,
        #[arg(long, default_value_t = 100)]
        epochs: u64,
        /// Training samples whose activations are transferred.
        #[arg(long, default_value_t = 1000)]
        samples: u64,
        /// Participating devices per epoch.
        #[arg(long, default_value_t = 1)]
        devices: u64,
        #[arg(long, default_value_t = DEFAULT_AUX_RATIO)]
        aux_ratio: f64,
    },
    /// Finite-difference check of every layer's backward pass.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        cases: usize,
    },
    /// Per-device label histograms of a Dirichlet partition.
    PartitionStats {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 8)]
        devices: usize,
        #[arg(long, default_value_t = 10000)]
        samples: usize,
        #[arg(long, default_value_t = 10)]
        classes: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let config = e.chain().any(|c| {
        c.is::<ConfigError>()
            || matches!(
                c.downcast_ref::<splitsim_core::Error>(),
                Some(splitsim_core::Error::Config(_) | splitsim_core::Error::Usage(_))
            )
    });
    if config {
        EXIT_CONFIG
    } else {
        EXIT_RUN_FAILURE
    }
}

fn load_plan(cli: &Cli, path: &Path) -> anyhow::Result<ExperimentPlan> {
    let mut plan = load_config(path)?;
    if let Some(seed) = cli.seed {
        plan = plan.with_base_seed(seed);
    }
    if let Some(dir) = &cli.out_dir {
        plan.out_dir = dir.clone();
    }
    if cli.no_label_bytes {
        plan = plan.without_label_bytes();
    }
    plan.concurrent_phase3 |= cli.concurrent_phase3;
    Ok(plan)
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    match &cli.command {
        Command::Run { config } => execute(load_plan(&cli, config)?.single()),
        Command::Sweep { config } => execute(load_plan(&cli, config)?),
        Command::Cost { model, split, epochs, samples, devices, aux_ratio } => {
            let spec = model_for_cost(model)?;
            print!("{}", cost_table(&spec, *split, *epochs, *samples, *devices, *aux_ratio, !cli.no_label_bytes)?);
            Ok(0)
        }
        Command::Gradcheck { cases } => gradcheck(*cases, cli.seed.unwrap_or(0)),
        Command::PartitionStats { alpha, devices, samples, classes } => {
            partition_stats(*alpha, *devices, *samples, *classes, cli.seed.unwrap_or(0))?;
            Ok(0)
        }
    }
}

fn execute(plan: ExperimentPlan) -> anyhow::Result<u8> {
    eprintln!("{}: {} runs -> {}", plan.name, plan.run_count(), plan.out_dir.display());
    let outcome = run_plan(&plan)?;
    for c in &outcome.summary.cells {
        match (c.acc_mean, c.acc_std) {
            (Some(m), Some(s)) => println!(
                "{:<32} acc {:.4} +- {:.4}  bytes {:.0}  rounds {:.0}",
                c.cell,
                m,
                s,
                c.bytes_total.unwrap_or(0.0),
                c.rounds_total.unwrap_or(0.0)
            ),
            _ => println!("{:<32} no successful runs", c.cell),
        }
    }
    for (protocol, std) in &outcome.summary.acc_std_across_alpha {
        println!("std across alpha  {protocol:<24} {std:.4}");
    }
    for f in &outcome.summary.failures {
        eprintln!("failed: {} seed {}: {}", f.cell, f.seed, f.error);
    }
    println!("summary: {}", outcome.summary_file.display());
    Ok(if outcome.failed() { EXIT_RUN_FAILURE } else { 0 })
}

fn model_for_cost(model: &str) -> anyhow::Result<ModelSpec> {
    Ok(match model {
        "toy-mlp" => ModelSpec::toy_mlp(8, 32, 4),
        "toy-cnn" => ModelSpec::toy_cnn(1, 8, 4),
        path => {
            load_config(Path::new(path))
                .with_context(|| format!("model `{path}` is neither a preset nor a config"))?
                .model
        }
    })
}

fn cost_table(
    spec: &ModelSpec,
    split: Option<usize>,
    epochs: u64,
    samples: u64,
    devices: u64,
    aux_ratio: f64,
    labels: bool,
) -> anyhow::Result<String> {
    use std::fmt::Write;
    let cm = CostModel::from_spec(spec, samples, aux_ratio, labels)?;
    let points: Vec<usize> = match split {
        Some(p) => vec![p],
        None => (1..spec.len()).collect(),
    };
    let mut out = String::new();
    writeln!(out, "# epochs={epochs} samples={samples} devices={devices} aux_ratio={aux_ratio} label_bytes={labels}")?;
    writeln!(out, "p,layer,s_d,s_s,s_aux,s_act,uit,sfl,fl,fl_minus_uit,breakeven_epochs")?;
    for p in points {
        let layer = spec.layers.get(p - 1).map(|l| l.to_string()).unwrap_or_default();
        let uit = match cm.aux_bytes(p) {
            Ok(_) => closed_form_comm(&cm, Variant::Uit, p, epochs, devices)?.to_string(),
            Err(_) => "n/a".into(),
        };
        let (aux, diff, breakeven) = match cm.aux_bytes(p) {
            Ok(a) => (
                a.to_string(),
                comm_difference_vs_fl(&cm, p, epochs, devices)?.to_string(),
                fl_breakeven_epochs(&cm, p, devices)?.map_or("never".into(), |n| n.to_string()),
            ),
            Err(_) => ("n/a".into(), "n/a".into(), "n/a".into()),
        };
        writeln!(
            out,
            "{p},\"{layer}\",{},{},{aux},{},{uit},{},{},{diff},{breakeven}",
            cm.device_bytes(p)?,
            cm.server_bytes(p)?,
            cm.activation_bytes(p)?,
            closed_form_comm(&cm, Variant::Sfl, p, epochs, devices)?,
            closed_form_comm(&cm, Variant::Fl, p, epochs, devices)?,
        )?;
    }
    Ok(out)
}

fn gradcheck(cases: usize, seed: u64) -> anyhow::Result<u8> {
    if cases == 0 {
        bail!(splitsim_core::Error::Usage("--cases must be positive".into()));
    }
    let reports = run_suite(cases, seed)?;
    let mut ok = true;
    for r in &reports {
        let pass = r.passed(GRADCHECK_TOLERANCE);
        ok &= pass;
        println!(
            "{:<8} cases {:>3} entries {:>6} max rel err {:.3e} {}",
            r.kind,
            r.cases,
            r.entries,
            r.max_rel_error,
            if pass { "ok" } else { "FAIL" }
        );
    }
    Ok(if ok { 0 } else { EXIT_RUN_FAILURE })
}

fn partition_stats(alpha: f64, devices: usize, samples: usize, classes: usize, seed: u64) -> anyhow::Result<()> {
    let ds =
        make_synthetic(samples, classes, SyntheticKind::GaussianBlobs { dim: 2, separation: 1.0, noise: 1.0 }, seed)?;
    let part = dirichlet_partition(&ds.labels, classes, devices, alpha, DEFAULT_EPSILON, seed)?;
    let global = label_histogram(ds.labels.iter().copied(), classes);
    println!(
        "alpha={alpha} concentration={:.4} devices={devices} samples={samples} classes={classes} seed={seed}",
        dirichlet_concentration(alpha, DEFAULT_EPSILON)
    );
    for k in 0..devices {
        let labels = part.device_indices(k).into_iter().map(|i| ds.labels[i]);
        let hist = label_histogram(labels, classes);
        let cells: Vec<String> = hist.iter().map(|h| format!("{h:.3}")).collect();
        println!("device {k:>3} n={:>6} tv={:.4} [{}]", part.counts[k], tv_distance(&hist, &global), cells.join(" "));
    }
    println!("mean tv {:.4}", part.mean_tv(&ds.labels, classes));
    Ok(())
}
