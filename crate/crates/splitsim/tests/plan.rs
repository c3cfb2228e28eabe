use std::fs;
use std::path::Path;

use splitsim::config::{parse_config, ExperimentPlan};
use splitsim::dataset_io;
use splitsim::runner::run_plan;
use splitsim_core::data::{make_synthetic, SyntheticKind};

fn plan(text: &str, out: &Path) -> ExperimentPlan {
    let text = format!("out_dir = {:?}\n{text}", out.display().to_string());
    parse_config(&text, "plan.toml", Path::new("")).unwrap()
}

const SMALL: &str = "
protocols = [\"fl\", \"sfl\", \"ampere\", \"ampere-no-consolidation\", \"centralized\"]
seeds = [3, 4]
[dataset]
kind = \"blobs\"
samples = 300
[train]
devices = 4
split = 2
device_epochs = 4
server_epochs = 4
batch_device = 8
batch_server = 8
alpha = [0.1, 1.0]
";

fn read_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn rerunning_a_plan_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_plan(&plan(SMALL, a.path())).unwrap();
    let second = run_plan(&plan(SMALL, b.path())).unwrap();
    assert!(!first.failed());
    assert_eq!(first.metrics_files.len(), 2 * 5 * 2);
    for (x, y) in first.metrics_files.iter().zip(&second.metrics_files) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
    assert_eq!(first.summary, second.summary);
}

#[test]
fn metrics_reconcile_with_ledgers() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_plan(&plan(SMALL, dir.path())).unwrap();
    for path in &outcome.metrics_files {
        let rows = read_rows(path);
        assert!(!rows.is_empty());
        let col = |r: &csv::StringRecord, i: usize| r[i].parse::<u64>().unwrap();
        for w in rows.windows(2) {
            for i in 7..=10 {
                assert!(col(&w[0], i) <= col(&w[1], i), "{} column {i} decreases", path.display());
            }
        }
        let last = rows.last().unwrap();
        let ledger_path = path.with_file_name(format!("{}_ledger.csv", path.file_stem().unwrap().to_str().unwrap()));
        let ledger = read_rows(&ledger_path);
        let sum = |dir: &str| ledger.iter().filter(|r| &r[2] == dir).map(|r| r[4].parse::<u64>().unwrap()).sum::<u64>();
        assert_eq!(col(last, 7), sum("up"), "{}", path.display());
        assert_eq!(col(last, 8), sum("down"), "{}", path.display());
    }
    let cell = outcome.summary.cell("ampere_a0.1").unwrap();
    assert_eq!(cell.seeds, vec![3, 4]);
    let rounds: Vec<f64> = [3, 4]
        .iter()
        .map(|s| read_rows(&dir.path().join(format!("ampere_a0.1_s{s}_ledger.csv"))).len() as f64)
        .collect();
    assert_eq!(cell.rounds_total, Some((rounds[0] + rounds[1]) / 2.0));
}

#[test]
fn phases_are_marked_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_plan(&plan(SMALL, dir.path())).unwrap();
    let path = outcome.metrics_files.iter().find(|p| p.ends_with("ampere_a1_s3.csv")).unwrap();
    let phases: Vec<String> = read_rows(path).iter().map(|r| r[4].to_string()).collect();
    let t = phases.iter().position(|p| p == "transfer").unwrap();
    assert!(phases[..t].iter().all(|p| p == "device"));
    assert!(phases[t + 1..].iter().all(|p| p == "server"));
    assert_eq!(phases.iter().filter(|p| *p == "transfer").count(), 1);
    let fl = outcome.metrics_files.iter().find(|p| p.ends_with("fl_a1_s3.csv")).unwrap();
    assert!(read_rows(fl).iter().all(|r| &r[4] == "joint"));
}

#[test]
fn empty_plan_writes_an_empty_summary() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_plan(&plan("protocols = []\n", dir.path())).unwrap();
    assert!(outcome.summary.cells.is_empty());
    assert!(!outcome.failed());
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&outcome.summary_file).unwrap()).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), 0);
}

#[test]
fn summary_json_has_the_documented_keys() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_plan(&plan(
        "protocols = [\"fl\"]\nseeds = [0]\ndataset.samples = 200\ntrain.device_epochs = 2\n",
        dir.path(),
    ))
    .unwrap();
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&outcome.summary_file).unwrap()).unwrap();
    let cell = &json["cells"][0];
    for key in [
        "cell",
        "protocol",
        "alpha",
        "seeds",
        "acc_mean",
        "acc_std",
        "bytes_total",
        "rounds_total",
        "device_flops",
        "server_flops",
        "sim_time_s",
    ] {
        assert!(cell.get(key).is_some(), "missing {key}");
    }
    assert!(json["acc_std_across_alpha"]["fl"].is_number());
}

#[test]
fn failing_runs_are_recorded_and_the_plan_continues() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("data.bin");
    let ds = make_synthetic(120, 3, SyntheticKind::Spirals { turns: 1.0, noise: 0.05 }, 0).unwrap();
    dataset_io::save(&ds, &data_path).unwrap();
    let text = format!(
        "protocols = [\"fl\", \"sfl\"]\nseeds = [0, 1]\n[dataset]\nkind = \"file\"\npath = {:?}\n[train]\ndevices = 2\nsplit = 2\ndevice_epochs = 2\n",
        data_path.display().to_string()
    );
    let p = plan(&text, &dir.path().join("out"));
    fs::remove_file(&data_path).unwrap();
    let outcome = run_plan(&p).unwrap();
    assert_eq!(outcome.summary.failures.len(), 4);
    assert_eq!(outcome.summary.cells.len(), 2);
    assert!(outcome.summary.cells.iter().all(|c| c.acc_mean.is_none()));
    assert!(outcome.summary_file.exists());
}

#[test]
fn file_datasets_feed_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("data.bin");
    let ds = make_synthetic(200, 3, SyntheticKind::Spirals { turns: 1.0, noise: 0.05 }, 0).unwrap();
    dataset_io::save(&ds, &data_path).unwrap();
    let text = "protocols = [\"ampere\"]\nseeds = [0]\n[dataset]\nkind = \"file\"\npath = \"data.bin\"\n[train]\ndevices = 2\nsplit = 2\ndevice_epochs = 2\nserver_epochs = 2\n";
    let mut p = parse_config(text, "plan.toml", dir.path()).unwrap();
    p.out_dir = dir.path().join("out");
    assert_eq!(p.model.input_shape, vec![2]);
    assert_eq!(p.model.classes, 3);
    let outcome = run_plan(&p).unwrap();
    assert!(!outcome.failed(), "{:?}", outcome.summary.failures);
}
