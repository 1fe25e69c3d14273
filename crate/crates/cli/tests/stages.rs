use std::path::{Path, PathBuf};
use std::process::Command;

use tripcohort::cohort_data::{load_cohort, load_schema};
use tripcohort::numerics::{lr_at_epoch, LrSchedule};
use tripcohort::trainer::EmbeddingModel;
use tripcohort::Error;
use tripcohort_cli::manifest::{RunManifest, MANIFEST_FILE};
use tripcohort_cli::{exit_code, run_stage, RunConfig, RunLayout};

fn small(out: &Path, extra: &str) -> RunConfig {
    let text = format!(
        "[run]\nseed = 5\n[paths]\nout_dir = {}\n[generator]\nparticipants = 600\n\
         [prep]\ntriplets = 1500\nval_triplets = 150\n[train]\nepochs = 3\nhidden = 32, 16\n\
         [predict]\ngbt_rounds = 30\n{extra}",
        out.display()
    );
    RunConfig::parse(&text).unwrap()
}

fn csv_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

fn manifest(dir: &Path) -> RunManifest {
    RunManifest::load_or_default(dir).unwrap()
}

#[test]
fn gen_writes_requested_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::parse(&format!("[paths]\nout_dir = {}\n", dir.path().display())).unwrap();
    run_stage("gen", &cfg).unwrap();
    let lay = RunLayout::new(dir.path());
    assert_eq!(csv_rows(&lay.gen_cohort()), cfg.generator.participants);
    assert_eq!(csv_rows(&lay.gen_truth()), cfg.generator.participants);
    let followups = csv_rows(&lay.gen_followup());
    let expected = cfg.generator.followup_fraction * cfg.generator.participants as f64;
    assert!((followups as f64 - expected).abs() <= 1.0, "{followups} vs {expected}");
    let m = manifest(dir.path());
    assert!(m.outputs.contains_key("gen/cohort.csv"));
    m.verify(dir.path()).unwrap();
}

#[test]
fn gen_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_stage("gen", &small(a.path(), "")).unwrap();
    run_stage("gen", &small(b.path(), "")).unwrap();
    assert_eq!(manifest(a.path()).outputs, manifest(b.path()).outputs);
}

#[test]
fn zero_missingness_has_no_empty_cells() {
    let dir = tempfile::tempdir().unwrap();
    run_stage("gen", &small(dir.path(), "[generator]\nmissingness = 0\n")).unwrap();
    let text = std::fs::read_to_string(RunLayout::new(dir.path()).gen_cohort()).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let elapsed = header.iter().position(|h| *h == "elapsed_years").unwrap();
    for line in text.lines().skip(1) {
        for (j, cell) in line.split(',').enumerate() {
            assert!(j == elapsed || !cell.is_empty(), "empty `{}` in {line}", header[j]);
        }
    }
}

fn split_counts(lay: &RunLayout, sex: &str) -> (usize, usize, usize) {
    let text = std::fs::read_to_string(lay.split()).unwrap();
    let mut c = (0, 0, 0);
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[1] != sex {
            continue;
        }
        match f[2] {
            "train" => c.0 += 1,
            "val" => c.1 += 1,
            "test" => c.2 += 1,
            other => panic!("split label {other}"),
        }
    }
    c
}

#[test]
fn prep_splits_and_triplets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "");
    run_stage("gen", &cfg).unwrap();
    run_stage("prep", &cfg).unwrap();
    let lay = RunLayout::new(dir.path());
    for sex in ["F", "M"] {
        let (tr, va, te) = split_counts(&lay, sex);
        let n = (tr + va + te) as f64;
        assert!((tr as f64 - 0.7 * n).abs() <= 1.0, "{sex}: train {tr} of {n}");
        assert!((va as f64 - 0.1 * n).abs() <= 1.0, "{sex}: val {va} of {n}");
        assert!((te as f64 - 0.2 * n).abs() <= 1.0, "{sex}: test {te} of {n}");
    }
    for part in ["female", "male"] {
        let lines = std::fs::read_to_string(lay.triplets(part)).unwrap().lines().count();
        assert_eq!(lines, cfg.prep.triplets);
    }
    let schema = load_schema(&lay.schema()).unwrap();
    let baseline = load_cohort(&lay.baseline(), &schema).unwrap();
    let processed: usize = ["female", "male"]
        .iter()
        .map(|p| csv_rows(&lay.file(&format!("prep/processed_{p}.csv"))))
        .sum();
    assert_eq!(processed, baseline.len());

    let split_digest = manifest(dir.path()).outputs["prep/split.csv"].clone();
    run_stage("prep", &cfg).unwrap();
    assert_eq!(manifest(dir.path()).outputs["prep/split.csv"], split_digest);
}

#[test]
fn followup_participants_are_tested() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "");
    run_stage("gen", &cfg).unwrap();
    run_stage("prep", &cfg).unwrap();
    let lay = RunLayout::new(dir.path());
    let schema = load_schema(&lay.schema()).unwrap();
    let followup = load_cohort(&lay.followup(), &schema).unwrap();
    assert!(!followup.is_empty());
    let split = std::fs::read_to_string(lay.split()).unwrap();
    for id in &followup.ids {
        let line = split.lines().find(|l| l.starts_with(&format!("{id},"))).unwrap();
        assert!(line.ends_with(",test"), "{line}");
    }
}

#[test]
fn downstream_stages_emit_expected_shapes() {
    let dir = tempfile::tempdir().unwrap();
    // Enough follow-up participants for every prediction task to run.
    let cfg = small(dir.path(), "[generator]\nparticipants = 1500\n");
    run_stage("pipeline", &cfg).unwrap();
    let lay = RunLayout::new(dir.path());

    for part in ["female", "male"] {
        let model = EmbeddingModel::load(&lay.model(part)).unwrap();
        let text = std::fs::read_to_string(lay.model(part)).unwrap();
        assert_eq!(model.to_checkpoint(), text);
        assert_eq!(csv_rows(&lay.train_log(part)), cfg.train.epochs);
    }
    assert_eq!(csv_rows(&lay.embeddings()), csv_rows(&lay.baseline()));
    let header = std::fs::read_to_string(lay.embeddings()).unwrap();
    assert_eq!(header.lines().next().unwrap().split(',').count(), 1 + cfg.train.output_dim);

    assert_eq!(csv_rows(&lay.evals()), 3 * 2 * 2);

    let results = std::fs::read_to_string(lay.predict_results()).unwrap();
    let mut per_marker = std::collections::BTreeMap::<String, usize>::new();
    for line in results.lines().skip(1) {
        *per_marker.entry(line.split(',').next().unwrap().to_string()).or_default() += 1;
    }
    assert!(!per_marker.is_empty());
    for (marker, n) in per_marker {
        assert_eq!(n, 4 * 5, "{marker}");
    }
    assert!(csv_rows(&lay.stats_report()) > 0);

    let m = manifest(dir.path());
    m.verify(dir.path()).unwrap();
    let on_disk = walk(dir.path());
    assert_eq!(on_disk, m.outputs.keys().cloned().collect::<Vec<_>>());
    for stage in ["gen", "prep", "train", "embed", "stats", "eval", "predict"] {
        assert!(m.stage_seconds.contains_key(stage), "{stage}");
    }
}

fn walk(root: &Path) -> Vec<String> {
    fn go(dir: &Path, root: &Path, out: &mut Vec<String>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p: PathBuf = e.unwrap().path();
            if p.is_dir() {
                go(&p, root, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().to_string();
                if rel != MANIFEST_FILE {
                    out.push(rel);
                }
            }
        }
    }
    let mut out = Vec::new();
    go(root, root, &mut out);
    out.sort();
    out
}

#[test]
fn train_log_follows_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(
        dir.path(),
        "[generator]\nparticipants = 200\n[prep]\ntriplets = 64\nval_triplets = 0\n\
         [train]\nepochs = 601\nhidden = 8, 8\noutput_dim = 4\nbatch_size = 64\n",
    );
    run_stage("gen", &cfg).unwrap();
    run_stage("prep", &cfg).unwrap();
    run_stage("train", &cfg).unwrap();
    let log = std::fs::read_to_string(RunLayout::new(dir.path()).train_log("female")).unwrap();
    let lr: Vec<f64> = log
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(lr.len(), 601);
    // 0.001 before the first decay, two decays by epoch 600.
    assert!((lr[499] - 1e-3).abs() < 1e-15);
    assert!((lr[500] - 1e-3).abs() < 1e-15);
    assert!((lr[600] - 9.025e-4).abs() < 1e-15);
    assert_eq!(lr[600], lr_at_epoch(&LrSchedule::default(), 600));
}

#[test]
fn missing_upstream_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "");
    for stage in ["prep", "train", "embed", "eval", "predict", "stats"] {
        let err = run_stage(stage, &cfg).unwrap_err();
        assert!(matches!(err, Error::State(_)), "{stage}: {err}");
        assert!(err.to_string().contains(".csv"), "{stage}: {err}");
        assert_eq!(exit_code(&err), 3);
    }
}

fn tc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tc"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "[train]\nnot_a_key = 1\n").unwrap();
    assert_eq!(tc(&["-c", conf.to_str().unwrap(), "gen"]).status.code(), Some(2));
    std::fs::write(&conf, "[prep]\ntrain_fraction = 0.9\n").unwrap();
    assert_eq!(tc(&["-c", conf.to_str().unwrap(), "gen"]).status.code(), Some(2));
    std::fs::write(&conf, "[paths]\ncohort = /nonexistent/cohort.csv\n").unwrap();
    assert_eq!(tc(&["-c", conf.to_str().unwrap(), "prep"]).status.code(), Some(2));
    let missing = dir.path().join("absent.conf");
    assert_eq!(tc(&["-c", missing.to_str().unwrap(), "gen"]).status.code(), Some(2));
}

#[test]
fn binary_runs_a_stage_and_prints_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_s = out.to_str().unwrap();
    let status = tc(&["--out", out_s, "--seed", "9", "gen"]).status;
    assert_eq!(status.code(), Some(0));
    assert!(out.join("gen/cohort.csv").exists());
    let printed = tc(&["--seed", "9", "--loss", "swap", "config"]);
    let text = String::from_utf8(printed.stdout).unwrap();
    let cfg = RunConfig::parse(&text).unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.train.loss.as_str(), "swap");
    let missing = tc(&["--out", dir.path().join("empty").to_str().unwrap(), "train"]);
    assert_eq!(missing.status.code(), Some(3));
}
