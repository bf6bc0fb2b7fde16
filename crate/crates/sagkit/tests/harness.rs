use std::fs;
use std::path::Path;
use std::process::Command;

use sagkit::output::{parse_trajectory, JsonSummary, Stabilization, SUMMARY_HEADER};
use sagkit::runner::sampler_seed;
use sagkit::{emit_outputs, report, run_experiment, ExperimentConfig, Format, RunStatus};
use sagkit_core::metrics::stabilization_iteration;
use sagkit_core::IndexSampler;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

const TWO_CENTERS: &str = r#"
name = "trace"
iterations = 6
record_every = 1
seeds = [3]
[problem]
kind = "scalar_quadratic"
centers = [1.0, 3.0]
x0 = { kind = "fixed", values = [0.0] }
[[methods]]
method = "sag"
alpha = 1.0
"#;

#[test]
fn sag_run_follows_the_hand_recurrence() {
    let (_, records) = run_experiment(&config(TWO_CENTERS)).unwrap();
    let r = &records[0];
    // Replay the same index stream on f_i(x) = (x − c_i)²/2.
    let centers = [1.0, 3.0];
    let mut sampler = IndexSampler::uniform(2, sampler_seed(3)).unwrap();
    let (mut x, mut y, mut d) = (0.0f64, [0.0f64; 2], 0.0f64);
    let mut expected = vec![x];
    for _ in 0..6 {
        let i = sampler.sample_index();
        let g = x - centers[i];
        d += g - y[i];
        y[i] = g;
        x -= d / 2.0;
        expected.push(x);
    }
    let got: Vec<f64> = r.rows.iter().map(|row| row.dist_to_opt.unwrap()).collect();
    let want: Vec<f64> = expected.iter().map(|x| (x - 2.0f64).abs()).collect();
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-15, "{got:?} vs {want:?}");
    }
    assert!((r.final_x[0] - x).abs() < 1e-15);
}

const GOLDEN_CONFIG: &str = r#"
name = "golden"
iterations = 3
record_every = 1
seeds = [1]
[problem]
kind = "scalar_quadratic"
centers = [2.0]
x0 = { kind = "fixed", values = [0.0] }
[[methods]]
method = "sgd"
alpha = 0.5
"#;

#[test]
fn golden_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, records) = run_experiment(&config(GOLDEN_CONFIG)).unwrap();
    emit_outputs(dir.path(), Some(&cfg), &records, Format::Both).unwrap();
    let text = fs::read_to_string(dir.path().join("trajectories/sgd_seed1.csv")).unwrap();
    let expected = format!(
        "# config_hash={} method=sgd seed=1 status=completed window=50 tol=1e-6\n\
         k,loss,dist_to_opt,lr\n\
         0,2.0,2.0,0.5\n\
         1,0.5,1.0,0.5\n\
         2,0.125,0.5,0.5\n\
         3,0.03125,0.25,0.5\n",
        cfg.hash()
    );
    assert_eq!(text, expected);
}

const GRID: &str = r#"
name = "grid"
iterations = 400
record_every = 5
seeds = [1, 2, 3]
[problem]
kind = "quadratic"
n = 8
p = 3
condition_ratio = 0.2
problem_seed = 4
[metrics]
window = 10
tol = 1e-4
[[methods]]
method = "sag"
[[methods]]
method = "adam"
[[methods]]
method = "sag_adam"
[[methods]]
method = "sgd"
label = "fg"
full_gradient = true
"#;

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir.join("trajectories"))
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files.push(("summary.csv".into(), fs::read(dir.join("summary.csv")).unwrap()));
    files
}

#[test]
fn reruns_are_byte_identical_and_the_grid_is_complete() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let (cfg, records) = run_experiment(&config(GRID)).unwrap();
        emit_outputs(dir.path(), Some(&cfg), &records, Format::Both).unwrap();
    }
    let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
    assert_eq!(ta.len(), 4 * 3 + 1);
    assert_eq!(ta, tb);
    for label in ["sag", "adam", "sag_adam", "fg"] {
        for seed in 1..=3 {
            assert!(a.path().join(format!("trajectories/{label}_seed{seed}.csv")).exists());
        }
    }
}

#[test]
fn summary_agrees_with_trajectories_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, records) = run_experiment(&config(GRID)).unwrap();
    emit_outputs(dir.path(), Some(&cfg), &records, Format::Both).unwrap();
    let before = fs::read_to_string(dir.path().join("summary.csv")).unwrap();

    let json: JsonSummary = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(json.config.as_ref(), Some(&cfg));
    assert_eq!(json.config_hash, cfg.hash());
    assert_eq!(json.runs.len(), records.len());
    let back: JsonSummary = serde_json::from_str(&serde_json::to_string(&json).unwrap()).unwrap();
    assert_eq!(back, json);

    for row in &json.runs {
        let text = fs::read_to_string(dir.path().join(format!("trajectories/{}_seed{}.csv", row.optimizer, row.seed))).unwrap();
        let t = parse_trajectory(&text).unwrap();
        let ks: Vec<u64> = t.rows.iter().map(|r| r.k).collect();
        let losses: Vec<f64> = t.rows.iter().map(|r| r.loss).collect();
        let stab = stabilization_iteration(&ks, &losses, 10, 1e-4).unwrap();
        assert_eq!(row.stabilization_iteration.iteration(), stab);
        assert_eq!(row.final_error, t.rows.last().unwrap().dist_to_opt);
    }

    let rows = report(dir.path()).unwrap();
    assert_eq!(rows.len(), records.len());
    let after = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut a: Vec<&str> = before.lines().collect();
    let mut b: Vec<&str> = after.lines().collect();
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[test]
fn no_records_gives_header_only_files() {
    let dir = tempfile::tempdir().unwrap();
    emit_outputs(dir.path(), None, &[], Format::Both).unwrap();
    assert_eq!(fs::read_to_string(dir.path().join("summary.csv")).unwrap(), format!("{SUMMARY_HEADER}\n"));
    assert!(report(dir.path()).unwrap().is_empty());
}

#[test]
fn divergence_is_reported_not_fatal() {
    let text = GOLDEN_CONFIG.replace("alpha = 0.5", "alpha = 5.0").replace("iterations = 3", "iterations = 200");
    let (cfg, records) = run_experiment(&config(&text)).unwrap();
    assert!(matches!(records[0].status, RunStatus::Diverged { .. }));
    let dir = tempfile::tempdir().unwrap();
    emit_outputs(dir.path(), Some(&cfg), &records, Format::Csv).unwrap();
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let line = summary.lines().nth(1).unwrap();
    assert!(line.starts_with("sgd,1,n/a,,diverged@"), "{line}");
}

#[test]
fn stabilization_cells() {
    let rows = report_rows_for("flat");
    assert!(matches!(rows, Stabilization::At(_)));
}

fn report_rows_for(name: &str) -> Stabilization {
    let text = GOLDEN_CONFIG.replace("golden", name).replace("iterations = 3", "iterations = 200");
    let (cfg, records) = run_experiment(&config(&text)).unwrap();
    sagkit::SummaryRow::of(&records[0], cfg.window, cfg.tol).stabilization_iteration
}

fn sagkit_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sagkit"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dir.path().join("ok.toml");
    fs::write(&ok, GOLDEN_CONFIG).unwrap();
    let status = sagkit_bin().arg("run").arg(&ok).arg("--out").arg(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("golden/trajectories/sgd_seed1.csv").exists());
    assert!(dir.path().join("golden/summary.json").exists());

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, GOLDEN_CONFIG.replace("alpha = 0.5", "alpha = 0.5\nbogus = 1")).unwrap();
    let out = sagkit_bin().arg("run").arg(&bad).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let diverging = dir.path().join("div.toml");
    fs::write(&diverging, GOLDEN_CONFIG.replace("alpha = 0.5", "alpha = 5.0").replace("iterations = 3", "iterations = 200"))
        .unwrap();
    let status = sagkit_bin().arg("run").arg(&diverging).arg("--out").arg(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(2));

    let status = sagkit_bin().args(["report"]).arg(dir.path().join("golden")).status().unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn csv_only_and_json_only_formats() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, records) = run_experiment(&config(GOLDEN_CONFIG)).unwrap();
    let w = emit_outputs(&dir.path().join("c"), Some(&cfg), &records, Format::Csv).unwrap();
    assert!(w.summary_csv.is_some() && w.summary_json.is_none());
    let w = emit_outputs(&dir.path().join("j"), Some(&cfg), &records, Format::Json).unwrap();
    assert!(w.summary_csv.is_none() && w.summary_json.is_some());
}
