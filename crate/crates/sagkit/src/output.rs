//! Trajectory and summary files.
//!
//! Layout of an output directory:
//!
//! ```text
//! trajectories/<label>_seed<seed>.csv   one per run
//! summary.csv                            one row per run
//! summary.json                           resolved config, summary rows, wall-clock
//! ```
//!
//! A trajectory file starts with one comment line
//! `# config_hash=<h> method=<label> seed=<s> status=<status> window=<w> tol=<t>`
//! followed by the header `k,loss,dist_to_opt,lr`. `dist_to_opt` is empty
//! when the minimizer is unknown. Wall-clock times only go to the JSON
//! file, so trajectory files are byte-identical across reruns.
//!
//! `summary.csv` has the columns
//! `optimizer,seed,stabilization_iteration,final_error,status,config_hash`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sagkit_core::metrics::stabilization_iteration;

use crate::config::ResolvedConfig;
use crate::error::{io_err, HarnessError, Result};
use crate::runner::{Row, RunRecord, RunStatus};

pub const TRAJECTORY_HEADER: &str = "k,loss,dist_to_opt,lr";
pub const SUMMARY_HEADER: &str = "optimizer,seed,stabilization_iteration,final_error,status,config_hash";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

/// Stabilization outcome of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stabilization {
    At(u64),
    Never,
    /// Too few recorded points for the window, or a diverged run.
    NotApplicable,
}

impl Stabilization {
    pub fn of(rows: &[Row], status: RunStatus, window: usize, tol: f64) -> Self {
        if status != RunStatus::Completed {
            return Stabilization::NotApplicable;
        }
        let ks: Vec<u64> = rows.iter().map(|r| r.k).collect();
        let losses: Vec<f64> = rows.iter().map(|r| r.loss).collect();
        match stabilization_iteration(&ks, &losses, window, tol) {
            Ok(Some(k)) => Stabilization::At(k),
            Ok(None) => Stabilization::Never,
            Err(_) => Stabilization::NotApplicable,
        }
    }

    pub fn iteration(&self) -> Option<u64> {
        match self {
            Stabilization::At(k) => Some(*k),
            _ => None,
        }
    }

    fn cell(&self) -> String {
        match self {
            Stabilization::At(k) => k.to_string(),
            Stabilization::Never => "never".into(),
            Stabilization::NotApplicable => "n/a".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub optimizer: String,
    pub seed: u64,
    pub stabilization_iteration: Stabilization,
    /// Last recorded `dist_to_opt`, or the last loss when the minimizer is
    /// unknown.
    pub final_error: Option<f64>,
    pub status: RunStatus,
    pub config_hash: String,
}

impl SummaryRow {
    pub fn from_rows(
        optimizer: &str,
        seed: u64,
        rows: &[Row],
        status: RunStatus,
        config_hash: &str,
        window: usize,
        tol: f64,
    ) -> Self {
        let final_error = match status {
            RunStatus::Completed => rows.last().map(|r| r.dist_to_opt.unwrap_or(r.loss)),
            RunStatus::Diverged { .. } => None,
        };
        Self {
            optimizer: optimizer.to_string(),
            seed,
            stabilization_iteration: Stabilization::of(rows, status, window, tol),
            final_error,
            status,
            config_hash: config_hash.to_string(),
        }
    }

    pub fn of(record: &RunRecord, window: usize, tol: f64) -> Self {
        Self::from_rows(&record.label, record.seed, &record.rows, record.status, &record.config_hash, window, tol)
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonSummary {
    pub config_hash: String,
    pub config: Option<ResolvedConfig>,
    pub runs: Vec<SummaryRow>,
    /// Seconds per run, in the order of `runs`.
    pub wall_clock: Vec<f64>,
    pub notices: Vec<String>,
}

fn float(v: f64) -> String {
    format!("{v:?}")
}

pub fn trajectory_file_name(label: &str, seed: u64) -> String {
    format!("{label}_seed{seed}.csv")
}

/// The trajectory CSV of one run.
pub fn trajectory_csv(record: &RunRecord, window: usize, tol: f64) -> String {
    let mut s = format!(
        "# config_hash={} method={} seed={} status={} window={} tol={}\n{TRAJECTORY_HEADER}\n",
        record.config_hash,
        record.label,
        record.seed,
        record.status.label(),
        window,
        float(tol)
    );
    for r in &record.rows {
        let dist = r.dist_to_opt.map(float).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{}", r.k, float(r.loss), dist, float(r.lr));
    }
    s
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        let fe = r.final_error.map(float).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.optimizer,
            r.seed,
            r.stabilization_iteration.cell(),
            fe,
            r.status.label(),
            r.config_hash
        );
    }
    s
}

/// Writes through a temporary file and a rename.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Paths written by [`emit_outputs`].
#[derive(Debug, Clone, Default)]
pub struct Written {
    pub trajectories: Vec<PathBuf>,
    pub summary_csv: Option<PathBuf>,
    pub summary_json: Option<PathBuf>,
}

/// Writes trajectories and summaries of `records` under `dir`.
pub fn emit_outputs(
    dir: &Path,
    config: Option<&ResolvedConfig>,
    records: &[RunRecord],
    format: Format,
) -> Result<Written> {
    let (window, tol) = config.map_or((sagkit_core::metrics::DEFAULT_WINDOW, sagkit_core::metrics::DEFAULT_TOL), |c| {
        (c.window, c.tol)
    });
    let traj_dir = dir.join("trajectories");
    fs::create_dir_all(&traj_dir).map_err(io_err(&traj_dir))?;
    let mut written = Written::default();
    for r in records {
        let path = traj_dir.join(trajectory_file_name(&r.label, r.seed));
        write_atomic(&path, &trajectory_csv(r, window, tol))?;
        written.trajectories.push(path);
    }
    let summary: Vec<SummaryRow> = records.iter().map(|r| SummaryRow::of(r, window, tol)).collect();
    if matches!(format, Format::Csv | Format::Both) {
        let path = dir.join("summary.csv");
        write_atomic(&path, &summary_csv(&summary))?;
        written.summary_csv = Some(path);
    }
    if matches!(format, Format::Json | Format::Both) {
        let json = JsonSummary {
            config_hash: config.map(ResolvedConfig::hash).unwrap_or_default(),
            config: config.cloned(),
            runs: summary,
            wall_clock: records.iter().map(|r| r.rows.last().map_or(0.0, |row| row.wall_clock)).collect(),
            notices: records
                .iter()
                .flat_map(|r| r.notices.iter().map(move |n| format!("{} seed {}: {n}", r.label, r.seed)))
                .collect(),
        };
        let path = dir.join("summary.json");
        write_atomic(&path, &serde_json::to_string_pretty(&json)?)?;
        written.summary_json = Some(path);
    }
    Ok(written)
}

/// A trajectory file read back.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config_hash: String,
    pub label: String,
    pub seed: u64,
    pub status: RunStatus,
    pub window: usize,
    pub tol: f64,
    pub rows: Vec<Row>,
}

pub fn parse_trajectory(text: &str) -> Result<Trajectory> {
    let mut lines = text.lines();
    let meta = lines
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| HarnessError::Parse { line: 1, message: "missing metadata comment".into() })?;
    let field = |key: &str| -> Result<&str> {
        meta.split(' ')
            .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
            .ok_or_else(|| HarnessError::Parse { line: 1, message: format!("missing `{key}`") })
    };
    let bad = |line: u64, what: &str| HarnessError::Parse { line, message: format!("bad {what}") };
    let config_hash = field("config_hash")?.to_string();
    let label = field("method")?.to_string();
    let seed = field("seed")?.parse().map_err(|_| bad(1, "seed"))?;
    let status = RunStatus::parse(field("status")?).ok_or_else(|| bad(1, "status"))?;
    let window = field("window")?.parse().map_err(|_| bad(1, "window"))?;
    let tol = field("tol")?.parse().map_err(|_| bad(1, "tol"))?;
    if lines.next() != Some(TRAJECTORY_HEADER) {
        return Err(bad(2, "header"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let ln = i as u64 + 3;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(bad(ln, "row"));
        }
        rows.push(Row {
            k: cells[0].parse().map_err(|_| bad(ln, "k"))?,
            loss: cells[1].parse().map_err(|_| bad(ln, "loss"))?,
            dist_to_opt: if cells[2].is_empty() {
                None
            } else {
                Some(cells[2].parse().map_err(|_| bad(ln, "dist_to_opt"))?)
            },
            lr: cells[3].parse().map_err(|_| bad(ln, "lr"))?,
            wall_clock: 0.0,
        });
    }
    Ok(Trajectory { config_hash, label, seed, status, window, tol, rows })
}

/// Rebuilds `summary.csv` from the trajectory files under `dir`, sorted by
/// file name.
pub fn report(dir: &Path) -> Result<Vec<SummaryRow>> {
    let traj_dir = dir.join("trajectories");
    let mut paths: Vec<PathBuf> = fs::read_dir(&traj_dir)
        .map_err(io_err(&traj_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    let mut rows = Vec::new();
    for path in paths {
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let t = parse_trajectory(&text)?;
        rows.push(SummaryRow::from_rows(&t.label, t.seed, &t.rows, t.status, &t.config_hash, t.window, t.tol));
    }
    write_atomic(&dir.join("summary.csv"), &summary_csv(&rows))?;
    Ok(rows)
}
