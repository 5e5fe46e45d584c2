//! The `run` and `analyze` commands: execute a simulation into an output
//! directory with a manifest, and distill snapshot directories into metric
//! tables.

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use invnet_core::analysis::{
    network_metrics, powerlaw_tail_slope, BipartiteGraph, NetworkMetrics, TailFit,
};
use invnet_core::runner::{run_with, SimConfig, Snapshot};

use crate::config::{parse_config, ConfigError};
use crate::digest::HashingWriter;
use crate::formats::{
    metrics_row, read_budgets, read_edges, tailfit_row, write_budgets, write_edges, write_event,
    write_events_header, METRICS_HEADER, TAILFIT_HEADER,
};
use crate::manifest::{unix_now, write_manifest, FileRecord, RunManifest};

/// Fraction of the rank-size sequence used for tail fits.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.1;

#[derive(Debug)]
pub enum CmdError {
    Config(ConfigError),
    InvalidConfig(String),
    Io { context: String, source: io::Error },
    NoSnapshots { dir: String },
    SnapshotFailures { failed: usize },
    SweepSpec(String),
    SweepFailures { failed: usize },
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Config(e) => write!(f, "config: {e}"),
            CmdError::InvalidConfig(msg) => write!(f, "config: {msg}"),
            CmdError::Io { context, source } => write!(f, "{context}: {source}"),
            CmdError::NoSnapshots { dir } => write!(f, "no edge-list snapshots found in {dir}"),
            CmdError::SnapshotFailures { failed } => {
                write!(f, "{failed} snapshot(s) could not be analyzed")
            }
            CmdError::SweepSpec(msg) => write!(f, "sweep spec: {msg}"),
            CmdError::SweepFailures { failed } => write!(f, "{failed} sweep run(s) failed"),
        }
    }
}

impl std::error::Error for CmdError {}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e)
    }
}

pub(crate) fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CmdError {
    let context = context.into();
    move |source| CmdError::Io { context, source }
}

/// Final-step facts a caller may want without re-reading the output files.
#[derive(Debug)]
pub struct RunArtifacts {
    pub config: SimConfig,
    pub final_step: u64,
    pub final_metrics: NetworkMetrics,
    pub final_tailfit: Option<TailFit>,
}

/// `run --config <path> --out <dir> [--seed <u64>]`
pub fn cmd_run(
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<RunArtifacts, CmdError> {
    let mut config = parse_config(config_path)?;
    if let Some(seed) = seed_override {
        config.rng_seed = seed;
    }
    run_to_dir(&config, out_dir)
}

/// Execute a validated config into `out_dir`: events.csv, one
/// budgets/edges pair per snapshot, and manifest.txt with content digests.
pub fn run_to_dir(config: &SimConfig, out_dir: &Path) -> Result<RunArtifacts, CmdError> {
    config
        .validate()
        .map_err(|e| CmdError::InvalidConfig(e.to_string()))?;
    fs::create_dir_all(out_dir).map_err(io_err(format!("create {}", out_dir.display())))?;
    let started_unix = unix_now();

    let events_path = out_dir.join("events.csv");
    let events_file =
        File::create(&events_path).map_err(io_err(format!("create {}", events_path.display())))?;
    let mut events = HashingWriter::new(BufWriter::new(events_file));
    write_events_header(&mut events).map_err(io_err("write events.csv"))?;

    let mut files: Vec<FileRecord> = Vec::new();
    let mut last_snapshot: Option<Snapshot> = None;

    run_with::<CmdError>(
        config,
        |event| write_event(&mut events, event).map_err(io_err("write events.csv")),
        |snapshot| {
            files.extend(write_snapshot_files(out_dir, snapshot)?);
            last_snapshot = Some(snapshot.clone());
            Ok(())
        },
    )
    .map_err(|e| match e {
        invnet_core::runner::RunError::Config(c) => CmdError::InvalidConfig(c.to_string()),
        invnet_core::runner::RunError::Sink(s) => s,
    })?;

    events.flush().map_err(io_err("flush events.csv"))?;
    files.insert(
        0,
        FileRecord { name: "events.csv".into(), bytes: events.byte_count(), fnv64: events.digest() },
    );

    let manifest = RunManifest {
        config: config.clone(),
        started_unix,
        finished_unix: unix_now(),
        files,
    };
    let manifest_path = out_dir.join("manifest.txt");
    let mut manifest_file = BufWriter::new(
        File::create(&manifest_path)
            .map_err(io_err(format!("create {}", manifest_path.display())))?,
    );
    write_manifest(&mut manifest_file, &manifest).map_err(io_err("write manifest.txt"))?;
    manifest_file.flush().map_err(io_err("flush manifest.txt"))?;

    let snapshot = last_snapshot.expect("run_with always emits a final snapshot");
    let (final_metrics, final_tailfit) = snapshot_statistics(&snapshot);
    Ok(RunArtifacts {
        config: config.clone(),
        final_step: snapshot.step,
        final_metrics,
        final_tailfit,
    })
}

fn snapshot_statistics(snapshot: &Snapshot) -> (NetworkMetrics, Option<TailFit>) {
    let edges: Vec<(usize, usize)> = snapshot.edges.iter().map(|&(k, j, _)| (k, j)).collect();
    let graph = BipartiteGraph::from_edges(
        snapshot.investor_budgets.len(),
        snapshot.initiator_budgets.len(),
        edges,
    )
    .expect("snapshot edges are in range");
    let mut budgets = snapshot.investor_budgets.clone();
    budgets.extend_from_slice(&snapshot.initiator_budgets);
    let fit = powerlaw_tail_slope(&budgets, DEFAULT_TAIL_FRACTION).ok();
    (network_metrics(&graph), fit)
}

/// Write one snapshot's budgets and edges, staging through a temp name so an
/// interrupted run cannot leave a torn snapshot behind.
fn write_snapshot_files(out_dir: &Path, snapshot: &Snapshot) -> Result<Vec<FileRecord>, CmdError> {
    let budgets = stage_file(out_dir, &format!("budgets_{}.csv", snapshot.step), |out| {
        write_budgets(out, snapshot)
    })?;
    let edges = stage_file(out_dir, &format!("edges_{}.txt", snapshot.step), |out| {
        write_edges(out, snapshot)
    })?;
    Ok(vec![budgets, edges])
}

fn stage_file(
    out_dir: &Path,
    name: &str,
    write_contents: impl FnOnce(&mut HashingWriter<BufWriter<File>>) -> io::Result<()>,
) -> Result<FileRecord, CmdError> {
    let final_path = out_dir.join(name);
    let tmp_path = out_dir.join(format!("{name}.tmp"));
    let file =
        File::create(&tmp_path).map_err(io_err(format!("create {}", tmp_path.display())))?;
    let mut out = HashingWriter::new(BufWriter::new(file));
    write_contents(&mut out).map_err(io_err(format!("write {name}")))?;
    out.flush().map_err(io_err(format!("flush {name}")))?;
    let record = FileRecord { name: name.to_string(), bytes: out.byte_count(), fnv64: out.digest() };
    drop(out);
    fs::rename(&tmp_path, &final_path)
        .map_err(io_err(format!("rename {}", final_path.display())))?;
    Ok(record)
}

/// `analyze --in <dir> --out <file>`
///
/// Reads every `edges_<step>.txt` / `budgets_<step>.csv` pair under the input
/// directory, writes one metrics row per snapshot to the output file and the
/// budget tail fits to `tailfit.csv` next to it. Corrupt snapshots are
/// reported and skipped; the command fails at the end if any were.
pub fn cmd_analyze(in_dir: &Path, out_path: &Path) -> Result<(), CmdError> {
    let mut steps: Vec<u64> = Vec::new();
    let entries =
        fs::read_dir(in_dir).map_err(io_err(format!("read dir {}", in_dir.display())))?;
    for entry in entries {
        let entry = entry.map_err(io_err(format!("read dir {}", in_dir.display())))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(step) = name
            .strip_prefix("edges_")
            .and_then(|rest| rest.strip_suffix(".txt"))
            .and_then(|digits| digits.parse::<u64>().ok())
        {
            steps.push(step);
        }
    }
    if steps.is_empty() {
        return Err(CmdError::NoSnapshots { dir: in_dir.display().to_string() });
    }
    steps.sort_unstable();

    if let Some(parent) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(format!("create {}", parent.display())))?;
    }
    let tailfit_path = out_path
        .parent()
        .map(|p| p.join("tailfit.csv"))
        .unwrap_or_else(|| PathBuf::from("tailfit.csv"));

    let mut metrics_out = BufWriter::new(
        File::create(out_path).map_err(io_err(format!("create {}", out_path.display())))?,
    );
    let mut tailfit_out = BufWriter::new(
        File::create(&tailfit_path)
            .map_err(io_err(format!("create {}", tailfit_path.display())))?,
    );
    writeln!(metrics_out, "{METRICS_HEADER}").map_err(io_err("write metrics"))?;
    writeln!(tailfit_out, "{TAILFIT_HEADER}").map_err(io_err("write tailfit"))?;

    let mut failed = 0usize;
    for step in steps {
        let edges_path = in_dir.join(format!("edges_{step}.txt"));
        let metrics = match analyze_edges_file(&edges_path) {
            Ok(metrics) => metrics,
            Err(e) => {
                eprintln!("analyze: {}: {e}", edges_path.display());
                failed += 1;
                continue;
            }
        };
        writeln!(metrics_out, "{}", metrics_row(step, &metrics)).map_err(io_err("write metrics"))?;

        let budgets_path = in_dir.join(format!("budgets_{step}.csv"));
        match read_budgets_file(&budgets_path) {
            Ok(budgets) => {
                let fit = powerlaw_tail_slope(&budgets, DEFAULT_TAIL_FRACTION).ok();
                if fit.is_none() {
                    eprintln!(
                        "analyze: {}: tail fit undefined for this snapshot",
                        budgets_path.display()
                    );
                }
                writeln!(tailfit_out, "{}", tailfit_row(step, fit.as_ref()))
                    .map_err(io_err("write tailfit"))?;
            }
            Err(e) => {
                eprintln!("analyze: {}: {e}", budgets_path.display());
                failed += 1;
            }
        }
    }

    metrics_out.flush().map_err(io_err("flush metrics"))?;
    tailfit_out.flush().map_err(io_err("flush tailfit"))?;
    if failed > 0 {
        return Err(CmdError::SnapshotFailures { failed });
    }
    Ok(())
}

/// Metrics for one edge-list file; everything needed is in the file itself.
pub fn analyze_edges_file(path: &Path) -> Result<NetworkMetrics, CmdError> {
    let file = File::open(path).map_err(io_err(format!("open {}", path.display())))?;
    let parsed = read_edges(BufReader::new(file))
        .map_err(io_err(format!("parse {}", path.display())))?;
    let edges: Vec<(usize, usize)> = parsed.edges.iter().map(|&(k, j, _)| (k, j)).collect();
    let graph = BipartiteGraph::from_edges(parsed.investor_count, parsed.initiator_count, edges)
        .map_err(|e| CmdError::Io {
            context: format!("validate {}", path.display()),
            source: io::Error::new(io::ErrorKind::InvalidData, e.to_string()),
        })?;
    Ok(network_metrics(&graph))
}

fn read_budgets_file(path: &Path) -> Result<Vec<f64>, CmdError> {
    let file = File::open(path).map_err(io_err(format!("open {}", path.display())))?;
    let parsed = read_budgets(BufReader::new(file))
        .map_err(io_err(format!("parse {}", path.display())))?;
    Ok(parsed.all_budgets())
}
