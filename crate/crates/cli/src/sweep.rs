//! The `sweep` command: run a cartesian (axis value x seed) grid of configs,
//! one output directory each, then aggregate final-step metrics per point.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use invnet_core::runner::SimConfig;

use crate::commands::{io_err, run_to_dir, CmdError, RunArtifacts};
use crate::config::parse_config_str;
use crate::formats::fmt_real;

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    InvestProportion,
    Initiators,
    Investors,
    Seed,
}

impl SweepAxis {
    fn parse(token: &str) -> Option<Self> {
        match token {
            "q" => Some(SweepAxis::InvestProportion),
            "J" => Some(SweepAxis::Initiators),
            "N" => Some(SweepAxis::Investors),
            "seed" => Some(SweepAxis::Seed),
            _ => None,
        }
    }

    fn label(self) -> &'static str {
        match self {
            SweepAxis::InvestProportion => "q",
            SweepAxis::Initiators => "J",
            SweepAxis::Investors => "N",
            SweepAxis::Seed => "seed",
        }
    }
}

/// Parsed sweep specification: a base config plus the axis grid.
#[derive(Debug)]
pub struct SweepSpec {
    pub base: SimConfig,
    pub axis: SweepAxis,
    pub values: Vec<String>,
    pub seeds_per_point: u64,
}

/// Sweep spec files reuse the config syntax; `axis`, `values`, and
/// `seeds_per_point` are the sweep-level keys, everything else is the base
/// config.
pub fn parse_sweep_spec(text: &str) -> Result<SweepSpec, CmdError> {
    let mut axis = None;
    let mut values: Vec<String> = Vec::new();
    let mut seeds_per_point = 1u64;
    let mut config_lines: Vec<&str> = Vec::new();

    for (index, raw_line) in text.lines().enumerate() {
        let line_no = index + 1;
        let stripped = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let trimmed = stripped.trim();
        let key = trimmed.split_once('=').map(|(k, _)| k.trim());
        match key {
            Some("axis") => {
                let token = trimmed.split_once('=').unwrap().1.trim();
                axis = Some(SweepAxis::parse(token).ok_or_else(|| {
                    CmdError::SweepSpec(format!(
                        "line {line_no}: axis must be one of q, J, N, seed; got `{token}`"
                    ))
                })?);
                config_lines.push("");
            }
            Some("values") => {
                let list = trimmed.split_once('=').unwrap().1;
                values = list
                    .split(',')
                    .map(|v| v.trim().to_string())
                    .filter(|v| !v.is_empty())
                    .collect();
                config_lines.push("");
            }
            Some("seeds_per_point") => {
                let token = trimmed.split_once('=').unwrap().1.trim();
                seeds_per_point = token.parse().map_err(|_| {
                    CmdError::SweepSpec(format!(
                        "line {line_no}: seeds_per_point must be a positive integer, got `{token}`"
                    ))
                })?;
                if seeds_per_point < 1 {
                    return Err(CmdError::SweepSpec(format!(
                        "line {line_no}: seeds_per_point must be at least 1"
                    )));
                }
                config_lines.push("");
            }
            _ => config_lines.push(raw_line),
        }
    }

    let axis = axis.ok_or_else(|| CmdError::SweepSpec("missing `axis`".into()))?;
    if values.is_empty() {
        return Err(CmdError::SweepSpec("missing or empty `values`".into()));
    }
    let base = parse_config_str(&config_lines.join("\n"))?;
    let spec = SweepSpec { base, axis, values, seeds_per_point };
    // Every derived config must be valid before any run starts.
    plan_runs(&spec, Path::new(""))?;
    Ok(spec)
}

/// One run of the grid: the config, where it goes, and its summary key.
#[derive(Debug)]
struct PlannedRun {
    point_index: usize,
    config: SimConfig,
    dir: PathBuf,
}

fn plan_runs(spec: &SweepSpec, out_dir: &Path) -> Result<Vec<PlannedRun>, CmdError> {
    let mut runs = Vec::new();
    for (point_index, value) in spec.values.iter().enumerate() {
        let mut config = spec.base.clone();
        let seeds: Vec<u64> = match spec.axis {
            SweepAxis::InvestProportion => {
                let q: f64 = value.parse().map_err(|_| {
                    CmdError::SweepSpec(format!("bad q value `{value}`"))
                })?;
                if !(0.0..=1.0).contains(&q) {
                    return Err(CmdError::SweepSpec(format!("q value `{value}` outside [0, 1]")));
                }
                config.invest_proportion = q;
                (0..spec.seeds_per_point).map(|i| spec.base.rng_seed + i).collect()
            }
            SweepAxis::Initiators => {
                let j: usize = value.parse().map_err(|_| {
                    CmdError::SweepSpec(format!("bad J value `{value}`"))
                })?;
                config.num_initiators = j;
                (0..spec.seeds_per_point).map(|i| spec.base.rng_seed + i).collect()
            }
            SweepAxis::Investors => {
                let n: usize = value.parse().map_err(|_| {
                    CmdError::SweepSpec(format!("bad N value `{value}`"))
                })?;
                config.num_investors = n;
                (0..spec.seeds_per_point).map(|i| spec.base.rng_seed + i).collect()
            }
            SweepAxis::Seed => {
                let seed: u64 = value.parse().map_err(|_| {
                    CmdError::SweepSpec(format!("bad seed value `{value}`"))
                })?;
                vec![seed]
            }
        };
        for seed in seeds {
            let mut config = config.clone();
            config.rng_seed = seed;
            config
                .validate()
                .map_err(|e| CmdError::SweepSpec(format!("value `{value}`: {e}")))?;
            runs.push(PlannedRun {
                point_index,
                config,
                dir: out_dir.join(format!("{}{}_s{}", spec.axis.label(), value, seed)),
            });
        }
    }
    Ok(runs)
}

/// `sweep --spec <path> --out <dir> [--parallel <n>]`
pub fn cmd_sweep(spec_path: &Path, out_dir: &Path, parallel: usize) -> Result<(), CmdError> {
    let text = fs::read_to_string(spec_path)
        .map_err(io_err(format!("read {}", spec_path.display())))?;
    let spec = parse_sweep_spec(&text)?;
    let runs = plan_runs(&spec, out_dir)?;
    fs::create_dir_all(out_dir).map_err(io_err(format!("create {}", out_dir.display())))?;

    let results: Vec<Mutex<Option<Result<RunArtifacts, String>>>> =
        runs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = parallel.max(1).min(runs.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= runs.len() {
                    break;
                }
                let run = &runs[index];
                let outcome =
                    run_to_dir(&run.config, &run.dir).map_err(|e| e.to_string());
                *results[index].lock().unwrap() = Some(outcome);
            });
        }
    });

    let mut failed = 0usize;
    let mut per_point: Vec<Vec<&RunArtifacts>> = vec![Vec::new(); spec.values.len()];
    let collected: Vec<Option<Result<RunArtifacts, String>>> =
        results.into_iter().map(|m| m.into_inner().unwrap()).collect();
    for (run, outcome) in runs.iter().zip(&collected) {
        match outcome {
            Some(Ok(artifacts)) => per_point[run.point_index].push(artifacts),
            Some(Err(message)) => {
                eprintln!("sweep: {} failed: {message}", run.dir.display());
                failed += 1;
            }
            None => {
                eprintln!("sweep: {} was never executed", run.dir.display());
                failed += 1;
            }
        }
    }

    write_summary(&spec, &per_point, &out_dir.join("summary.csv"))?;
    if failed > 0 {
        return Err(CmdError::SweepFailures { failed });
    }
    Ok(())
}

const SUMMARY_COLUMNS: [&str; 9] = [
    "V",
    "k_max",
    "avg_degree",
    "l",
    "C_bipartite",
    "C_projected",
    "l_rand",
    "C_rand",
    "tail_slope",
];

fn write_summary(
    spec: &SweepSpec,
    per_point: &[Vec<&RunArtifacts>],
    path: &Path,
) -> Result<(), CmdError> {
    let mut out = BufWriter::new(
        File::create(path).map_err(io_err(format!("create {}", path.display())))?,
    );
    let mut header = String::from("axis,value,seeds");
    for column in SUMMARY_COLUMNS {
        header.push_str(&format!(",{column}_mean,{column}_std"));
    }
    writeln!(out, "{header}").map_err(io_err("write summary"))?;

    for (value, artifacts) in spec.values.iter().zip(per_point) {
        let mut row = format!("{},{},{}", spec.axis.label(), value, artifacts.len());
        for column in SUMMARY_COLUMNS {
            let samples: Vec<f64> = artifacts
                .iter()
                .filter_map(|a| match column {
                    "V" => Some(a.final_metrics.links as f64),
                    "k_max" => Some(a.final_metrics.max_degree as f64),
                    "avg_degree" => Some(a.final_metrics.average_degree),
                    "l" => a.final_metrics.avg_path_length,
                    "C_bipartite" => Some(a.final_metrics.clustering_bipartite),
                    "C_projected" => Some(a.final_metrics.clustering_projected),
                    "l_rand" => a.final_metrics.l_rand,
                    "C_rand" => Some(a.final_metrics.c_rand),
                    "tail_slope" => a.final_tailfit.as_ref().map(|f| f.slope),
                    _ => unreachable!(),
                })
                .collect();
            match mean_std(&samples) {
                Some((mean, std)) => {
                    row.push_str(&format!(",{},{}", fmt_real(mean), fmt_real(std)));
                }
                None => row.push_str(",,"),
            }
        }
        writeln!(out, "{row}").map_err(io_err("write summary"))?;
    }
    out.flush().map_err(io_err("flush summary"))?;
    Ok(())
}

/// Mean and sample standard deviation; `None` on an empty sample.
fn mean_std(samples: &[f64]) -> Option<(f64, f64)> {
    if samples.is_empty() {
        return None;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return Some((mean, 0.0));
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing_extracts_axis_and_base_config() {
        let text = "axis = q\nvalues = 0.1, 0.5, 0.9\nseeds_per_point = 3\nnum_investors = 50\n";
        let spec = parse_sweep_spec(text).unwrap();
        assert_eq!(spec.axis, SweepAxis::InvestProportion);
        assert_eq!(spec.values, vec!["0.1", "0.5", "0.9"]);
        assert_eq!(spec.seeds_per_point, 3);
        assert_eq!(spec.base.num_investors, 50);
    }

    #[test]
    fn spec_requires_axis_and_values() {
        assert!(parse_sweep_spec("values = 1\n").is_err());
        assert!(parse_sweep_spec("axis = q\n").is_err());
        assert!(parse_sweep_spec("axis = volume\nvalues = 1\n").is_err());
        assert!(parse_sweep_spec("axis = q\nvalues = 2.0\n").is_err());
    }

    #[test]
    fn seed_axis_ignores_seeds_per_point() {
        let spec =
            parse_sweep_spec("axis = seed\nvalues = 7, 8\nseeds_per_point = 5\n").unwrap();
        let runs = plan_runs(&spec, Path::new("/tmp/x")).unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[0].config.rng_seed, 7);
        assert_eq!(runs[1].config.rng_seed, 8);
    }

    #[test]
    fn mean_std_handles_small_samples() {
        assert_eq!(mean_std(&[]), None);
        assert_eq!(mean_std(&[4.0]), Some((4.0, 0.0)));
        let (mean, std) = mean_std(&[1.0, 3.0]).unwrap();
        assert_eq!(mean, 2.0);
        assert!((std - std::f64::consts::SQRT_2).abs() < 1e-12);
    }
}
