//! On-disk formats: budget CSVs, edge lists, the event log, and the analysis
//! outputs. All real numbers are printed with 9 significant digits so digests
//! are meaningful across reruns of the same build.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use invnet_core::analysis::{NetworkMetrics, TailFit};
use invnet_core::model::Role;
use invnet_core::runner::{ProjectEvent, Snapshot};

/// 9 significant digits, scientific notation; stable for determinism checks.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.8e}")
}

pub const BUDGETS_HEADER: &str = "agent_id,role,budget,reputation";
pub const EVENTS_HEADER: &str =
    "step,initiator,contacted,accepted,total_committed,status,return_value";
pub const METRICS_HEADER: &str =
    "step,V,k_max,avg_degree,l,C_bipartite,C_projected,l_rand,C_rand";
pub const TAILFIT_HEADER: &str = "step,slope,intercept,tail_fraction,points_used,r_squared";

/// Budget rows: investors first as ids `0..N`, then initiators as `N..N+J`,
/// each with its reputation.
pub fn write_budgets(out: &mut impl Write, snapshot: &Snapshot) -> io::Result<()> {
    writeln!(out, "{BUDGETS_HEADER}")?;
    let investor_count = snapshot.investor_budgets.len();
    for (k, (&budget, &rep)) in snapshot
        .investor_budgets
        .iter()
        .zip(&snapshot.investor_reputation)
        .enumerate()
    {
        writeln!(out, "{k},{},{},{}", Role::Investor.as_str(), fmt_real(budget), fmt_real(rep))?;
    }
    for (j, (&budget, &rep)) in snapshot
        .initiator_budgets
        .iter()
        .zip(&snapshot.initiator_reputation)
        .enumerate()
    {
        writeln!(
            out,
            "{},{},{},{}",
            investor_count + j,
            Role::Initiator.as_str(),
            fmt_real(budget),
            fmt_real(rep)
        )?;
    }
    Ok(())
}

/// Parsed budgets file.
#[derive(Debug, Default)]
pub struct BudgetsFile {
    pub investor_budgets: Vec<f64>,
    pub initiator_budgets: Vec<f64>,
}

impl BudgetsFile {
    pub fn all_budgets(&self) -> Vec<f64> {
        let mut all = self.investor_budgets.clone();
        all.extend_from_slice(&self.initiator_budgets);
        all
    }
}

pub fn read_budgets(reader: impl BufRead) -> io::Result<BudgetsFile> {
    let bad = |line: usize, msg: String| {
        io::Error::new(io::ErrorKind::InvalidData, format!("budgets line {line}: {msg}"))
    };
    let mut file = BudgetsFile::default();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if index == 0 {
            if line.trim() != BUDGETS_HEADER {
                return Err(bad(1, format!("unexpected header `{line}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(index + 1, format!("expected 4 fields, got {}", fields.len())));
        }
        let budget: f64 = fields[2]
            .parse()
            .map_err(|_| bad(index + 1, format!("bad budget `{}`", fields[2])))?;
        match fields[1] {
            "investor" => file.investor_budgets.push(budget),
            "initiator" => file.initiator_budgets.push(budget),
            other => return Err(bad(index + 1, format!("unknown role `{other}`"))),
        }
    }
    Ok(file)
}

/// Edge list: a sizing comment, then one `investor initiator weight` line per
/// strictly positive decision weight.
pub fn write_edges(out: &mut impl Write, snapshot: &Snapshot) -> io::Result<()> {
    writeln!(
        out,
        "# investors={} initiators={} step={}",
        snapshot.investor_budgets.len(),
        snapshot.initiator_budgets.len(),
        snapshot.step
    )?;
    for &(k, j, w) in &snapshot.edges {
        writeln!(out, "{k} {j} {}", fmt_real(w))?;
    }
    Ok(())
}

/// Parsed edge-list file.
#[derive(Debug)]
pub struct EdgesFile {
    pub investor_count: usize,
    pub initiator_count: usize,
    pub step: u64,
    pub edges: Vec<(usize, usize, f64)>,
}

pub fn read_edges(reader: impl BufRead) -> io::Result<EdgesFile> {
    let bad = |line: usize, msg: String| {
        io::Error::new(io::ErrorKind::InvalidData, format!("edges line {line}: {msg}"))
    };
    let mut header: Option<(usize, usize, u64)> = None;
    let mut edges = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if header.is_none() {
                header = Some(parse_edges_header(rest).map_err(|m| bad(index + 1, m))?);
            }
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let (Some(k), Some(j), Some(w), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad(index + 1, format!("expected `k j w`, got `{trimmed}`")));
        };
        let k: usize = k.parse().map_err(|_| bad(index + 1, format!("bad investor `{k}`")))?;
        let j: usize = j.parse().map_err(|_| bad(index + 1, format!("bad initiator `{j}`")))?;
        let w: f64 = w.parse().map_err(|_| bad(index + 1, format!("bad weight `{w}`")))?;
        if !(w > 0.0) {
            return Err(bad(index + 1, format!("weight must be positive, got {w}")));
        }
        edges.push((k, j, w));
    }
    let (investor_count, initiator_count, step) = header.ok_or_else(|| {
        io::Error::new(io::ErrorKind::InvalidData, "edges file is missing its sizing header")
    })?;
    Ok(EdgesFile { investor_count, initiator_count, step, edges })
}

fn parse_edges_header(rest: &str) -> Result<(usize, usize, u64), String> {
    let mut investors = None;
    let mut initiators = None;
    let mut step = None;
    for token in rest.split_whitespace() {
        if let Some(v) = token.strip_prefix("investors=") {
            investors = v.parse::<usize>().ok();
        } else if let Some(v) = token.strip_prefix("initiators=") {
            initiators = v.parse::<usize>().ok();
        } else if let Some(v) = token.strip_prefix("step=") {
            step = v.parse::<u64>().ok();
        }
    }
    match (investors, initiators, step) {
        (Some(n), Some(j), Some(s)) => Ok((n, j, s)),
        _ => Err(format!("malformed sizing header `#{rest}`")),
    }
}

pub fn write_events_header(out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{EVENTS_HEADER}")
}

pub fn write_event(out: &mut impl Write, event: &ProjectEvent) -> io::Result<()> {
    let return_field = event.return_value.map(fmt_real).unwrap_or_default();
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        event.step,
        event.initiator,
        event.contacted,
        event.accepted,
        fmt_real(event.total_committed),
        event.status.as_str(),
        return_field
    )
}

pub fn metrics_row(step: u64, metrics: &NetworkMetrics) -> String {
    let mut row = String::new();
    let _ = write!(
        row,
        "{step},{},{},{},{},{},{},{},{}",
        metrics.links,
        metrics.max_degree,
        fmt_real(metrics.average_degree),
        metrics.avg_path_length.map(fmt_real).unwrap_or_default(),
        fmt_real(metrics.clustering_bipartite),
        fmt_real(metrics.clustering_projected),
        metrics.l_rand.map(fmt_real).unwrap_or_default(),
        fmt_real(metrics.c_rand),
    );
    row
}

pub fn tailfit_row(step: u64, fit: Option<&TailFit>) -> String {
    match fit {
        Some(fit) => format!(
            "{step},{},{},{},{},{}",
            fmt_real(fit.slope),
            fmt_real(fit.intercept),
            fmt_real(fit.tail_fraction),
            fit.points_used,
            fmt_real(fit.r_squared),
        ),
        None => format!("{step},,,,,"),
    }
}
