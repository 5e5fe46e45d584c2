//! Run manifests: a config echo that [`crate::config::parse_config`] accepts
//! verbatim, plus build, timing, and output-inventory metadata as comments.

use std::io::{self, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use invnet_core::runner::SimConfig;

use crate::config::render_config;

/// One produced output file with its size and content digest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileRecord {
    pub name: String,
    pub bytes: u64,
    pub fnv64: u64,
}

#[derive(Debug)]
pub struct RunManifest {
    pub config: SimConfig,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub files: Vec<FileRecord>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn write_manifest(out: &mut impl Write, manifest: &RunManifest) -> io::Result<()> {
    writeln!(out, "# invnet run manifest")?;
    writeln!(out, "# build: {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "# started_unix: {}", manifest.started_unix)?;
    writeln!(out, "# finished_unix: {}", manifest.finished_unix)?;
    writeln!(out, "#")?;
    writeln!(out, "# config echo (parseable as a config file):")?;
    out.write_all(render_config(&manifest.config).as_bytes())?;
    writeln!(out, "#")?;
    writeln!(out, "# outputs:")?;
    for file in &manifest.files {
        writeln!(out, "# file: {} bytes={} fnv64={:016x}", file.name, file.bytes, file.fnv64)?;
    }
    Ok(())
}

/// Pull the output inventory back out of a manifest, for determinism checks.
pub fn parse_file_records(text: &str) -> Vec<FileRecord> {
    let mut records = Vec::new();
    for line in text.lines() {
        let Some(rest) = line.strip_prefix("# file: ") else { continue };
        let mut name = None;
        let mut bytes = None;
        let mut fnv = None;
        for token in rest.split_whitespace() {
            if let Some(v) = token.strip_prefix("bytes=") {
                bytes = v.parse::<u64>().ok();
            } else if let Some(v) = token.strip_prefix("fnv64=") {
                fnv = u64::from_str_radix(v, 16).ok();
            } else if name.is_none() {
                name = Some(token.to_string());
            }
        }
        if let (Some(name), Some(bytes), Some(fnv64)) = (name, bytes, fnv) {
            records.push(FileRecord { name, bytes, fnv64 });
        }
    }
    records
}
