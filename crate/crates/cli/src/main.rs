//! `invnet` — seed-reproducible investment-network simulations, snapshot
//! analysis, and parameter sweeps.

use std::path::PathBuf;
use std::process::ExitCode;

use invnet_cli::commands::{cmd_analyze, cmd_run};
use invnet_cli::sweep::cmd_sweep;

const USAGE: &str = "\
usage:
  invnet run --config <path> --out <dir> [--seed <u64>]
  invnet analyze --in <dir> --out <file>
  invnet sweep --spec <path> --out <dir> [--parallel <n>]

run      execute one simulation; writes manifest.txt, events.csv, and one
         budgets_<step>.csv / edges_<step>.txt pair per snapshot
analyze  compute network metrics and budget tail fits for every snapshot in
         a run directory; writes the metrics CSV to --out and tailfit.csv
         beside it
sweep    run a grid of (axis value x seed) simulations and aggregate their
         final-step metrics into summary.csv";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(message)) => {
            eprintln!("{message}\n\n{USAGE}");
            ExitCode::from(2)
        }
        Err(Failure::Command(message)) => {
            eprintln!("invnet: {message}");
            ExitCode::FAILURE
        }
    }
}

enum Failure {
    Usage(String),
    Command(String),
}

fn dispatch(args: &[String]) -> Result<(), Failure> {
    let command = args.first().map(String::as_str);
    match command {
        Some("run") => {
            let mut options = Options::parse(&args[1..])?;
            let config = options.required_path("--config")?;
            let out = options.required_path("--out")?;
            let seed = options.optional_u64("--seed")?;
            options.finish()?;
            cmd_run(&config, &out, seed)
                .map(|_| ())
                .map_err(|e| Failure::Command(e.to_string()))
        }
        Some("analyze") => {
            let mut options = Options::parse(&args[1..])?;
            let input = options.required_path("--in")?;
            let out = options.required_path("--out")?;
            options.finish()?;
            cmd_analyze(&input, &out).map_err(|e| Failure::Command(e.to_string()))
        }
        Some("sweep") => {
            let mut options = Options::parse(&args[1..])?;
            let spec = options.required_path("--spec")?;
            let out = options.required_path("--out")?;
            let parallel = options.optional_u64("--parallel")?.unwrap_or(1);
            options.finish()?;
            cmd_sweep(&spec, &out, parallel.max(1) as usize)
                .map_err(|e| Failure::Command(e.to_string()))
        }
        Some(other) => Err(Failure::Usage(format!("unknown command `{other}`"))),
        None => Err(Failure::Usage("missing command".into())),
    }
}

/// Tiny `--flag value` parser; every flag takes exactly one value.
struct Options {
    pairs: Vec<(String, String)>,
}

impl Options {
    fn parse(args: &[String]) -> Result<Self, Failure> {
        let mut pairs = Vec::new();
        let mut iter = args.iter();
        while let Some(flag) = iter.next() {
            if !flag.starts_with("--") {
                return Err(Failure::Usage(format!("unexpected argument `{flag}`")));
            }
            let value = iter
                .next()
                .ok_or_else(|| Failure::Usage(format!("flag `{flag}` needs a value")))?;
            pairs.push((flag.clone(), value.clone()));
        }
        Ok(Options { pairs })
    }

    fn take(&mut self, flag: &str) -> Option<String> {
        let index = self.pairs.iter().position(|(f, _)| f == flag)?;
        Some(self.pairs.remove(index).1)
    }

    fn required_path(&mut self, flag: &str) -> Result<PathBuf, Failure> {
        self.take(flag)
            .map(PathBuf::from)
            .ok_or_else(|| Failure::Usage(format!("missing required flag `{flag}`")))
    }

    fn optional_u64(&mut self, flag: &str) -> Result<Option<u64>, Failure> {
        match self.take(flag) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<u64>()
                .map(Some)
                .map_err(|_| Failure::Usage(format!("flag `{flag}` needs an integer, got `{raw}`"))),
        }
    }

    fn finish(self) -> Result<(), Failure> {
        match self.pairs.first() {
            Some((flag, _)) => Err(Failure::Usage(format!("unknown flag `{flag}`"))),
            None => Ok(()),
        }
    }
}
