//! Plain-text `key = value` configuration files.
//!
//! Empty lines and `#` comments are ignored, unknown or duplicate keys are
//! hard errors, and every violation carries its line number. Unset keys fall
//! back to the headline defaults of [`SimConfig`].

use std::fmt;
use std::fs;
use std::path::Path;

use invnet_core::runner::SimConfig;

/// All recognized keys, in canonical output order.
pub const CONFIG_KEYS: [&str; 11] = [
    "num_investors",
    "num_initiators",
    "num_steps",
    "threshold",
    "q",
    "initial_budget",
    "income",
    "memory",
    "greediness",
    "rng_seed",
    "snapshot_every",
];

#[derive(Debug)]
pub enum ConfigError {
    Io { path: String, source: std::io::Error },
    Line { line: usize, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, source } => write!(f, "{path}: {source}"),
            ConfigError::Line { line, message } => write!(f, "line {line}: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parse a config file from disk.
pub fn parse_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

/// Parse config text. Defaults are applied for keys the text does not set.
pub fn parse_config_str(text: &str) -> Result<SimConfig, ConfigError> {
    let mut config = SimConfig::default();
    let mut seen: Vec<&str> = Vec::new();

    for (index, raw_line) in text.lines().enumerate() {
        let line_no = index + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Line {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if value.is_empty() {
            return Err(ConfigError::Line {
                line: line_no,
                message: format!("key `{key}` has no value"),
            });
        }
        let canonical = CONFIG_KEYS
            .iter()
            .find(|&&k| k == key)
            .copied()
            .ok_or_else(|| ConfigError::Line {
                line: line_no,
                message: format!("unknown key `{key}`"),
            })?;
        if seen.contains(&canonical) {
            return Err(ConfigError::Line {
                line: line_no,
                message: format!("duplicate key `{key}`"),
            });
        }
        seen.push(canonical);
        apply_key(&mut config, canonical, value, line_no)?;
    }

    config.validate().map_err(|e| ConfigError::Line {
        line: 0,
        message: e.to_string(),
    })?;
    Ok(config)
}

fn apply_key(
    config: &mut SimConfig,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), ConfigError> {
    let bad = |message: String| ConfigError::Line { line, message };
    let parse_count = |what: &str| {
        value
            .parse::<u64>()
            .map_err(|_| bad(format!("{what} must be a nonnegative integer, got `{value}`")))
    };
    let parse_real = |what: &str| {
        value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(format!("{what} must be a finite number, got `{value}`")))
    };

    match key {
        "num_investors" => {
            let n = parse_count("num_investors")?;
            if n < 1 {
                return Err(bad("num_investors must be at least 1".into()));
            }
            config.num_investors = n as usize;
        }
        "num_initiators" => {
            let n = parse_count("num_initiators")?;
            if n < 1 {
                return Err(bad("num_initiators must be at least 1".into()));
            }
            config.num_initiators = n as usize;
        }
        "num_steps" => config.num_steps = parse_count("num_steps")?,
        "snapshot_every" => {
            let n = parse_count("snapshot_every")?;
            if n < 1 {
                return Err(bad("snapshot_every must be at least 1".into()));
            }
            config.snapshot_every = n;
        }
        "rng_seed" => config.rng_seed = parse_count("rng_seed")?,
        "threshold" => {
            let v = parse_real("threshold")?;
            if v < 0.0 {
                return Err(bad("threshold must be nonnegative".into()));
            }
            config.threshold = v;
        }
        "q" => {
            let v = parse_real("q")?;
            if !(0.0..=1.0).contains(&v) {
                return Err(bad(format!("q must lie in [0, 1], got `{value}`")));
            }
            config.invest_proportion = v;
        }
        "initial_budget" => {
            let v = parse_real("initial_budget")?;
            if v < 0.0 {
                return Err(bad("initial_budget must be nonnegative".into()));
            }
            config.initial_budget = v;
        }
        "income" => {
            let v = parse_real("income")?;
            if v < 0.0 {
                return Err(bad("income must be nonnegative".into()));
            }
            config.income = v;
        }
        "memory" => {
            let v = parse_real("memory")?;
            if v < 0.0 {
                return Err(bad("memory must be nonnegative".into()));
            }
            config.memory = v;
        }
        "greediness" => config.greediness = parse_real("greediness")?,
        _ => unreachable!("key filtered above"),
    }
    Ok(())
}

/// Render a config as canonical `key = value` lines, parseable by
/// [`parse_config_str`].
pub fn render_config(config: &SimConfig) -> String {
    let mut out = String::new();
    for key in CONFIG_KEYS {
        let value = match key {
            "num_investors" => config.num_investors.to_string(),
            "num_initiators" => config.num_initiators.to_string(),
            "num_steps" => config.num_steps.to_string(),
            "threshold" => fmt_real(config.threshold),
            "q" => fmt_real(config.invest_proportion),
            "initial_budget" => fmt_real(config.initial_budget),
            "income" => fmt_real(config.income),
            "memory" => fmt_real(config.memory),
            "greediness" => fmt_real(config.greediness),
            "rng_seed" => config.rng_seed.to_string(),
            "snapshot_every" => config.snapshot_every.to_string(),
            _ => unreachable!(),
        };
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(&value);
        out.push('\n');
    }
    out
}

// Shortest representation that round-trips exactly through f64 parsing.
fn fmt_real(v: f64) -> String {
    let s = format!("{v}");
    debug_assert_eq!(s.parse::<f64>().unwrap(), v);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_headline_defaults() {
        let config = parse_config_str("").unwrap();
        assert_eq!(config, SimConfig::default());
        assert_eq!(config.num_investors, 10_000);
        assert_eq!(config.num_initiators, 100);
        assert_eq!(config.num_steps, 100_000);
        assert_eq!(config.threshold, 9.0);
        assert_eq!(config.initial_budget, 1.0);
        assert_eq!(config.income, 0.5);
        assert_eq!(config.memory, 0.1);
        assert_eq!(config.greediness, 1.0);
    }

    #[test]
    fn out_of_range_q_names_the_key_and_line() {
        let err = parse_config_str("# comment\nq = 1.5\n").unwrap_err();
        let message = err.to_string();
        assert!(message.contains("line 2"), "{message}");
        assert!(message.contains('q'), "{message}");
    }

    #[test]
    fn small_population_config_parses() {
        let config =
            parse_config_str("num_investors = 1000\nnum_initiators = 10\n").unwrap();
        assert_eq!(config.num_investors, 1000);
        assert_eq!(config.num_initiators, 10);
        assert_eq!(config.threshold, 9.0);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let err = parse_config_str("velocity = 3\n").unwrap_err();
        assert!(err.to_string().contains("unknown key `velocity`"));
        let err = parse_config_str("income = 0.5\nincome = 0.6\n").unwrap_err();
        assert!(err.to_string().contains("duplicate key `income`"));
    }

    #[test]
    fn malformed_lines_are_rejected_with_line_numbers() {
        let err = parse_config_str("num_steps\n").unwrap_err();
        assert!(err.to_string().starts_with("line 1"));
        let err = parse_config_str("\n\nnum_steps = \n").unwrap_err();
        assert!(err.to_string().starts_with("line 3"));
        let err = parse_config_str("num_steps = many\n").unwrap_err();
        assert!(err.to_string().contains("nonnegative integer"));
    }

    #[test]
    fn comments_and_spacing_are_tolerated() {
        let text = "  # full line comment\n\n  income = 0.25  # trailing comment\n";
        let config = parse_config_str(text).unwrap();
        assert_eq!(config.income, 0.25);
    }

    #[test]
    fn render_round_trips() {
        let mut config = SimConfig::default();
        config.invest_proportion = 0.3;
        config.rng_seed = 777;
        config.memory = 0.05;
        let rendered = render_config(&config);
        let parsed = parse_config_str(&rendered).unwrap();
        assert_eq!(parsed, config);
    }
}
