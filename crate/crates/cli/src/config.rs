//! Flat typed run configuration.
//!
//! Flags mirror config-file keys one to one: `--base-epochs 40` is the same
//! as a `base-epochs=40` line. A `--config FILE` is read first and explicit
//! flags override it. Unknown keys are rejected. Every run writes the fully
//! resolved configuration next to its outputs as `config.echo`, and
//! re-running from that file reproduces the run.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unparsable values, missing files, infeasible configs
    /// (exit code 2).
    Usage(String),
    /// Numeric/runtime failures such as training divergence (exit code 3).
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

pub fn usage<E: fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn runtime<E: fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Int,
    Float,
    Str,
    Bool,
}

/// One typed key a command accepts.
#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub key: &'static str,
    pub kind: ParamKind,
    /// None means the key is required.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

pub const fn param(
    key: &'static str,
    kind: ParamKind,
    default: Option<&'static str>,
    help: &'static str,
) -> ParamSpec {
    ParamSpec { key, kind, default, help }
}

/// Fully resolved parameters of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: &'static str,
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Resolves `--config` file contents, then flag overrides, then
    /// defaults; validates every key against the schema.
    pub fn parse(
        command: &'static str,
        specs: &[ParamSpec],
        args: &[String],
    ) -> Result<RunConfig, CliError> {
        let mut values: BTreeMap<String, String> = BTreeMap::new();
        let spec_of = |key: &str| specs.iter().find(|s| s.key == key);

        // first pass: pull out --config and load it
        let mut rest: Vec<(String, String)> = Vec::new();
        let mut i = 0;
        while i < args.len() {
            let arg = &args[i];
            let key = arg
                .strip_prefix("--")
                .ok_or_else(|| usage(format!("expected --key, got {arg:?}")))?;
            let value = args
                .get(i + 1)
                .ok_or_else(|| usage(format!("flag --{key} needs a value")))?;
            i += 2;
            if key == "config" {
                let text = std::fs::read_to_string(value)
                    .map_err(|e| usage(format!("cannot read config {value:?}: {e}")))?;
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let (k, v) = line.split_once('=').ok_or_else(|| {
                        usage(format!("{value}:{}: expected key=value", lineno + 1))
                    })?;
                    values.insert(k.trim().to_string(), v.trim().to_string());
                }
            } else {
                rest.push((key.to_string(), value.clone()));
            }
        }
        // flags override the config file
        for (k, v) in rest {
            values.insert(k, v);
        }

        for key in values.keys() {
            if spec_of(key).is_none() {
                return Err(usage(format!(
                    "unknown key {key:?} for `{command}`; valid keys: {}",
                    specs.iter().map(|s| s.key).collect::<Vec<_>>().join(", ")
                )));
            }
        }
        for spec in specs {
            if !values.contains_key(spec.key) {
                match spec.default {
                    Some(d) => {
                        values.insert(spec.key.to_string(), d.to_string());
                    }
                    None => return Err(usage(format!("`{command}` requires --{}", spec.key))),
                }
            }
            let raw = &values[spec.key];
            match spec.kind {
                ParamKind::Int => {
                    raw.parse::<i64>()
                        .map_err(|_| usage(format!("--{} expects an integer, got {raw:?}", spec.key)))?;
                }
                ParamKind::Float => {
                    raw.parse::<f64>()
                        .map_err(|_| usage(format!("--{} expects a number, got {raw:?}", spec.key)))?;
                }
                ParamKind::Bool => {
                    parse_bool(raw).ok_or_else(|| {
                        usage(format!("--{} expects on/off, got {raw:?}", spec.key))
                    })?;
                }
                ParamKind::Str => {}
            }
        }
        Ok(RunConfig { command, values })
    }

    pub fn get_str(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("key {key} not in schema"))
    }

    pub fn get_int(&self, key: &str) -> i64 {
        self.get_str(key).parse().expect("validated at parse time")
    }

    pub fn get_usize(&self, key: &str) -> Result<usize, CliError> {
        let v = self.get_int(key);
        usize::try_from(v).map_err(|_| usage(format!("--{key} must be nonnegative, got {v}")))
    }

    pub fn get_float(&self, key: &str) -> f64 {
        self.get_str(key).parse().expect("validated at parse time")
    }

    pub fn get_bool(&self, key: &str) -> bool {
        parse_bool(self.get_str(key)).expect("validated at parse time")
    }

    /// Comma-separated integer list.
    pub fn get_int_list(&self, key: &str) -> Result<Vec<usize>, CliError> {
        self.get_str(key)
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| usage(format!("--{key}: bad integer {t:?}")))
            })
            .collect()
    }

    pub fn get_u64_list(&self, key: &str) -> Result<Vec<u64>, CliError> {
        self.get_str(key)
            .split(',')
            .map(|t| {
                t.trim().parse::<u64>().map_err(|_| usage(format!("--{key}: bad integer {t:?}")))
            })
            .collect()
    }

    /// The resolved `key=value` lines, sorted; re-running from this text
    /// reproduces the run.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Key/value view for the JSON summary.
    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "on" | "true" | "1" | "yes" => Some(true),
        "off" | "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPECS: &[ParamSpec] = &[
        param("n", ParamKind::Int, Some("16"), "sample count"),
        param("rate", ParamKind::Float, Some("0.5"), "a rate"),
        param("mode", ParamKind::Str, None, "required mode"),
        param("fast", ParamKind::Bool, Some("off"), "switch"),
    ];

    fn args(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::parse("demo", SPECS, &args(&["--mode", "x", "--n", "5"])).unwrap();
        assert_eq!(cfg.get_int("n"), 5);
        assert_eq!(cfg.get_float("rate"), 0.5);
        assert_eq!(cfg.get_str("mode"), "x");
        assert!(!cfg.get_bool("fast"));
    }

    #[test]
    fn unknown_and_missing_keys_rejected() {
        assert!(RunConfig::parse("demo", SPECS, &args(&["--mode", "x", "--bogus", "1"])).is_err());
        assert!(RunConfig::parse("demo", SPECS, &args(&[])).is_err());
        assert!(RunConfig::parse("demo", SPECS, &args(&["--mode", "x", "--n", "zz"])).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let cfg =
            RunConfig::parse("demo", SPECS, &args(&["--mode", "y", "--fast", "on"])).unwrap();
        let echo = cfg.echo();
        let dir = std::env::temp_dir().join(format!("lipbench-echo-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("config.echo");
        std::fs::write(&path, &echo).unwrap();
        let reloaded = RunConfig::parse(
            "demo",
            SPECS,
            &args(&["--config", path.to_str().unwrap()]),
        )
        .unwrap();
        assert_eq!(reloaded.echo(), echo);
        std::fs::remove_dir_all(&dir).ok();
    }
}
