//! CLI error taxonomy and the optional plain `key = value` configuration
//! file; flags override config, config overrides built-in defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

/// Configuration keys the file may set; anything else is a usage error.
const KNOWN_KEYS: [&str; 28] = [
    "jobs",
    "fixtures_dir",
    "lang",
    "genre",
    "title",
    "persona_name",
    "persona_desc",
    "min_seg",
    "max_seg",
    "threshold",
    "eval_frac",
    "seed",
    "lambda",
    "steps",
    "lr",
    "d",
    "tok_vocab",
    "frame_rate",
    "trials",
    "instances",
    "model",
    "judge",
    "sep_endpoint",
    "sep_key_env",
    "chat_endpoint",
    "chat_key_env",
    "embed_endpoint",
    "embed_key_env",
];

/// CLI failure modes: usage errors exit 2, runtime errors exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Runtime(err) => write!(f, "{err:#}"),
        }
    }
}

/// Builds a usage error (exit 2).
pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Wraps any error as a runtime failure (exit 1).
pub fn runtime(err: impl Into<anyhow::Error>) -> CliError {
    CliError::Runtime(err.into())
}

/// Resolved global options plus the raw config-file map.
#[derive(Debug, Clone)]
pub struct Settings {
    /// Worker-pool size, passed to service clients as their in-flight bound.
    pub jobs: usize,
    /// Root directory for fixture-backed mock clients.
    pub fixtures_dir: PathBuf,
    map: BTreeMap<String, String>,
}

impl Settings {
    /// Loads the optional config file and resolves the global options.
    pub fn load(
        config: Option<&Path>,
        jobs_flag: Option<usize>,
        fixtures_flag: Option<&Path>,
    ) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        if let Some(path) = config {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config file {}: {e}", path.display())))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    usage(format!(
                        "config line {}: expected `key = value`, got `{line}`",
                        lineno + 1
                    ))
                })?;
                let key = key.trim();
                if !KNOWN_KEYS.contains(&key) {
                    return Err(usage(format!(
                        "config line {}: unknown key `{key}`",
                        lineno + 1
                    )));
                }
                map.insert(key.to_string(), value.trim().to_string());
            }
        }
        let mut settings = Settings {
            jobs: 0,
            fixtures_dir: PathBuf::new(),
            map,
        };
        let default_jobs = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(4);
        settings.jobs = settings.usize_setting(jobs_flag, "jobs", default_jobs)?;
        if settings.jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        settings.fixtures_dir = fixtures_flag
            .map(Path::to_path_buf)
            .or_else(|| settings.str_opt("fixtures_dir").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("fixtures"));
        Ok(settings)
    }

    /// Raw config value, if the file set one.
    pub fn str_opt(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    /// Flag > config > default for a string setting.
    pub fn string_setting(&self, flag: Option<&str>, key: &str, default: &str) -> String {
        flag.or_else(|| self.str_opt(key)).unwrap_or(default).to_string()
    }

    /// Flag > config > default for an f64 setting.
    pub fn f64_setting(&self, flag: Option<f64>, key: &str, default: f64) -> Result<f64, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        self.parse_setting(key).map(|v| v.unwrap_or(default))
    }

    /// Flag > config > default for a u64 setting.
    pub fn u64_setting(&self, flag: Option<u64>, key: &str, default: u64) -> Result<u64, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        self.parse_setting(key).map(|v| v.unwrap_or(default))
    }

    /// Flag > config > default for a u32 setting.
    pub fn u32_setting(&self, flag: Option<u32>, key: &str, default: u32) -> Result<u32, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        self.parse_setting(key).map(|v| v.unwrap_or(default))
    }

    /// Flag > config > default for a usize setting.
    pub fn usize_setting(
        &self,
        flag: Option<usize>,
        key: &str,
        default: usize,
    ) -> Result<usize, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        self.parse_setting(key).map(|v| v.unwrap_or(default))
    }

    fn parse_setting<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.str_opt(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| usage(format!("config key `{key}`: invalid value `{raw}`"))),
        }
    }
}
