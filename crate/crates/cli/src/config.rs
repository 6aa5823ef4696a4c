//! Flag resolution: command-line flags win over `--config` file entries,
//! which win over the built-in defaults. The config file holds `key = value`
//! lines whose keys mirror the long flag names.

use std::collections::HashMap;
use std::path::PathBuf;

use clap::Args;

use mlebound::testfn::TestFunction;

use crate::output::Format;
use crate::CliError;

pub const DEFAULT_SEED: u64 = 42;
pub const SEED_ENV_VAR: &str = "MLEBOUND_SEED";

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// True mean of the normal model
    #[arg(long)]
    pub mu: Option<f64>,

    /// True variance of the normal model
    #[arg(long)]
    pub sigma2: Option<f64>,

    /// Comma-separated sample sizes, e.g. 1000,10000
    #[arg(long)]
    pub n: Option<String>,

    /// Monte Carlo trials per cell
    #[arg(long)]
    pub trials: Option<usize>,

    /// Master seed (falls back to MLEBOUND_SEED, then 42)
    #[arg(long)]
    pub seed: Option<u64>,

    /// Conditioning radius: a positive real or "inf"
    #[arg(long)]
    pub epsilon: Option<String>,

    /// Test function name (default inverse-quadratic)
    #[arg(long)]
    pub h: Option<String>,

    /// Bound mode: general | simplified | closed-form | paper-constants
    #[arg(long)]
    pub mode: Option<String>,

    /// Worker threads: "auto" or a positive integer
    #[arg(long)]
    pub workers: Option<String>,

    /// Output format: csv | json-lines
    #[arg(long)]
    pub format: Option<String>,

    /// Output path ("-" = stdout)
    #[arg(long)]
    pub output: Option<String>,

    /// Compare against the unrounded E[h(Z)] instead of the 3-d.p. reference
    #[arg(long)]
    pub exact_ehz: bool,

    /// simulate: emit one row per trial instead of aggregates
    #[arg(long)]
    pub per_trial: bool,

    /// Allow cells beyond the desk-scale cap (n x trials > 1e9)
    #[arg(long)]
    pub allow_large: bool,

    /// Config file with `key = value` lines mirroring the flags (flags win)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    General,
    Simplified,
    ClosedForm,
    PaperConstants,
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub mu: f64,
    pub sigma2: f64,
    pub n: Vec<u64>,
    pub trials: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub h: TestFunction,
    pub mode: Mode,
    pub workers: Option<usize>,
    pub format: Format,
    pub output: String,
    pub exact_ehz: bool,
    pub per_trial: bool,
    pub allow_large: bool,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_file(path: &PathBuf) -> Result<HashMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config file {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(usage(format!(
                "config line {} is not `key = value`: {raw}",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        const KNOWN: &[&str] = &[
            "mu",
            "sigma2",
            "n",
            "trials",
            "seed",
            "epsilon",
            "h",
            "mode",
            "workers",
            "format",
            "output",
            "exact-ehz",
            "per-trial",
            "allow-large",
        ];
        if !KNOWN.contains(&key.as_str()) {
            return Err(usage(format!("unknown config key `{key}`")));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(usage(format!("{key} must be true or false, got `{other}`"))),
    }
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let file = match &self.config {
            Some(path) => parse_file(path)?,
            None => HashMap::new(),
        };
        let from_file = |key: &str| file.get(key).map(String::as_str);

        let mu = match (self.mu, from_file("mu")) {
            (Some(v), _) => v,
            (None, Some(s)) => s
                .parse()
                .map_err(|_| usage(format!("mu must be a real, got `{s}`")))?,
            (None, None) => 1.0,
        };
        let sigma2 = match (self.sigma2, from_file("sigma2")) {
            (Some(v), _) => v,
            (None, Some(s)) => s
                .parse()
                .map_err(|_| usage(format!("sigma2 must be a real, got `{s}`")))?,
            (None, None) => 1.0,
        };
        if !sigma2.is_finite() || sigma2 <= 0.0 || !mu.is_finite() {
            return Err(usage(format!(
                "model parameters must be finite with sigma2 > 0, got mu={mu}, sigma2={sigma2}"
            )));
        }

        let n_text = self
            .n
            .clone()
            .or_else(|| from_file("n").map(str::to_string))
            .unwrap_or_else(|| "1000,10000,100000".to_string());
        let mut n = Vec::new();
        for part in n_text.split(',') {
            let part = part.trim();
            let v: u64 = part.parse().map_err(|_| {
                usage(format!(
                    "--n entries must be positive integers, got `{part}`"
                ))
            })?;
            if v == 0 {
                return Err(usage("--n entries must be positive".to_string()));
            }
            n.push(v);
        }
        if n.is_empty() {
            return Err(usage("--n must list at least one sample size".to_string()));
        }

        let trials = match (self.trials, from_file("trials")) {
            (Some(v), _) => v,
            (None, Some(s)) => s
                .parse()
                .map_err(|_| usage(format!("trials must be an integer, got `{s}`")))?,
            (None, None) => 10_000,
        };

        let seed = match (self.seed, from_file("seed")) {
            (Some(v), _) => v,
            (None, Some(s)) => s
                .parse()
                .map_err(|_| usage(format!("seed must be a u64, got `{s}`")))?,
            (None, None) => match std::env::var(SEED_ENV_VAR) {
                Ok(s) => s
                    .parse()
                    .map_err(|_| usage(format!("{SEED_ENV_VAR} must be a u64, got `{s}`")))?,
                Err(_) => DEFAULT_SEED,
            },
        };

        let epsilon_text = self
            .epsilon
            .clone()
            .or_else(|| from_file("epsilon").map(str::to_string))
            .unwrap_or_else(|| "inf".to_string());
        let epsilon = match epsilon_text.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" => f64::INFINITY,
            other => {
                let v: f64 = other.parse().map_err(|_| {
                    usage(format!("epsilon must be a real or `inf`, got `{other}`"))
                })?;
                if v.is_nan() || v <= 0.0 {
                    return Err(usage(format!("epsilon must be positive, got {v}")));
                }
                v
            }
        };

        let h_name = self
            .h
            .clone()
            .or_else(|| from_file("h").map(str::to_string))
            .unwrap_or_else(|| "inverse-quadratic".to_string());
        let h = TestFunction::by_name(&h_name)
            .ok_or_else(|| usage(format!("unknown test function `{h_name}`")))?;

        let mode_text = self
            .mode
            .clone()
            .or_else(|| from_file("mode").map(str::to_string))
            .unwrap_or_else(|| "closed-form".to_string());
        let mode = match mode_text.as_str() {
            "general" => Mode::General,
            "simplified" => Mode::Simplified,
            "closed-form" => Mode::ClosedForm,
            "paper-constants" => Mode::PaperConstants,
            other => {
                return Err(usage(format!(
                "mode must be general | simplified | closed-form | paper-constants, got `{other}`"
            )))
            }
        };

        let workers_text = self
            .workers
            .clone()
            .or_else(|| from_file("workers").map(str::to_string))
            .unwrap_or_else(|| "auto".to_string());
        let workers = match workers_text.as_str() {
            "auto" => None,
            other => {
                let v: usize = other.parse().map_err(|_| {
                    usage(format!(
                        "workers must be `auto` or a positive integer, got `{other}`"
                    ))
                })?;
                if v == 0 {
                    return Err(usage("workers must be positive".to_string()));
                }
                Some(v)
            }
        };

        let format_text = self
            .format
            .clone()
            .or_else(|| from_file("format").map(str::to_string))
            .unwrap_or_else(|| "csv".to_string());
        let format = match format_text.as_str() {
            "csv" => Format::Csv,
            "json-lines" => Format::JsonLines,
            other => {
                return Err(usage(format!(
                    "format must be csv | json-lines, got `{other}`"
                )))
            }
        };

        let output = self
            .output
            .clone()
            .or_else(|| from_file("output").map(str::to_string))
            .unwrap_or_else(|| "-".to_string());

        let exact_ehz = if self.exact_ehz {
            true
        } else {
            from_file("exact-ehz")
                .map(|s| parse_bool("exact-ehz", s))
                .transpose()?
                .unwrap_or(false)
        };
        let per_trial = if self.per_trial {
            true
        } else {
            from_file("per-trial")
                .map(|s| parse_bool("per-trial", s))
                .transpose()?
                .unwrap_or(false)
        };
        let allow_large = if self.allow_large {
            true
        } else {
            from_file("allow-large")
                .map(|s| parse_bool("allow-large", s))
                .transpose()?
                .unwrap_or(false)
        };

        Ok(Resolved {
            mu,
            sigma2,
            n,
            trials,
            seed,
            epsilon,
            h,
            mode,
            workers,
            format,
            output,
            exact_ehz,
            per_trial,
            allow_large,
        })
    }
}
