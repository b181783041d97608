//! `key = value` experiment configuration with typed access and validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("key `{key}`: cannot parse `{value}`")]
    Parse { key: String, value: String },
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

/// The experiments the driver knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GreenValidate,
    SamplerValidate,
    TreeEta,
    OperatorSweep,
    Hstar,
    CouplingTail,
    Giant,
    Mesoscopic,
    Sprinkle,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::GreenValidate,
        Experiment::SamplerValidate,
        Experiment::TreeEta,
        Experiment::OperatorSweep,
        Experiment::Hstar,
        Experiment::CouplingTail,
        Experiment::Giant,
        Experiment::Mesoscopic,
        Experiment::Sprinkle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::GreenValidate => "green-validate",
            Experiment::SamplerValidate => "sampler-validate",
            Experiment::TreeEta => "tree-eta",
            Experiment::OperatorSweep => "operator-sweep",
            Experiment::Hstar => "hstar",
            Experiment::CouplingTail => "coupling-tail",
            Experiment::Giant => "giant",
            Experiment::Mesoscopic => "mesoscopic",
            Experiment::Sprinkle => "sprinkle",
        }
    }

    /// Keys this experiment reads, with whether each is required.
    pub fn keys(self) -> &'static [(&'static str, Value, bool)] {
        use Value::*;
        match self {
            Experiment::GreenValidate => &[
                ("n", Count, true),
                ("d", Count, true),
                ("seed", Seed, true),
                ("series_tol", Real, false),
                ("alpha", Real, false),
                ("expansion_samples", Count, false),
            ],
            Experiment::SamplerValidate => &[
                ("n", Count, true),
                ("d", Count, true),
                ("seed", Seed, true),
                ("replicas", Count, true),
                ("k_max", Count, false),
                ("tol", Real, false),
            ],
            Experiment::TreeEta => &[
                ("d", Count, true),
                ("h", Level, true),
                ("p", Real, false),
                ("gamma", Level, false),
                ("t", Real, false),
                ("depth", Count, true),
                ("replicas", Count, true),
                ("seed", Seed, true),
            ],
            Experiment::OperatorSweep => &[
                ("d", Count, true),
                ("h_min", Real, true),
                ("h_max", Real, true),
                ("h_steps", Count, true),
                ("p", Real, false),
                ("gamma", Level, false),
                ("n_nodes", Count, false),
            ],
            Experiment::Hstar => &[("d", Count, true), ("n_nodes", Count, false), ("tol", Real, false)],
            Experiment::CouplingTail => &[
                ("n", Count, true),
                ("d", Count, true),
                ("r", List, true),
                ("eps", Real, true),
                ("replicas", Count, true),
                ("seed", Seed, true),
                ("k_max", Count, false),
                ("tol", Real, false),
            ],
            Experiment::Giant => &[
                ("n", Count, true),
                ("d", Count, true),
                ("h", Level, true),
                ("replicas", Count, true),
                ("seed", Seed, true),
                ("k_max", Count, false),
                ("eta_depth", Count, false),
                ("eta_replicas", Count, false),
            ],
            Experiment::Mesoscopic => &[
                ("n", Count, true),
                ("d", Count, true),
                ("h", Real, true),
                ("p", Real, true),
                ("t", Real, true),
                ("replicas", Count, true),
                ("seed", Seed, true),
                ("c", Real, false),
                ("k0", Real, false),
                ("treelike_c", Real, false),
                ("delta_prime", Real, false),
                ("n_nodes", Count, false),
                ("k_max", Count, false),
                ("eta_depth", Count, false),
                ("eta_replicas", Count, false),
            ],
            Experiment::Sprinkle => &[
                ("n", Count, true),
                ("d", Count, true),
                ("h", Real, true),
                ("h_prime", Real, true),
                ("p", Real, true),
                ("replicas", Count, true),
                ("seed", Seed, true),
                ("t", Real, false),
                ("k0", Real, false),
                ("delta", Real, false),
                ("delta_prime", Real, false),
                ("treelike_c", Real, false),
                ("expansion_samples", Count, false),
                ("n_nodes", Count, false),
                ("k_max", Count, false),
                ("eta_depth", Count, false),
                ("eta_replicas", Count, false),
            ],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| ConfigError::UnknownExperiment(s.to_string()))
    }
}

/// Value shapes accepted in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Value {
    /// Non-negative integer.
    Count,
    /// 64-bit seed.
    Seed,
    /// Finite real.
    Real,
    /// Real or `-inf` / `inf`.
    Level,
    /// Comma-separated non-negative integers.
    List,
}

/// Parsed `key = value` pairs. Blank lines and `#` comments are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Config {
    pub values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1, text: raw.to_string() });
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                return Err(ConfigError::Duplicate { line: i + 1, key: k.to_string() });
            }
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Config::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    /// The `experiment` key, if present.
    pub fn experiment(&self) -> Result<Option<Experiment>, ConfigError> {
        self.values.get("experiment").map(|s| s.parse()).transpose()
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        let v = self.values.get(key).ok_or_else(|| ConfigError::Missing(key.to_string()))?;
        v.parse().map_err(|_| ConfigError::Parse { key: key.to_string(), value: v.clone() })
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        if self.contains(key) {
            self.get(key)
        } else {
            Ok(default)
        }
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.contains(key).then(|| self.get(key)).transpose()
    }

    pub fn get_list(&self, key: &str) -> Result<Vec<usize>, ConfigError> {
        let v = self.values.get(key).ok_or_else(|| ConfigError::Missing(key.to_string()))?;
        v.split(',')
            .map(|s| s.trim().parse().map_err(|_| ConfigError::Parse { key: key.to_string(), value: v.clone() }))
            .collect()
    }
}

fn parses(shape: Value, v: &str) -> bool {
    match shape {
        Value::Count => v.parse::<usize>().is_ok(),
        Value::Seed => v.parse::<u64>().is_ok(),
        Value::Real => v.parse::<f64>().is_ok_and(f64::is_finite),
        Value::Level => v.parse::<f64>().is_ok_and(|x| !x.is_nan()),
        Value::List => !v.is_empty() && v.split(',').all(|s| s.trim().parse::<usize>().is_ok()),
    }
}

/// Schema and range problems of `cfg` for `exp`; empty when the config is usable.
pub fn validate(exp: Experiment, cfg: &Config) -> Vec<String> {
    let mut problems = Vec::new();
    let keys = exp.keys();
    for (key, value) in &cfg.values {
        if key == "experiment" {
            if value != exp.name() {
                problems.push(format!("experiment key `{value}` does not match `{exp}`"));
            }
            continue;
        }
        match keys.iter().find(|(k, _, _)| k == key) {
            None => problems.push(format!("unknown key `{key}`")),
            Some(&(_, shape, _)) if !parses(shape, value) => problems.push(format!("key `{key}`: cannot parse `{value}`")),
            _ => {}
        }
    }
    for &(key, _, required) in keys {
        if required && !cfg.contains(key) {
            problems.push(format!("missing key `{key}`"));
        }
    }
    if !problems.is_empty() {
        return problems;
    }

    let real = |k: &str| cfg.get::<f64>(k).ok();
    let count = |k: &str| cfg.get::<usize>(k).ok();
    if let Some(d) = count("d") {
        if d < 3 {
            problems.push("d must be at least 3".to_string());
        }
        if let Some(n) = count("n") {
            if n * d % 2 == 1 {
                problems.push("parity".to_string());
            }
            if n <= d {
                problems.push("n must exceed d".to_string());
            }
        }
    }
    if let Some(p) = real("p") {
        if !(0.0..=1.0).contains(&p) {
            problems.push("p out of [0,1]".to_string());
        } else if matches!(exp, Experiment::Mesoscopic | Experiment::Sprinkle) && p <= 0.5 {
            problems.push("p must exceed 1/2".to_string());
        }
    }
    if let Some(t) = real("t") {
        if !(0.0..1.0).contains(&t) {
            problems.push("t out of [0,1)".to_string());
        }
    }
    for k in ["replicas", "depth", "h_steps", "eta_depth"] {
        if count(k) == Some(0) {
            problems.push(format!("{k} must be positive"));
        }
    }
    if let Some(m) = count("n_nodes") {
        if m < 32 {
            problems.push("n_nodes must be at least 32".to_string());
        }
    }
    for k in ["tol", "series_tol", "eps", "treelike_c", "alpha"] {
        if real(k).is_some_and(|v| v <= 0.0) {
            problems.push(format!("{k} must be positive"));
        }
    }
    for k in ["delta", "delta_prime"] {
        if real(k).is_some_and(|v| !(0.0..0.5).contains(&v)) {
            problems.push(format!("{k} out of [0,1/2)"));
        }
    }
    if let (Some(lo), Some(hi)) = (real("h_min"), real("h_max")) {
        if lo > hi {
            problems.push("h_min exceeds h_max".to_string());
        }
    }
    if let (Some(h), Some(hp)) = (real("h"), real("h_prime")) {
        if hp <= h {
            problems.push("h_prime must exceed h".to_string());
        }
    }
    if exp == Experiment::CouplingTail {
        if let Ok(rs) = cfg.get_list("r") {
            if rs.contains(&0) {
                problems.push("r must be positive".to_string());
            }
        }
    }
    problems
}
