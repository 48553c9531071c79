//! Flat `key = value` run configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sublift_core::grid::LabelGrid;
use sublift_core::models::{DualMode, RegularizerSpec};
use sublift_core::regularizer::{Eta, Kappa};
use sublift_core::solver::{Execution, SolverConfig, StepRule};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?} ({reason})")]
    Value { key: String, value: String, reason: String },
}

/// Raw key/value pairs; later assignments replace earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: n + 1 })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(ConfigError::Syntax { line: n + 1 });
            }
            map.insert(normalize(k), v.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.0.insert(normalize(key), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

/// `--data-weight` and `data_weight` name the same key.
fn normalize(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('-', "_")
}

/// Which dual discretization(s) a command runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeChoice {
    Linear,
    Constant,
    Both,
}

impl ModeChoice {
    pub fn modes(self) -> Vec<DualMode> {
        match self {
            ModeChoice::Linear => vec![DualMode::PiecewiseLinear],
            ModeChoice::Constant => vec![DualMode::PiecewiseConstant],
            ModeChoice::Both => vec![DualMode::PiecewiseLinear, DualMode::PiecewiseConstant],
        }
    }
}

/// Short name used in file names and reports.
pub fn mode_name(mode: DualMode) -> &'static str {
    match mode {
        DualMode::PiecewiseLinear => "linear",
        DualMode::PiecewiseConstant => "constant",
    }
}

/// Every setting a command may read, with its default.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub labels: Vec<usize>,
    /// Label counts for the piecewise constant runs of `convex-exact`.
    pub baseline_labels: Vec<usize>,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub mode: ModeChoice,
    pub data_weight: f64,
    pub eta: String,
    pub eta_weight: f64,
    pub huber_threshold: f64,
    pub kappa: String,
    pub kappa_weight: f64,
    pub kappa_cap: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub size: usize,
    pub row: Option<usize>,
    pub solver: SolverConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            labels: vec![2, 3, 5],
            baseline_labels: vec![2, 3, 5, 16],
            gamma_min: 0.0,
            gamma_max: 1.0,
            mode: ModeChoice::Both,
            data_weight: 1.0,
            eta: "squared".into(),
            eta_weight: 3.0,
            huber_threshold: 0.05,
            kappa: "infinite".into(),
            kappa_weight: 0.1,
            kappa_cap: 1.0,
            noise_sigma: 0.0,
            seed: 1,
            input: None,
            truth: None,
            output_dir: PathBuf::from("out"),
            size: 64,
            row: None,
            solver: SolverConfig::default(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "labels",
    "baseline_labels",
    "gamma_min",
    "gamma_max",
    "mode",
    "data_weight",
    "eta",
    "eta_weight",
    "huber_threshold",
    "kappa",
    "kappa_weight",
    "kappa_cap",
    "noise_sigma",
    "seed",
    "input",
    "truth",
    "output_dir",
    "size",
    "row",
    "max_iters",
    "stop_tol",
    "check_every",
    "patience",
    "theta",
    "step_ratio",
    "tau",
    "sigma",
    "execution",
    "timing",
    "dykstra_tol",
    "dykstra_max_iter",
];

impl RunConfig {
    /// Applies `kv` on top of `self`; unknown keys are rejected.
    pub fn apply(mut self, kv: &KeyValues) -> Result<Self, ConfigError> {
        if let Some(k) = kv.keys().find(|k| !KEYS.contains(k)) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        let s = &mut self.solver;
        let mut tau = None;
        let mut sigma = None;
        for (key, value) in kv.0.iter() {
            let v = value.as_str();
            match key.as_str() {
                "labels" => self.labels = parse_list(key, v)?,
                "baseline_labels" => self.baseline_labels = parse_list(key, v)?,
                "gamma_min" => self.gamma_min = parse(key, v)?,
                "gamma_max" => self.gamma_max = parse(key, v)?,
                "mode" => {
                    self.mode = match v {
                        "linear" => ModeChoice::Linear,
                        "constant" => ModeChoice::Constant,
                        "both" => ModeChoice::Both,
                        _ => return Err(bad(key, v, "expected linear, constant or both")),
                    }
                }
                "data_weight" => self.data_weight = parse(key, v)?,
                "eta" => self.eta = v.to_string(),
                "eta_weight" => self.eta_weight = parse(key, v)?,
                "huber_threshold" => self.huber_threshold = parse(key, v)?,
                "kappa" => self.kappa = v.to_string(),
                "kappa_weight" => self.kappa_weight = parse(key, v)?,
                "kappa_cap" => self.kappa_cap = parse(key, v)?,
                "noise_sigma" => self.noise_sigma = parse(key, v)?,
                "seed" => self.seed = parse(key, v)?,
                "input" => self.input = Some(PathBuf::from(v)),
                "truth" => self.truth = Some(PathBuf::from(v)),
                "output_dir" => self.output_dir = PathBuf::from(v),
                "size" => self.size = parse(key, v)?,
                "row" => self.row = Some(parse(key, v)?),
                "max_iters" => s.max_iters = parse(key, v)?,
                "stop_tol" => s.stop_tol = parse(key, v)?,
                "check_every" => s.check_every = parse(key, v)?,
                "patience" => s.patience = parse(key, v)?,
                "theta" => s.theta = parse(key, v)?,
                "step_ratio" => s.steps = StepRule::Auto { ratio: parse(key, v)? },
                "tau" => tau = Some(parse(key, v)?),
                "sigma" => sigma = Some(parse(key, v)?),
                "execution" => {
                    s.execution = match v {
                        "parallel" => Execution::Parallel,
                        "sequential" => Execution::Sequential,
                        _ => return Err(bad(key, v, "expected parallel or sequential")),
                    }
                }
                "timing" => s.timing = parse(key, v)?,
                "dykstra_tol" => s.dykstra_tol = parse(key, v)?,
                "dykstra_max_iter" => s.dykstra_max_iter = parse(key, v)?,
                _ => unreachable!("checked against KEYS"),
            }
        }
        match (tau, sigma) {
            (Some(tau), Some(sigma)) => s.steps = StepRule::Fixed { tau, sigma },
            (None, None) => {}
            _ => return Err(bad("tau", "", "tau and sigma must be given together")),
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        for &l in self.labels.iter().chain(&self.baseline_labels) {
            self.grid(l).map_err(|e| bad("labels", &l.to_string(), &e.to_string()))?;
        }
        self.regularizer()?;
        self.solver
            .validate()
            .map_err(|e| bad("solver", "", &e.to_string()))?;
        if !(self.data_weight >= 0.0 && self.data_weight.is_finite()) {
            return Err(bad("data_weight", &self.data_weight.to_string(), "must be finite and nonnegative"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(bad("noise_sigma", &self.noise_sigma.to_string(), "must be nonnegative"));
        }
        if self.size == 0 {
            return Err(bad("size", "0", "must be positive"));
        }
        Ok(())
    }

    pub fn grid(&self, ell: usize) -> Result<LabelGrid, sublift_core::grid::GridError> {
        LabelGrid::new(self.gamma_min, self.gamma_max, ell)
    }

    pub fn regularizer(&self) -> Result<RegularizerSpec, ConfigError> {
        let eta = match self.eta.as_str() {
            "squared" => Eta::SquaredNorm { weight: self.eta_weight },
            "norm" => Eta::Norm { weight: self.eta_weight },
            "huber" => Eta::Huber {
                weight: self.eta_weight,
                threshold: self.huber_threshold,
            },
            other => return Err(bad("eta", other, "expected squared, norm or huber")),
        };
        let kappa = match self.kappa.as_str() {
            "infinite" => Kappa::Infinite,
            "constant" => Kappa::ConstantJump { height: self.kappa_weight },
            "linear" => Kappa::Linear { slope: self.kappa_weight },
            "truncated" => Kappa::TruncatedLinear {
                slope: self.kappa_weight,
                cap: self.kappa_cap,
            },
            other => return Err(bad("kappa", other, "expected infinite, constant, linear or truncated")),
        };
        let reg = RegularizerSpec::new(eta, kappa);
        reg.validate().map_err(|e| bad("eta/kappa", "", &e.to_string()))?;
        Ok(reg)
    }
}

fn bad(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| bad(key, v, &e.to_string()))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>, ConfigError> {
    let list: Vec<usize> = v
        .split(',')
        .map(|x| parse(key, x.trim()))
        .collect::<Result<_, _>>()?;
    if list.is_empty() {
        return Err(bad(key, v, "empty list"));
    }
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn later_assignments_win() {
        let mut kv = KeyValues::parse("labels = 2,4\n# comment\nseed=3 # trailing\nseed = 9\n").unwrap();
        kv.set("--labels", "6");
        let cfg = RunConfig::default().apply(&kv).unwrap();
        assert_eq!(cfg.labels, vec![6]);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn dashes_and_underscores_match() {
        let mut kv = KeyValues::default();
        kv.set("--data-weight", "2.5");
        assert_eq!(RunConfig::default().apply(&kv).unwrap().data_weight, 2.5);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(KeyValues::parse("labels 3"), Err(ConfigError::Syntax { line: 1 })));
        let kv = KeyValues::parse("colour = red").unwrap();
        assert!(matches!(RunConfig::default().apply(&kv), Err(ConfigError::UnknownKey(_))));
        let kv = KeyValues::parse("labels = 1").unwrap();
        assert!(RunConfig::default().apply(&kv).is_err());
        let kv = KeyValues::parse("tau = 0.1").unwrap();
        assert!(RunConfig::default().apply(&kv).is_err());
        let kv = KeyValues::parse("mode = dual").unwrap();
        assert!(RunConfig::default().apply(&kv).is_err());
    }

    #[test]
    fn regularizer_choices() {
        let kv = KeyValues::parse("eta = huber\nkappa = truncated\nkappa_cap = 0.5").unwrap();
        let cfg = RunConfig::default().apply(&kv).unwrap();
        assert!(matches!(cfg.regularizer().unwrap().kappa, Kappa::TruncatedLinear { cap, .. } if cap == 0.5));
    }
}
