//! Flat `key = value` experiment configuration.
//!
//! Lines starting with `#` are comments. Later assignments override
//! earlier ones, so command-line overrides are applied after the file.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::circuit::Basis;
use crate::error::{Error, Result};
use crate::layout::CheckKind;
use crate::policy::{theta_grid, CostModel, DEFAULT_C_GRID};
use crate::predictor::{Architecture, OslaInput, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Fd,
    Osla,
    AdAbort,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Fd => "fd",
            PolicyKind::Osla => "osla",
            PolicyKind::AdAbort => "adabort",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "fd" => Ok(PolicyKind::Fd),
            "osla" => Ok(PolicyKind::Osla),
            "adabort" => Ok(PolicyKind::AdAbort),
            other => Err(Error::Config(format!("unknown policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub distance: usize,
    pub error_rate: f64,
    /// Syndrome rounds; defaults to the distance.
    pub rounds: Option<usize>,
    pub basis: Basis,
    pub shots: usize,
    pub seed: u64,
    /// Fraction of successful shots kept in training sets.
    pub keep_success: f64,
    pub arch: Architecture,
    pub train: TrainConfig,
    pub osla_input: OslaInput,
    pub osla_shared_label: bool,
    pub cost: CostModel,
    pub theta: Vec<f64>,
    pub c: Vec<f64>,
    pub theta_grid: Vec<f64>,
    pub c_grid: Vec<f64>,
    /// Stop threshold checks one round before the end.
    pub cap_last: bool,
    pub policies: Vec<PolicyKind>,
    pub out: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub osla_checkpoint: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            distance: 3,
            error_rate: 0.001,
            rounds: None,
            basis: CheckKind::X,
            shots: 10_000,
            seed: 1,
            keep_success: 1.0,
            arch: Architecture::Cnn1d,
            train: TrainConfig::default(),
            osla_input: OslaInput::Lookahead,
            osla_shared_label: false,
            cost: CostModel::default(),
            theta: vec![0.5],
            c: vec![-0.01],
            theta_grid: theta_grid(20),
            c_grid: DEFAULT_C_GRID.to_vec(),
            cap_last: false,
            policies: vec![PolicyKind::Fd, PolicyKind::Osla, PolicyKind::AdAbort],
            out: None,
            dataset: None,
            checkpoint: None,
            osla_checkpoint: None,
        }
    }
}

fn list<T>(v: &[T], f: impl Fn(&T) -> String) -> String {
    v.iter().map(f).collect::<Vec<_>>().join(",")
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_num(key, s.trim())).collect()
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn path_str(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl ExperimentConfig {
    pub fn rounds(&self) -> usize {
        self.rounds.unwrap_or(self.distance)
    }

    /// Applies one assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let path = || if v.is_empty() { None } else { Some(PathBuf::from(v)) };
        match key.trim() {
            "d" | "distance" => self.distance = parse_num(key, v)?,
            "p" | "error_rate" => self.error_rate = parse_num(key, v)?,
            "rounds" => self.rounds = if v.is_empty() { None } else { Some(parse_num(key, v)?) },
            "basis" => {
                self.basis = match v {
                    "X" | "x" => CheckKind::X,
                    "Z" | "z" => CheckKind::Z,
                    _ => return Err(Error::Config(format!("basis: expected X or Z, got {v:?}"))),
                }
            }
            "shots" => self.shots = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "keep_success" => self.keep_success = parse_num(key, v)?,
            "arch" => self.arch = Architecture::parse(v)?,
            "epochs" => self.train.max_epochs = parse_num(key, v)?,
            "batch_size" => self.train.batch_size = parse_num(key, v)?,
            "learning_rate" => self.train.learning_rate = parse_num(key, v)?,
            "patience" => self.train.patience = parse_num(key, v)?,
            "validation_fraction" => self.train.validation_fraction = parse_num(key, v)?,
            "max_class_weight" => self.train.max_class_weight = parse_num(key, v)?,
            "osla_input" => {
                self.osla_input = match v {
                    "lookahead" => OslaInput::Lookahead,
                    "full" => OslaInput::FullTrajectory,
                    _ => return Err(Error::Config(format!("osla_input: expected lookahead or full, got {v:?}"))),
                }
            }
            "osla_shared_label" => self.osla_shared_label = parse_bool(key, v)?,
            "round_time_us" => self.cost.round_time = parse_num(key, v)?,
            "reset_time_us" => self.cost.reset_time = parse_num(key, v)?,
            "decode_fail_time_us" => self.cost.decode_fail_time = parse_num(key, v)?,
            "theta" => self.theta = parse_list(key, v)?,
            "c" => self.c = parse_list(key, v)?,
            "theta_grid" => {
                self.theta_grid = match v.parse::<usize>() {
                    Ok(n) => theta_grid(n),
                    Err(_) => parse_list(key, v)?,
                }
            }
            "c_grid" => self.c_grid = parse_list(key, v)?,
            "cap_last" => self.cap_last = parse_bool(key, v)?,
            "policies" => self.policies = v.split(',').map(|s| PolicyKind::parse(s.trim())).collect::<Result<_>>()?,
            "out" => self.out = path(),
            "dataset" => self.dataset = path(),
            "checkpoint" => self.checkpoint = path(),
            "osla_checkpoint" => self.osla_checkpoint = path(),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.distance < 3 || self.distance % 2 == 0 {
            return fail("d must be odd and at least 3");
        }
        if !(0.0..0.5).contains(&self.error_rate) {
            return fail("p must lie in [0, 0.5)");
        }
        if self.rounds() == 0 {
            return fail("rounds must be positive");
        }
        if self.shots == 0 {
            return fail("shots must be positive");
        }
        if !(self.keep_success > 0.0 && self.keep_success <= 1.0) {
            return fail("keep_success must lie in (0, 1]");
        }
        if self.theta.iter().chain(&self.theta_grid).any(|t| !(*t > 0.0 && *t < 1.0)) {
            return fail("theta values must lie in (0, 1)");
        }
        if self.c.iter().chain(&self.c_grid).any(|c| !(*c < 0.0)) {
            return fail("continuation costs must be negative");
        }
        if self.train.batch_size == 0 || self.train.max_epochs == 0 {
            return fail("batch_size and epochs must be positive");
        }
        if !(0.0..1.0).contains(&self.train.validation_fraction) {
            return fail("validation_fraction must lie in [0, 1)");
        }
        self.cost.validate()
    }

    /// Canonical listing of every key, used for metadata and hashing.
    pub fn to_text(&self) -> String {
        let f = |v: &f64| v.to_string();
        let basis = match self.basis {
            CheckKind::X => "X",
            CheckKind::Z => "Z",
        };
        let osla_input = match self.osla_input {
            OslaInput::Lookahead => "lookahead",
            OslaInput::FullTrajectory => "full",
        };
        let t = &self.train;
        [
            ("d", self.distance.to_string()),
            ("p", self.error_rate.to_string()),
            ("rounds", self.rounds().to_string()),
            ("basis", basis.to_string()),
            ("shots", self.shots.to_string()),
            ("seed", self.seed.to_string()),
            ("keep_success", self.keep_success.to_string()),
            ("arch", self.arch.name().to_string()),
            ("epochs", t.max_epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("patience", t.patience.to_string()),
            ("validation_fraction", t.validation_fraction.to_string()),
            ("max_class_weight", t.max_class_weight.to_string()),
            ("osla_input", osla_input.to_string()),
            ("osla_shared_label", self.osla_shared_label.to_string()),
            ("round_time_us", self.cost.round_time.to_string()),
            ("reset_time_us", self.cost.reset_time.to_string()),
            ("decode_fail_time_us", self.cost.decode_fail_time.to_string()),
            ("theta", list(&self.theta, f)),
            ("c", list(&self.c, f)),
            ("theta_grid", list(&self.theta_grid, f)),
            ("c_grid", list(&self.c_grid, f)),
            ("cap_last", self.cap_last.to_string()),
            ("policies", list(&self.policies, |p| p.name().to_string())),
            ("out", path_str(&self.out)),
            ("dataset", path_str(&self.dataset)),
            ("checkpoint", path_str(&self.checkpoint)),
            ("osla_checkpoint", path_str(&self.osla_checkpoint)),
        ]
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
    }

    /// SHA-256 of the canonical listing, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}
