//! Sweep specification and its flat `key = value` config grammar.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Lists are comma separated. Keys:
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `dataset` | IDX file or signal cache with the test signals | required |
//! | `images` | number of leading test signals to use | 200 |
//! | `train_dataset` | signals for prior estimation (`iid`, `noniid`) | none |
//! | `train_images` | number of leading training signals to use | 5000 |
//! | `model` | GRBM model file (`grbm` mode) | none |
//! | `mode` | `iid`, `noniid` or `grbm` | `grbm` |
//! | `alphas` | measurement rates | `0.1,0.15,0.25` |
//! | `repetitions` | instances per (image, alpha) | 1 |
//! | `delta` | noise variance | `1e-8` |
//! | `seed` | run seed | 0 |
//! | `out_dir` | output directory | `results` |
//! | `rho_bin_width` | bin width for aggregation | `0.025` |
//! | `damping` | outer damping; default depends on mode | |
//! | `tol_out`, `max_outer` | outer stopping rule | `1e-7`, 250 |
//! | `tol_in`, `max_inner` | TAP stopping rule | `1e-9`, 100 |
//! | `scaling` | `unit-column` or `sqrt-n` | `unit-column` |
//! | `bounds` | slab truncation `lo,hi` for estimated priors | `0,1` |
//! | `binarize` | threshold applied to all signals | none |
//! | `correlation` | `pearson` or `unnormalized` | `pearson` |

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::Scaling;
use crate::error::{Error, Result};
use crate::experiment::metrics::CorrelationKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    Iid,
    NonIid,
    Grbm,
}

impl SolverMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverMode::Iid => "iid",
            SolverMode::NonIid => "noniid",
            SolverMode::Grbm => "grbm",
        }
    }
}

impl FromStr for SolverMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(SolverMode::Iid),
            "noniid" | "non-iid" => Ok(SolverMode::NonIid),
            "grbm" => Ok(SolverMode::Grbm),
            _ => Err(Error::Config(format!("unknown mode `{s}` (iid, noniid, grbm)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub dataset: Option<PathBuf>,
    pub images: usize,
    pub train_dataset: Option<PathBuf>,
    pub train_images: usize,
    pub model: Option<PathBuf>,
    pub mode: SolverMode,
    pub alphas: Vec<f64>,
    pub repetitions: usize,
    pub delta: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub rho_bin_width: f64,
    pub damping: Option<f64>,
    pub tol_out: f64,
    pub max_outer: usize,
    pub tol_in: f64,
    pub max_inner: usize,
    pub scaling: Scaling,
    pub bounds: (f64, f64),
    pub binarize: Option<f64>,
    pub correlation: CorrelationKind,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            dataset: None,
            images: 200,
            train_dataset: None,
            train_images: 5000,
            model: None,
            mode: SolverMode::Grbm,
            alphas: vec![0.1, 0.15, 0.25],
            repetitions: 1,
            delta: 1e-8,
            seed: 0,
            out_dir: PathBuf::from("results"),
            rho_bin_width: 0.025,
            damping: None,
            tol_out: 1e-7,
            max_outer: 250,
            tol_in: 1e-9,
            max_inner: 100,
            scaling: Scaling::UnitColumn,
            bounds: (0.0, 1.0),
            binarize: None,
            correlation: CorrelationKind::Pearson,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

/// Splits config text into `(key, value)` pairs in file order.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected `key = value`", i + 1)));
        };
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

impl ExperimentSpec {
    /// Defaults overridden by the settings in a config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::default();
        for (k, v) in parse_config(&text)? {
            spec.set(&k, &v)?;
        }
        Ok(spec)
    }

    /// Applies one setting. Unknown keys are configuration errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = || Some(PathBuf::from(value));
        match key {
            "dataset" => self.dataset = path(),
            "images" => self.images = parse(key, value)?,
            "train_dataset" => self.train_dataset = path(),
            "train_images" => self.train_images = parse(key, value)?,
            "model" => self.model = path(),
            "mode" => self.mode = value.parse()?,
            "alphas" => self.alphas = parse_list(key, value)?,
            "repetitions" => self.repetitions = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "rho_bin_width" => self.rho_bin_width = parse(key, value)?,
            "damping" => self.damping = Some(parse(key, value)?),
            "tol_out" => self.tol_out = parse(key, value)?,
            "max_outer" => self.max_outer = parse(key, value)?,
            "tol_in" => self.tol_in = parse(key, value)?,
            "max_inner" => self.max_inner = parse(key, value)?,
            "scaling" => {
                self.scaling = match value {
                    "unit-column" => Scaling::UnitColumn,
                    "sqrt-n" => Scaling::SqrtN,
                    _ => return Err(Error::Config(format!("unknown scaling `{value}`"))),
                }
            }
            "bounds" => match parse_list(key, value)?[..] {
                [lo, hi] => self.bounds = (lo, hi),
                _ => return Err(Error::Config("`bounds` takes `lo,hi`".into())),
            },
            "binarize" => self.binarize = Some(parse(key, value)?),
            "correlation" => {
                self.correlation = match value {
                    "pearson" => CorrelationKind::Pearson,
                    "unnormalized" => CorrelationKind::Unnormalized,
                    _ => return Err(Error::Config(format!("unknown correlation `{value}`"))),
                }
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Checks ranges and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let Some(ds) = &self.dataset else {
            return bad("`dataset` is required".into());
        };
        let mut files = vec![ds];
        match self.mode {
            SolverMode::Grbm => match &self.model {
                Some(m) => files.push(m),
                None => return bad("`model` is required in grbm mode".into()),
            },
            _ => match &self.train_dataset {
                Some(t) => files.push(t),
                None => return bad(format!("`train_dataset` is required in {} mode", self.mode.as_str())),
            },
        }
        for f in files {
            if !f.is_file() {
                return bad(format!("{} does not exist", f.display()));
            }
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return bad("`alphas` must be a non-empty list in (0, 1]".into());
        }
        if self.images == 0 || self.repetitions == 0 {
            return bad("`images` and `repetitions` must be at least 1".into());
        }
        if self.repetitions >= 1 << 14 || self.alphas.len() >= 1 << 14 {
            return bad("at most 16383 repetitions and alphas".into());
        }
        if !(self.delta > 0.0) {
            return bad("`delta` must be positive".into());
        }
        if !(self.rho_bin_width > 0.0) {
            return bad("`rho_bin_width` must be positive".into());
        }
        if !(self.bounds.0 < self.bounds.1) {
            return bad("`bounds` needs lo < hi".into());
        }
        Ok(())
    }
}
