//! Line-oriented `key = value` run configuration.
//!
//! Values are validated per key; every error names the offending key and the
//! constraint it broke. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use tgge::ModelParams;

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Tgge,
    FreeFermion,
    Trajectories,
    DenseLindblad,
    Fit,
    Compare,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Tgge,
        Mode::FreeFermion,
        Mode::Trajectories,
        Mode::DenseLindblad,
        Mode::Fit,
        Mode::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Tgge => "tgge",
            Mode::FreeFermion => "free-fermion",
            Mode::Trajectories => "trajectories",
            Mode::DenseLindblad => "dense-lindblad",
            Mode::Fit => "fit",
            Mode::Compare => "compare",
        }
    }

    fn uses_chain(self) -> bool {
        matches!(self, Mode::Trajectories | Mode::DenseLindblad | Mode::Compare)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ConfigError::Type {
                key: "mode".into(),
                value: s.into(),
                expected: "one of tgge, free-fermion, trajectories, dense-lindblad, fit, compare",
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

/// Checkpoints either listed explicitly or log-spaced as `log:t0:t1:count`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CheckpointSpec {
    List(Vec<f64>),
    Log { lo: f64, hi: f64, count: usize },
}

impl CheckpointSpec {
    /// Checkpoint values in `κt`.
    pub fn resolve(&self) -> Vec<f64> {
        match self {
            CheckpointSpec::List(v) => v.clone(),
            CheckpointSpec::Log { lo, hi, count } => tgge::log_checkpoints(*lo, *hi, *count, 1.0),
        }
    }

    fn text(&self) -> String {
        match self {
            CheckpointSpec::List(v) => join(v),
            CheckpointSpec::Log { lo, hi, count } => format!("log:{lo}:{hi}:{count}"),
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub params: ModelParams,
    /// Momentum grid size `M`.
    pub grid_size: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub dt_init: f64,
    pub max_steps: usize,
    pub checkpoints: CheckpointSpec,
    /// `κt` values with per-momentum output files.
    pub snapshots: Vec<f64>,
    pub fit_window: (f64, f64),
    pub sites: Option<usize>,
    pub n_traj: usize,
    pub seed: u64,
    pub traj_rel_tol: f64,
    pub out: PathBuf,
    pub format: OutputFormat,
    /// Series file analysed in fit mode.
    pub input: Option<PathBuf>,
}

impl RunConfig {
    /// Output times: checkpoints merged with snapshots, sorted, deduplicated.
    pub fn times(&self) -> Vec<f64> {
        let mut t = self.checkpoints.resolve();
        t.extend(&self.snapshots);
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    /// Canonical configuration text; parsing it reproduces this config.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut lines = vec![
            format!("mode = {}", self.mode),
            format!("J = {:?}", p.j),
            format!("kappa = {:?}", p.kappa),
            format!("phi = {:?}", p.phi),
            format!("theta = {:?}", p.theta),
            format!("M = {}", self.grid_size),
            format!("rel_tol = {:?}", self.rel_tol),
            format!("abs_tol = {:?}", self.abs_tol),
            format!("dt_init = {:?}", self.dt_init),
            format!("max_steps = {}", self.max_steps),
            format!("checkpoints = {}", self.checkpoints.text()),
            format!("snapshots = {}", join(&self.snapshots)),
            format!("fit_window = {:?}, {:?}", self.fit_window.0, self.fit_window.1),
        ];
        if let Some(l) = self.sites {
            lines.push(format!("L = {l}"));
        }
        lines.push(format!("n_traj = {}", self.n_traj));
        lines.push(format!("seed = {}", self.seed));
        lines.push(format!("traj_rel_tol = {:?}", self.traj_rel_tol));
        lines.push(format!("out = {}", self.out.display()));
        lines.push(format!(
            "format = {}",
            match self.format {
                OutputFormat::Csv => "csv",
                OutputFormat::JsonLines => "json-lines",
            }
        ));
        if let Some(i) = &self.input {
            lines.push(format!("input = {}", i.display()));
        }
        lines.join("\n") + "\n"
    }
}

const KEYS: &[&str] = &[
    "mode",
    "J",
    "kappa",
    "phi",
    "theta",
    "M",
    "rel_tol",
    "abs_tol",
    "dt_init",
    "max_steps",
    "checkpoints",
    "snapshots",
    "fit_window",
    "L",
    "n_traj",
    "seed",
    "traj_rel_tol",
    "out",
    "format",
    "input",
];

/// Raw key/value pairs before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: no + 1,
                    text: raw.trim().into(),
                });
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    key: key.into(),
                    line: no + 1,
                });
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate { key: key.into() });
            }
        }
        Ok(Self { values })
    }

    /// Sets or replaces a value (command-line overrides).
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                key: key.into(),
                line: 0,
            });
        }
        self.values.insert(key.into(), value.into());
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse_as<T: FromStr>(&self, key: &str, expected: &'static str) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|_| ConfigError::Type {
                    key: key.into(),
                    value: v.into(),
                    expected,
                })
            })
            .transpose()
    }

    fn float(&self, key: &str, default: Option<f64>) -> Result<Option<f64>, ConfigError> {
        match self.parse_as::<f64>(key, "a number")? {
            Some(v) if !v.is_finite() => Err(range(key, v, "finite")),
            Some(v) => Ok(Some(v)),
            None => Ok(default),
        }
    }

    fn float_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let Some(v) = self.get(key) else {
            return Ok(Vec::new());
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| ConfigError::Type {
                        key: key.into(),
                        value: v.into(),
                        expected: "a comma-separated list of numbers",
                    })
            })
            .collect()
    }

    fn required_float(&self, key: &str, mode: Mode) -> Result<f64, ConfigError> {
        self.float(key, None)?.ok_or_else(|| ConfigError::Missing {
            key: key.into(),
            mode: mode.name(),
        })
    }

    /// Validates into a [`RunConfig`]. `mode` overrides the `mode` key.
    pub fn build(&self, mode: Option<Mode>) -> Result<RunConfig, ConfigError> {
        let mode = match (mode, self.get("mode")) {
            (Some(m), _) => m,
            (None, Some(v)) => v.parse()?,
            (None, None) => {
                return Err(ConfigError::Missing {
                    key: "mode".into(),
                    mode: "any",
                })
            }
        };

        let j = self.float("J", Some(1.0))?.unwrap();
        let kappa = if mode == Mode::Fit {
            self.float("kappa", Some(1.0))?.unwrap()
        } else {
            self.required_float("kappa", mode)?
        };
        if !(kappa > 0.0) {
            return Err(range("kappa", kappa, "kappa > 0"));
        }
        let phi = self.float("phi", Some(0.0))?.unwrap();
        if !(phi > -PI && phi <= PI) {
            return Err(range("phi", phi, "phi in (-pi, pi]"));
        }
        let theta = self.float("theta", Some(0.0))?.unwrap();
        if !(0.0..FRAC_PI_2).contains(&theta) {
            return Err(range("theta", theta, "theta in [0, pi/2)"));
        }
        let params = ModelParams::new(j, kappa, phi, theta).map_err(|e| ConfigError::Range {
            key: "J".into(),
            value: j.to_string(),
            constraint: e.to_string(),
        })?;

        let grid_size = self.parse_as::<usize>("M", "a positive integer")?.unwrap_or(4096);
        if grid_size < 8 || !grid_size.is_power_of_two() {
            return Err(range("M", grid_size as f64, "power of two, at least 8"));
        }
        let rel_tol = self.float("rel_tol", Some(1e-8))?.unwrap();
        let abs_tol = self.float("abs_tol", Some(1e-12))?.unwrap();
        let dt_init = self.float("dt_init", Some(1e-4))?.unwrap();
        let traj_rel_tol = self.float("traj_rel_tol", Some(1e-6))?.unwrap();
        for (key, v) in [
            ("rel_tol", rel_tol),
            ("abs_tol", abs_tol),
            ("dt_init", dt_init),
            ("traj_rel_tol", traj_rel_tol),
        ] {
            if !(v > 0.0) {
                return Err(range(key, v, "> 0"));
            }
        }
        let max_steps = self
            .parse_as::<usize>("max_steps", "a positive integer")?
            .unwrap_or(5_000_000);
        if max_steps == 0 {
            return Err(range("max_steps", 0.0, ">= 1"));
        }

        let checkpoints = self.checkpoints()?;
        let snapshots = self.float_list("snapshots")?;
        check_times("snapshots", &snapshots)?;

        let fit_window = match self.float_list("fit_window")?.as_slice() {
            [] => (50.0, 1e4),
            [lo, hi] if *lo > 0.0 && hi > lo => (*lo, *hi),
            _ => {
                return Err(ConfigError::Range {
                    key: "fit_window".into(),
                    value: self.get("fit_window").unwrap_or("").into(),
                    constraint: "two numbers 0 < lo < hi".into(),
                })
            }
        };

        let sites = self.parse_as::<usize>("L", "an integer")?;
        if mode.uses_chain() {
            let l = sites.ok_or_else(|| ConfigError::Missing {
                key: "L".into(),
                mode: mode.name(),
            })?;
            if !(4..=14).contains(&l) {
                return Err(range("L", l as f64, "4 <= L <= 14"));
            }
            if mode == Mode::DenseLindblad && l > 6 {
                return Err(range("L", l as f64, "L <= 6 for dense-lindblad"));
            }
        }
        let n_traj = self.parse_as::<usize>("n_traj", "a positive integer")?.unwrap_or(1000);
        if n_traj == 0 {
            return Err(range("n_traj", 0.0, ">= 1"));
        }
        let seed = self.parse_as::<u64>("seed", "an unsigned 64-bit integer")?.unwrap_or(0);

        let out = PathBuf::from(self.get("out").unwrap_or("out"));
        let format = match self.get("format").unwrap_or("csv") {
            "csv" => OutputFormat::Csv,
            "json-lines" => OutputFormat::JsonLines,
            other => {
                return Err(ConfigError::Type {
                    key: "format".into(),
                    value: other.into(),
                    expected: "csv or json-lines",
                })
            }
        };
        let input = self.get("input").map(PathBuf::from);
        if mode == Mode::Fit && input.is_none() {
            return Err(ConfigError::Missing {
                key: "input".into(),
                mode: mode.name(),
            });
        }

        Ok(RunConfig {
            mode,
            params,
            grid_size,
            rel_tol,
            abs_tol,
            dt_init,
            max_steps,
            checkpoints,
            snapshots,
            fit_window,
            sites,
            n_traj,
            seed,
            traj_rel_tol,
            out,
            format,
            input,
        })
    }

    fn checkpoints(&self) -> Result<CheckpointSpec, ConfigError> {
        let Some(text) = self.get("checkpoints") else {
            return Ok(CheckpointSpec::List(Vec::new()));
        };
        if let Some(rest) = text.strip_prefix("log:") {
            let parts: Vec<&str> = rest.split(':').collect();
            let bad = || ConfigError::Type {
                key: "checkpoints".into(),
                value: text.into(),
                expected: "log:t0:t1:count",
            };
            let [lo, hi, count] = parts.as_slice() else {
                return Err(bad());
            };
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            let count: usize = count.trim().parse().map_err(|_| bad())?;
            if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) || count < 2 {
                return Err(ConfigError::Range {
                    key: "checkpoints".into(),
                    value: text.into(),
                    constraint: "0 < t0 < t1 and count >= 2".into(),
                });
            }
            return Ok(CheckpointSpec::Log { lo, hi, count });
        }
        let list = self.float_list("checkpoints")?;
        check_times("checkpoints", &list)?;
        Ok(CheckpointSpec::List(list))
    }
}

fn check_times(key: &str, v: &[f64]) -> Result<(), ConfigError> {
    if let Some(bad) = v.iter().find(|t| **t < 0.0) {
        return Err(range(key, *bad, "times >= 0"));
    }
    if v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ConfigError::Range {
            key: key.into(),
            value: join(v),
            constraint: "strictly increasing".into(),
        });
    }
    Ok(())
}

fn range(key: &str, value: f64, constraint: &str) -> ConfigError {
    ConfigError::Range {
        key: key.into(),
        value: value.to_string(),
        constraint: constraint.into(),
    }
}

/// Parses configuration text; the `mode` key is required.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    RawConfig::parse(text)?.build(None)
}
