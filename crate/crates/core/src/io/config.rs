//! On-disk run configuration: one `key = value` pair per line with dotted
//! section prefixes, `#` comments and blank lines ignored.

use crate::flow::{DtPolicy, FlowConfig, StepperKind};
use crate::grid::{GridSpec, Scheme};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{key}: {message}")]
pub struct ConfigError {
    /// Offending key, or `<line N>` when the line has no key.
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self { key: key.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialKind {
    PerturbedMin,
    CustomSnapshot(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConfig {
    pub kind: InitialKind,
    pub amplitude: f64,
    pub max_mode: usize,
    pub seed: u64,
    /// Constant coefficients added along `ω₁, ω₂, ω₃`.
    pub shift: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: usize,
    pub scheme: Scheme,
    pub flow: FlowConfig,
    pub initial: InitialConfig,
    pub out_dir: PathBuf,
    pub emit_svg: bool,
    /// Start of the window used for the decay-rate fit, as a fraction of `t_end`.
    pub fit_from: f64,
    /// Number of evenly spaced time slices examined by `compare`.
    pub compare_slices: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 8,
            scheme: Scheme::Spectral,
            flow: FlowConfig::default(),
            initial: InitialConfig {
                kind: InitialKind::PerturbedMin,
                amplitude: 0.01,
                max_mode: 1,
                seed: 0,
                shift: [0.0; 3],
            },
            out_dir: PathBuf::from("out"),
            emit_svg: false,
            fit_from: 0.5,
            compare_slices: 3,
        }
    }
}

const KEYS: &[&str] = &[
    "grid.n",
    "grid.scheme",
    "flow.integrator",
    "flow.dt",
    "flow.c_cfl",
    "flow.t_end",
    "flow.projection_cadence",
    "flow.output_cadence",
    "imex.theta",
    "imex.coefficient",
    "imex.tol",
    "imex.max_iter",
    "initial.kind",
    "initial.amplitude",
    "initial.max_mode",
    "initial.seed",
    "initial.shift",
    "initial.snapshot",
    "output.dir",
    "output.emit_svg",
    "output.fit_from",
    "compare.slices",
];

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::new(key, format!("cannot parse {v:?}")))
}

fn positive(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = number(key, v)?;
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(ConfigError::new(key, "must be a positive number"))
    }
}

fn boolean(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::new(key, format!("expected true or false, got {v:?}"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut dt: Option<f64> = None;
        let mut c_cfl: Option<f64> = None;
        let mut kind: Option<String> = None;
        let mut snapshot: Option<PathBuf> = None;
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| ConfigError::new(format!("<line {}>", lineno + 1), "expected `key = value`"))?;
            if !KEYS.contains(&key) {
                return Err(ConfigError::new(key, "unknown key"));
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::new(key, "duplicate key"));
            }
            match key {
                "grid.n" => cfg.n = number(key, value)?,
                "grid.scheme" => {
                    cfg.scheme = Scheme::parse(value)
                        .ok_or_else(|| ConfigError::new(key, "expected spectral or central4"))?
                }
                "flow.integrator" => {
                    cfg.flow.integrator =
                        StepperKind::parse(value).ok_or_else(|| ConfigError::new(key, "expected rk4 or imex"))?
                }
                "flow.dt" => dt = Some(positive(key, value)?),
                "flow.c_cfl" => c_cfl = Some(positive(key, value)?),
                "flow.t_end" => cfg.flow.t_end = positive(key, value)?,
                "flow.projection_cadence" => cfg.flow.projection_cadence = cadence(key, value)?,
                "flow.output_cadence" => cfg.flow.output_cadence = cadence(key, value)?,
                "imex.theta" => {
                    let t: f64 = number(key, value)?;
                    if !(0.0..=1.0).contains(&t) || t == 0.0 {
                        return Err(ConfigError::new(key, "must lie in (0, 1]"));
                    }
                    cfg.flow.imex.theta = t;
                }
                "imex.coefficient" => {
                    cfg.flow.imex.coefficient = match value {
                        "auto" => None,
                        v => Some(positive(key, v)?),
                    }
                }
                "imex.tol" => cfg.flow.imex.tol = positive(key, value)?,
                "imex.max_iter" => cfg.flow.imex.max_iter = cadence(key, value)? as usize,
                "initial.kind" => kind = Some(value.to_string()),
                "initial.amplitude" => {
                    let a: f64 = number(key, value)?;
                    if !(a.is_finite() && a >= 0.0) {
                        return Err(ConfigError::new(key, "must be non-negative"));
                    }
                    cfg.initial.amplitude = a;
                }
                "initial.max_mode" => cfg.initial.max_mode = number(key, value)?,
                "initial.seed" => cfg.initial.seed = number(key, value)?,
                "initial.shift" => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    if parts.len() != 3 {
                        return Err(ConfigError::new(key, "expected three comma-separated numbers"));
                    }
                    for (s, p) in cfg.initial.shift.iter_mut().zip(parts) {
                        *s = number(key, p)?;
                    }
                }
                "initial.snapshot" => snapshot = Some(PathBuf::from(value)),
                "output.dir" => cfg.out_dir = PathBuf::from(value),
                "output.emit_svg" => cfg.emit_svg = boolean(key, value)?,
                "output.fit_from" => {
                    let f: f64 = number(key, value)?;
                    if !(0.0..1.0).contains(&f) {
                        return Err(ConfigError::new(key, "must lie in [0, 1)"));
                    }
                    cfg.fit_from = f;
                }
                "compare.slices" => cfg.compare_slices = number(key, value)?,
                _ => unreachable!(),
            }
        }
        cfg.flow.dt = match (dt, c_cfl) {
            (Some(_), Some(_)) => return Err(ConfigError::new("flow.dt", "conflicts with flow.c_cfl")),
            (Some(dt), None) => DtPolicy::Fixed(dt),
            (None, Some(c)) => DtPolicy::Cfl(c),
            (None, None) => cfg.flow.dt,
        };
        cfg.initial.kind = match (kind.as_deref(), snapshot) {
            (None | Some("perturbed_min"), None) => InitialKind::PerturbedMin,
            (Some("custom_snapshot"), Some(p)) => InitialKind::CustomSnapshot(p),
            (Some("custom_snapshot"), None) => {
                return Err(ConfigError::new("initial.snapshot", "required when initial.kind = custom_snapshot"))
            }
            (None | Some("perturbed_min"), Some(_)) => {
                return Err(ConfigError::new("initial.snapshot", "only valid with initial.kind = custom_snapshot"))
            }
            (Some(other), _) => {
                return Err(ConfigError::new("initial.kind", format!("unknown kind {other:?}")))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("<file>", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        GridSpec::new(self.n, self.scheme).map_err(|e| ConfigError::new("grid.n", e.to_string()))?;
        if self.initial.kind == InitialKind::PerturbedMin && 2 * self.initial.max_mode >= self.n {
            return Err(ConfigError::new("initial.max_mode", "must be below n/2"));
        }
        if self.compare_slices == 0 {
            return Err(ConfigError::new("compare.slices", "must be at least 1"));
        }
        Ok(())
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.n, self.scheme).expect("validated on parse")
    }
}

fn cadence(key: &str, v: &str) -> Result<u64, ConfigError> {
    let c: u64 = number(key, v)?;
    if c == 0 {
        Err(ConfigError::new(key, "must be at least 1"))
    } else {
        Ok(c)
    }
}
