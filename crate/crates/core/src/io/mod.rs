//! Configuration, initial data, run orchestration and file outputs.

pub mod checks;
pub mod config;
pub mod initial;
pub mod svg;

pub use checks::{run_checks, CheckRow, Level};
pub use config::{ConfigError, InitialKind, RunConfig};
pub use initial::{generate_initial, InitialError};

use crate::flow::{fit_decay_rate, run, DiagnosticsRecord, FlowConfig, FlowError, CSV_HEADER};
use crate::grid::{snapshot, GridError, KFormField};
use crate::kmap::{reduced_consistency, ConsistencyReport};
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable that overrides `output.dir`.
pub const OUT_ENV: &str = "DONFLOW_OUT";

pub const RNG_NAME: &str = "chacha8";

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Initial(#[from] InitialError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{} invariant check(s) failed", .0.len())]
    Invariant(Vec<String>),
}

impl CommandError {
    /// 1 invariant or runtime failure, 2 configuration error, 3 blow-up.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Flow(FlowError::BlowUp { .. }) => 3,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let kind = match self {
            Self::Config(_) => "config",
            Self::Initial(_) => "initial_condition",
            Self::Flow(FlowError::BlowUp { .. }) => "blowup",
            Self::Flow(_) => "flow",
            Self::Grid(_) => "grid",
            Self::Io { .. } => "io",
            Self::Invariant(_) => "invariant",
        };
        let mut v = json!({ "error": kind, "message": self.to_string() });
        match self {
            Self::Config(e) => v["key"] = json!(e.key),
            Self::Flow(FlowError::BlowUp { t, .. }) => v["t"] = json!(t),
            Self::Invariant(names) => v["failed"] = json!(names),
            _ => {}
        }
        v
    }
}

/// Output directory: the command-line flag, then [`OUT_ENV`], then the config.
pub fn resolve_out_dir(cfg: &RunConfig, flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.out_dir.clone(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CommandError + '_ {
    move |source| CommandError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CommandError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    snapshot::write_atomic(path, contents).map_err(io_err(path))
}

fn write_snapshot(path: &Path, field: &KFormField) -> Result<(), CommandError> {
    write_file(path, &snapshot::encode(field))
}

fn provenance(cfg: &RunConfig) -> String {
    format!(
        "donflow rng={RNG_NAME} seed={} n={} scheme={} integrator={}",
        cfg.initial.seed,
        cfg.n,
        cfg.scheme.name(),
        cfg.flow.integrator.name()
    )
}

/// `diagnostics.csv`: a `#` provenance line, the header, one row per record.
pub fn diagnostics_csv(cfg: &RunConfig, records: &[DiagnosticsRecord]) -> String {
    let mut s = format!("# {}\n{CSV_HEADER}\n", provenance(cfg));
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub final_t: f64,
    pub final_energy: f64,
    pub min_u_overall: f64,
    pub blowup: bool,
    pub decay_rate_fit: Option<f64>,
    pub rng: &'static str,
    pub seed: u64,
    pub grid_n: usize,
    pub scheme: &'static str,
    pub integrator: &'static str,
}

fn write_outputs(cfg: &RunConfig, out: &Path, records: &[DiagnosticsRecord], report: &RunReport) -> Result<(), CommandError> {
    write_file(&out.join("diagnostics.csv"), diagnostics_csv(cfg, records).as_bytes())?;
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    write_file(&out.join("report.json"), json.as_bytes())?;
    if cfg.emit_svg {
        let prov = provenance(cfg);
        let energy = svg::Chart { title: "Energy", x_label: "t", y_label: "E", log_y: false, provenance: &prov };
        let pts: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.energy)).collect();
        write_file(&out.join("energy.svg"), energy.render(&pts).as_bytes())?;
        let dist = svg::Chart {
            title: "Distance to the minimum",
            x_label: "t",
            y_label: "log10 L2 distance",
            log_y: true,
            provenance: &prov,
        };
        let pts: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.dist_to_min)).collect();
        write_file(&out.join("dist_to_min.svg"), dist.render(&pts).as_bytes())?;
    }
    Ok(())
}

/// `donflow run`: integrates, then writes diagnostics, snapshots, the report
/// and optional plots. On blow-up the outputs up to the failure are still
/// written before the error is returned.
pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<RunReport, CommandError> {
    let rho0 = generate_initial(cfg)?;
    write_snapshot(&out.join("snapshots/initial.donf"), &rho0)?;
    let base = RunReport {
        final_t: 0.0,
        final_energy: f64::NAN,
        min_u_overall: f64::NAN,
        blowup: false,
        decay_rate_fit: None,
        rng: RNG_NAME,
        seed: cfg.initial.seed,
        grid_n: cfg.n,
        scheme: cfg.scheme.name(),
        integrator: cfg.flow.integrator.name(),
    };
    match run(&cfg.flow, &rho0) {
        Ok(output) => {
            let last = output.records.last().expect("run records the initial state");
            let report = RunReport {
                final_t: output.state.t,
                final_energy: last.energy,
                min_u_overall: output.min_u_overall,
                decay_rate_fit: fit_decay_rate(&output.records, cfg.fit_from * cfg.flow.t_end),
                ..base
            };
            write_snapshot(&out.join("snapshots/final.donf"), &output.state.rho)?;
            write_outputs(cfg, out, &output.records, &report)?;
            Ok(report)
        }
        Err(FlowError::BlowUp { t, reason, last_good, records }) => {
            let report = RunReport {
                final_t: last_good.t,
                final_energy: records.last().map_or(f64::NAN, |r| r.energy),
                min_u_overall: records.iter().map(|r| r.min_u).fold(f64::INFINITY, f64::min),
                blowup: true,
                ..base
            };
            write_snapshot(&out.join("snapshots/last_good.donf"), &last_good.rho)?;
            write_outputs(cfg, out, &records, &report)?;
            Err(FlowError::BlowUp { t, reason, last_good, records }.into())
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SliceReport {
    pub t: f64,
    #[serde(flatten)]
    pub report: ConsistencyReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub rng: &'static str,
    pub seed: u64,
    pub slices: Vec<SliceReport>,
    pub max_defect: f64,
}

/// `donflow compare`: reduced-flow consistency at `t = 0` and at
/// `compare.slices` evenly spaced times of a run to `flow.t_end`.
pub fn cmd_compare(cfg: &RunConfig, out: &Path) -> Result<CompareReport, CommandError> {
    let mut rho = generate_initial(cfg)?;
    let mut slices = vec![SliceReport { t: 0.0, report: reduced_consistency(&rho)? }];
    let segment = cfg.flow.t_end / cfg.compare_slices as f64;
    let mut t = 0.0;
    for _ in 0..cfg.compare_slices {
        let seg_cfg = FlowConfig { t_end: segment, ..cfg.flow.clone() };
        rho = run(&seg_cfg, &rho)?.state.rho;
        t += segment;
        slices.push(SliceReport { t, report: reduced_consistency(&rho)? });
    }
    let max_defect = slices.iter().map(|s| s.report.max_defect()).fold(0.0, f64::max);
    let report = CompareReport { rng: RNG_NAME, seed: cfg.initial.seed, slices, max_defect };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&out.join("consistency.json"), json.as_bytes())?;
    Ok(report)
}

/// `donflow check`: runs the suites and fails listing every failed row.
pub fn cmd_check(level: Level, star: checks::Star) -> Result<Vec<CheckRow>, (Vec<CheckRow>, CommandError)> {
    let rows = run_checks(level, star);
    let failed: Vec<String> = rows.iter().filter(|r| !r.pass).map(|r| r.name.to_string()).collect();
    if failed.is_empty() {
        Ok(rows)
    } else {
        Err((rows, CommandError::Invariant(failed)))
    }
}
