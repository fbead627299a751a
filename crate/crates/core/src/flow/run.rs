//! Time loop with re-projection and diagnostics.

use super::integrate::{blow_up, cfl_dt, step_imex, step_rk4, ImexOptions, ImexReport, StepperKind};
use super::{energy_of, grad_norm_sq, ContextField, FlowError, FlowState};
use crate::algebra::KFormValue;
use crate::grid::{d, hodge_project, l2_norm, sobolev_norm, KFormField};

pub const CSV_HEADER: &str = "t,energy,min_u,norm_drho,harm_drift,grad_norm_sq,dist_to_min,w1p_norm";

/// Exponent of the reported `W^{1,p}` norm; any `p > 4` controls `ρ` in `L^∞`.
pub const W1P_EXPONENT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    Fixed(f64),
    Cfl(f64),
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub integrator: StepperKind,
    pub dt: DtPolicy,
    pub t_end: f64,
    pub projection_cadence: u64,
    pub output_cadence: u64,
    pub imex: ImexOptions,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            integrator: StepperKind::Rk4,
            dt: DtPolicy::Cfl(0.2),
            t_end: 1.0,
            projection_cadence: 10,
            output_cadence: 1,
            imex: ImexOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub min_u: f64,
    pub norm_drho: f64,
    pub harm_drift: f64,
    pub grad_norm_sq: f64,
    pub dist_to_min: f64,
    pub w1p_norm: f64,
}

impl DiagnosticsRecord {
    pub fn values(&self) -> [f64; 8] {
        [
            self.t,
            self.energy,
            self.min_u,
            self.norm_drho,
            self.harm_drift,
            self.grad_norm_sq,
            self.dist_to_min,
            self.w1p_norm,
        ]
    }

    pub fn csv_row(&self) -> String {
        self.values().iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",")
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: FlowState,
    pub records: Vec<DiagnosticsRecord>,
    pub imex_reports: Vec<ImexReport>,
    pub min_u_overall: f64,
}

struct Monitor {
    harmonic0: Vec<f64>,
    reference: KFormField,
}

impl Monitor {
    fn new(initial: &KFormField) -> Self {
        let harmonic0 = initial.means();
        let reference = KFormField::constant(initial.grid(), &KFormValue::new(2, &harmonic0));
        Self { harmonic0, reference }
    }

    fn record(&self, state: &FlowState, ctx: &ContextField) -> DiagnosticsRecord {
        let rho = &state.rho;
        let harm_drift = rho
            .means()
            .iter()
            .zip(&self.harmonic0)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let offset = rho.sub(&self.reference);
        DiagnosticsRecord {
            t: state.t,
            energy: energy_of(ctx),
            min_u: ctx.min_u(),
            norm_drho: l2_norm(&d(rho)),
            harm_drift,
            grad_norm_sq: grad_norm_sq(ctx),
            dist_to_min: l2_norm(&offset),
            w1p_norm: sobolev_norm(&offset, 1, W1P_EXPONENT),
        }
    }

    /// Keeps the exact part and restores the initial harmonic coefficients.
    fn project(&self, rho: &KFormField) -> KFormField {
        hodge_project(rho).exact.add(&self.reference)
    }
}

/// Integrates from `initial` to `config.t_end`.
pub fn run(config: &FlowConfig, initial: &KFormField) -> Result<RunOutput, FlowError> {
    assert!(config.projection_cadence >= 1 && config.output_cadence >= 1);
    let monitor = Monitor::new(initial);
    let mut state = FlowState::new(initial.clone());
    let ctx0 = ContextField::new(initial)?;
    let mut records = vec![monitor.record(&state, &ctx0)];
    let mut min_u_overall = ctx0.min_u();
    let mut imex_reports = Vec::new();
    let mut ctx = ctx0;
    let attach = |err: FlowError, records: &[DiagnosticsRecord]| match err {
        FlowError::BlowUp { t, reason, last_good, .. } => {
            FlowError::BlowUp { t, reason, last_good, records: records.to_vec() }
        }
        other => other,
    };
    let eps = 1e-12 * config.t_end.max(1.0);
    while state.t < config.t_end - eps {
        let mut dt = match config.dt {
            DtPolicy::Fixed(dt) => dt,
            DtPolicy::Cfl(c) => cfl_dt(&ctx, c),
        };
        assert!(dt > 0.0, "time step must be positive");
        let remaining = config.t_end - state.t;
        if dt > remaining - eps {
            dt = remaining;
        }
        let stepped = match config.integrator {
            StepperKind::Rk4 => step_rk4(&state, dt),
            StepperKind::Imex => step_imex(&state, dt, &config.imex).map(|(s, r)| {
                imex_reports.push(r);
                s
            }),
        };
        let mut next = stepped.map_err(|e| attach(e, &records))?;
        if next.step % config.projection_cadence == 0 {
            next.rho = monitor.project(&next.rho);
        }
        ctx = match ContextField::new(&next.rho) {
            Ok(c) => c,
            Err(e) => return Err(attach(blow_up(next.t, e.to_string(), &state), &records)),
        };
        min_u_overall = min_u_overall.min(ctx.min_u());
        state = next;
        let last = state.t >= config.t_end - eps;
        if state.step % config.output_cadence == 0 || last {
            let rec = monitor.record(&state, &ctx);
            if !rec.is_finite() {
                return Err(attach(blow_up(state.t, "non-finite diagnostics".into(), &state), &records));
            }
            records.push(rec);
        }
    }
    Ok(RunOutput { state, records, imex_reports, min_u_overall })
}

/// Least-squares slope `−d log(dist_to_min)/dt` over the records with `t ≥ t_min`.
pub fn fit_decay_rate(records: &[DiagnosticsRecord], t_min: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.t >= t_min && r.dist_to_min > 0.0)
        .map(|r| (r.t, r.dist_to_min.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}
