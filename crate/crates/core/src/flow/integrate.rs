//! Explicit RK4 and the semi-implicit fixed-point stepper.

use super::{flow_potential, ContextField, FlowError, FlowState};
use crate::grid::{d, l2_norm, laplacian, resolvent, KFormField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepperKind {
    Rk4,
    Imex,
}

impl StepperKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rk4" => Some(Self::Rk4),
            "imex" => Some(Self::Imex),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Rk4 => "rk4",
            Self::Imex => "imex",
        }
    }
}

fn max_star_over_u(ctx: &ContextField) -> f64 {
    ctx.iter()
        .map(|c| c.star1_matrix().singular_values().max() / c.u)
        .fold(0.0, f64::max)
}

/// `dt = c_cfl · h² · min u / s_max` with `s_max = max(‖M‖/u) · h² λ_max(Δ)`,
/// where `M` is the pointwise Λ¹ → Λ³ star matrix.
pub fn cfl_dt(ctx: &ContextField, c_cfl: f64) -> f64 {
    let grid = ctx.grid();
    let h2 = grid.h() * grid.h();
    let s_max = max_star_over_u(ctx) * h2 * grid.laplacian_radius();
    c_cfl * h2 * ctx.min_u() / s_max
}

/// Coefficient `c` of the implicit operator `c·dd*`: 1.5 times the largest
/// principal coefficient `‖M‖/u`.
pub fn imex_coefficient(ctx: &ContextField) -> f64 {
    1.5 * max_star_over_u(ctx)
}

pub(crate) fn rhs_checked(rho: &KFormField, t: f64, last: &FlowState) -> Result<KFormField, FlowError> {
    let ctx = ContextField::new(rho).map_err(|e| blow_up(t, e.to_string(), last))?;
    Ok(d(&flow_potential(&ctx)))
}

pub(crate) fn blow_up(t: f64, reason: String, last: &FlowState) -> FlowError {
    FlowError::BlowUp { t, reason, last_good: Box::new(last.clone()), records: Vec::new() }
}

/// Classical four-stage Runge–Kutta step.
pub fn step_rk4(state: &FlowState, dt: f64) -> Result<FlowState, FlowError> {
    let rho = &state.rho;
    let t = state.t;
    let k1 = rhs_checked(rho, t, state)?;
    let mut y = rho.clone();
    y.axpy(0.5 * dt, &k1);
    let k2 = rhs_checked(&y, t + 0.5 * dt, state)?;
    let mut y = rho.clone();
    y.axpy(0.5 * dt, &k2);
    let k3 = rhs_checked(&y, t + 0.5 * dt, state)?;
    let mut y = rho.clone();
    y.axpy(dt, &k3);
    let k4 = rhs_checked(&y, t + dt, state)?;
    let mut next = rho.clone();
    next.axpy(dt / 6.0, &k1);
    next.axpy(dt / 3.0, &k2);
    next.axpy(dt / 3.0, &k3);
    next.axpy(dt / 6.0, &k4);
    if !next.is_finite() {
        return Err(blow_up(t + dt, "non-finite value".into(), state));
    }
    Ok(FlowState { rho: next, t: t + dt, step: state.step + 1 })
}

#[derive(Debug, Clone, Copy)]
pub struct ImexOptions {
    /// Implicitness of the θ-scheme; 0.5 is Crank–Nicolson, 1 backward Euler.
    pub theta: f64,
    /// Implicit coefficient; `None` uses [`imex_coefficient`] of the current state.
    pub coefficient: Option<f64>,
    /// Stop when the increment falls below `tol · ‖ρ‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ImexOptions {
    fn default() -> Self {
        Self { theta: 0.5, coefficient: None, tol: 1e-12, max_iter: 50 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ImexReport {
    pub iterations: usize,
    /// Successive increment ratios `‖δ_{k+1}‖ / ‖δ_k‖`.
    pub ratios: Vec<f64>,
    pub coefficient: f64,
}

/// One semi-implicit step. With `F` the flow velocity and `N = F + cΔ`, the
/// new state solves `ρ' = ρ + dt[θ(N(ρ') − cΔρ') + (1−θ)F(ρ)]` by iterating
/// `(1 + θ dt cΔ) ρ'_{k+1} = ρ + dt(1−θ)F(ρ) + θ dt N(ρ'_k)`.
pub fn step_imex(state: &FlowState, dt: f64, opts: &ImexOptions) -> Result<(FlowState, ImexReport), FlowError> {
    let rho = &state.rho;
    let t = state.t;
    let ctx = ContextField::new(rho).map_err(|e| blow_up(t, e.to_string(), state))?;
    let c = opts.coefficient.unwrap_or_else(|| imex_coefficient(&ctx));
    let f0 = d(&flow_potential(&ctx));
    let mut base = rho.clone();
    base.axpy(dt * (1.0 - opts.theta), &f0);
    let a = opts.theta * dt * c;
    let scale = l2_norm(rho).max(f64::MIN_POSITIVE);

    let mut report = ImexReport { coefficient: c, ..Default::default() };
    let mut current = rho.clone();
    let mut f_current = f0;
    let mut last_inc = f64::NAN;
    for k in 0..opts.max_iter {
        let mut n_current = f_current;
        n_current.axpy(c, &laplacian(&current));
        let mut rhs = base.clone();
        rhs.axpy(opts.theta * dt, &n_current);
        let next = resolvent(&rhs, a);
        if !next.is_finite() {
            return Err(blow_up(t + dt, "non-finite value in fixed-point iteration".into(), state));
        }
        let inc = l2_norm(&next.sub(&current));
        if k > 0 {
            report.ratios.push(if last_inc > 0.0 { inc / last_inc } else { 0.0 });
        }
        report.iterations = k + 1;
        current = next;
        if inc <= opts.tol * scale {
            return Ok((FlowState { rho: current, t: t + dt, step: state.step + 1 }, report));
        }
        last_inc = inc;
        f_current = rhs_checked(&current, t + dt, state)?;
    }
    Err(FlowError::FixedPointDivergence {
        iterations: opts.max_iter,
        ratio: report.ratios.last().copied().unwrap_or(f64::NAN),
    })
}
