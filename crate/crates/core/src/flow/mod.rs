//! The flow `∂_t ρ = d *^ρ d Θ^ρ`, its energy, and its linearization.

mod integrate;
mod run;

pub use integrate::{cfl_dt, imex_coefficient, step_imex, step_rk4, ImexOptions, ImexReport, StepperKind};
pub use run::{fit_decay_rate, run, DiagnosticsRecord, DtPolicy, FlowConfig, RunOutput, CSV_HEADER, W1P_EXPONENT};

use crate::algebra::{RhoContext, DEFAULT_DEGENERACY_TOL};
use crate::grid::{d, GridError, GridSpec, KFormField};
use thiserror::Error;

/// State of a run: the 2-form, the time and the step counter.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub rho: KFormField,
    pub t: f64,
    pub step: u64,
}

impl FlowState {
    pub fn new(rho: KFormField) -> Self {
        Self { rho, t: 0.0, step: 0 }
    }
}

#[derive(Debug, Error)]
pub enum FlowError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("blow-up at t = {t}: {reason}")]
    BlowUp {
        t: f64,
        reason: String,
        /// Last state that passed the invariant checks.
        last_good: Box<FlowState>,
        /// Diagnostics recorded up to the failure.
        records: Vec<DiagnosticsRecord>,
    },
    #[error("fixed-point iteration failed to contract after {iterations} iterations (last ratio {ratio:e})")]
    FixedPointDivergence { iterations: usize, ratio: f64 },
}

/// Pointwise contexts of a nondegenerate 2-form field.
#[derive(Debug, Clone)]
pub struct ContextField {
    grid: GridSpec,
    ctx: Vec<RhoContext>,
}

impl ContextField {
    pub fn new(rho: &KFormField) -> Result<Self, GridError> {
        assert_eq!(rho.degree(), 2, "expected a 2-form");
        let ctx = (0..rho.grid().len())
            .map(|i| {
                RhoContext::with_tolerance(rho.two_at(i), DEFAULT_DEGENERACY_TOL)
                    .map_err(|source| GridError::Nondegeneracy { index: i, source })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { grid: rho.grid().clone(), ctx })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn at(&self, i: usize) -> &RhoContext {
        &self.ctx[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &RhoContext> {
        self.ctx.iter()
    }

    pub fn u(&self) -> Vec<f64> {
        self.ctx.iter().map(|c| c.u).collect()
    }

    pub fn min_u(&self) -> f64 {
        self.ctx.iter().map(|c| c.u).fold(f64::INFINITY, f64::min)
    }

    pub fn theta(&self) -> KFormField {
        self.map_two(|c| c.theta())
    }

    pub fn map_two(&self, f: impl Fn(&RhoContext) -> crate::algebra::TwoFormValue) -> KFormField {
        let mut out = KFormField::zeros(&self.grid, 2);
        for (i, c) in self.ctx.iter().enumerate() {
            out.set_two(i, &f(c));
        }
        out
    }

    pub fn scalar(&self, f: impl Fn(&RhoContext) -> f64) -> KFormField {
        let vals = self.ctx.iter().map(f).collect();
        KFormField::from_components(&self.grid, 0, vec![vals])
    }

    pub fn scalar_indexed(&self, f: impl Fn(usize, &RhoContext) -> f64) -> KFormField {
        let vals = self.ctx.iter().enumerate().map(|(i, c)| f(i, c)).collect();
        KFormField::from_components(&self.grid, 0, vec![vals])
    }

    /// Pointwise `*^ρ` on 3-forms.
    pub fn star_three(&self, eta: &KFormField) -> KFormField {
        assert_eq!(eta.degree(), 3);
        let mut out = KFormField::zeros(&self.grid, 1);
        for (i, c) in self.ctx.iter().enumerate() {
            out.set_one(i, &c.star_rho_three(&eta.three_at(i)));
        }
        out
    }

    /// Pointwise `*^ρ` on 1-forms.
    pub fn star_one(&self, l: &KFormField) -> KFormField {
        assert_eq!(l.degree(), 1);
        let mut out = KFormField::zeros(&self.grid, 3);
        for (i, c) in self.ctx.iter().enumerate() {
            out.set_three(i, &c.star_rho_one(&l.one_at(i)));
        }
        out
    }

    /// Pointwise `*^ρ` on 2-forms.
    pub fn star_two(&self, w: &KFormField) -> KFormField {
        assert_eq!(w.degree(), 2);
        let mut out = KFormField::zeros(&self.grid, 2);
        for (i, c) in self.ctx.iter().enumerate() {
            out.set_two(i, &c.star_rho_two(&w.two_at(i)));
        }
        out
    }

    /// Pointwise `R^ρ`.
    pub fn r_rho(&self, w: &KFormField) -> KFormField {
        let mut out = KFormField::zeros(&self.grid, 2);
        for (i, c) in self.ctx.iter().enumerate() {
            out.set_two(i, &c.r_rho(&w.two_at(i)));
        }
        out
    }
}

/// `E(ρ) = ∫ 2|ρ⁺|² / (|ρ⁺|² − |ρ⁻|²) = ∫ |ρ⁺|² / u`.
pub fn energy(rho: &KFormField) -> Result<f64, FlowError> {
    Ok(energy_of(&ContextField::new(rho)?))
}

pub fn energy_of(ctx: &ContextField) -> f64 {
    let s: f64 = ctx.iter().map(|c| c.rho.self_dual().norm_sq() / c.u).sum();
    s * ctx.grid().cell_volume()
}

/// The 1-form `μ = *^ρ dΘ^ρ`, so that the velocity is `dμ`.
pub fn flow_potential(ctx: &ContextField) -> KFormField {
    ctx.star_three(&d(&ctx.theta()))
}

pub fn flow_rhs(rho: &KFormField) -> Result<KFormField, FlowError> {
    Ok(d(&flow_potential(&ContextField::new(rho)?)))
}

/// `⟨ρ̇, ρ̇⟩_ρ = ∫ μ ∧ *^ρ μ`. The potential `μ` is already `g^ρ`-orthogonal to
/// closed 1-forms because `*^ρ μ = −dΘ` is exact.
pub fn grad_norm_sq(ctx: &ContextField) -> f64 {
    let mu = flow_potential(ctx);
    mu_pairing(ctx, &mu, &mu)
}

/// `∫ a ∧ *^ρ b` for 1-forms.
pub fn mu_pairing(ctx: &ContextField, a: &KFormField, b: &KFormField) -> f64 {
    let mut s = 0.0;
    for (i, c) in ctx.iter().enumerate() {
        s += a.one_at(i).wedge_three(&c.star_rho_one(&b.one_at(i)));
    }
    s * ctx.grid().cell_volume()
}

/// The principal part `d (1/u) d^{*ρ} ρ̂ = −d((1/u) *^ρ d *^ρ ρ̂)`.
pub fn linearized_principal(ctx: &ContextField, rhohat: &KFormField) -> KFormField {
    let inner = ctx.star_three(&d(&ctx.star_two(rhohat)));
    let inv_u: Vec<f64> = ctx.iter().map(|c| 1.0 / c.u).collect();
    d(&inner.mul_scalar_field(&inv_u)).scaled(-1.0)
}

/// The lower-order part
/// `A^ρ ρ̂ = d*^ρ(du/u² ∧ (ρ̂ + *^ρρ̂)) + d*^ρ(d|ρ⁺/u|² ∧ ρ̂) − d *̂^{ρ,ρ̂} dθ^ρ`.
pub fn linearized_lower_order(ctx: &ContextField, rhohat: &KFormField) -> KFormField {
    let grid = ctx.grid();
    let u = ctx.scalar(|c| c.u);
    let inv_u2: Vec<f64> = u.scalar().iter().map(|v| 1.0 / (v * v)).collect();
    let du_over = d(&u).mul_scalar_field(&inv_u2);
    let ksq = ctx.scalar(|c| c.kmap().norm_sq());
    let dk = d(&ksq);
    let mut first = KFormField::zeros(grid, 3);
    let mut second = KFormField::zeros(grid, 3);
    for (i, c) in ctx.iter().enumerate() {
        let rh = rhohat.two_at(i);
        let sum = rh + c.star_rho_two(&rh);
        first.set_three(i, &du_over.one_at(i).wedge_two(&sum));
        second.set_three(i, &dk.one_at(i).wedge_two(&rh));
    }
    let dtheta = d(&ctx.theta());
    let mut star_hat = KFormField::zeros(grid, 1);
    for (i, c) in ctx.iter().enumerate() {
        let m = c.star3_derivative(&rhohat.two_at(i));
        let v = m * dtheta.three_at(i).as_vector();
        star_hat.set_one(i, &crate::algebra::OneFormValue::from_vector(&v));
    }
    let mut out = d(&ctx.star_three(&first.add(&second)));
    out.axpy(-1.0, &d(&star_hat));
    out
}

/// `L_ρ ρ̂`, the derivative of `−d *^ρ d θ^ρ` in the direction `ρ̂`.
pub fn linearized_operator(rho: &KFormField, rhohat: &KFormField) -> Result<KFormField, FlowError> {
    let ctx = ContextField::new(rho)?;
    let harmonic = rhohat.means().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if harmonic > 1e-8 {
        return Err(GridError::NotExact { harmonic, tol: 1e-8 }.into());
    }
    Ok(linearized_with(&ctx, rhohat))
}

/// The exact Jacobian of the discrete velocity, through [`linearized_via_theta`].
pub fn linearized_with(ctx: &ContextField, rhohat: &KFormField) -> KFormField {
    linearized_via_theta(ctx, rhohat)
}

/// `d (1/u) d^{*ρ} ρ̂ + A^ρ ρ̂` term by term. On the grid the product rule
/// behind this split holds only up to aliasing, so it differs from
/// [`linearized_via_theta`] by a spectrally small amount.
pub fn linearized_split(ctx: &ContextField, rhohat: &KFormField) -> KFormField {
    linearized_principal(ctx, rhohat).add(&linearized_lower_order(ctx, rhohat))
}

/// `L_ρ ρ̂ = −d *^ρ d θ̂ − d *̂ dθ`, assembled from the pointwise derivative of θ.
pub fn linearized_via_theta(ctx: &ContextField, rhohat: &KFormField) -> KFormField {
    let grid = ctx.grid();
    let mut theta_hat = KFormField::zeros(grid, 2);
    for (i, c) in ctx.iter().enumerate() {
        theta_hat.set_two(i, &c.theta_derivative(&rhohat.two_at(i)));
    }
    let dtheta = d(&ctx.theta());
    let mut lower = KFormField::zeros(grid, 1);
    for (i, c) in ctx.iter().enumerate() {
        let v = c.star3_derivative(&rhohat.two_at(i)) * dtheta.three_at(i).as_vector();
        lower.set_one(i, &crate::algebra::OneFormValue::from_vector(&v));
    }
    d(&ctx.star_three(&d(&theta_hat)).add(&lower)).scaled(-1.0)
}
