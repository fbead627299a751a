//! The map `K(ρ) = ρ⁺/u`, its inversion, the operators `S^ρ`, `(S^ρ)^{*ρ}`
//! and the reduced evolution of the frame coefficients `K_i`.

use crate::algebra::{FrameTriple, OneFormValue, TwoFormValue};
use crate::flow::{flow_potential, ContextField, FlowError};
use crate::grid::{d, hodge_project, l2_inner, l2_norm, partial, GridError, KFormField};
use nalgebra::{Matrix4, Vector4};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KmapError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("Newton iteration stalled after {iterations} iterations at residual {residual:e}")]
    NewtonDivergence { iterations: usize, residual: f64 },
}

impl From<FlowError> for KmapError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::Grid(g) => Self::Grid(g),
            other => Self::Grid(GridError::SolveFailed(other.to_string())),
        }
    }
}

/// `ρ⁺/u` pointwise.
pub fn kmap(rho: &KFormField) -> Result<KFormField, GridError> {
    Ok(ContextField::new(rho)?.map_two(|c| c.kmap()))
}

/// `K̂ρ̂ = R^ρ ρ̂^{+ρ} / u`.
pub fn kmap_linearized(rho: &KFormField, rhohat: &KFormField) -> Result<KFormField, GridError> {
    Ok(kmap_linearized_with(&ContextField::new(rho)?, rhohat))
}

pub fn kmap_linearized_with(ctx: &ContextField, rhohat: &KFormField) -> KFormField {
    let mut out = KFormField::zeros(ctx.grid(), 2);
    for (i, c) in ctx.iter().enumerate() {
        out.set_two(i, &c.kmap_derivative(&rhohat.two_at(i)));
    }
    out
}

/// Pointwise transpose of [`kmap_linearized_with`] in the `L²(g)` pairing.
pub fn kmap_linearized_adjoint(ctx: &ContextField, r: &KFormField) -> KFormField {
    let mut out = KFormField::zeros(ctx.grid(), 2);
    for (i, c) in ctx.iter().enumerate() {
        let ri = r.two_at(i);
        let mut v = TwoFormValue::zero();
        for p in 0..6 {
            let mut e = TwoFormValue::zero();
            e.0[p] = 1.0;
            v.0[p] = c.kmap_derivative(&e).dot(&ri);
        }
        out.set_two(i, &v);
    }
    out
}

/// Frame coefficients `K_i = ρ ∧ ω_i / dvol_ρ`, so that `2ρ⁺/u = Σ K_i ω_i`.
pub fn k_functions(ctx: &ContextField) -> [KFormField; 3] {
    let frame = FrameTriple::standard();
    std::array::from_fn(|i| ctx.scalar(|c| c.rho.wedge(&frame.omega[i]) / c.u))
}

/// `½ Σ k_i ω_i`, the 2-form whose frame coefficients are `k`.
pub fn recombine(k: &[KFormField; 3]) -> KFormField {
    let frame = FrameTriple::standard();
    let grid = k[0].grid();
    let mut out = KFormField::zeros(grid, 2);
    for (ki, w) in k.iter().zip(&frame.omega) {
        out.axpy(0.5, &KFormField::constant(grid, &(*w).into()).mul_scalar_field(ki.scalar()));
    }
    out
}

fn vector_field(ctx: &ContextField, l: &KFormField) -> Vec<Vector4<f64>> {
    ctx.iter().enumerate().map(|(i, c)| c.hamiltonian_vector(&l.one_at(i))).collect()
}

/// `∇_X ξ`, the flat directional derivative of a 2-form field.
pub fn directional_derivative(xi: &KFormField, x: &[Vector4<f64>]) -> KFormField {
    let grid = xi.grid();
    let mut out = KFormField::zeros(grid, xi.degree());
    for (p, comp) in xi.components().iter().enumerate() {
        for axis in 0..4 {
            let dp = partial(grid, comp, axis);
            let target = &mut out.components_mut()[p];
            for ((t, v), xv) in target.iter_mut().zip(&dp).zip(x) {
                *t += xv[axis] * v;
            }
        }
    }
    out
}

/// The 1-form `X ↦ g(∇_X a, b)`.
pub fn gradient_pairing(a: &KFormField, b: &KFormField) -> KFormField {
    let grid = a.grid();
    let mut out = KFormField::zeros(grid, 1);
    for axis in 0..4 {
        let mut acc = vec![0.0; grid.len()];
        for (ca, cb) in a.components().iter().zip(b.components()) {
            let da = partial(grid, ca, axis);
            for ((t, x), y) in acc.iter_mut().zip(&da).zip(cb) {
                *t += x * y;
            }
        }
        out.components_mut()[axis] = acc;
    }
    out
}

/// `d^{+ρ} λ = ½(dλ + *^ρ dλ)`.
pub fn d_plus_rho(ctx: &ContextField, l: &KFormField) -> KFormField {
    let dl = d(l);
    dl.add(&ctx.star_two(&dl)).scaled(0.5)
}

/// `S^ρ λ = −R^ρ d^{+ρ} λ + u ∇_{X_λ}(ρ⁺/u)`.
pub fn s_rho(ctx: &ContextField, l: &KFormField) -> KFormField {
    let k = ctx.map_two(|c| c.kmap());
    let x = vector_field(ctx, l);
    let u = ctx.u();
    let transport = directional_derivative(&k, &x).mul_scalar_field(&u);
    transport.sub(&ctx.r_rho(&d_plus_rho(ctx, l)))
}

/// `(S^ρ)^{*ρ} ξ = −d^{*ρ}(R^ρ ξ) + *^ρ(g(∇(ρ⁺/u), ξ) ∧ ρ)` with
/// `d^{*ρ} = −*^ρ d *^ρ` on 2-forms.
pub fn s_rho_adjoint(ctx: &ContextField, xi: &KFormField) -> KFormField {
    let k = ctx.map_two(|c| c.kmap());
    let first = ctx.star_three(&d(&ctx.star_two(&ctx.r_rho(xi))));
    let gp = gradient_pairing(&k, xi);
    let mut wedge = KFormField::zeros(ctx.grid(), 3);
    for (i, c) in ctx.iter().enumerate() {
        wedge.set_three(i, &gp.one_at(i).wedge_two(&c.rho));
    }
    first.add(&ctx.star_three(&wedge))
}

/// `{f, g}_ρ = df ∧ dg ∧ ρ / dvol_ρ`.
pub fn poisson_bracket(ctx: &ContextField, f: &KFormField, g: &KFormField) -> KFormField {
    let (df, dg) = (d(f), d(g));
    ctx.scalar_indexed(|i, c| c.poisson(&df.one_at(i), &dg.one_at(i)))
}

/// `d^{*ρ} α = −*^ρ d *^ρ α` for a 1-form (`*^ρ` on top forms is the identity
/// because `dvol_{g^ρ} = dvol`).
pub fn codifferential_rho_one(ctx: &ContextField, a: &KFormField) -> KFormField {
    d(&ctx.star_one(a)).scaled(-1.0)
}

/// Form of the third term in the reduced equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossTerm {
    /// `ρ(X_{K_i}, Σ_ℓ J_ℓ X_{K_ℓ})`
    Statement,
    /// `ρ(X_{K_i}, Σ_j J_j X_{K_i})`
    Proof,
}

/// `∂_t K_i = −((1/u) d^{*ρ} dK_i + 2{K_j, K_k}_ρ + ρ(X_{K_i}, Σ J X))` for
/// `(i, j, k)` cyclic. The signs of the last two terms are those that hold
/// with `{f, g}_ρ dvol_ρ = df ∧ dg ∧ ρ`, `ρ(X_H, ·) = dH` and the standard `J_ℓ`.
pub fn reduced_rhs(ctx: &ContextField, cross: CrossTerm) -> [KFormField; 3] {
    let frame = FrameTriple::standard();
    let k = k_functions(ctx);
    let dk: Vec<KFormField> = k.iter().map(d).collect();
    let xs: Vec<Vec<Vector4<f64>>> = dk.iter().map(|l| vector_field(ctx, l)).collect();
    let u = ctx.u();
    let j_sum = frame.j[0] + frame.j[1] + frame.j[2];
    std::array::from_fn(|i| {
        let (j, kk) = ((i + 1) % 3, (i + 2) % 3);
        let lap = codifferential_rho_one(ctx, &dk[i]);
        let bracket = poisson_bracket(ctx, &k[j], &k[kk]);
        let cross_term = ctx.scalar_indexed(|p, c| {
            let y = match cross {
                CrossTerm::Statement => (0..3).map(|l| frame.j[l] * xs[l][p]).sum::<Vector4<f64>>(),
                CrossTerm::Proof => j_sum * xs[i][p],
            };
            c.pair(&xs[i][p], &y)
        });
        let vals = (0..u.len())
            .map(|p| -(lap.scalar()[p] / u[p] + 2.0 * bracket.scalar()[p] + cross_term.scalar()[p]))
            .collect();
        KFormField::from_components(ctx.grid(), 0, vec![vals])
    })
}

/// Route (a): `K̂` applied to the flow velocity.
pub fn route_chain_rule(ctx: &ContextField) -> KFormField {
    kmap_linearized_with(ctx, &d(&flow_potential(ctx)))
}

/// Route (b): `(1/u) R^ρ d^{+ρ} *^ρ dθ^ρ`.
pub fn route_closed_form(ctx: &ContextField) -> KFormField {
    let inv_u: Vec<f64> = ctx.u().iter().map(|v| 1.0 / v).collect();
    ctx.r_rho(&d_plus_rho(ctx, &flow_potential(ctx))).mul_scalar_field(&inv_u)
}

/// Route (c): `−(2/u) S^ρ (S^ρ)^{*ρ}(ρ⁺/u) + ∇_{X_μ}(ρ⁺/u)` with `μ = *^ρ dθ^ρ`.
pub fn route_s_adjoint(ctx: &ContextField) -> KFormField {
    let k = ctx.map_two(|c| c.kmap());
    let inv_u: Vec<f64> = ctx.u().iter().map(|v| -2.0 / v).collect();
    let ss = s_rho(ctx, &s_rho_adjoint(ctx, &k)).mul_scalar_field(&inv_u);
    let x = vector_field(ctx, &flow_potential(ctx));
    ss.add(&directional_derivative(&k, &x))
}

/// Route (d): the reduced equation recombined as `½ Σ ∂_t K_i ω_i`.
pub fn route_reduced(ctx: &ContextField, cross: CrossTerm) -> KFormField {
    recombine(&reduced_rhs(ctx, cross))
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_defect(a: &KFormField, b: &KFormField) -> f64 {
    let scale = l2_norm(a).max(l2_norm(b));
    let diff = l2_norm(&a.sub(b));
    if diff == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub route_pairs: Vec<String>,
    pub rel_defect: Vec<f64>,
    pub grid_n: usize,
    pub scheme: String,
    /// Form of the cross term used by route (d).
    pub cross_term: CrossTerm,
    /// Defects of route (d) against route (b) for each cross-term form.
    pub cross_term_defects: Vec<(CrossTerm, f64)>,
}

impl ConsistencyReport {
    pub fn max_defect(&self) -> f64 {
        self.rel_defect.iter().copied().fold(0.0, f64::max)
    }

    pub fn defect(&self, pair: &str) -> Option<f64> {
        self.route_pairs.iter().position(|p| p == pair).map(|i| self.rel_defect[i])
    }
}

/// Computes `∂_t(ρ⁺/u)` along the flow four ways and reports pairwise
/// relative defects. Route (d) uses whichever cross-term form agrees best with (b).
pub fn reduced_consistency(rho: &KFormField) -> Result<ConsistencyReport, GridError> {
    let ctx = ContextField::new(rho)?;
    let a = route_chain_rule(&ctx);
    let b = route_closed_form(&ctx);
    let c = route_s_adjoint(&ctx);
    let variants: Vec<(CrossTerm, KFormField)> = [CrossTerm::Statement, CrossTerm::Proof]
        .into_iter()
        .map(|v| (v, route_reduced(&ctx, v)))
        .collect();
    let cross_term_defects: Vec<(CrossTerm, f64)> =
        variants.iter().map(|(v, r)| (*v, rel_defect(r, &b))).collect();
    let best = cross_term_defects
        .iter()
        .enumerate()
        .min_by(|x, y| x.1 .1.total_cmp(&y.1 .1))
        .map(|(i, _)| i)
        .unwrap();
    let (cross_term, dd) = (variants[best].0, &variants[best].1);
    let routes = [("a", &a), ("b", &b), ("c", &c), ("d", dd)];
    let mut route_pairs = Vec::new();
    let mut defects = Vec::new();
    for i in 0..routes.len() {
        for j in i + 1..routes.len() {
            route_pairs.push(format!("{}-{}", routes[i].0, routes[j].0));
            defects.push(rel_defect(routes[i].1, routes[j].1));
        }
    }
    Ok(ConsistencyReport {
        route_pairs,
        rel_defect: defects,
        grid_n: rho.grid().n(),
        scheme: rho.grid().scheme().name().to_string(),
        cross_term,
        cross_term_defects,
    })
}

/// Settings for [`newton_invert_k`].
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Target `‖K(ρ) − η‖_{L²}`.
    pub tol: f64,
    pub max_iter: usize,
    /// Search also over the three constant self-dual shifts.
    pub constant_shifts: bool,
    pub max_inner: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 30, constant_shifts: true, max_inner: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub rho: KFormField,
    pub iterations: usize,
    /// `‖K(ρ) − η‖_{L²}` before each iteration and at the end.
    pub residuals: Vec<f64>,
}

/// Search direction `δ = P_exact β + Σ s_i ω_i`.
struct Direction {
    beta: KFormField,
    s: [f64; 3],
}

struct NewtonOperator<'a> {
    ctx: &'a ContextField,
    shifts: bool,
    frame: FrameTriple,
}

impl NewtonOperator<'_> {
    fn expand(&self, x: &Direction) -> KFormField {
        let mut delta = hodge_project(&x.beta).exact;
        if self.shifts {
            for (s, w) in x.s.iter().zip(&self.frame.omega) {
                delta.axpy(*s, &KFormField::constant(delta.grid(), &(*w).into()));
            }
        }
        delta
    }

    fn apply(&self, x: &Direction) -> KFormField {
        kmap_linearized_with(self.ctx, &self.expand(x))
    }

    fn adjoint(&self, r: &KFormField) -> Direction {
        let back = kmap_linearized_adjoint(self.ctx, r);
        let s = if self.shifts {
            std::array::from_fn(|i| l2_inner(&back, &KFormField::constant(back.grid(), &self.frame.omega[i].into())))
        } else {
            [0.0; 3]
        };
        Direction { beta: hodge_project(&back).exact, s }
    }
}

fn dir_dot(a: &Direction, b: &Direction) -> f64 {
    l2_inner(&a.beta, &b.beta) + a.s.iter().zip(&b.s).map(|(x, y)| x * y).sum::<f64>()
}

fn dir_axpy(a: &mut Direction, s: f64, b: &Direction) {
    a.beta.axpy(s, &b.beta);
    for (x, y) in a.s.iter_mut().zip(&b.s) {
        *x += s * y;
    }
}

/// CGLS for `min ‖A x − rhs‖` until `‖Aᵀr‖ ≤ forcing · ‖Aᵀrhs‖`.
fn cgls(op: &NewtonOperator, rhs: &KFormField, forcing: f64, max_inner: usize) -> Direction {
    let grid = rhs.grid();
    let mut x = Direction { beta: KFormField::zeros(grid, 2), s: [0.0; 3] };
    let mut r = rhs.clone();
    let mut s = op.adjoint(&r);
    let mut p = Direction { beta: s.beta.clone(), s: s.s };
    let mut gamma = dir_dot(&s, &s);
    let gamma0 = gamma;
    for _ in 0..max_inner {
        if gamma <= forcing * forcing * gamma0 || gamma == 0.0 {
            break;
        }
        let q = op.apply(&p);
        let qq = l2_inner(&q, &q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        dir_axpy(&mut x, alpha, &p);
        r.axpy(-alpha, &q);
        s = op.adjoint(&r);
        let gamma_new = dir_dot(&s, &s);
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        let mut next = Direction { beta: s.beta.clone(), s: s.s };
        dir_axpy(&mut next, beta, &p);
        p = next;
    }
    x
}

/// Damped Newton for `K(ρ) = η` over `ρ_init + exact (+ constant self-dual)`.
/// Each linear solve is CGLS with forcing `min(1e−3, ‖F‖/‖η‖)`.
pub fn newton_invert_k(
    eta: &KFormField,
    rho_init: &KFormField,
    opts: &NewtonOptions,
) -> Result<NewtonResult, KmapError> {
    let eta_norm = l2_norm(eta).max(f64::MIN_POSITIVE);
    let mut rho = rho_init.clone();
    let mut ctx = ContextField::new(&rho)?;
    let mut resid = ctx.map_two(|c| c.kmap()).sub(eta);
    let mut norm = l2_norm(&resid);
    let mut residuals = vec![norm];
    for it in 0..opts.max_iter {
        if norm <= opts.tol {
            return Ok(NewtonResult { rho, iterations: it, residuals });
        }
        let op = NewtonOperator { ctx: &ctx, shifts: opts.constant_shifts, frame: FrameTriple::standard() };
        let forcing = (norm / eta_norm).min(1e-3);
        let step = op.expand(&cgls(&op, &resid.scaled(-1.0), forcing, opts.max_inner));
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-4 {
            let trial = rho.add(&step.scaled(alpha));
            if let Ok(c) = ContextField::new(&trial) {
                let r = c.map_two(|c| c.kmap()).sub(eta);
                let n = l2_norm(&r);
                if n < (1.0 - 1e-4 * alpha) * norm {
                    accepted = Some((trial, c, r, n));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, c, r, n)) => {
                rho = trial;
                ctx = c;
                resid = r;
                norm = n;
                residuals.push(norm);
            }
            None => return Err(KmapError::NewtonDivergence { iterations: it + 1, residual: norm }),
        }
    }
    if norm <= opts.tol {
        Ok(NewtonResult { rho, iterations: opts.max_iter, residuals })
    } else {
        Err(KmapError::NewtonDivergence { iterations: opts.max_iter, residual: norm })
    }
}

/// `λ ∘ J` for a matrix `J` acting on vectors.
pub fn compose_with(l: &OneFormValue, j: &Matrix4<f64>) -> OneFormValue {
    OneFormValue::from_vector(&(j.transpose() * l.as_vector()))
}
