//! Quadrature inner products, Sobolev norms and the Donaldson metric.

use super::ops::{codifferential, d, inverse_laplacian, partial};
use super::{GridError, GridSpec, KFormField};
use crate::algebra::{make_context, OneFormValue};
use nalgebra::Matrix4;

/// `∫⟨a, b⟩ dvol` by the periodic trapezoidal rule.
pub fn l2_inner(a: &KFormField, b: &KFormField) -> f64 {
    assert_eq!(a.degree(), b.degree(), "degree mismatch");
    assert_eq!(a.grid(), b.grid(), "grid mismatch");
    let s: f64 = a
        .components()
        .iter()
        .zip(b.components())
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .sum();
    s * a.grid().cell_volume()
}

pub fn l2_norm(a: &KFormField) -> f64 {
    l2_inner(a, a).sqrt()
}

fn multi_indices(k: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..=k {
        for b in 0..=k - a {
            for c in 0..=k - a - b {
                for e in 0..=k - a - b - c {
                    out.push([a, b, c, e]);
                }
            }
        }
    }
    out
}

/// Discrete `W^{k,p}` norm `(Σ_{|α|≤k} ‖∂^α field‖_p^p)^{1/p}`, with `p = ∞`
/// giving the largest sup norm over all derivatives.
pub fn sobolev_norm(field: &KFormField, k: usize, p: f64) -> f64 {
    assert!(k <= 4, "derivative order above 4");
    assert!(p >= 1.0, "exponent below 1");
    let grid = field.grid();
    let mut acc = 0.0f64;
    for alpha in multi_indices(k) {
        for comp in field.components() {
            let mut v = comp.clone();
            for (axis, &times) in alpha.iter().enumerate() {
                for _ in 0..times {
                    v = partial(grid, &v, axis);
                }
            }
            if p.is_infinite() {
                acc = v.iter().fold(acc, |m, x| m.max(x.abs()));
            } else {
                acc += v.iter().map(|x| x.abs().powf(p)).sum::<f64>() * grid.cell_volume();
            }
        }
    }
    if p.is_infinite() {
        acc
    } else {
        acc.powf(1.0 / p)
    }
}

/// Pointwise Gram matrices of `g^ρ` on 1-forms.
#[derive(Debug, Clone)]
pub struct MetricField {
    gram: Vec<Matrix4<f64>>,
}

impl MetricField {
    pub fn new(rho: &KFormField) -> Result<Self, GridError> {
        assert_eq!(rho.degree(), 2);
        let gram = (0..rho.grid().len())
            .map(|i| {
                make_context(rho.two_at(i))
                    .map(|c| c.metric_one_forms())
                    .map_err(|source| GridError::Nondegeneracy { index: i, source })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { gram })
    }

    /// `G λ` pointwise.
    pub fn apply(&self, l: &KFormField) -> KFormField {
        let mut out = KFormField::zeros(l.grid(), 1);
        for (i, g) in self.gram.iter().enumerate() {
            let v = g * l.one_at(i).as_vector();
            out.set_one(i, &OneFormValue::from_vector(&v));
        }
        out
    }

    /// `∫ a ∧ *^ρ b`.
    pub fn pair(&self, a: &KFormField, b: &KFormField) -> f64 {
        l2_inner(a, &self.apply(b))
    }
}

/// Solver settings for the Donaldson potential.
#[derive(Debug, Clone, Copy)]
pub struct DonaldsonOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Largest admissible harmonic coefficient of an "exact" input.
    pub exact_tol: f64,
}

impl Default for DonaldsonOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-13, max_iter: 400, exact_tol: 1e-8 }
    }
}

fn check_exact(rh: &KFormField, tol: f64) -> Result<(), GridError> {
    let harmonic = rh.means().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if harmonic > tol {
        return Err(GridError::NotExact { harmonic, tol });
    }
    Ok(())
}

/// The sixteen lattice modes `k ∈ {0, n/2}⁴` on which every difference
/// symbol vanishes, as `±1` patterns. Together with `df` they span the
/// discrete closed 1-forms componentwise.
fn null_patterns(grid: &GridSpec) -> Vec<Vec<f64>> {
    (0..16u32)
        .map(|set| {
            (0..grid.len())
                .map(|idx| {
                    let m = grid.multi_index(idx);
                    let parity: usize = (0..4).filter(|a| set & (1 << a) != 0).map(|a| m[a]).sum();
                    if parity % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Unknowns of the gauge problem: a function and one coefficient per
/// (null pattern, component) pair.
#[derive(Clone)]
struct Gauge {
    f: Vec<f64>,
    c: Vec<f64>,
}

impl Gauge {
    fn dot(&self, o: &Gauge, cell: f64) -> f64 {
        self.f.iter().zip(&o.f).map(|(a, b)| a * b).sum::<f64>() * cell
            + self.c.iter().zip(&o.c).map(|(a, b)| a * b).sum::<f64>()
    }

    fn axpy(&mut self, s: f64, o: &Gauge) {
        self.f.iter_mut().zip(&o.f).for_each(|(a, b)| *a += s * b);
        self.c.iter_mut().zip(&o.c).for_each(|(a, b)| *a += s * b);
    }

    fn scaled_plus(&self, beta: f64, o: &Gauge) -> Gauge {
        let mut out = self.clone();
        out.axpy(beta, o);
        out
    }
}

struct GaugeProblem<'a> {
    metric: &'a MetricField,
    grid: &'a GridSpec,
    patterns: Vec<Vec<f64>>,
}

impl GaugeProblem<'_> {
    fn closed_form(&self, x: &Gauge) -> KFormField {
        let mut l = d(&KFormField::from_components(self.grid, 0, vec![x.f.clone()]));
        for (p, comp) in l.components_mut().iter_mut().enumerate() {
            for (s, pat) in self.patterns.iter().enumerate() {
                let coef = x.c[4 * s + p];
                comp.iter_mut().zip(pat).for_each(|(v, q)| *v += coef * q);
            }
        }
        l
    }

    /// Gradient of `½∫λᵀGλ` over the gauge directions.
    fn gradient(&self, l: &KFormField) -> Gauge {
        let gl = self.metric.apply(l);
        let f = codifferential(&gl).components()[0].clone();
        let cell = self.grid.cell_volume();
        let mut c = vec![0.0; 4 * self.patterns.len()];
        for (s, pat) in self.patterns.iter().enumerate() {
            for p in 0..4 {
                c[4 * s + p] = gl.component(p).iter().zip(pat).map(|(a, b)| a * b).sum::<f64>() * cell;
            }
        }
        Gauge { f, c }
    }

    fn precondition(&self, r: &Gauge) -> Gauge {
        let f = inverse_laplacian(&KFormField::from_components(self.grid, 0, vec![r.f.clone()]));
        let vol = self.grid.volume();
        Gauge { f: f.components()[0].clone(), c: r.c.iter().map(|v| v / vol).collect() }
    }
}

/// Potential `λ` of an exact 2-form with `dλ = rh` and least `g^ρ` norm,
/// i.e. `g^ρ`-orthogonal to every (discretely) closed 1-form.
pub fn donaldson_potential_with(
    metric: &MetricField,
    rh: &KFormField,
    opts: &DonaldsonOptions,
) -> Result<KFormField, GridError> {
    assert_eq!(rh.degree(), 2);
    check_exact(rh, opts.exact_tol)?;
    let grid = rh.grid();
    let cell = grid.cell_volume();
    let base = inverse_laplacian(&codifferential(rh));
    let problem = GaugeProblem { metric, grid, patterns: null_patterns(grid) };
    let g0 = problem.gradient(&base);
    // solve A x = −g0 by preconditioned CG
    let mut x = Gauge { f: vec![0.0; grid.len()], c: vec![0.0; g0.c.len()] };
    let mut r = Gauge { f: vec![0.0; grid.len()], c: vec![0.0; g0.c.len()] };
    r.axpy(-1.0, &g0);
    let mut z = problem.precondition(&r);
    let mut p = z.clone();
    let mut rz = r.dot(&z, cell);
    let rz0 = rz;
    let mut converged = rz0 <= 0.0;
    for _ in 0..opts.max_iter {
        if converged {
            break;
        }
        let ap = problem.gradient(&problem.closed_form(&p));
        let pap = p.dot(&ap, cell);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        z = problem.precondition(&r);
        let rz_new = r.dot(&z, cell);
        if rz_new <= opts.rel_tol * opts.rel_tol * rz0 {
            converged = true;
        }
        let beta = rz_new / rz;
        rz = rz_new;
        p = z.scaled_plus(beta, &p);
    }
    if !converged {
        return Err(GridError::SolveFailed(format!(
            "gauge solve stalled at relative residual {:e}",
            (rz / rz0).sqrt()
        )));
    }
    Ok(base.add(&problem.closed_form(&x)))
}

pub fn donaldson_potential(
    rho: &KFormField,
    rh: &KFormField,
    opts: &DonaldsonOptions,
) -> Result<KFormField, GridError> {
    donaldson_potential_with(&MetricField::new(rho)?, rh, opts)
}

/// `⟨ρ̂₁, ρ̂₂⟩_ρ = ∫ λ₁ ∧ *^ρ λ₂` for exact tangent vectors.
///
/// Only `λ₂` needs the minimal gauge: any other potential of `ρ̂₁` differs
/// from `λ₁` by a closed form, which pairs to zero against it.
pub fn donaldson_inner(rho: &KFormField, rh1: &KFormField, rh2: &KFormField) -> Result<f64, GridError> {
    let metric = MetricField::new(rho)?;
    let opts = DonaldsonOptions::default();
    check_exact(rh1, opts.exact_tol)?;
    let l1 = inverse_laplacian(&codifferential(rh1));
    let l2 = donaldson_potential_with(&metric, rh2, &opts)?;
    Ok(metric.pair(&l1, &l2))
}
