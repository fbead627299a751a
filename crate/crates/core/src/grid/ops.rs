//! Exterior derivative, codifferential, Laplacians and the Hodge projection.

use super::{GridSpec, KFormField};
use crate::algebra::{star_into, BASIS, DIMS, POSITION, WEDGE_SIGN};

/// `∂_axis` of one scalar component.
pub fn partial(grid: &GridSpec, values: &[f64], axis: usize) -> Vec<f64> {
    let symbol: Vec<f64> = (0..grid.n()).map(|j| grid.derivative_symbol(j)).collect();
    grid.plans().differentiate(values, axis, &symbol)
}

/// Exterior derivative with the convention `d(f dx^I) = df ∧ dx^I`.
pub fn d(field: &KFormField) -> KFormField {
    let k = field.degree();
    assert!(k <= 3, "d of a top-degree form");
    let grid = field.grid();
    let mut out = KFormField::zeros(grid, k + 1);
    for (p, comp) in field.components().iter().enumerate() {
        let mask = BASIS[k][p] as usize;
        for axis in 0..4 {
            let bit = 1usize << axis;
            let sign = WEDGE_SIGN[bit][mask];
            if sign == 0 {
                continue;
            }
            let deriv = partial(grid, comp, axis);
            let target = &mut out.components_mut()[POSITION[mask | bit]];
            let s = f64::from(sign);
            for (t, v) in target.iter_mut().zip(&deriv) {
                *t += s * v;
            }
        }
    }
    out
}

/// Background codifferential, the discrete `L²` adjoint of [`d`].
pub fn codifferential(field: &KFormField) -> KFormField {
    let k = field.degree();
    assert!(k >= 1, "codifferential of a function");
    let grid = field.grid();
    let mut out = KFormField::zeros(grid, k - 1);
    for (p, comp) in field.components().iter().enumerate() {
        let mask = BASIS[k][p] as usize;
        for axis in 0..4 {
            let bit = 1usize << axis;
            if mask & bit == 0 {
                continue;
            }
            let lower = mask & !bit;
            let sign = f64::from(WEDGE_SIGN[bit][lower]);
            let deriv = partial(grid, comp, axis);
            let target = &mut out.components_mut()[POSITION[lower]];
            for (t, v) in target.iter_mut().zip(&deriv) {
                *t -= sign * v;
            }
        }
    }
    out
}

fn star_field(field: &KFormField) -> KFormField {
    let k = field.degree();
    let grid = field.grid();
    let mut out = KFormField::zeros(grid, 4 - k);
    let mut a = vec![0.0; DIMS[k]];
    let mut b = vec![0.0; DIMS[4 - k]];
    for i in 0..grid.len() {
        for (p, c) in field.components().iter().enumerate() {
            a[p] = c[i];
        }
        star_into(k, &a, &mut b);
        for (q, c) in out.components_mut().iter_mut().enumerate() {
            c[i] = b[q];
        }
    }
    out
}

/// `d* = −*d*`, the four-dimensional Riemannian formula.
pub fn codifferential_via_star(field: &KFormField) -> KFormField {
    assert!(field.degree() >= 1);
    star_field(&d(&star_field(field))).scaled(-1.0)
}

/// Applies `m(s)` to every Fourier mode, where `s` is the Laplacian symbol.
fn apply_laplacian_symbol(field: &KFormField, m: impl Fn(f64) -> f64) -> KFormField {
    let grid = field.grid();
    let n = grid.n();
    let sym: Vec<f64> = (0..n).map(|j| grid.derivative_symbol(j).powi(2)).collect();
    let factors: Vec<f64> = (0..grid.len())
        .map(|idx| m(grid.multi_index(idx).iter().map(|&j| sym[j]).sum()))
        .collect();
    let mut out = KFormField::zeros(grid, field.degree());
    for (p, comp) in field.components().iter().enumerate() {
        let mut spec = grid.plans().forward_4d(comp);
        for (v, f) in spec.iter_mut().zip(&factors) {
            *v *= f;
        }
        out.components_mut()[p] = grid.plans().inverse_4d(spec);
    }
    out
}

/// Componentwise Hodge Laplacian `dd* + d*d = −Σ ∂_a²` (nonnegative).
pub fn laplacian(field: &KFormField) -> KFormField {
    apply_laplacian_symbol(field, |s| s)
}

/// Componentwise inverse Laplacian on the complement of its kernel
/// (the constants, plus all-Nyquist modes for the spectral scheme).
pub fn inverse_laplacian(field: &KFormField) -> KFormField {
    apply_laplacian_symbol(field, |s| if s > 0.0 { 1.0 / s } else { 0.0 })
}

/// `(1 + aΔ)⁻¹ field` for `a ≥ 0`.
pub fn resolvent(field: &KFormField, a: f64) -> KFormField {
    assert!(a >= 0.0);
    apply_laplacian_symbol(field, |s| 1.0 / (1.0 + a * s))
}

/// Decomposition `field = exact + harmonic + coexact_residual` of a 2-form.
#[derive(Debug, Clone)]
pub struct HodgeParts {
    pub exact: KFormField,
    /// Constant coefficients, one per basis 2-form.
    pub harmonic: [f64; 6],
    pub coexact_residual: KFormField,
    /// Background-gauge potential with `d potential = exact`, `d* potential = 0`.
    pub potential: KFormField,
}

pub fn hodge_project(field: &KFormField) -> HodgeParts {
    assert_eq!(field.degree(), 2, "hodge_project expects a 2-form");
    let means = field.means();
    let mut zero_mean = field.clone();
    for (c, m) in zero_mean.components_mut().iter_mut().zip(&means) {
        c.iter_mut().for_each(|x| *x -= m);
    }
    let potential = inverse_laplacian(&codifferential(&zero_mean));
    let exact = d(&potential);
    let coexact_residual = zero_mean.sub(&exact);
    let mut harmonic = [0.0; 6];
    harmonic.copy_from_slice(&means);
    HodgeParts { exact, harmonic, coexact_residual, potential }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{l2_inner, l2_norm, Scheme};
    use crate::sampling::{random_band_limited, rng};

    fn grid(n: usize, scheme: Scheme) -> GridSpec {
        GridSpec::new(n, scheme).unwrap()
    }

    #[test]
    fn constants_are_closed_and_coclosed() {
        let g = grid(8, Scheme::Spectral);
        let c = KFormField::constant(&g, &crate::algebra::omega1().into());
        assert!(d(&c).max_abs() < 1e-14);
        assert!(codifferential(&c).max_abs() < 1e-14);
    }

    #[test]
    fn derivative_of_sine() {
        for (scheme, tol) in [(Scheme::Spectral, 1e-13), (Scheme::Central4, 2e-2)] {
            let g = grid(8, scheme);
            let f = KFormField::scalar_from_fn(&g, |x| x[0].sin());
            let df = d(&f);
            let expect = KFormField::from_fn(&g, 1, |x| {
                crate::algebra::KFormValue::new(1, &[x[0].cos(), 0.0, 0.0, 0.0])
            });
            assert!(df.sub(&expect).max_abs() < tol, "{scheme:?}");
        }
    }

    #[test]
    fn central4_converges_at_fourth_order() {
        let err = |n: usize| {
            let g = grid(n, Scheme::Central4);
            let f = KFormField::scalar_from_fn(&g, |x| (x[1] + 2.0 * x[2]).sin());
            let df = d(&f);
            let expect = KFormField::from_fn(&g, 1, |x| {
                let c = (x[1] + 2.0 * x[2]).cos();
                crate::algebra::KFormValue::new(1, &[0.0, c, 2.0 * c, 0.0])
            });
            df.sub(&expect).max_abs()
        };
        let ratio = err(8) / err(16);
        assert!((ratio.log2() - 4.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn derivative_of_one_form() {
        let g = grid(8, Scheme::Spectral);
        let l = KFormField::from_fn(&g, 1, |x| {
            crate::algebra::KFormValue::new(1, &[x[1].sin(), 0.0, 0.0, 0.0])
        });
        let dl = d(&l);
        let expect = KFormField::from_fn(&g, 2, |x| {
            crate::algebra::KFormValue::new(2, &[-x[1].cos(), 0.0, 0.0, 0.0, 0.0, 0.0])
        });
        assert!(dl.sub(&expect).max_abs() < 1e-13);
    }

    #[test]
    fn codifferential_of_sine_one_form() {
        let g = grid(8, Scheme::Spectral);
        let l = KFormField::from_fn(&g, 1, |x| {
            crate::algebra::KFormValue::new(1, &[x[0].sin(), 0.0, 0.0, 0.0])
        });
        let dl = codifferential(&l);
        let expect = KFormField::scalar_from_fn(&g, |x| -x[0].cos());
        assert!(dl.sub(&expect).max_abs() < 1e-13);
    }

    #[test]
    fn d_squared_vanishes() {
        let mut rng = rng(3);
        for scheme in [Scheme::Spectral, Scheme::Central4] {
            let g = grid(8, scheme);
            for k in 0..3 {
                let a = random_band_limited(&g, k, 3, &mut rng);
                let dd = d(&d(&a));
                let rel = dd.max_abs() / d(&a).max_abs();
                assert!(rel < 1e-12, "{scheme:?} degree {k}: {rel}");
            }
        }
    }

    #[test]
    fn adjointness_all_degrees() {
        let mut rng = rng(5);
        let g = grid(8, Scheme::Spectral);
        for k in 0..4 {
            let a = random_band_limited(&g, k, 3, &mut rng);
            let b = random_band_limited(&g, k + 1, 3, &mut rng);
            let lhs = l2_inner(&d(&a), &b);
            let rhs = l2_inner(&a, &codifferential(&b));
            assert!((lhs - rhs).abs() < 1e-10 * l2_norm(&a) * l2_norm(&b), "degree {k}");
            let via_star = codifferential_via_star(&b);
            assert!(via_star.sub(&codifferential(&b)).max_abs() < 1e-11, "degree {}", k + 1);
        }
    }

    #[test]
    fn hodge_projection_round_trips() {
        let mut rng = rng(11);
        let g = grid(8, Scheme::Spectral);
        let l = random_band_limited(&g, 1, 3, &mut rng);
        let exact = d(&l);
        let parts = hodge_project(&exact);
        assert!(parts.exact.sub(&exact).max_abs() < 1e-12);
        assert!(parts.harmonic.iter().all(|h| h.abs() < 1e-14));
        assert!(parts.coexact_residual.max_abs() < 1e-12);
        // idempotent
        let again = hodge_project(&parts.exact);
        assert!(again.exact.sub(&parts.exact).max_abs() < 1e-12);

        let w = KFormField::constant(&g, &crate::algebra::omega1().into());
        let parts = hodge_project(&w);
        assert_eq!(parts.harmonic, crate::algebra::omega1().0);
        assert!(parts.exact.max_abs() < 1e-14);

        let back = resolvent(&laplacian(&exact).add(&exact.scaled(2.0)), 0.5);
        assert!(back.sub(&exact.scaled(2.0)).max_abs() < 1e-11 * exact.max_abs());

        let mu = random_band_limited(&g, 3, 3, &mut rng);
        let co = codifferential(&mu);
        let parts = hodge_project(&co);
        assert!(parts.exact.max_abs() < 1e-12 * co.max_abs().max(1.0));
        assert!(parts.coexact_residual.sub(&co).max_abs() < 1e-12);
    }
}
