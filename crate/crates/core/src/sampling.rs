//! Seeded random fields and pointwise samplers.

use crate::algebra::{KFormValue, TwoFormValue, DIMS};
use crate::grid::{GridSpec, KFormField};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Seeded = ChaCha8Rng;

pub fn rng(seed: u64) -> Seeded {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nonzero wave vectors `k` with `|k|₂ ≤ m`, one from each `±k` pair.
pub fn half_space_modes(m: usize) -> Vec<[i64; 4]> {
    let m = m as i64;
    let mut modes = Vec::new();
    for k1 in -m..=m {
        for k2 in -m..=m {
            for k3 in -m..=m {
                for k4 in -m..=m {
                    let k = [k1, k2, k3, k4];
                    let r2: i64 = k.iter().map(|x| x * x).sum();
                    if r2 == 0 || r2 > m * m {
                        continue;
                    }
                    let first = k.iter().copied().find(|&x| x != 0).unwrap();
                    if first > 0 {
                        modes.push(k);
                    }
                }
            }
        }
    }
    modes
}

/// Mean-zero `degree`-form whose coefficients are random trigonometric
/// polynomials over the modes `0 < |k|₂ ≤ m`, with standard normal amplitudes.
pub fn random_band_limited(grid: &GridSpec, degree: usize, m: usize, rng: &mut impl Rng) -> KFormField {
    assert!(2 * m < grid.n(), "band limit must stay below the Nyquist mode");
    let modes = half_space_modes(m);
    let ncomp = DIMS[degree];
    let amps: Vec<Vec<(f64, f64)>> = (0..ncomp)
        .map(|_| {
            modes
                .iter()
                .map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect()
        })
        .collect();
    let mut comps = vec![vec![0.0; grid.len()]; ncomp];
    for idx in 0..grid.len() {
        let x = grid.coords(idx);
        for (mi, k) in modes.iter().enumerate() {
            let phase: f64 = k.iter().zip(&x).map(|(&ka, &xa)| ka as f64 * xa).sum();
            let (s, c) = phase.sin_cos();
            for (p, comp) in comps.iter_mut().enumerate() {
                let (a, b) = amps[p][mi];
                comp[idx] += a * c + b * s;
            }
        }
    }
    KFormField::from_components(grid, degree, comps)
}

fn unit_in_span(basis: &[TwoFormValue; 3], rng: &mut impl Rng) -> TwoFormValue {
    loop {
        let c: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let v = basis[0] * c[0] + basis[1] * c[1] + basis[2] * c[2];
        let n = v.norm();
        if n > 1e-3 {
            return v * (1.0 / n);
        }
    }
}

pub fn self_dual_basis() -> [TwoFormValue; 3] {
    crate::algebra::FrameTriple::standard().omega
}

pub fn anti_self_dual_basis() -> [TwoFormValue; 3] {
    let e = TwoFormValue::basis;
    [e(1, 2) - e(3, 4), e(1, 3) + e(2, 4), e(1, 4) - e(2, 3)]
}

/// Uniformly random unit self-dual form; `θ ∧ θ = dvol` for such `θ`.
pub fn random_unit_self_dual(rng: &mut impl Rng) -> TwoFormValue {
    unit_in_span(&self_dual_basis(), rng)
}

pub fn random_unit_anti_self_dual(rng: &mut impl Rng) -> TwoFormValue {
    unit_in_span(&anti_self_dual_basis(), rng)
}

/// Point of the constraint set of `θ`: `ρ⁺ = λθ`, `ρ ∧ ρ = dvol`.
pub fn constrained_form(theta: &TwoFormValue, lambda: f64, asd_direction: &TwoFormValue) -> TwoFormValue {
    *theta * lambda + *asd_direction * (lambda * lambda - 1.0).max(0.0).sqrt()
}

/// Random `(θ, ρ₁, ρ₂)` on the constraint set with `λ_i ∈ [1, λ_max]`.
pub fn constraint_pair(rng: &mut impl Rng, lambda_max: f64) -> (TwoFormValue, TwoFormValue, TwoFormValue) {
    let theta = random_unit_self_dual(rng);
    let draw = |rng: &mut _| {
        let lambda = rng_range(rng, 1.0, lambda_max);
        constrained_form(&theta, lambda, &random_unit_anti_self_dual(rng))
    };
    let r1 = draw(rng);
    let r2 = draw(rng);
    (theta, r1, r2)
}

fn rng_range(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Random 2-form with `u > 0` whose conditioning `|ρ|²/u` is at most `max_cond`.
pub fn well_conditioned_two_form(rng: &mut impl Rng, max_cond: f64) -> TwoFormValue {
    loop {
        let c: [f64; 6] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let rho = TwoFormValue(c);
        let u = 0.5 * rho.wedge(&rho);
        if u > 0.0 && rho.norm_sq() / u <= max_cond {
            return rho;
        }
    }
}

pub fn random_one_form_value(rng: &mut impl Rng) -> crate::algebra::OneFormValue {
    crate::algebra::OneFormValue(std::array::from_fn(|_| rng.sample(StandardNormal)))
}

pub fn random_two_form_value(rng: &mut impl Rng) -> TwoFormValue {
    TwoFormValue(std::array::from_fn(|_| rng.sample(StandardNormal)))
}

pub fn random_value(degree: usize, rng: &mut impl Rng) -> KFormValue {
    let c: Vec<f64> = (0..DIMS[degree]).map(|_| rng.sample(StandardNormal)).collect();
    KFormValue::new(degree, &c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_cover_the_ball_once() {
        assert_eq!(half_space_modes(1).len(), 4);
        // |k|² = 1, 2, 3, 4 contribute 8, 24, 32 and 24 vectors
        assert_eq!(half_space_modes(2).len(), (8 + 24 + 32 + 24) / 2);
        let m2 = half_space_modes(2);
        assert!(m2.iter().all(|k| !m2.contains(&k.map(|x| -x))));
    }

    #[test]
    fn band_limited_fields_are_reproducible_and_mean_zero() {
        let g = GridSpec::new(8, crate::grid::Scheme::Spectral).unwrap();
        let a = random_band_limited(&g, 2, 2, &mut rng(9));
        let b = random_band_limited(&g, 2, 2, &mut rng(9));
        assert_eq!(a.components(), b.components());
        assert!(a.means().iter().all(|m| m.abs() < 1e-12));
    }

    #[test]
    fn constraint_sampler_lands_on_the_set() {
        let mut r = rng(1);
        for _ in 0..200 {
            let (theta, r1, r2) = constraint_pair(&mut r, 3.0);
            assert!((theta.wedge(&theta) - 1.0).abs() < 1e-13);
            for rho in [r1, r2] {
                assert!((rho.wedge(&rho) - 1.0).abs() < 1e-12);
                let plus = rho.self_dual();
                let l = plus.dot(&theta);
                assert!(l >= 1.0 - 1e-12);
                assert!((plus - theta * l).max_abs() < 1e-12);
            }
        }
    }
}
