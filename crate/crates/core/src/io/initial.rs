use super::config::{InitialKind, RunConfig};
use crate::algebra::FrameTriple;
use crate::flow::ContextField;
use crate::grid::{d, snapshot, sobolev_norm, GridError, KFormField};
use crate::sampling::{random_band_limited, rng};
use thiserror::Error;

/// Smallest admissible `u` of an initial condition.
pub const MIN_INITIAL_U: f64 = 0.1;

#[derive(Debug, Error)]
pub enum InitialError {
    #[error("initial condition is too close to degenerate: min u = {min_u} <= {MIN_INITIAL_U}")]
    Degenerate { min_u: f64 },
    #[error("snapshot grid n = {found} does not match grid.n = {expected}")]
    GridMismatch { expected: usize, found: usize },
    #[error("initial snapshot must be a 2-form, found degree {0}")]
    Degree(usize),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `ρ₀ = ω₁ + Σ shift_i ω_i + ε dλ` with `λ` a seeded band-limited 1-form of
/// unit `W^{1,2}` norm, or a snapshot read from disk.
pub fn generate_initial(cfg: &RunConfig) -> Result<KFormField, InitialError> {
    let grid = cfg.grid();
    let rho = match &cfg.initial.kind {
        InitialKind::CustomSnapshot(path) => {
            let rho = snapshot::read(path, cfg.scheme)?;
            if rho.grid().n() != cfg.n {
                return Err(InitialError::GridMismatch { expected: cfg.n, found: rho.grid().n() });
            }
            if rho.degree() != 2 {
                return Err(InitialError::Degree(rho.degree()));
            }
            rho
        }
        InitialKind::PerturbedMin => {
            let frame = FrameTriple::standard();
            let ic = &cfg.initial;
            let base = frame.omega[0]
                + frame.omega[0] * ic.shift[0]
                + frame.omega[1] * ic.shift[1]
                + frame.omega[2] * ic.shift[2];
            let mut rho = KFormField::constant(&grid, &base.into());
            if ic.amplitude > 0.0 {
                let lambda = random_band_limited(&grid, 1, ic.max_mode, &mut rng(ic.seed));
                let norm = sobolev_norm(&lambda, 1, 2.0);
                rho.axpy(ic.amplitude / norm, &d(&lambda));
            }
            rho
        }
    };
    let min_u = match ContextField::new(&rho) {
        Ok(ctx) => ctx.min_u(),
        Err(_) => f64::NEG_INFINITY,
    };
    if min_u <= MIN_INITIAL_U {
        return Err(InitialError::Degenerate { min_u });
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::omega1;

    fn cfg(amplitude: f64, seed: u64) -> RunConfig {
        let mut c = RunConfig::default();
        c.initial.amplitude = amplitude;
        c.initial.seed = seed;
        c
    }

    #[test]
    fn zero_amplitude_is_the_minimum() {
        let rho = generate_initial(&cfg(0.0, 1)).unwrap();
        let w = KFormField::constant(rho.grid(), &omega1().into());
        assert_eq!(rho.sub(&w).max_abs(), 0.0);
        let mut shifted = cfg(0.0, 1);
        shifted.initial.shift = [0.0, 0.2, 0.0];
        let f = FrameTriple::standard();
        let expected = KFormField::constant(rho.grid(), &(f.omega[0] + f.omega[1] * 0.2).into());
        assert_eq!(generate_initial(&shifted).unwrap().sub(&expected).max_abs(), 0.0);
    }

    #[test]
    fn deterministic_in_the_seed() {
        let a = generate_initial(&cfg(0.01, 7)).unwrap();
        let b = generate_initial(&cfg(0.01, 7)).unwrap();
        let c = generate_initial(&cfg(0.01, 8)).unwrap();
        assert_eq!(snapshot::encode(&a), snapshot::encode(&b));
        assert_ne!(snapshot::encode(&a), snapshot::encode(&c));
    }

    #[test]
    fn small_perturbation_keeps_u_near_one() {
        let mut c = cfg(0.01, 3);
        c.initial.max_mode = 2;
        let rho = generate_initial(&c).unwrap();
        let min_u = ContextField::new(&rho).unwrap().min_u();
        assert!(min_u > 0.9 && min_u < 1.1, "{min_u}");
    }

    #[test]
    fn large_perturbation_is_rejected() {
        let mut c = cfg(40.0, 3);
        c.initial.max_mode = 2;
        assert!(matches!(generate_initial(&c), Err(InitialError::Degenerate { .. })));
    }
}
