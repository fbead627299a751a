//! Differential forms sampled on the periodic lattice `(R/2πZ)^4`.

mod fft;
mod inner;
mod ops;
pub mod snapshot;

pub use inner::{
    donaldson_inner, donaldson_potential, donaldson_potential_with, l2_inner, l2_norm, sobolev_norm,
    DonaldsonOptions, MetricField,
};
pub use ops::{
    codifferential, codifferential_via_star, d, hodge_project, inverse_laplacian, laplacian,
    partial, resolvent, HodgeParts,
};

use crate::algebra::{AlgebraError, KFormValue, OneFormValue, ThreeFormValue, TwoFormValue, DIMS};
use fft::FftPlans;
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("degenerate 2-form at grid point {index}: {source}")]
    Nondegeneracy {
        index: usize,
        #[source]
        source: AlgebraError,
    },
    #[error("field is not exact: harmonic part {harmonic:e} exceeds {tol:e}")]
    NotExact { harmonic: f64, tol: f64 },
    #[error("iterative solve did not converge: {0}")]
    SolveFailed(String),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Differentiation scheme along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Fourier differentiation, exact for band-limited data (Nyquist mode dropped).
    Spectral,
    /// Fourth-order central differences.
    Central4,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Spectral => "spectral",
            Scheme::Central4 => "central4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "spectral" => Some(Scheme::Spectral),
            "central4" => Some(Scheme::Central4),
            _ => None,
        }
    }
}

/// The `n^4` periodic lattice with spacing `h = 2π/n`.
#[derive(Clone)]
pub struct GridSpec {
    n: usize,
    scheme: Scheme,
    plans: Arc<FftPlans>,
    symbols: Arc<Vec<f64>>,
}

impl std::fmt::Debug for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridSpec").field("n", &self.n).field("scheme", &self.scheme).finish()
    }
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.scheme == other.scheme
    }
}

impl GridSpec {
    pub fn new(n: usize, scheme: Scheme) -> Result<Self, GridError> {
        if n < 4 || !n.is_power_of_two() {
            return Err(GridError::InvalidGrid(format!(
                "points per axis must be a power of two >= 4, got {n}"
            )));
        }
        let h = 2.0 * PI / n as f64;
        let symbols = (0..n)
            .map(|j| {
                let k = wavenumber(j, n);
                match scheme {
                    Scheme::Spectral => {
                        if 2 * j == n {
                            0.0
                        } else {
                            k
                        }
                    }
                    Scheme::Central4 => (8.0 * (k * h).sin() - (2.0 * k * h).sin()) / (6.0 * h),
                }
            })
            .collect();
        Ok(Self { n, scheme, plans: Arc::new(FftPlans::new(n)), symbols: Arc::new(symbols) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn h(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Number of lattice points.
    pub fn len(&self) -> usize {
        self.n.pow(4)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^4`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(4)
    }

    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(4)
    }

    pub fn index(&self, i: [usize; 4]) -> usize {
        let n = self.n;
        i[0] + n * (i[1] + n * (i[2] + n * i[3]))
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 4] {
        let n = self.n;
        [idx % n, (idx / n) % n, (idx / (n * n)) % n, idx / (n * n * n)]
    }

    pub fn coords(&self, idx: usize) -> [f64; 4] {
        let h = self.h();
        self.multi_index(idx).map(|i| i as f64 * h)
    }

    /// Symbol `σ(k)` of the first derivative: `∂ e^{ikx} = i σ(k) e^{ikx}`.
    pub fn derivative_symbol(&self, j: usize) -> f64 {
        self.symbols[j]
    }

    /// Largest eigenvalue of the discrete Laplacian on this grid.
    pub fn laplacian_radius(&self) -> f64 {
        let m = self.symbols.iter().fold(0.0_f64, |a, s| a.max(s * s));
        4.0 * m
    }

    pub(crate) fn plans(&self) -> &FftPlans {
        &self.plans
    }
}

/// Integer wavenumber of FFT index `j` (Nyquist mapped to `+n/2`).
pub fn wavenumber(j: usize, n: usize) -> f64 {
    if j <= n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    }
}

/// A `k`-form on the grid: one scalar array per basis coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct KFormField {
    grid: GridSpec,
    degree: usize,
    comps: Vec<Vec<f64>>,
}

impl KFormField {
    pub fn zeros(grid: &GridSpec, degree: usize) -> Self {
        assert!(degree <= 4);
        Self { grid: grid.clone(), degree, comps: vec![vec![0.0; grid.len()]; DIMS[degree]] }
    }

    /// Panics on a component-count or extent mismatch.
    pub fn from_components(grid: &GridSpec, degree: usize, comps: Vec<Vec<f64>>) -> Self {
        assert_eq!(comps.len(), DIMS[degree], "component count");
        assert!(comps.iter().all(|c| c.len() == grid.len()), "component extent");
        Self { grid: grid.clone(), degree, comps }
    }

    pub fn constant(grid: &GridSpec, value: &KFormValue) -> Self {
        let comps = value.coeffs().iter().map(|&c| vec![c; grid.len()]).collect();
        Self { grid: grid.clone(), degree: value.degree(), comps }
    }

    pub fn scalar_from_fn(grid: &GridSpec, f: impl Fn([f64; 4]) -> f64) -> Self {
        let v = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self { grid: grid.clone(), degree: 0, comps: vec![v] }
    }

    pub fn from_fn(grid: &GridSpec, degree: usize, f: impl Fn([f64; 4]) -> KFormValue) -> Self {
        let mut out = Self::zeros(grid, degree);
        for i in 0..grid.len() {
            let v = f(grid.coords(i));
            assert_eq!(v.degree(), degree);
            for (c, &x) in out.comps.iter_mut().zip(v.coeffs()) {
                c[i] = x;
            }
        }
        out
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.comps
    }

    pub fn component(&self, p: usize) -> &[f64] {
        &self.comps[p]
    }

    pub fn value_at(&self, idx: usize) -> KFormValue {
        let c: Vec<f64> = self.comps.iter().map(|c| c[idx]).collect();
        KFormValue::new(self.degree, &c)
    }

    pub fn two_at(&self, idx: usize) -> TwoFormValue {
        debug_assert_eq!(self.degree, 2);
        let c = &self.comps;
        TwoFormValue([c[0][idx], c[1][idx], c[2][idx], c[3][idx], c[4][idx], c[5][idx]])
    }

    pub fn set_two(&mut self, idx: usize, v: &TwoFormValue) {
        debug_assert_eq!(self.degree, 2);
        for (c, x) in self.comps.iter_mut().zip(v.0) {
            c[idx] = x;
        }
    }

    pub fn one_at(&self, idx: usize) -> OneFormValue {
        debug_assert_eq!(self.degree, 1);
        let c = &self.comps;
        OneFormValue([c[0][idx], c[1][idx], c[2][idx], c[3][idx]])
    }

    pub fn set_one(&mut self, idx: usize, v: &OneFormValue) {
        debug_assert_eq!(self.degree, 1);
        for (c, x) in self.comps.iter_mut().zip(v.0) {
            c[idx] = x;
        }
    }

    pub fn three_at(&self, idx: usize) -> ThreeFormValue {
        debug_assert_eq!(self.degree, 3);
        let c = &self.comps;
        ThreeFormValue([c[0][idx], c[1][idx], c[2][idx], c[3][idx]])
    }

    pub fn set_three(&mut self, idx: usize, v: &ThreeFormValue) {
        debug_assert_eq!(self.degree, 3);
        for (c, x) in self.comps.iter_mut().zip(v.0) {
            c[idx] = x;
        }
    }

    pub fn scalar(&self) -> &[f64] {
        debug_assert!(self.degree == 0 || self.degree == 4);
        &self.comps[0]
    }

    fn check_compatible(&self, other: &Self) {
        assert_eq!(self.degree, other.degree, "degree mismatch");
        assert_eq!(self.grid, other.grid, "grid mismatch");
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Self) {
        self.check_compatible(other);
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    pub fn scale(&mut self, s: f64) {
        self.comps.iter_mut().flatten().for_each(|x| *x *= s);
    }

    /// Pointwise product with a scalar field.
    pub fn mul_scalar_field(&self, f: &[f64]) -> Self {
        let mut out = self.clone();
        for c in out.comps.iter_mut() {
            for (x, y) in c.iter_mut().zip(f) {
                *x *= y;
            }
        }
        out
    }

    pub fn means(&self) -> Vec<f64> {
        let len = self.grid.len() as f64;
        self.comps.iter().map(|c| c.iter().sum::<f64>() / len).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|x| x.is_finite())
    }
}

/// Evaluate a function at each grid point of a 2-form field.
pub fn map_two_forms<T>(
    field: &KFormField,
    mut f: impl FnMut(usize, TwoFormValue) -> T,
) -> Vec<T> {
    (0..field.grid().len()).map(|i| f(i, field.two_at(i))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(GridSpec::new(2, Scheme::Spectral).is_err());
        assert!(GridSpec::new(12, Scheme::Spectral).is_err());
        assert!(GridSpec::new(8, Scheme::Central4).is_ok());
    }

    #[test]
    fn spacing_and_indexing() {
        let g = GridSpec::new(8, Scheme::Spectral).unwrap();
        assert!((g.h() * 8.0 - 2.0 * PI).abs() < 1e-15);
        for idx in [0, 1, 77, 4095] {
            assert_eq!(g.index(g.multi_index(idx)), idx);
        }
        assert_eq!(g.coords(1), [g.h(), 0.0, 0.0, 0.0]);
        assert_eq!(g.derivative_symbol(4), 0.0);
        assert_eq!(g.derivative_symbol(7), -1.0);
    }
}
