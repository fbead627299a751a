//! Pointwise exterior algebra on a single oriented Euclidean 4-space.
//!
//! Basis of `Λ^k` is lexicographic in the coordinate indices. For 2-forms the
//! order is `[dx12, dx13, dx14, dx23, dx24, dx34]`, for 3-forms
//! `[dx123, dx124, dx134, dx234]`. Top-degree values are stored as the scalar
//! `μ` with `value = μ dvol`.
//!
//! Every sign used by [`wedge`] and [`star`] is derived at compile time from
//! the parity of the merging permutation of two index sets.

use nalgebra::{Matrix4, Vector4};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use thiserror::Error;

/// Default lower bound on `u` below which a 2-form counts as degenerate.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-12;

/// Dimension of `Λ^k R^4`.
pub const DIMS: [usize; 5] = [1, 4, 6, 4, 1];

/// Index-set bitmasks of the basis of each degree (bit `a` stands for `dx^{a+1}`).
pub const BASIS: [[u8; 6]; 5] = [
    [0b0000, 0, 0, 0, 0, 0],
    [0b0001, 0b0010, 0b0100, 0b1000, 0, 0],
    [0b0011, 0b0101, 0b1001, 0b0110, 0b1010, 0b1100],
    [0b0111, 0b1011, 0b1101, 0b1110, 0, 0],
    [0b1111, 0, 0, 0, 0, 0],
];

/// Sign of `e_I ∧ e_J = sign · e_{I∪J}`, zero when the sets intersect.
pub const fn merge_sign(i: u8, j: u8) -> i8 {
    if i & j != 0 {
        return 0;
    }
    let mut inversions = 0;
    let mut a = 0;
    while a < 4 {
        if i & (1 << a) != 0 {
            let mut b = 0;
            while b < a {
                if j & (1 << b) != 0 {
                    inversions += 1;
                }
                b += 1;
            }
        }
        a += 1;
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

const fn build_wedge_table() -> [[i8; 16]; 16] {
    let mut t = [[0i8; 16]; 16];
    let mut i = 0;
    while i < 16 {
        let mut j = 0;
        while j < 16 {
            t[i][j] = merge_sign(i as u8, j as u8);
            j += 1;
        }
        i += 1;
    }
    t
}

const fn build_positions() -> [usize; 16] {
    let mut pos = [0usize; 16];
    let mut k = 0;
    while k < 5 {
        let mut p = 0;
        while p < DIMS[k] {
            pos[BASIS[k][p] as usize] = p;
            p += 1;
        }
        k += 1;
    }
    pos
}

const fn build_star_signs() -> [i8; 16] {
    let mut s = [0i8; 16];
    let mut m = 0;
    while m < 16 {
        s[m] = merge_sign(m as u8, (!(m as u8)) & 0b1111);
        m += 1;
    }
    s
}

/// `WEDGE_SIGN[I][J]`: sign of `e_I ∧ e_J` in terms of `e_{I∪J}`.
pub const WEDGE_SIGN: [[i8; 16]; 16] = build_wedge_table();
/// Position of a mask inside the basis of its own degree.
pub const POSITION: [usize; 16] = build_positions();
/// `*e_I = STAR_SIGN[I] · e_{I^c}`, fixed by `e_I ∧ *e_I = dvol`.
pub const STAR_SIGN: [i8; 16] = build_star_signs();

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("degenerate 2-form: u = {u:e} is not above {tol:e}")]
    Nondegeneracy { u: f64, tol: f64 },
    #[error("pointwise star matrix is numerically singular")]
    SingularStar,
    #[error("constraint set violated: {0}")]
    Constraint(String),
    #[error("wedge degree overflow: {0} + {1} > 4")]
    DegreeOverflow(usize, usize),
}

/// Coefficients of a `k`-form at a point, `k = 0..=4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KFormValue {
    degree: usize,
    coeffs: [f64; 6],
}

impl KFormValue {
    pub fn zero(degree: usize) -> Self {
        assert!(degree <= 4, "degree {degree} out of range");
        Self { degree, coeffs: [0.0; 6] }
    }

    /// Panics when `coeffs.len()` does not match the degree.
    pub fn new(degree: usize, coeffs: &[f64]) -> Self {
        assert!(degree <= 4, "degree {degree} out of range");
        assert_eq!(coeffs.len(), DIMS[degree], "coefficient count for degree {degree}");
        let mut c = [0.0; 6];
        c[..coeffs.len()].copy_from_slice(coeffs);
        Self { degree, coeffs: c }
    }

    pub fn scalar(v: f64) -> Self {
        Self::new(0, &[v])
    }

    pub fn top(mu: f64) -> Self {
        Self::new(4, &[mu])
    }

    /// Basis element `dx^{i1} ∧ ... ∧ dx^{ik}` from 1-based sorted indices.
    pub fn basis(indices: &[usize]) -> Self {
        let mut mask = 0u8;
        for &i in indices {
            assert!((1..=4).contains(&i));
            mask |= 1 << (i - 1);
        }
        assert_eq!(mask.count_ones() as usize, indices.len(), "repeated index");
        let mut v = Self::zero(indices.len());
        v.coeffs[POSITION[mask as usize]] = 1.0;
        v
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs[..DIMS[self.degree]]
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs().iter().map(|c| c * c).sum()
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.coeffs.iter_mut().for_each(|c| *c *= s);
        self
    }

    pub fn plus(mut self, other: &Self) -> Self {
        assert_eq!(self.degree, other.degree);
        for (a, b) in self.coeffs.iter_mut().zip(other.coeffs.iter()) {
            *a += b;
        }
        self
    }
}

/// Coefficient-level wedge product; `out` must have `DIMS[j + k]` entries.
pub fn wedge_into(j: usize, a: &[f64], k: usize, b: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (p, &ca) in a.iter().enumerate() {
        if ca == 0.0 {
            continue;
        }
        let ma = BASIS[j][p] as usize;
        for (q, &cb) in b.iter().enumerate() {
            let mb = BASIS[k][q] as usize;
            let s = WEDGE_SIGN[ma][mb];
            if s != 0 {
                out[POSITION[ma | mb]] += f64::from(s) * ca * cb;
            }
        }
    }
}

/// Coefficient-level Hodge star `Λ^k → Λ^{4-k}`.
pub fn star_into(k: usize, a: &[f64], out: &mut [f64]) {
    for (p, &c) in a.iter().enumerate() {
        let m = BASIS[k][p] as usize;
        out[POSITION[!m & 0b1111]] = f64::from(STAR_SIGN[m]) * c;
    }
}

pub fn wedge(a: &KFormValue, b: &KFormValue) -> Result<KFormValue, AlgebraError> {
    let deg = a.degree + b.degree;
    if deg > 4 {
        return Err(AlgebraError::DegreeOverflow(a.degree, b.degree));
    }
    let mut out = KFormValue::zero(deg);
    wedge_into(a.degree, a.coeffs(), b.degree, b.coeffs(), &mut out.coeffs[..DIMS[deg]]);
    Ok(out)
}

pub fn star(a: &KFormValue) -> KFormValue {
    let mut out = KFormValue::zero(4 - a.degree);
    star_into(a.degree, a.coeffs(), &mut out.coeffs[..DIMS[4 - a.degree]]);
    out
}

macro_rules! form_newtype {
    ($name:ident, $len:expr, $deg:expr) => {
        #[derive(Debug, Clone, Copy, PartialEq, Default)]
        pub struct $name(pub [f64; $len]);

        impl $name {
            pub const DEGREE: usize = $deg;

            pub fn zero() -> Self {
                Self([0.0; $len])
            }

            pub fn dot(&self, other: &Self) -> f64 {
                self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
            }

            pub fn norm_sq(&self) -> f64 {
                self.dot(self)
            }

            pub fn norm(&self) -> f64 {
                self.norm_sq().sqrt()
            }

            pub fn max_abs(&self) -> f64 {
                self.0.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
            }
        }

        impl Add for $name {
            type Output = Self;
            fn add(mut self, rhs: Self) -> Self {
                self += rhs;
                self
            }
        }

        impl AddAssign for $name {
            fn add_assign(&mut self, rhs: Self) {
                for (a, b) in self.0.iter_mut().zip(rhs.0) {
                    *a += b;
                }
            }
        }

        impl Sub for $name {
            type Output = Self;
            fn sub(mut self, rhs: Self) -> Self {
                self -= rhs;
                self
            }
        }

        impl SubAssign for $name {
            fn sub_assign(&mut self, rhs: Self) {
                for (a, b) in self.0.iter_mut().zip(rhs.0) {
                    *a -= b;
                }
            }
        }

        impl Neg for $name {
            type Output = Self;
            fn neg(self) -> Self {
                self * -1.0
            }
        }

        impl Mul<f64> for $name {
            type Output = Self;
            fn mul(mut self, s: f64) -> Self {
                self.0.iter_mut().for_each(|c| *c *= s);
                self
            }
        }

        impl Mul<$name> for f64 {
            type Output = $name;
            fn mul(self, v: $name) -> $name {
                v * self
            }
        }

        impl From<$name> for KFormValue {
            fn from(v: $name) -> KFormValue {
                KFormValue::new($deg, &v.0)
            }
        }

        impl TryFrom<KFormValue> for $name {
            type Error = AlgebraError;
            fn try_from(v: KFormValue) -> Result<Self, AlgebraError> {
                if v.degree() != $deg {
                    return Err(AlgebraError::DegreeOverflow(v.degree(), 0));
                }
                let mut c = [0.0; $len];
                c.copy_from_slice(v.coeffs());
                Ok(Self(c))
            }
        }
    };
}

form_newtype!(OneFormValue, 4, 1);
form_newtype!(TwoFormValue, 6, 2);
form_newtype!(ThreeFormValue, 4, 3);

impl OneFormValue {
    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::from_column_slice(&self.0)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self([v[0], v[1], v[2], v[3]])
    }

    pub fn wedge_one(&self, b: &OneFormValue) -> TwoFormValue {
        let mut out = [0.0; 6];
        wedge_into(1, &self.0, 1, &b.0, &mut out);
        TwoFormValue(out)
    }

    pub fn wedge_two(&self, b: &TwoFormValue) -> ThreeFormValue {
        let mut out = [0.0; 4];
        wedge_into(1, &self.0, 2, &b.0, &mut out);
        ThreeFormValue(out)
    }

    /// Coefficient of `self ∧ b` in `dvol`.
    pub fn wedge_three(&self, b: &ThreeFormValue) -> f64 {
        let mut out = [0.0; 1];
        wedge_into(1, &self.0, 3, &b.0, &mut out);
        out[0]
    }

    pub fn star(&self) -> ThreeFormValue {
        let mut out = [0.0; 4];
        star_into(1, &self.0, &mut out);
        ThreeFormValue(out)
    }
}

impl ThreeFormValue {
    pub fn star(&self) -> OneFormValue {
        let mut out = [0.0; 4];
        star_into(3, &self.0, &mut out);
        OneFormValue(out)
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::from_column_slice(&self.0)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self([v[0], v[1], v[2], v[3]])
    }
}

impl TwoFormValue {
    /// Basis element `dx^i ∧ dx^j` for 1-based `i < j`.
    pub fn basis(i: usize, j: usize) -> Self {
        let v = KFormValue::basis(&[i, j]);
        Self::try_from(v).expect("degree 2")
    }

    /// Coefficient of `self ∧ b` in `dvol`.
    pub fn wedge(&self, b: &TwoFormValue) -> f64 {
        let mut out = [0.0; 1];
        wedge_into(2, &self.0, 2, &b.0, &mut out);
        out[0]
    }

    pub fn wedge_one(&self, b: &OneFormValue) -> ThreeFormValue {
        b.wedge_two(self)
    }

    pub fn star(&self) -> TwoFormValue {
        let mut out = [0.0; 6];
        star_into(2, &self.0, &mut out);
        TwoFormValue(out)
    }

    pub fn self_dual(&self) -> TwoFormValue {
        (*self + self.star()) * 0.5
    }

    pub fn anti_self_dual(&self) -> TwoFormValue {
        (*self - self.star()) * 0.5
    }

    /// Antisymmetric matrix `P_ab = ω(e_a, e_b)`.
    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        for p in 0..6 {
            let mask = BASIS[2][p];
            let a = mask.trailing_zeros() as usize;
            let b = 7 - (mask.leading_zeros() as usize);
            m[(a, b)] = self.0[p];
            m[(b, a)] = -self.0[p];
        }
        m
    }

    /// Inverse of [`TwoFormValue::matrix`] on antisymmetric matrices.
    pub fn from_matrix(m: &Matrix4<f64>) -> Self {
        let mut c = [0.0; 6];
        for (p, slot) in c.iter_mut().enumerate() {
            let mask = BASIS[2][p];
            let a = mask.trailing_zeros() as usize;
            let b = 7 - (mask.leading_zeros() as usize);
            *slot = 0.5 * (m[(a, b)] - m[(b, a)]);
        }
        Self(c)
    }
}

/// Splits a 2-form into self-dual and anti-self-dual parts.
pub fn sd_split(a: &TwoFormValue) -> (TwoFormValue, TwoFormValue) {
    (a.self_dual(), a.anti_self_dual())
}

/// The standard constant hyperKähler triple of the flat 4-torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTriple {
    pub omega: [TwoFormValue; 3],
    /// Complex structures with `g = ω_i(·, J_i ·)`.
    pub j: [Matrix4<f64>; 3],
}

impl FrameTriple {
    pub fn standard() -> Self {
        let e = TwoFormValue::basis;
        let omega = [e(1, 2) + e(3, 4), e(1, 3) - e(2, 4), e(1, 4) + e(2, 3)];
        let j = omega.map(|w| w.matrix().try_inverse().expect("frame forms are nondegenerate"));
        Self { omega, j }
    }
}

/// `ω₁ = dx12 + dx34`, the preferred self-dual symplectic form.
pub fn omega1() -> TwoFormValue {
    FrameTriple::standard().omega[0]
}

/// Cached pointwise data determined by a nondegenerate 2-form `ρ`.
#[derive(Debug, Clone, Copy)]
pub struct RhoContext {
    pub rho: TwoFormValue,
    /// `ρ ∧ ρ = 2u dvol`.
    pub u: f64,
    /// Matrix of `λ ↦ ρ ∧ *(ρ ∧ λ) / u`, Λ¹ → Λ³.
    star1: Matrix4<f64>,
    star1_inv: Matrix4<f64>,
    form: Matrix4<f64>,
    form_inv: Matrix4<f64>,
}

impl RhoContext {
    pub fn new(rho: TwoFormValue) -> Result<Self, AlgebraError> {
        Self::with_tolerance(rho, DEFAULT_DEGENERACY_TOL)
    }

    pub fn with_tolerance(rho: TwoFormValue, tol: f64) -> Result<Self, AlgebraError> {
        let u = 0.5 * rho.wedge(&rho);
        if !(u > tol) {
            return Err(AlgebraError::Nondegeneracy { u, tol });
        }
        let mut star1 = Matrix4::zeros();
        for a in 0..4 {
            let mut e = OneFormValue::zero();
            e.0[a] = 1.0;
            let col = star_rho_one_explicit(&rho, u, &e);
            for b in 0..4 {
                star1[(b, a)] = col.0[b];
            }
        }
        let star1_inv = star1.try_inverse().ok_or(AlgebraError::SingularStar)?;
        let form = rho.matrix();
        let form_inv = form.try_inverse().ok_or(AlgebraError::SingularStar)?;
        Ok(Self { rho, u, star1, star1_inv, form, form_inv })
    }

    pub fn star1_matrix(&self) -> &Matrix4<f64> {
        &self.star1
    }

    pub fn star1_inverse(&self) -> &Matrix4<f64> {
        &self.star1_inv
    }

    /// `R^ρ w = w − (w∧ρ / dvol_ρ) ρ` with `dvol_ρ = u dvol`.
    pub fn r_rho(&self, w: &TwoFormValue) -> TwoFormValue {
        *w - self.rho * (w.wedge(&self.rho) / self.u)
    }

    pub fn star_rho_one(&self, l: &OneFormValue) -> ThreeFormValue {
        ThreeFormValue::from_vector(&(self.star1 * l.as_vector()))
    }

    pub fn star_rho_two(&self, w: &TwoFormValue) -> TwoFormValue {
        self.r_rho(&self.r_rho(w).star())
    }

    /// Inverse of the Λ¹ star with the odd-degree sign: `*^ρ *^ρ = −1`.
    pub fn star_rho_three(&self, eta: &ThreeFormValue) -> OneFormValue {
        OneFormValue::from_vector(&(-(self.star1_inv * eta.as_vector())))
    }

    /// `Θ^ρ = *ρ/u − ½|ρ/u|² ρ`.
    pub fn theta(&self) -> TwoFormValue {
        let r = self.rho * (1.0 / self.u);
        r.star() - self.rho * (0.5 * r.norm_sq())
    }

    /// `θ^ρ = 2ρ⁺/u − |ρ⁺/u|² ρ`; identical to [`RhoContext::theta`].
    pub fn theta_self_dual_form(&self) -> TwoFormValue {
        let k = self.rho.self_dual() * (1.0 / self.u);
        k * 2.0 - self.rho * k.norm_sq()
    }

    /// `ρ⁺ / u`.
    pub fn kmap(&self) -> TwoFormValue {
        self.rho.self_dual() * (1.0 / self.u)
    }

    /// Matrix `J^ρ` with `ρ(J^ρ X, Y) = ρ(X, J Y)`.
    pub fn j_rho_of(&self, j: &Matrix4<f64>) -> Matrix4<f64> {
        self.form_inv.transpose() * j.transpose() * self.form.transpose()
    }

    pub fn j_rho(&self, frame: &FrameTriple, i: usize) -> Matrix4<f64> {
        self.j_rho_of(&frame.j[i])
    }

    /// Vector `X` with `ρ(X, ·) = λ`.
    pub fn hamiltonian_vector(&self, l: &OneFormValue) -> Vector4<f64> {
        self.form_inv.transpose() * l.as_vector()
    }

    /// `ρ(X, Y)`.
    pub fn pair(&self, x: &Vector4<f64>, y: &Vector4<f64>) -> f64 {
        (x.transpose() * self.form * y)[(0, 0)]
    }

    /// Gram matrix `G` of `g^ρ` on 1-forms: `λ ∧ *^ρ μ = λᵀ G μ dvol`.
    pub fn metric_one_forms(&self) -> Matrix4<f64> {
        let mut g = Matrix4::zeros();
        for a in 0..4 {
            let mut ea = OneFormValue::zero();
            ea.0[a] = 1.0;
            for b in 0..4 {
                let col = ThreeFormValue([
                    self.star1[(0, b)],
                    self.star1[(1, b)],
                    self.star1[(2, b)],
                    self.star1[(3, b)],
                ]);
                g[(a, b)] = ea.wedge_three(&col);
            }
        }
        g
    }

    /// `{f, g}_ρ` from the differentials: `df ∧ dg ∧ ρ = {f,g}_ρ dvol_ρ`.
    pub fn poisson(&self, df: &OneFormValue, dg: &OneFormValue) -> f64 {
        df.wedge_one(dg).wedge(&self.rho) / self.u
    }

    /// Derivative of the Λ¹ → Λ³ star matrix in the direction `ρ̂`.
    pub fn star1_derivative(&self, rhohat: &TwoFormValue) -> Matrix4<f64> {
        let uhat = self.rho.wedge(rhohat);
        let mut m = Matrix4::zeros();
        for a in 0..4 {
            let mut e = OneFormValue::zero();
            e.0[a] = 1.0;
            let col = (chord(&self.rho, rhohat, &e) + chord(rhohat, &self.rho, &e)) * (1.0 / self.u);
            for b in 0..4 {
                m[(b, a)] = col.0[b];
            }
        }
        m - self.star1 * (uhat / self.u)
    }

    /// Derivative of `*^ρ : Λ³ → Λ¹` in the direction `ρ̂`, from `d(−M⁻¹) = M⁻¹ Ṁ M⁻¹`.
    pub fn star3_derivative(&self, rhohat: &TwoFormValue) -> Matrix4<f64> {
        self.star1_inv * self.star1_derivative(rhohat) * self.star1_inv
    }

    /// Derivative of `θ^ρ` in the direction `ρ̂`: `(ρ̂ + *^ρρ̂)/u − |ρ⁺/u|² ρ̂`.
    pub fn theta_derivative(&self, rhohat: &TwoFormValue) -> TwoFormValue {
        (*rhohat + self.star_rho_two(rhohat)) * (1.0 / self.u) - *rhohat * self.kmap().norm_sq()
    }

    /// Derivative of `K = ρ⁺/u`: `R^ρ(ρ̂ + *^ρρ̂) / 2u`.
    pub fn kmap_derivative(&self, rhohat: &TwoFormValue) -> TwoFormValue {
        self.r_rho(&(*rhohat + self.star_rho_two(rhohat))) * (0.5 / self.u)
    }
}

/// `*(a ∧ λ) ∧ b`.
fn chord(a: &TwoFormValue, b: &TwoFormValue, l: &OneFormValue) -> ThreeFormValue {
    l.wedge_two(a).star().wedge_two(b)
}

fn star_rho_one_explicit(rho: &TwoFormValue, u: f64, l: &OneFormValue) -> ThreeFormValue {
    chord(rho, rho, l) * (1.0 / u)
}

pub fn make_context(rho: TwoFormValue) -> Result<RhoContext, AlgebraError> {
    RhoContext::new(rho)
}

/// Tolerance used to validate the constraint set in [`negative_chords_defect`].
pub const CONSTRAINT_TOL: f64 = 1e-10;

/// `(ρ₁ − ρ₂)² / dvol` for ρ₁, ρ₂ on the constraint set determined by `θ`.
pub fn negative_chords_defect(
    theta: &TwoFormValue,
    rho1: &TwoFormValue,
    rho2: &TwoFormValue,
) -> Result<f64, AlgebraError> {
    let tol = CONSTRAINT_TOL;
    if (theta.star() - *theta).max_abs() > tol {
        return Err(AlgebraError::Constraint("θ is not self-dual".into()));
    }
    if (theta.wedge(theta) - 1.0).abs() > tol {
        return Err(AlgebraError::Constraint("θ ∧ θ ≠ dvol".into()));
    }
    let tsq = theta.norm_sq();
    for (idx, rho) in [rho1, rho2].into_iter().enumerate() {
        if (rho.wedge(rho) - 1.0).abs() > tol {
            return Err(AlgebraError::Constraint(format!("ρ{} ∧ ρ{} ≠ dvol", idx + 1, idx + 1)));
        }
        let plus = rho.self_dual();
        let lambda = plus.dot(theta) / tsq;
        if (plus - *theta * lambda).max_abs() > tol {
            return Err(AlgebraError::Constraint(format!("ρ{}⁺ is not a multiple of θ", idx + 1)));
        }
        if lambda < 1.0 - tol {
            return Err(AlgebraError::Constraint(format!("λ{} = {lambda} < 1", idx + 1)));
        }
    }
    let d = *rho1 - *rho2;
    Ok(d.wedge(&d))
}
