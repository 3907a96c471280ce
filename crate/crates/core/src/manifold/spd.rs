//! Symmetric positive-definite matrices with the affine-invariant metric
//!
//! `d(A, B) = |log(A^{-1/2} B A^{-1/2})|_F`, `<U, V>_A = tr(A^{-1} U A^{-1} V)`.
//!
//! A point is stored as its eigenvectors and log-eigenvalues, a tangent
//! vector `V` at `A` as the whitened matrix `W = A^{-1/2} V A^{-1/2}`, so the
//! inner product is Frobenius and `Exp_A(V) = A^{1/2} exp(W) A^{1/2}`.
//! Congruences are diagonalised in log space by
//! [`crate::linalg::congruence_log_eigen`].

use nalgebra::{DMatrix, DVector};

use super::{check_anchor, check_same_base, r_coth_r, Family, Manifold, Point, TangentData, TangentVector};
use crate::error::{domain, validation, Result};
use crate::linalg::{congruence_log_eigen, orthonormalize_columns, sym_eigen, symmetrize};

/// An SPD matrix `Q diag(e^l) Q^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdPoint {
    eigvecs: DMatrix<f64>,
    log_eigs: DVector<f64>,
}

impl SpdPoint {
    pub fn identity(n: usize) -> Self {
        SpdPoint { eigvecs: DMatrix::identity(n, n), log_eigs: DVector::zeros(n) }
    }

    /// Symmetrises `a` and checks positive definiteness.
    pub fn from_matrix(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(validation("SPD input must be a non-empty square matrix"));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(validation("SPD input has non-finite entries"));
        }
        let (q, w) = sym_eigen(a);
        let min = w.min();
        if !(min > 0.0) {
            return Err(validation(format!("matrix is not positive definite (min eigenvalue {min:e})")));
        }
        Ok(SpdPoint { eigvecs: q, log_eigs: w.map(f64::ln) })
    }

    /// From an eigenbasis and log-eigenvalues; `eigvecs` is re-orthonormalised.
    pub fn from_log_eigen(mut eigvecs: DMatrix<f64>, log_eigs: DVector<f64>) -> Result<Self> {
        let n = log_eigs.len();
        if eigvecs.shape() != (n, n) || n == 0 {
            return Err(validation("eigenbasis and log-eigenvalues have inconsistent sizes"));
        }
        if log_eigs.iter().chain(eigvecs.iter()).any(|v| !v.is_finite()) {
            return Err(validation("non-finite SPD factors"));
        }
        orthonormalize_columns(&mut eigvecs);
        Ok(SpdPoint { eigvecs, log_eigs })
    }

    pub fn n(&self) -> usize {
        self.log_eigs.len()
    }

    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn log_eigs(&self) -> &DVector<f64> {
        &self.log_eigs
    }

    /// `A^p = Q diag(e^{p l}) Q^T`.
    pub fn power(&self, p: f64) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&self.log_eigs.map(|l| (p * l).exp()));
        &self.eigvecs * d * self.eigvecs.transpose()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        self.power(1.0)
    }

    /// Matrix logarithm `Q diag(l) Q^T`.
    pub fn log_matrix(&self) -> DMatrix<f64> {
        &self.eigvecs * DMatrix::from_diagonal(&self.log_eigs) * self.eigvecs.transpose()
    }

    pub(crate) fn approx_eq(&self, other: &SpdPoint, tol: f64) -> bool {
        if self.n() != other.n() {
            return false;
        }
        if self == other {
            return true;
        }
        let a = self.log_matrix();
        let b = other.log_matrix();
        (a - &b).amax() <= tol * (1.0 + b.amax())
    }
}

/// Converts a symmetric matrix to its isometric coordinate vector:
/// diagonal entries unscaled, upper off-diagonal entries times `sqrt(2)`,
/// row-major over the upper triangle.
pub fn spd_vec(s: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(validation("vec coordinates need a square matrix"));
    }
    let asym = (s - s.transpose()).amax();
    if asym > 1e-12 * (1.0 + s.amax()) {
        return Err(validation(format!("matrix is not symmetric (asymmetry {asym:e})")));
    }
    let mut out = DVector::zeros(n * (n + 1) / 2);
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            out[idx] = if i == j { s[(i, i)] } else { std::f64::consts::SQRT_2 * 0.5 * (s[(i, j)] + s[(j, i)]) };
            idx += 1;
        }
    }
    Ok(out)
}

/// Inverse of [`spd_vec`].
pub fn spd_unvec(n: usize, z: &DVector<f64>) -> Result<DMatrix<f64>> {
    if z.len() != n * (n + 1) / 2 {
        return Err(domain(format!("expected {} vec coordinates, got {}", n * (n + 1) / 2, z.len())));
    }
    let mut s = DMatrix::zeros(n, n);
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            if i == j {
                s[(i, i)] = z[idx];
            } else {
                let v = z[idx] * std::f64::consts::FRAC_1_SQRT_2;
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
            idx += 1;
        }
    }
    Ok(s)
}

/// `Sym+(n)` with the affine-invariant metric.
#[derive(Clone, Debug)]
pub struct Spd {
    n: usize,
}

impl Spd {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "SPD matrix size must be positive");
        Spd { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn spd<'a>(&self, x: &'a Point) -> Result<&'a SpdPoint> {
        match x {
            Point::Spd(p) if p.n() == self.n => Ok(p),
            Point::Spd(p) => Err(domain(format!("expected a point of SPD({}), got SPD({})", self.n, p.n()))),
            other => Err(domain(format!("expected an SPD point, got {}", other.family()))),
        }
    }

    fn whitened<'a>(&self, v: &'a TangentVector) -> Result<&'a DMatrix<f64>> {
        match &v.data {
            TangentData::Spd(w) if w.nrows() == self.n && w.ncols() == self.n => Ok(w),
            _ => Err(domain("expected an SPD tangent vector")),
        }
    }

    /// Eigenbasis and log-eigenvalues of `A^{-1/2} B A^{-1/2}`.
    fn relative(a: &SpdPoint, b: &SpdPoint) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let r = a.eigvecs.tr_mul(&b.eigvecs);
        let (u, l) = congruence_log_eigen(&(a.log_eigs.clone() * -0.5), &r, &(b.log_eigs.clone() * 0.5))?;
        Ok((&a.eigvecs * u, l))
    }

    fn log_whitened(a: &SpdPoint, b: &SpdPoint) -> Result<DMatrix<f64>> {
        let (q, l) = Self::relative(a, b)?;
        Ok(symmetrize(&(&q * DMatrix::from_diagonal(&l) * q.transpose())))
    }

    fn exp_whitened(a: &SpdPoint, w: &DMatrix<f64>) -> Result<SpdPoint> {
        if w.iter().all(|v| *v == 0.0) {
            return Ok(a.clone());
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(validation("non-finite tangent vector"));
        }
        let (qw, lw) = sym_eigen(w);
        let r = a.eigvecs.tr_mul(&qw);
        let (u, l) = congruence_log_eigen(&(a.log_eigs.clone() * 0.5), &r, &(lw * 0.5))?;
        SpdPoint::from_log_eigen(&a.eigvecs * u, l)
    }

    /// Whitened representation of an ambient symmetric matrix `V` at `base`.
    pub fn tangent_from_ambient(&self, base: &Point, v: &DMatrix<f64>) -> Result<TangentVector> {
        let a = self.spd(base)?;
        if v.shape() != (self.n, self.n) {
            return Err(domain("ambient tangent has the wrong shape"));
        }
        let asym = (v - v.transpose()).amax();
        if asym > 1e-12 * (1.0 + v.amax()) {
            return Err(validation("ambient tangent is not symmetric"));
        }
        let s = a.power(-0.5);
        let w = symmetrize(&(&s * v * &s));
        Ok(TangentVector::new(base.clone(), TangentData::Spd(w)))
    }

    /// Ambient symmetric matrix `A^{1/2} W A^{1/2}`.
    pub fn ambient_tangent(&self, v: &TangentVector) -> Result<DMatrix<f64>> {
        let a = self.spd(&v.base)?;
        let w = self.whitened(v)?;
        let s = a.power(0.5);
        Ok(symmetrize(&(&s * w * &s)))
    }
}

impl Manifold for Spd {
    fn family(&self) -> Family {
        Family::Spd
    }

    fn dim(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    fn origin(&self) -> Point {
        Point::Spd(SpdPoint::identity(self.n))
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        let p = self.spd(x)?;
        if p.log_eigs.iter().chain(p.eigvecs.iter()).any(|v| !v.is_finite()) {
            return Err(validation("non-finite SPD factors"));
        }
        let gram = p.eigvecs.tr_mul(&p.eigvecs);
        if (gram - DMatrix::identity(self.n, self.n)).amax() > 1e-10 {
            return Err(validation("SPD eigenbasis is not orthonormal"));
        }
        Ok(())
    }

    fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        let (_, l) = Self::relative(self.spd(x)?, self.spd(y)?)?;
        Ok(l.norm())
    }

    fn exp(&self, base: &Point, v: &TangentVector) -> Result<Point> {
        check_anchor(base, v)?;
        Ok(Point::Spd(Self::exp_whitened(self.spd(base)?, self.whitened(v)?)?))
    }

    fn log(&self, base: &Point, y: &Point) -> Result<TangentVector> {
        let w = Self::log_whitened(self.spd(base)?, self.spd(y)?)?;
        Ok(TangentVector::new(base.clone(), TangentData::Spd(w)))
    }

    fn inner(&self, u: &TangentVector, v: &TangentVector) -> Result<f64> {
        check_same_base(u, v)?;
        self.spd(&u.base)?;
        Ok(self.whitened(u)?.dot(self.whitened(v)?))
    }

    fn tangent_coords(&self, v: &TangentVector) -> Result<DVector<f64>> {
        self.spd(&v.base)?;
        spd_vec(self.whitened(v)?)
    }

    fn tangent_from_coords(&self, base: &Point, z: &DVector<f64>) -> Result<TangentVector> {
        self.spd(base)?;
        Ok(TangentVector::new(base.clone(), TangentData::Spd(spd_unvec(self.n, z)?)))
    }

    fn log_coords(&self, base: &Point, y: &Point) -> Result<DVector<f64>> {
        spd_vec(&Self::log_whitened(self.spd(base)?, self.spd(y)?)?)
    }

    fn exp_coords(&self, base: &Point, z: &DVector<f64>) -> Result<Point> {
        Ok(Point::Spd(Self::exp_whitened(self.spd(base)?, &spd_unvec(self.n, z)?)?))
    }

    /// With `W = q diag(l) q^T` the whitened logarithm, the curvature operator
    /// `V -> -[[V, W], W] / 4` is diagonal in the basis
    /// `(q_a q_b^T + q_b q_a^T) / sqrt(2)`, `q_a q_a^T` with eigenvalues
    /// `-(l_a - l_b)^2 / 4`, so the Hessian has eigenvalues `s coth s`,
    /// `s = |l_a - l_b| / 2`, on the same basis.
    /// In the eigenbasis of the base, a diagonal entry of the whitened step
    /// moves a log-eigenvalue and an off-diagonal entry rotates the basis by
    /// about `W_ab / (2 sinh(|l_a - l_b| / 2))`.
    fn resolution_ratio(&self, base: &Point, z: &DVector<f64>) -> Result<f64> {
        let p = self.spd(base)?;
        let q = p.eigvecs();
        let w = q.tr_mul(&spd_unvec(self.n, z)?) * q;
        let l = p.log_eigs();
        let mut ratio: f64 = 0.0;
        for a in 0..self.n {
            for b in a..self.n {
                let scale = if a == b { 1.0 + l[a].abs() } else { (2.0 * (0.5 * (l[a] - l[b]).abs()).sinh()).max(1.0) };
                ratio = ratio.max(w[(a, b)].abs() / (f64::EPSILON * scale));
            }
        }
        Ok(ratio)
    }

    fn log_and_hessian(&self, base: &Point, y: &Point) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let a = self.spd(base)?;
        let (q, l) = Self::relative(a, self.spd(y)?)?;
        let w = symmetrize(&(&q * DMatrix::from_diagonal(&l) * q.transpose()));
        let v = spd_vec(&w)?;
        let dim = self.dim();
        let mut h = DMatrix::zeros(dim, dim);
        for i in 0..self.n {
            for j in i..self.n {
                let qi = q.column(i);
                let qj = q.column(j);
                let b = if i == j {
                    qi * qi.transpose()
                } else {
                    (qi * qj.transpose() + qj * qi.transpose()) * std::f64::consts::FRAC_1_SQRT_2
                };
                let e = spd_vec(&b)?;
                let c = r_coth_r(0.5 * (l[i] - l[j]));
                h += (&e * e.transpose()) * c;
            }
        }
        Ok((v, h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn distance_to_diagonal_matrix() {
        let s = Spd::new(2);
        let d = s.distance(&s.origin(), &Point::spd(&diag(&[E, 1.0])).unwrap()).unwrap();
        assert_relative_eq!(d, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn exp_of_diagonal_tangent_at_identity() {
        let s = Spd::new(2);
        let v = s.tangent_from_ambient(&s.origin(), &diag(&[1.0, 0.0])).unwrap();
        let y = s.exp(&s.origin(), &v).unwrap();
        assert_relative_eq!(y.as_spd().unwrap().matrix(), diag(&[E, 1.0]), epsilon = 1e-14);
    }

    #[test]
    fn log_of_diagonal_matrix_at_identity() {
        let s = Spd::new(2);
        let v = s.log(&s.origin(), &Point::spd(&diag(&[E * E, 1.0])).unwrap()).unwrap();
        assert_relative_eq!(s.ambient_tangent(&v).unwrap(), diag(&[2.0, 0.0]), epsilon = 1e-14);
    }

    #[test]
    fn inner_product_at_identity_is_trace() {
        let s = Spd::new(2);
        let u = s.tangent_from_ambient(&s.origin(), &diag(&[1.0, 1.0])).unwrap();
        assert_relative_eq!(s.inner(&u, &u).unwrap(), 2.0);
    }

    #[test]
    fn inner_product_matches_affine_invariant_trace_formula() {
        let s = Spd::new(3);
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 0.8]);
        let base = Point::spd(&a).unwrap();
        let u = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, -0.5, 0.4, 0.0, 0.4, 0.3]);
        let v = DMatrix::from_row_slice(3, 3, &[0.1, -1.0, 0.5, -1.0, 0.2, 0.0, 0.5, 0.0, 2.0]);
        let tu = s.tangent_from_ambient(&base, &u).unwrap();
        let tv = s.tangent_from_ambient(&base, &v).unwrap();
        let ai = a.clone().try_inverse().unwrap();
        let expected = (&ai * &u * &ai * &v).trace();
        assert_relative_eq!(s.inner(&tu, &tv).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn midpoint_of_matrix_and_inverse_is_identity() {
        let s = Spd::new(2);
        let a = Point::spd(&diag(&[4.0, 1.0])).unwrap();
        let b = Point::spd(&diag(&[0.25, 1.0])).unwrap();
        let m = s.geodesic(&a, &b, 0.5).unwrap();
        assert_relative_eq!(m.as_spd().unwrap().matrix(), DMatrix::identity(2, 2), epsilon = 1e-14);
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(Point::spd(&m), Err(crate::Error::Validation(_))));
    }

    #[test]
    fn vec_coordinates_are_isometric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        let z = spd_vec(&m).unwrap();
        assert_relative_eq!(z, DVector::from_vec(vec![1.0, 2.0 * 2f64.sqrt(), 3.0]), epsilon = 1e-15);
        assert_relative_eq!(z.norm(), m.norm(), epsilon = 1e-14);
        assert_eq!(spd_vec(&DMatrix::zeros(3, 3)).unwrap(), DVector::zeros(6));
        assert!(spd_vec(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn distance_agrees_with_dense_formula() {
        let s = Spd::new(3);
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 0.8]);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, -0.4, 0.2, -0.4, 3.0, 0.5, 0.2, 0.5, 1.2]);
        let pa = SpdPoint::from_matrix(&a).unwrap();
        let rel = pa.power(-0.5) * &b * pa.power(-0.5);
        let (_, w) = sym_eigen(&rel);
        let expected = w.map(f64::ln).norm();
        let d = s.distance(&Point::spd(&a).unwrap(), &Point::spd(&b).unwrap()).unwrap();
        assert_relative_eq!(d, expected, max_relative = 1e-12);
    }

    #[test]
    fn extreme_spread_keeps_exact_distance() {
        // log-eigenvalues +-40: the dense matrix has condition number e^80
        let s = Spd::new(2);
        let z = DVector::from_vec(vec![40.0, 0.0, -40.0]);
        let x = s.exp_coords(&s.origin(), &z).unwrap();
        assert_relative_eq!(s.distance(&s.origin(), &x).unwrap(), z.norm(), max_relative = 1e-14);
        let back = s.log_coords(&s.origin(), &x).unwrap();
        assert_relative_eq!(back, z, epsilon = 1e-12);
    }
}
