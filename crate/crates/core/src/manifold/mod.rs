//! Non-compact symmetric spaces.
//!
//! Every space implements [`Manifold`]: distance, exponential and logarithm
//! maps, the Riemannian inner product, and conversion between tangent
//! vectors and coordinates in an orthonormal basis of the tangent space.
//! All spaces here are Hadamard manifolds, so `exp` and `log` are global
//! inverse diffeomorphisms and no cut-locus handling is needed.
//!
//! Four families are provided:
//!
//! * [`Euclidean`]: `R^k` with an arbitrary inner product `<x, y> = x^T G y`.
//! * [`Hyperbolic`]: the hyperboloid model of `H^k`, curvature `-1`.
//! * [`Spd`]: symmetric positive-definite `k x k` matrices with the
//!   affine-invariant metric.
//! * [`Product`]: Riemannian products of the above.
//!
//! Points and tangent vectors are plain values; spaces are immutable after
//! construction and can be shared across threads.

mod euclidean;
mod hyperbolic;
mod product;
mod spd;

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Result};

pub use euclidean::Euclidean;
pub use hyperbolic::{Hyperbolic, PolarPoint};
pub use product::{product_space, Product};
pub use spd::{spd_unvec, spd_vec, Spd, SpdPoint};

/// Tolerance used when checking that a tangent vector is anchored at a base.
pub(crate) const ANCHOR_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Euclidean,
    Hyperbolic,
    Spd,
    Product,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Euclidean => "euclidean",
            Family::Hyperbolic => "hyperbolic",
            Family::Spd => "spd",
            Family::Product => "product",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An element of one of the supported spaces.
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    Euclidean(DVector<f64>),
    Hyperbolic(PolarPoint),
    Spd(SpdPoint),
    Product(Vec<Point>),
}

impl Point {
    pub fn euclidean(coords: impl Into<DVector<f64>>) -> Point {
        Point::Euclidean(coords.into())
    }

    pub fn euclidean_slice(coords: &[f64]) -> Point {
        Point::Euclidean(DVector::from_column_slice(coords))
    }

    /// Builds a hyperbolic point from Minkowski coordinates `(x0, x1, .., xk)`.
    pub fn hyperboloid(coords: &DVector<f64>) -> Result<Point> {
        PolarPoint::from_minkowski(coords).map(Point::Hyperbolic)
    }

    /// Builds an SPD point from a matrix, symmetrising it first.
    pub fn spd(matrix: &DMatrix<f64>) -> Result<Point> {
        SpdPoint::from_matrix(matrix).map(Point::Spd)
    }

    pub fn product(components: Vec<Point>) -> Point {
        Point::Product(components)
    }

    pub fn family(&self) -> Family {
        match self {
            Point::Euclidean(_) => Family::Euclidean,
            Point::Hyperbolic(_) => Family::Hyperbolic,
            Point::Spd(_) => Family::Spd,
            Point::Product(_) => Family::Product,
        }
    }

    pub fn as_euclidean(&self) -> Option<&DVector<f64>> {
        match self {
            Point::Euclidean(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_hyperbolic(&self) -> Option<&PolarPoint> {
        match self {
            Point::Hyperbolic(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_spd(&self) -> Option<&SpdPoint> {
        match self {
            Point::Spd(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_product(&self) -> Option<&[Point]> {
        match self {
            Point::Product(c) => Some(c),
            _ => None,
        }
    }

    /// Structural equality up to `tol`, used to check tangent anchoring.
    pub fn approx_eq(&self, other: &Point, tol: f64) -> bool {
        match (self, other) {
            (Point::Euclidean(a), Point::Euclidean(b)) => {
                a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| close(*x, *y, tol))
            }
            (Point::Hyperbolic(a), Point::Hyperbolic(b)) => a.approx_eq(b, tol),
            (Point::Spd(a), Point::Spd(b)) => a.approx_eq(b, tol),
            (Point::Product(a), Point::Product(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.approx_eq(y, tol))
            }
            _ => false,
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Space-specific storage of a tangent vector.
///
/// * Euclidean: ambient coordinates (the metric is carried by the space).
/// * Hyperbolic: coordinates in the frame obtained by transporting the
///   standard basis at the origin along the radial geodesic to the base.
/// * SPD: the whitened matrix `A^{-1/2} V A^{-1/2}` at base `A`.
#[derive(Clone, Debug, PartialEq)]
pub enum TangentData {
    Euclidean(DVector<f64>),
    Hyperbolic(DVector<f64>),
    Spd(DMatrix<f64>),
    Product(Vec<TangentData>),
}

impl TangentData {
    pub fn scale(&self, s: f64) -> TangentData {
        match self {
            TangentData::Euclidean(v) => TangentData::Euclidean(v * s),
            TangentData::Hyperbolic(v) => TangentData::Hyperbolic(v * s),
            TangentData::Spd(m) => TangentData::Spd(m * s),
            TangentData::Product(parts) => TangentData::Product(parts.iter().map(|p| p.scale(s)).collect()),
        }
    }

    pub fn add(&self, other: &TangentData) -> Result<TangentData> {
        Ok(match (self, other) {
            (TangentData::Euclidean(a), TangentData::Euclidean(b)) if a.len() == b.len() => {
                TangentData::Euclidean(a + b)
            }
            (TangentData::Hyperbolic(a), TangentData::Hyperbolic(b)) if a.len() == b.len() => {
                TangentData::Hyperbolic(a + b)
            }
            (TangentData::Spd(a), TangentData::Spd(b)) if a.shape() == b.shape() => TangentData::Spd(a + b),
            (TangentData::Product(a), TangentData::Product(b)) if a.len() == b.len() => {
                TangentData::Product(a.iter().zip(b).map(|(x, y)| x.add(y)).collect::<Result<_>>()?)
            }
            _ => return Err(domain("tangent vectors of different shapes")),
        })
    }
}

/// A tangent vector together with the point it is anchored at.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub base: Point,
    pub data: TangentData,
}

impl TangentVector {
    pub fn new(base: Point, data: TangentData) -> Self {
        TangentVector { base, data }
    }

    pub fn scale(&self, s: f64) -> TangentVector {
        TangentVector { base: self.base.clone(), data: self.data.scale(s) }
    }

    pub fn neg(&self) -> TangentVector {
        self.scale(-1.0)
    }

    pub fn add(&self, other: &TangentVector) -> Result<TangentVector> {
        if !self.base.approx_eq(&other.base, ANCHOR_TOL) {
            return Err(domain("cannot add tangent vectors anchored at different points"));
        }
        Ok(TangentVector { base: self.base.clone(), data: self.data.add(&other.data)? })
    }
}

/// Operations every space provides.
///
/// Orthonormal coordinates (`tangent_coords` / `tangent_from_coords`) give
/// an isometry between `(T_x M, <.,.>_x)` and `R^dim` with the dot product;
/// samplers draw in these coordinates.
pub trait Manifold: fmt::Debug + Send + Sync {
    fn family(&self) -> Family;

    /// Intrinsic dimension (length of orthonormal tangent coordinates).
    fn dim(&self) -> usize;

    /// Canonical reference point: `0`, the hyperboloid apex, or `I`.
    fn origin(&self) -> Point;

    /// Validates that `x` belongs to this space.
    fn check_point(&self, x: &Point) -> Result<()>;

    fn distance(&self, x: &Point, y: &Point) -> Result<f64>;

    fn exp(&self, base: &Point, v: &TangentVector) -> Result<Point>;

    fn log(&self, base: &Point, y: &Point) -> Result<TangentVector>;

    fn inner(&self, u: &TangentVector, v: &TangentVector) -> Result<f64>;

    fn tangent_coords(&self, v: &TangentVector) -> Result<DVector<f64>>;

    fn tangent_from_coords(&self, base: &Point, z: &DVector<f64>) -> Result<TangentVector>;

    /// `log` expressed in orthonormal coordinates.
    fn log_coords(&self, base: &Point, y: &Point) -> Result<DVector<f64>> {
        let v = self.log(base, y)?;
        self.tangent_coords(&v)
    }

    /// `exp` of a tangent vector given in orthonormal coordinates.
    fn exp_coords(&self, base: &Point, z: &DVector<f64>) -> Result<Point> {
        let v = self.tangent_from_coords(base, z)?;
        self.exp(base, &v)
    }

    /// `Log_base(y)` in orthonormal coordinates, together with the Hessian at
    /// `base` of `p -> d^2(p, y) / 2` in the same coordinates. The default
    /// Hessian, the identity, is exact on flat spaces.
    fn log_and_hessian(&self, base: &Point, y: &Point) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let v = self.log_coords(base, y)?;
        let k = v.len();
        Ok((v, DMatrix::identity(k, k)))
    }

    /// Size of the step `z` (orthonormal coordinates at `base`) in units of
    /// the smallest displacement the stored form of `base` can represent.
    /// Steps with a ratio of order one are lost to rounding.
    fn resolution_ratio(&self, base: &Point, z: &DVector<f64>) -> Result<f64> {
        let scale = self.log_coords(&self.origin(), base)?.norm();
        Ok(z.norm() / (f64::EPSILON * (1.0 + scale)))
    }

    fn zero_tangent(&self, base: &Point) -> Result<TangentVector> {
        self.tangent_from_coords(base, &DVector::zeros(self.dim()))
    }

    fn norm(&self, v: &TangentVector) -> Result<f64> {
        Ok(self.inner(v, v)?.max(0.0).sqrt())
    }

    /// Constant-speed geodesic from `x` (t = 0) to `y` (t = 1).
    fn geodesic(&self, x: &Point, y: &Point, t: f64) -> Result<Point> {
        if !(0.0..=1.0).contains(&t) {
            return Err(domain(format!("geodesic parameter {t} outside [0, 1]")));
        }
        if t == 0.0 {
            self.check_point(x)?;
            self.check_point(y)?;
            return Ok(x.clone());
        }
        if t == 1.0 {
            self.check_point(x)?;
            self.check_point(y)?;
            return Ok(y.clone());
        }
        let v = self.log(x, y)?;
        self.exp(x, &v.scale(t))
    }

    /// Geodesic symmetry `s_center(x) = Exp_center(-Log_center(x))`.
    fn reflect(&self, center: &Point, x: &Point) -> Result<Point> {
        let v = self.log(center, x)?;
        self.exp(center, &v.neg())
    }
}

pub(crate) fn check_anchor(base: &Point, v: &TangentVector) -> Result<()> {
    if base.approx_eq(&v.base, ANCHOR_TOL) {
        Ok(())
    } else {
        Err(domain("tangent vector is anchored at a different point"))
    }
}

pub(crate) fn check_same_base(u: &TangentVector, v: &TangentVector) -> Result<()> {
    if u.base.approx_eq(&v.base, ANCHOR_TOL) {
        Ok(())
    } else {
        Err(domain("tangent vectors are anchored at different points"))
    }
}

/// A concrete space of any supported family.
#[derive(Clone, Debug)]
pub enum Space {
    Euclidean(Euclidean),
    Hyperbolic(Hyperbolic),
    Spd(Spd),
    Product(Product),
}

impl From<Euclidean> for Space {
    fn from(s: Euclidean) -> Self {
        Space::Euclidean(s)
    }
}

impl From<Hyperbolic> for Space {
    fn from(s: Hyperbolic) -> Self {
        Space::Hyperbolic(s)
    }
}

impl From<Spd> for Space {
    fn from(s: Spd) -> Self {
        Space::Spd(s)
    }
}

impl From<Product> for Space {
    fn from(s: Product) -> Self {
        Space::Product(s)
    }
}

impl Space {
    pub fn euclidean(dim: usize) -> Space {
        Euclidean::new(dim).into()
    }

    pub fn hyperbolic(dim: usize) -> Space {
        Hyperbolic::new(dim).into()
    }

    pub fn spd(n: usize) -> Space {
        Spd::new(n).into()
    }

    /// `true` when sectional curvature is zero everywhere.
    pub fn is_flat(&self) -> bool {
        match self {
            Space::Euclidean(_) => true,
            Space::Hyperbolic(_) => false,
            Space::Spd(s) => s.n() == 1,
            Space::Product(p) => p.factors().iter().all(Space::is_flat),
        }
    }

    fn inner_ref(&self) -> &dyn Manifold {
        match self {
            Space::Euclidean(s) => s,
            Space::Hyperbolic(s) => s,
            Space::Spd(s) => s,
            Space::Product(s) => s,
        }
    }
}

impl Manifold for Space {
    fn family(&self) -> Family {
        self.inner_ref().family()
    }
    fn dim(&self) -> usize {
        self.inner_ref().dim()
    }
    fn origin(&self) -> Point {
        self.inner_ref().origin()
    }
    fn check_point(&self, x: &Point) -> Result<()> {
        self.inner_ref().check_point(x)
    }
    fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.inner_ref().distance(x, y)
    }
    fn exp(&self, base: &Point, v: &TangentVector) -> Result<Point> {
        self.inner_ref().exp(base, v)
    }
    fn log(&self, base: &Point, y: &Point) -> Result<TangentVector> {
        self.inner_ref().log(base, y)
    }
    fn inner(&self, u: &TangentVector, v: &TangentVector) -> Result<f64> {
        self.inner_ref().inner(u, v)
    }
    fn tangent_coords(&self, v: &TangentVector) -> Result<DVector<f64>> {
        self.inner_ref().tangent_coords(v)
    }
    fn tangent_from_coords(&self, base: &Point, z: &DVector<f64>) -> Result<TangentVector> {
        self.inner_ref().tangent_from_coords(base, z)
    }
    fn log_coords(&self, base: &Point, y: &Point) -> Result<DVector<f64>> {
        self.inner_ref().log_coords(base, y)
    }
    fn exp_coords(&self, base: &Point, z: &DVector<f64>) -> Result<Point> {
        self.inner_ref().exp_coords(base, z)
    }
    fn log_and_hessian(&self, base: &Point, y: &Point) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.inner_ref().log_and_hessian(base, y)
    }
    fn resolution_ratio(&self, base: &Point, z: &DVector<f64>) -> Result<f64> {
        self.inner_ref().resolution_ratio(base, z)
    }
}

/// `r coth r`, the Jacobi-field factor of the squared-distance Hessian.
pub(crate) fn r_coth_r(r: f64) -> f64 {
    let r = r.abs();
    if r < 1e-4 {
        1.0 + r * r / 3.0
    } else if r > 20.0 {
        r
    } else {
        r / r.tanh()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geodesic_rejects_parameters_outside_unit_interval() {
        let s = Space::euclidean(2);
        let x = Point::euclidean_slice(&[0.0, 0.0]);
        let y = Point::euclidean_slice(&[1.0, 1.0]);
        assert!(matches!(s.geodesic(&x, &y, 1.5), Err(crate::Error::Domain(_))));
        assert!(matches!(s.geodesic(&x, &y, -0.1), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn geodesic_endpoints_are_exact() {
        let s = Space::hyperbolic(2);
        let x = s.exp_coords(&s.origin(), &DVector::from_vec(vec![0.3, -0.2])).unwrap();
        let y = s.exp_coords(&s.origin(), &DVector::from_vec(vec![-1.0, 0.7])).unwrap();
        assert_eq!(s.geodesic(&x, &y, 0.0).unwrap(), x);
        assert_eq!(s.geodesic(&x, &y, 1.0).unwrap(), y);
    }

    #[test]
    fn mismatched_families_are_domain_errors() {
        let s = Space::euclidean(2);
        let h = Space::hyperbolic(2).origin();
        assert!(matches!(s.distance(&s.origin(), &h), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn tangent_add_requires_common_base() {
        let s = Space::euclidean(2);
        let a = s.zero_tangent(&s.origin()).unwrap();
        let b = s.zero_tangent(&Point::euclidean_slice(&[1.0, 0.0])).unwrap();
        assert!(a.add(&b).is_err());
        assert!(a.add(&a).is_ok());
    }

    fn numeric_hessian(s: &Space, base: &Point, y: &Point) -> DMatrix<f64> {
        let k = s.dim();
        let h = 1e-4;
        let f = |z: &DVector<f64>| 0.5 * s.distance(&s.exp_coords(base, z).unwrap(), y).unwrap().powi(2);
        DMatrix::from_fn(k, k, |i, j| {
            let e = |a: usize, t: f64| DVector::from_fn(k, |m, _| if m == a { t } else { 0.0 });
            let pp = f(&(e(i, h) + e(j, h)));
            let pm = f(&(e(i, h) - e(j, h)));
            let mp = f(&(e(j, h) - e(i, h)));
            let mm = f(&(-e(i, h) - e(j, h)));
            (pp - pm - mp + mm) / (4.0 * h * h)
        })
    }

    #[test]
    fn squared_distance_hessian_matches_finite_differences() {
        let spaces = vec![
            Space::euclidean(2),
            Space::hyperbolic(3),
            Space::spd(2),
            Space::spd(3),
            product_space(vec![Space::hyperbolic(2), Space::spd(2)]).unwrap(),
        ];
        for s in spaces {
            let k = s.dim();
            let zb = DVector::from_fn(k, |i, _| 0.3 * (i as f64 + 1.0).sin());
            let zy = DVector::from_fn(k, |i, _| 1.2 * (2.0 * i as f64 + 0.5).cos());
            let base = s.exp_coords(&s.origin(), &zb).unwrap();
            let y = s.exp_coords(&s.origin(), &zy).unwrap();
            let (v, h) = s.log_and_hessian(&base, &y).unwrap();
            assert!((v - s.log_coords(&base, &y).unwrap()).amax() < 1e-14);
            let num = numeric_hessian(&s, &base, &y);
            assert!((&h - &num).amax() < 1e-5, "{}: {h} vs {num}", s.family());
        }
    }
}
