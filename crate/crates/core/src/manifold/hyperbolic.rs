//! Hyperbolic space `H^k` (curvature -1) on the upper hyperboloid sheet.
//!
//! A point `x = (cosh r, sinh r * u)` is stored as its geodesic polar pair
//! `(r, u)` around the apex `o = (1, 0, .., 0)`. Minkowski coordinates
//! overflow once `r` passes ~710, which heavy-tailed samplers reach
//! routinely; the polar pair stays representable for any finite radius.
//!
//! Tangent vectors at `x` are stored as coordinates in the orthonormal frame
//! obtained by pushing the standard basis of `T_o H^k` through the boost
//! `B_x` that maps `o` to `x` along the radial geodesic. The inner product
//! in those coordinates is the Euclidean dot product.
//!
//! All formulas below are the boost equations rewritten so every term is a
//! product of `sinh`/`cosh` factors evaluated in log space:
//!
//! * `(cosh d - 1)/2 = sinh^2((r1 - r2)/2) + sinh r1 sinh r2 |u1 - u2|^2 / 4`
//! * `cosh R = cosh(r - t) + sinh r sinh t (1 + cos phi)` for `Exp_x(t v)`.

use nalgebra::{DMatrix, DVector};

use super::{check_anchor, check_same_base, r_coth_r, Family, Manifold, Point, TangentData, TangentVector};
use crate::error::{domain, validation, Result};
use crate::numeric::{distance_from_ln_half_gap, ln_cosh, ln_sinh, log_add};

/// A point of `H^k` in geodesic polar form around the apex.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarPoint {
    radius: f64,
    direction: DVector<f64>,
}

impl PolarPoint {
    /// Normalises `direction`; at radius zero the direction is canonical.
    pub fn new(radius: f64, direction: DVector<f64>) -> Result<Self> {
        let k = direction.len();
        if k == 0 {
            return Err(validation("hyperbolic direction must be non-empty"));
        }
        if !radius.is_finite() || radius < 0.0 {
            return Err(validation(format!("invalid hyperbolic radius {radius}")));
        }
        let n = direction.norm();
        if radius == 0.0 || n == 0.0 {
            if n == 0.0 && radius > 0.0 {
                return Err(validation("zero direction for a nonzero radius"));
            }
            return Ok(Self::apex(k));
        }
        if !n.is_finite() {
            return Err(validation("non-finite hyperbolic direction"));
        }
        Ok(PolarPoint { radius, direction: direction / n })
    }

    pub fn apex(k: usize) -> Self {
        let mut e = DVector::zeros(k);
        e[0] = 1.0;
        PolarPoint { radius: 0.0, direction: e }
    }

    /// From Minkowski coordinates `(x0, x1, .., xk)` with `<x, x>_M = -1`.
    pub fn from_minkowski(x: &DVector<f64>) -> Result<Self> {
        if x.len() < 2 {
            return Err(validation("hyperboloid coordinates need at least two entries"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(validation("non-finite hyperboloid coordinates"));
        }
        let spatial = x.rows(1, x.len() - 1).into_owned();
        let s = spatial.norm();
        let x0 = x[0];
        let q = -x0 * x0 + s * s;
        if x0 <= 0.0 || (q + 1.0).abs() > 1e-9 * (1.0 + x0 * x0) {
            return Err(validation(format!("point is not on the upper hyperboloid sheet (<x,x>_M = {q}, x0 = {x0})")));
        }
        if s == 0.0 {
            return Ok(Self::apex(spatial.len()));
        }
        PolarPoint::new(s.asinh(), spatial)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn direction(&self) -> &DVector<f64> {
        &self.direction
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    /// Minkowski coordinates; entries are infinite beyond `r ~ 710`.
    pub fn minkowski(&self) -> DVector<f64> {
        let k = self.dim();
        let mut x = DVector::zeros(k + 1);
        x[0] = self.radius.cosh();
        let sh = self.radius.sinh();
        for i in 0..k {
            x[i + 1] = sh * self.direction[i];
        }
        x
    }

    pub(crate) fn approx_eq(&self, other: &PolarPoint, tol: f64) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let scale = 1.0 + self.radius.max(other.radius);
        if (self.radius - other.radius).abs() > tol * scale {
            return false;
        }
        if self.radius <= tol && other.radius <= tol {
            return true;
        }
        (&self.direction - &other.direction).amax() <= tol
    }
}

/// `H^k` with curvature -1.
#[derive(Clone, Debug)]
pub struct Hyperbolic {
    dim: usize,
}

impl Hyperbolic {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "hyperbolic dimension must be positive");
        Hyperbolic { dim }
    }

    fn polar<'a>(&self, x: &'a Point) -> Result<&'a PolarPoint> {
        match x {
            Point::Hyperbolic(p) if p.dim() == self.dim => Ok(p),
            Point::Hyperbolic(p) => Err(domain(format!("expected a point of H^{}, got H^{}", self.dim, p.dim()))),
            other => Err(domain(format!("expected a hyperbolic point, got {}", other.family()))),
        }
    }

    fn frame<'a>(&self, v: &'a TangentVector) -> Result<&'a DVector<f64>> {
        match &v.data {
            TangentData::Hyperbolic(t) if t.len() == self.dim => Ok(t),
            _ => Err(domain("expected a hyperbolic tangent vector")),
        }
    }

    /// Minkowski (ambient) representation of a tangent vector: `dB_x(v)`.
    pub fn ambient_tangent(&self, v: &TangentVector) -> Result<DVector<f64>> {
        let x = self.polar(&v.base)?;
        let t = self.frame(v)?;
        let (r, u) = (x.radius, &x.direction);
        let a = t.dot(u);
        let mut out = DVector::zeros(self.dim + 1);
        out[0] = r.sinh() * a;
        let spatial = t + u * ((r.cosh() - 1.0) * a);
        out.rows_mut(1, self.dim).copy_from(&spatial);
        Ok(out)
    }

    /// Inverse of [`Hyperbolic::ambient_tangent`]; `ambient` must be
    /// Minkowski-orthogonal to the base point.
    pub fn tangent_from_ambient(&self, base: &Point, ambient: &DVector<f64>) -> Result<TangentVector> {
        let x = self.polar(base)?;
        if ambient.len() != self.dim + 1 {
            return Err(domain("ambient tangent has the wrong length"));
        }
        let mk = x.minkowski();
        let ortho = -mk[0] * ambient[0] + mk.rows(1, self.dim).dot(&ambient.rows(1, self.dim));
        let scale = 1.0 + mk.amax() * ambient.amax();
        if ortho.abs() > 1e-9 * scale {
            return Err(validation(format!("ambient vector is not tangent (<x,v>_M = {ortho:e})")));
        }
        let (r, u) = (x.radius, &x.direction);
        let spatial = ambient.rows(1, self.dim).into_owned();
        let a = spatial.dot(u) / r.cosh();
        let t = spatial - u * ((r.cosh() - 1.0) * a);
        Ok(TangentVector::new(base.clone(), TangentData::Hyperbolic(t)))
    }

    fn dist(x: &PolarPoint, y: &PolarPoint) -> f64 {
        let delta = (x.radius - y.radius).abs();
        let la = 2.0 * ln_sinh(0.5 * delta);
        let chord = (&x.direction - &y.direction).norm();
        let lb = ln_sinh(x.radius) + ln_sinh(y.radius) + 2.0 * (0.5 * chord).ln();
        distance_from_ln_half_gap(log_add(la, lb))
    }

    /// `Log_x(z)` in frame coordinates.
    fn log_frame(x: &PolarPoint, z: &PolarPoint) -> DVector<f64> {
        let k = x.dim();
        let d = Self::dist(x, z);
        if d == 0.0 {
            return DVector::zeros(k);
        }
        let (r, u) = (x.radius, &x.direction);
        let (rho, w) = (z.radius, &z.direction);
        let diff = w - u;
        let one_minus_cos = 0.5 * diff.norm_squared();
        // w - cos(theta) u
        let q = &diff + u * one_minus_cos;
        // radial component: sinh(rho - r) - cosh r sinh rho (1 - cos theta)
        let s1 = if rho >= r { 1.0 } else { -1.0 };
        let l1 = ln_sinh((rho - r).abs());
        let l2 = ln_cosh(r) + ln_sinh(rho) + one_minus_cos.ln();
        let lq = q.norm();
        let l3 = ln_sinh(rho) + lq.ln();
        let m = l1.max(l2).max(l3);
        if !m.is_finite() {
            return DVector::zeros(k);
        }
        let radial = s1 * (l1 - m).exp() - (l2 - m).exp();
        let mut dir = u * radial;
        if lq > 0.0 {
            dir += q * ((l3 - m).exp() / lq);
        }
        let n = dir.norm();
        if n == 0.0 || !n.is_finite() {
            return DVector::zeros(k);
        }
        dir * (d / n)
    }

    /// `Exp_x(v)` for `v` in frame coordinates.
    fn exp_frame(x: &PolarPoint, v: &DVector<f64>) -> PolarPoint {
        let t = v.norm();
        if t == 0.0 {
            return x.clone();
        }
        let k = x.dim();
        let vh = v / t;
        let (r, u) = (x.radius, &x.direction);
        let cos_phi = vh.dot(u);
        let diff = &vh - u;
        let sum = &vh + u;
        let one_minus = 0.5 * diff.norm_squared();
        let one_plus = 0.5 * sum.norm_squared();

        let la = 2.0 * ln_sinh(0.5 * (r - t).abs());
        let lb = ln_sinh(r) + ln_sinh(t) + one_plus.ln() - std::f64::consts::LN_2;
        let radius = distance_from_ln_half_gap(log_add(la, lb));
        if radius == 0.0 {
            return PolarPoint::apex(k);
        }

        // radial component sinh r cosh t + cosh r sinh t cos(phi), split by the
        // sign of cos(phi) so that no two large terms cancel
        let (sa, l_a, l_b, q) = if cos_phi >= 0.0 {
            (1.0, ln_sinh(r) + ln_cosh(t), ln_cosh(r) + ln_sinh(t) + cos_phi.ln(), &diff + u * one_minus)
        } else {
            let sa = if r >= t { 1.0 } else { -1.0 };
            (sa, ln_sinh((r - t).abs()), ln_cosh(r) + ln_sinh(t) + one_plus.ln(), &sum - u * one_plus)
        };
        let qn = q.norm();
        let l_perp = ln_sinh(t) + qn.ln();
        let m = l_a.max(l_b).max(l_perp);
        let radial = sa * (l_a - m).exp() + (l_b - m).exp();
        let mut dir = u * radial;
        if qn > 0.0 {
            dir += q * ((l_perp - m).exp() / qn);
        }
        let n = dir.norm();
        if n == 0.0 || !n.is_finite() {
            return PolarPoint::apex(k);
        }
        PolarPoint { radius, direction: dir / n }
    }
}

impl Manifold for Hyperbolic {
    fn family(&self) -> Family {
        Family::Hyperbolic
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn origin(&self) -> Point {
        Point::Hyperbolic(PolarPoint::apex(self.dim))
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        let p = self.polar(x)?;
        if !p.radius.is_finite() || p.radius < 0.0 {
            return Err(validation("invalid hyperbolic radius"));
        }
        if (p.direction.norm() - 1.0).abs() > 1e-12 {
            return Err(validation("hyperbolic direction is not a unit vector"));
        }
        Ok(())
    }

    fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok(Self::dist(self.polar(x)?, self.polar(y)?))
    }

    fn exp(&self, base: &Point, v: &TangentVector) -> Result<Point> {
        check_anchor(base, v)?;
        let x = self.polar(base)?;
        Ok(Point::Hyperbolic(Self::exp_frame(x, self.frame(v)?)))
    }

    fn log(&self, base: &Point, y: &Point) -> Result<TangentVector> {
        let t = Self::log_frame(self.polar(base)?, self.polar(y)?);
        Ok(TangentVector::new(base.clone(), TangentData::Hyperbolic(t)))
    }

    fn inner(&self, u: &TangentVector, v: &TangentVector) -> Result<f64> {
        check_same_base(u, v)?;
        self.polar(&u.base)?;
        Ok(self.frame(u)?.dot(self.frame(v)?))
    }

    fn tangent_coords(&self, v: &TangentVector) -> Result<DVector<f64>> {
        self.polar(&v.base)?;
        Ok(self.frame(v)?.clone())
    }

    fn tangent_from_coords(&self, base: &Point, z: &DVector<f64>) -> Result<TangentVector> {
        self.polar(base)?;
        if z.len() != self.dim {
            return Err(domain("coordinate vector has the wrong length"));
        }
        Ok(TangentVector::new(base.clone(), TangentData::Hyperbolic(z.clone())))
    }

    fn log_coords(&self, base: &Point, y: &Point) -> Result<DVector<f64>> {
        Ok(Self::log_frame(self.polar(base)?, self.polar(y)?))
    }

    fn exp_coords(&self, base: &Point, z: &DVector<f64>) -> Result<Point> {
        if z.len() != self.dim {
            return Err(domain("coordinate vector has the wrong length"));
        }
        Ok(Point::Hyperbolic(Self::exp_frame(self.polar(base)?, z)))
    }

    /// Radial steps are resolved to `eps (1 + r)`, transverse ones only to
    /// `eps sinh r` because the direction is stored as a unit vector.
    fn resolution_ratio(&self, base: &Point, z: &DVector<f64>) -> Result<f64> {
        let p = self.polar(base)?;
        if z.len() != self.dim {
            return Err(domain("coordinate vector has the wrong length"));
        }
        let r = p.radius();
        let radial = z.dot(p.direction());
        let transverse = (z - p.direction() * radial).norm();
        let eps = f64::EPSILON;
        Ok((radial.abs() / (eps * (1.0 + r))).max(transverse / (eps * r.sinh().max(1.0))))
    }

    fn log_and_hessian(&self, base: &Point, y: &Point) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let v = self.log_coords(base, y)?;
        let r = v.norm();
        let c = r_coth_r(r);
        let mut h = DMatrix::identity(self.dim, self.dim) * c;
        if r > 0.0 {
            let u = &v / r;
            h += (&u * u.transpose()) * (1.0 - c);
        }
        Ok((v, h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn minkowski_inner(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        -a[0] * b[0] + a.rows(1, a.len() - 1).dot(&b.rows(1, b.len() - 1))
    }

    fn point(h: &Hyperbolic, z: &[f64]) -> Point {
        h.exp_coords(&h.origin(), &DVector::from_column_slice(z)).unwrap()
    }

    #[test]
    fn unit_speed_geodesic_from_apex() {
        let h = Hyperbolic::new(2);
        let base = Point::hyperboloid(&DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        for &t in &[1e-6, 0.3, 2.0, 10.0] {
            let v = h.tangent_from_ambient(&base, &DVector::from_vec(vec![0.0, t, 0.0])).unwrap();
            let y = h.exp(&base, &v).unwrap();
            assert_relative_eq!(h.distance(&base, &y).unwrap(), t, max_relative = 1e-14);
        }
    }

    #[test]
    fn distance_matches_minkowski_formula_for_moderate_radii() {
        let h = Hyperbolic::new(3);
        let x = point(&h, &[0.4, -1.1, 0.3]);
        let y = point(&h, &[-0.7, 0.2, 1.5]);
        let (mx, my) = (x.as_hyperbolic().unwrap().minkowski(), y.as_hyperbolic().unwrap().minkowski());
        let expected = (-minkowski_inner(&mx, &my)).acosh();
        assert_relative_eq!(h.distance(&x, &y).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn minkowski_constraint_holds() {
        let h = Hyperbolic::new(2);
        let x = point(&h, &[1.2, -0.4]);
        let m = x.as_hyperbolic().unwrap().minkowski();
        assert_relative_eq!(minkowski_inner(&m, &m), -1.0, epsilon = 1e-12);
        assert!(m[0] > 0.0);
        let back = Point::hyperboloid(&m).unwrap();
        assert!(back.approx_eq(&x, 1e-12));
    }

    #[test]
    fn ambient_tangent_is_orthogonal_to_base() {
        let h = Hyperbolic::new(3);
        let x = point(&h, &[0.5, 1.0, -0.2]);
        let v = h.tangent_from_coords(&x, &DVector::from_vec(vec![0.3, -0.8, 1.1])).unwrap();
        let amb = h.ambient_tangent(&v).unwrap();
        let mx = x.as_hyperbolic().unwrap().minkowski();
        assert!(minkowski_inner(&mx, &amb).abs() < 1e-12);
        // frame coordinates are orthonormal: Minkowski norm equals frame norm
        assert_relative_eq!(minkowski_inner(&amb, &amb).sqrt(), h.norm(&v).unwrap(), max_relative = 1e-12);
        let back = h.tangent_from_ambient(&x, &amb).unwrap();
        assert_relative_eq!(h.tangent_coords(&back).unwrap(), h.tangent_coords(&v).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn extreme_radii_stay_finite() {
        let h = Hyperbolic::new(2);
        let far = point(&h, &[1e12, 0.0]);
        let other = point(&h, &[0.0, 5e3]);
        assert_relative_eq!(h.distance(&h.origin(), &far).unwrap(), 1e12, max_relative = 1e-15);
        let d = h.distance(&far, &other).unwrap();
        assert!(d.is_finite() && d > 1e12);
        let v = h.log_coords(&h.origin(), &far).unwrap();
        assert_relative_eq!(v[0], 1e12, max_relative = 1e-15);
        let back = h.log_coords(&far, &h.origin()).unwrap();
        assert_relative_eq!(back.norm(), 1e12, max_relative = 1e-15);
    }

    #[test]
    fn log_inverts_exp_at_general_base() {
        let h = Hyperbolic::new(2);
        let x = point(&h, &[2.0, -1.0]);
        let z = DVector::from_vec(vec![-3.0, 1.7]);
        let y = h.exp_coords(&x, &z).unwrap();
        assert_relative_eq!(h.log_coords(&x, &y).unwrap(), z, epsilon = 1e-10);
        assert_relative_eq!(h.distance(&x, &y).unwrap(), z.norm(), max_relative = 1e-12);
    }

    #[test]
    fn far_points_on_a_common_ray() {
        let h = Hyperbolic::new(2);
        let x = point(&h, &[2000.0, 0.0]);
        let y = point(&h, &[1e6, 0.0]);
        let v = h.log_coords(&x, &y).unwrap();
        assert_relative_eq!(v[0], 1e6 - 2000.0, max_relative = 1e-12);
        assert_eq!(v[1], 0.0);
        let back = h.exp_coords(&x, &v).unwrap();
        assert_relative_eq!(back.as_hyperbolic().unwrap().radius(), 1e6, max_relative = 1e-12);
        let w = h.log_coords(&y, &x).unwrap();
        assert_relative_eq!(w[0], 2000.0 - 1e6, max_relative = 1e-12);
    }

    #[test]
    fn geodesic_through_apex() {
        // x and its antipode through the apex: the midpoint is the apex
        let h = Hyperbolic::new(2);
        let x = point(&h, &[1.5, 0.0]);
        let y = point(&h, &[-1.5, 0.0]);
        let m = h.geodesic(&x, &y, 0.5).unwrap();
        assert!(h.distance(&m, &h.origin()).unwrap() < 1e-12);
    }
}
