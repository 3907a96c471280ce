use nalgebra::{DMatrix, DVector};

use super::{check_anchor, check_same_base, Family, Manifold, Point, Space, TangentData, TangentVector};
use crate::error::{domain, Result};

/// Riemannian product `M_1 x ... x M_r`; `d^2` is the sum of factor `d^2`.
#[derive(Clone, Debug)]
pub struct Product {
    factors: Vec<Space>,
}

/// Builds the product of a non-empty list of spaces.
pub fn product_space(factors: Vec<Space>) -> Result<Space> {
    Product::new(factors).map(Space::Product)
}

impl Product {
    pub fn new(factors: Vec<Space>) -> Result<Self> {
        if factors.is_empty() {
            return Err(domain("a product space needs at least one factor"));
        }
        Ok(Product { factors })
    }

    pub fn factors(&self) -> &[Space] {
        &self.factors
    }

    fn parts<'a>(&self, x: &'a Point) -> Result<&'a [Point]> {
        match x {
            Point::Product(c) if c.len() == self.factors.len() => Ok(c),
            Point::Product(c) => {
                Err(domain(format!("expected {} product components, got {}", self.factors.len(), c.len())))
            }
            other => Err(domain(format!("expected a product point, got {}", other.family()))),
        }
    }

    fn tangent_parts<'a>(&self, v: &'a TangentVector) -> Result<&'a [TangentData]> {
        match &v.data {
            TangentData::Product(c) if c.len() == self.factors.len() => Ok(c),
            _ => Err(domain("expected a product tangent vector")),
        }
    }

    /// Splits orthonormal coordinates into per-factor blocks.
    fn split(&self, z: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        if z.len() != self.dim() {
            return Err(domain("coordinate vector has the wrong length"));
        }
        let mut out = Vec::with_capacity(self.factors.len());
        let mut at = 0;
        for f in &self.factors {
            let d = f.dim();
            out.push(z.rows(at, d).into_owned());
            at += d;
        }
        Ok(out)
    }

    fn concat(blocks: Vec<DVector<f64>>) -> DVector<f64> {
        let all: Vec<f64> = blocks.iter().flat_map(|b| b.iter().copied()).collect();
        DVector::from_vec(all)
    }

    fn factor_tangent(base: &Point, data: &TangentData) -> TangentVector {
        TangentVector::new(base.clone(), data.clone())
    }
}

impl Manifold for Product {
    fn family(&self) -> Family {
        Family::Product
    }

    fn dim(&self) -> usize {
        self.factors.iter().map(Manifold::dim).sum()
    }

    fn origin(&self) -> Point {
        Point::Product(self.factors.iter().map(Manifold::origin).collect())
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        for (f, p) in self.factors.iter().zip(self.parts(x)?) {
            f.check_point(p)?;
        }
        Ok(())
    }

    fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        let (a, b) = (self.parts(x)?, self.parts(y)?);
        let mut sq = 0.0;
        for ((f, p), q) in self.factors.iter().zip(a).zip(b) {
            sq += f.distance(p, q)?.powi(2);
        }
        Ok(sq.sqrt())
    }

    fn exp(&self, base: &Point, v: &TangentVector) -> Result<Point> {
        check_anchor(base, v)?;
        let parts = self.parts(base)?;
        let tparts = self.tangent_parts(v)?;
        let mut out = Vec::with_capacity(parts.len());
        for ((f, p), t) in self.factors.iter().zip(parts).zip(tparts) {
            out.push(f.exp(p, &Self::factor_tangent(p, t))?);
        }
        Ok(Point::Product(out))
    }

    fn log(&self, base: &Point, y: &Point) -> Result<TangentVector> {
        let (a, b) = (self.parts(base)?, self.parts(y)?);
        let mut out = Vec::with_capacity(a.len());
        for ((f, p), q) in self.factors.iter().zip(a).zip(b) {
            out.push(f.log(p, q)?.data);
        }
        Ok(TangentVector::new(base.clone(), TangentData::Product(out)))
    }

    fn inner(&self, u: &TangentVector, v: &TangentVector) -> Result<f64> {
        check_same_base(u, v)?;
        let parts = self.parts(&u.base)?;
        let (a, b) = (self.tangent_parts(u)?, self.tangent_parts(v)?);
        let mut s = 0.0;
        for (((f, p), x), y) in self.factors.iter().zip(parts).zip(a).zip(b) {
            s += f.inner(&Self::factor_tangent(p, x), &Self::factor_tangent(p, y))?;
        }
        Ok(s)
    }

    fn tangent_coords(&self, v: &TangentVector) -> Result<DVector<f64>> {
        let parts = self.parts(&v.base)?;
        let tparts = self.tangent_parts(v)?;
        let mut blocks = Vec::with_capacity(parts.len());
        for ((f, p), t) in self.factors.iter().zip(parts).zip(tparts) {
            blocks.push(f.tangent_coords(&Self::factor_tangent(p, t))?);
        }
        Ok(Self::concat(blocks))
    }

    fn tangent_from_coords(&self, base: &Point, z: &DVector<f64>) -> Result<TangentVector> {
        let parts = self.parts(base)?;
        let mut out = Vec::with_capacity(parts.len());
        for ((f, p), zb) in self.factors.iter().zip(parts).zip(self.split(z)?) {
            out.push(f.tangent_from_coords(p, &zb)?.data);
        }
        Ok(TangentVector::new(base.clone(), TangentData::Product(out)))
    }

    fn log_coords(&self, base: &Point, y: &Point) -> Result<DVector<f64>> {
        let (a, b) = (self.parts(base)?, self.parts(y)?);
        let mut blocks = Vec::with_capacity(a.len());
        for ((f, p), q) in self.factors.iter().zip(a).zip(b) {
            blocks.push(f.log_coords(p, q)?);
        }
        Ok(Self::concat(blocks))
    }

    fn exp_coords(&self, base: &Point, z: &DVector<f64>) -> Result<Point> {
        let parts = self.parts(base)?;
        let mut out = Vec::with_capacity(parts.len());
        for ((f, p), zb) in self.factors.iter().zip(parts).zip(self.split(z)?) {
            out.push(f.exp_coords(p, &zb)?);
        }
        Ok(Point::Product(out))
    }

    fn resolution_ratio(&self, base: &Point, z: &DVector<f64>) -> Result<f64> {
        let mut ratio: f64 = 0.0;
        for ((f, p), b) in self.factors.iter().zip(self.parts(base)?).zip(self.split(z)?) {
            ratio = ratio.max(f.resolution_ratio(p, &b)?);
        }
        Ok(ratio)
    }

    fn log_and_hessian(&self, base: &Point, y: &Point) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (a, b) = (self.parts(base)?, self.parts(y)?);
        let dim = self.dim();
        let mut h = DMatrix::zeros(dim, dim);
        let mut blocks = Vec::with_capacity(a.len());
        let mut at = 0;
        for ((f, p), q) in self.factors.iter().zip(a).zip(b) {
            let (v, hf) = f.log_and_hessian(p, q)?;
            let d = v.len();
            h.view_mut((at, at), (d, d)).copy_from(&hf);
            blocks.push(v);
            at += d;
        }
        Ok((Self::concat(blocks), h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_product_is_rejected() {
        assert!(matches!(product_space(vec![]), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn two_lines_are_the_plane() {
        let s = product_space(vec![Space::euclidean(1), Space::euclidean(1)]).unwrap();
        let x = Point::product(vec![Point::euclidean_slice(&[0.0]), Point::euclidean_slice(&[0.0])]);
        let y = Point::product(vec![Point::euclidean_slice(&[3.0]), Point::euclidean_slice(&[4.0])]);
        assert_eq!(s.distance(&x, &y).unwrap(), 5.0);
    }

    #[test]
    fn line_times_spd() {
        let s = product_space(vec![Space::euclidean(1), Space::spd(2)]).unwrap();
        let x = Point::product(vec![Point::euclidean_slice(&[0.0]), Point::spd(&DMatrix::identity(2, 2)).unwrap()]);
        let m = DMatrix::from_row_slice(2, 2, &[std::f64::consts::E, 0.0, 0.0, 1.0]);
        let y = Point::product(vec![Point::euclidean_slice(&[1.0]), Point::spd(&m).unwrap()]);
        assert_relative_eq!(s.distance(&x, &y).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn exp_of_zero_is_base() {
        let s = product_space(vec![Space::hyperbolic(2), Space::spd(2)]).unwrap();
        let z = DVector::from_vec(vec![0.4, -0.1, 0.2, 0.0, -0.3]);
        let b = s.exp_coords(&s.origin(), &z).unwrap();
        let zero = s.zero_tangent(&b).unwrap();
        assert_eq!(s.exp(&b, &zero).unwrap(), b);
        assert_relative_eq!(s.log_coords(&s.origin(), &b).unwrap(), z, epsilon = 1e-13);
    }
}
