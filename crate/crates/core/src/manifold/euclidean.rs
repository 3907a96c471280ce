use nalgebra::{Cholesky, DMatrix, DVector};

use super::{check_anchor, check_same_base, Family, Manifold, Point, TangentData, TangentVector};
use crate::error::{domain, validation, Result};

/// `R^k` with the inner product `<x, y> = x^T G y`.
///
/// The Gram matrix is factored once as `G = L L^T`; distances are computed
/// as `|L^T (x - y)|_2` and orthonormal tangent coordinates are `L^T v`.
#[derive(Clone, Debug)]
pub struct Euclidean {
    dim: usize,
    gram: DMatrix<f64>,
    chol: DMatrix<f64>,
    identity_gram: bool,
}

impl Euclidean {
    pub fn new(dim: usize) -> Self {
        Euclidean { dim, gram: DMatrix::identity(dim, dim), chol: DMatrix::identity(dim, dim), identity_gram: true }
    }

    /// Euclidean space with an arbitrary inner product.
    pub fn with_gram(gram: DMatrix<f64>) -> Result<Self> {
        let dim = gram.nrows();
        if dim == 0 || gram.ncols() != dim {
            return Err(validation("Gram matrix must be square and non-empty"));
        }
        if gram.iter().any(|g| !g.is_finite()) {
            return Err(validation("Gram matrix has non-finite entries"));
        }
        let asym = (&gram - gram.transpose()).amax();
        if asym > 1e-12 * (1.0 + gram.amax()) {
            return Err(validation("Gram matrix is not symmetric"));
        }
        let min_eig = gram.clone().symmetric_eigen().eigenvalues.min();
        if min_eig <= 0.0 {
            return Err(validation(format!("Gram matrix is not positive definite (min eigenvalue {min_eig:e})")));
        }
        let chol = Cholesky::new(gram.clone()).ok_or_else(|| validation("Gram matrix is not positive definite"))?.l();
        let identity_gram = gram == DMatrix::identity(dim, dim);
        Ok(Euclidean { dim, gram, chol, identity_gram })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Norm of an ambient vector under the Gram inner product.
    pub fn vector_norm(&self, v: &DVector<f64>) -> f64 {
        if self.identity_gram {
            v.norm()
        } else {
            (self.chol.tr_mul(v)).norm()
        }
    }

    fn coords<'a>(&self, x: &'a Point) -> Result<&'a DVector<f64>> {
        match x {
            Point::Euclidean(v) if v.len() == self.dim => Ok(v),
            Point::Euclidean(v) => Err(domain(format!("expected a point of R^{}, got R^{}", self.dim, v.len()))),
            other => Err(domain(format!("expected a euclidean point, got {}", other.family()))),
        }
    }

    fn vec<'a>(&self, v: &'a TangentVector) -> Result<&'a DVector<f64>> {
        match &v.data {
            TangentData::Euclidean(t) if t.len() == self.dim => Ok(t),
            _ => Err(domain("expected a euclidean tangent vector")),
        }
    }
}

impl Manifold for Euclidean {
    fn family(&self) -> Family {
        Family::Euclidean
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn origin(&self) -> Point {
        Point::Euclidean(DVector::zeros(self.dim))
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        let c = self.coords(x)?;
        if c.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(validation("euclidean point has non-finite coordinates"))
        }
    }

    fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        let d = self.coords(x)? - self.coords(y)?;
        Ok(self.vector_norm(&d))
    }

    fn exp(&self, base: &Point, v: &TangentVector) -> Result<Point> {
        check_anchor(base, v)?;
        Ok(Point::Euclidean(self.coords(base)? + self.vec(v)?))
    }

    fn log(&self, base: &Point, y: &Point) -> Result<TangentVector> {
        let d = self.coords(y)? - self.coords(base)?;
        Ok(TangentVector::new(base.clone(), TangentData::Euclidean(d)))
    }

    fn inner(&self, u: &TangentVector, v: &TangentVector) -> Result<f64> {
        check_same_base(u, v)?;
        let (a, b) = (self.vec(u)?, self.vec(v)?);
        if self.identity_gram {
            Ok(a.dot(b))
        } else {
            Ok(a.dot(&(&self.gram * b)))
        }
    }

    fn tangent_coords(&self, v: &TangentVector) -> Result<DVector<f64>> {
        let t = self.vec(v)?;
        Ok(if self.identity_gram { t.clone() } else { self.chol.tr_mul(t) })
    }

    fn tangent_from_coords(&self, base: &Point, z: &DVector<f64>) -> Result<TangentVector> {
        self.coords(base)?;
        if z.len() != self.dim {
            return Err(domain("coordinate vector has the wrong length"));
        }
        let v = if self.identity_gram {
            z.clone()
        } else {
            // v = L^{-T} z
            self.chol.transpose().solve_upper_triangular(z).ok_or_else(|| validation("singular Cholesky factor"))?
        };
        Ok(TangentVector::new(base.clone(), TangentData::Euclidean(v)))
    }

    fn log_coords(&self, base: &Point, y: &Point) -> Result<DVector<f64>> {
        let d = self.coords(y)? - self.coords(base)?;
        Ok(if self.identity_gram { d } else { self.chol.tr_mul(&d) })
    }
}
