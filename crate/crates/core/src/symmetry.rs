//! Geodesic symmetries and transvections.

use crate::error::{Error, Result};
use crate::manifold::{Manifold, Point, Space};

/// Minimum `d(mu1, mu2)` for a transvection to be non-degenerate.
pub const DEGENERATE_DISTANCE: f64 = 1e-8;

/// Slack allowed in `d(x, T^m x) >= 2 m d(mu1, mu2)`.
pub const DISPLACEMENT_TOL: f64 = 1e-6;

/// The isometry `s_c(x) = Exp_c(-Log_c(x))`.
#[derive(Clone, Debug)]
pub struct GeodesicSymmetry {
    pub space: Space,
    pub center: Point,
}

impl GeodesicSymmetry {
    pub fn new(space: Space, center: Point) -> Result<Self> {
        space.check_point(&center)?;
        Ok(GeodesicSymmetry { space, center })
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        self.space.reflect(&self.center, x)
    }
}

/// Which symmetry acts first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Order {
    /// `s_mu2 . s_mu1`: reflect through `mu1`, then `mu2`.
    #[default]
    Mu2AfterMu1,
    /// `s_mu1 . s_mu2`.
    Mu1AfterMu2,
}

/// Composition of two geodesic symmetries, a translation of length
/// `2 d(mu1, mu2)` along the geodesic through both centers.
#[derive(Clone, Debug)]
pub struct Transvection {
    pub space: Space,
    pub mu1: Point,
    pub mu2: Point,
    pub order: Order,
}

impl Transvection {
    pub fn new(space: Space, mu1: Point, mu2: Point, order: Order) -> Result<Self> {
        space.check_point(&mu1)?;
        space.check_point(&mu2)?;
        Ok(Transvection { space, mu1, mu2, order })
    }

    /// Translation length `2 d(mu1, mu2)`.
    pub fn length(&self) -> Result<f64> {
        Ok(2.0 * self.space.distance(&self.mu1, &self.mu2)?)
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        let (first, second) = match self.order {
            Order::Mu2AfterMu1 => (&self.mu1, &self.mu2),
            Order::Mu1AfterMu2 => (&self.mu2, &self.mu1),
        };
        let y = self.space.reflect(first, x)?;
        self.space.reflect(second, &y)
    }
}

/// `T^m x`.
pub fn apply_transvection(t: &Transvection, x: &Point, m: usize) -> Result<Point> {
    t.space.check_point(x)?;
    let mut y = x.clone();
    for _ in 0..m {
        y = t.apply(&y)?;
    }
    Ok(y)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementRow {
    pub m: usize,
    pub min_displacement: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementReport {
    pub length: f64,
    pub rows: Vec<DisplacementRow>,
}

impl DisplacementReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Checks `d(x, T^m x) >= m * 2 d(mu1, mu2) - 1e-6` for every sample point
/// and `1 <= m <= m_max`, with `T = s_mu2 . s_mu1`.
pub fn displacement_bound_check(
    space: &Space,
    mu1: &Point,
    mu2: &Point,
    sample_points: &[Point],
    m_max: usize,
) -> Result<DisplacementReport> {
    displacement_bound_check_with(space, mu1, mu2, sample_points, m_max, DISPLACEMENT_TOL)
}

pub(crate) fn displacement_bound_check_with(
    space: &Space,
    mu1: &Point,
    mu2: &Point,
    sample_points: &[Point],
    m_max: usize,
    tol: f64,
) -> Result<DisplacementReport> {
    if sample_points.is_empty() {
        return Err(Error::Domain("displacement check needs at least one sample point".into()));
    }
    let t = Transvection::new(space.clone(), mu1.clone(), mu2.clone(), Order::Mu2AfterMu1)?;
    let d = space.distance(mu1, mu2)?;
    if d <= DEGENERATE_DISTANCE {
        return Err(Error::Degenerate(format!("d(mu1, mu2) = {d:e}: the transvection is the identity")));
    }
    let length = 2.0 * d;
    let mut min_disp = vec![f64::INFINITY; m_max];
    for x in sample_points {
        let mut y = x.clone();
        for slot in min_disp.iter_mut() {
            y = t.apply(&y)?;
            *slot = slot.min(space.distance(x, &y)?);
        }
    }
    let rows = min_disp
        .into_iter()
        .enumerate()
        .map(|(i, min_displacement)| {
            let m = i + 1;
            let bound = length * m as f64;
            DisplacementRow { m, min_displacement, bound, pass: min_displacement >= bound - tol }
        })
        .collect();
    Ok(DisplacementReport { length, rows })
}
