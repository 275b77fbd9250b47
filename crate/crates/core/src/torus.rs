//! Compact complex tori `C^g / Λ`, their points, and the group law.
//!
//! A torus is given by a `g × 2g` period matrix whose columns generate the
//! lattice. Every point is stored by a lift to `C^g`; the lattice coordinates
//! of a lift `z` are the real solution `t ∈ R^{2g}` of `Π t = z`, and the
//! fundamental domain is `[0,1)^{2g}` in those coordinates.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::C64;

/// Default bound on the condition number of the real period matrix.
pub const DEFAULT_KAPPA_MAX: f64 = 1e8;

/// Tolerance on lattice coordinates for point equality.
pub const POINT_TOL: f64 = 1e-9;

struct TorusData {
    genus: usize,
    periods: DMatrix<C64>,
    /// `[Re Π; Im Π]`, maps lattice coordinates to real coordinates.
    real_periods: DMatrix<f64>,
    real_inverse: DMatrix<f64>,
    condition: f64,
}

/// A compact complex torus. Cheap to clone; clones share the lattice data.
#[derive(Clone)]
pub struct ComplexTorus {
    inner: Arc<TorusData>,
}

impl fmt::Debug for ComplexTorus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComplexTorus")
            .field("genus", &self.inner.genus)
            .field("periods", &self.inner.periods)
            .finish()
    }
}

impl PartialEq for ComplexTorus {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.periods == other.inner.periods
    }
}

impl ComplexTorus {
    /// Validates a period matrix and builds the torus.
    ///
    /// Rejects matrices whose `2g` columns are not R-linearly independent or
    /// whose real period matrix has condition number above `kappa_max`.
    pub fn new(periods: DMatrix<C64>, kappa_max: f64) -> Result<Self> {
        let g = periods.nrows();
        if g == 0 {
            return Err(Error::DegenerateLattice("genus must be positive".into()));
        }
        if periods.ncols() != 2 * g {
            return Err(Error::ShapeMismatch(format!(
                "period matrix must be {g}×{}, got {g}×{}",
                2 * g,
                periods.ncols()
            )));
        }
        if periods
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::DegenerateLattice("non-finite period".into()));
        }
        let n = 2 * g;
        let real_periods = DMatrix::from_fn(n, n, |r, c| {
            if r < g {
                periods[(r, c)].re
            } else {
                periods[(r - g, c)].im
            }
        });
        let sv = real_periods.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let condition = if smin > 0.0 {
            smax / smin
        } else {
            f64::INFINITY
        };
        if !(smin > smax * f64::EPSILON * n as f64) {
            return Err(Error::DegenerateLattice(format!(
                "periods are R-linearly dependent (real rank < {n})"
            )));
        }
        if condition > kappa_max {
            return Err(Error::DegenerateLattice(format!(
                "condition number {condition:e} exceeds {kappa_max:e}"
            )));
        }
        let real_inverse = real_periods
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::DegenerateLattice("real period matrix is singular".into()))?;
        Ok(Self {
            inner: Arc::new(TorusData {
                genus: g,
                periods,
                real_periods,
                real_inverse,
                condition,
            }),
        })
    }

    /// Builds a torus from rows of complex periods.
    pub fn from_rows(rows: &[Vec<C64>], kappa_max: f64) -> Result<Self> {
        let g = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::ShapeMismatch("ragged period matrix".into()));
        }
        let periods = DMatrix::from_fn(g, width, |r, c| rows[r][c]);
        Self::new(periods, kappa_max)
    }

    pub fn genus(&self) -> usize {
        self.inner.genus
    }

    /// Number of real dimensions, `2g`.
    pub fn real_dim(&self) -> usize {
        2 * self.inner.genus
    }

    pub fn periods(&self) -> &DMatrix<C64> {
        &self.inner.periods
    }

    pub fn condition_number(&self) -> f64 {
        self.inner.condition
    }

    /// The real `2g × 2g` matrix `[Re Π; Im Π]`.
    pub fn real_periods(&self) -> &DMatrix<f64> {
        &self.inner.real_periods
    }

    /// Inverse of [`Self::real_periods`].
    pub fn real_inverse(&self) -> &DMatrix<f64> {
        &self.inner.real_inverse
    }

    /// The `j`-th lattice generator `λ_j` (0-based).
    pub fn generator(&self, j: usize) -> Result<Vec<C64>> {
        let n = self.real_dim();
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, bound: n });
        }
        Ok(self.inner.periods.column(j).iter().copied().collect())
    }

    /// All `2g` generators.
    pub fn generators(&self) -> Vec<Vec<C64>> {
        (0..self.real_dim())
            .map(|j| self.inner.periods.column(j).iter().copied().collect())
            .collect()
    }

    /// Real lattice coordinates `t` with `Π t = z`.
    pub fn lattice_coords(&self, z: &[C64]) -> Vec<f64> {
        let g = self.genus();
        debug_assert_eq!(z.len(), g);
        let r = DVector::from_fn(2 * g, |i, _| if i < g { z[i].re } else { z[i - g].im });
        (self.real_inverse() * r).iter().copied().collect()
    }

    /// The lift `Π t` of lattice coordinates `t`.
    pub fn from_lattice_coords(&self, t: &[f64]) -> Vec<C64> {
        let p = self.periods();
        (0..self.genus())
            .map(|r| t.iter().enumerate().map(|(c, tc)| p[(r, c)] * *tc).sum())
            .collect()
    }

    /// Maximum distance of the lattice coordinates of `z` from integers.
    pub fn lattice_defect(&self, z: &[C64]) -> f64 {
        self.lattice_coords(z)
            .iter()
            .map(|t| (t - t.round()).abs())
            .fold(0.0, f64::max)
    }

    /// Integer lattice coordinates of `z`, if `z ∈ Λ` within `tol`.
    pub fn integer_coords(&self, z: &[C64], tol: f64) -> Result<Vec<i64>> {
        let t = self.lattice_coords(z);
        let defect = t.iter().map(|x| (x - x.round()).abs()).fold(0.0, f64::max);
        if defect > tol {
            return Err(Error::NotLatticeVector(defect));
        }
        Ok(t.iter().map(|x| x.round() as i64).collect())
    }

    /// The product torus `self × other` with block-diagonal period matrix.
    ///
    /// Generators of the product are `(λ_j, 0)` followed by `(0, μ_k)`.
    pub fn product(&self, other: &ComplexTorus) -> ComplexTorus {
        let (g1, g2) = (self.genus(), other.genus());
        let mut periods = DMatrix::zeros(g1 + g2, 2 * (g1 + g2));
        periods
            .view_mut((0, 0), (g1, 2 * g1))
            .copy_from(self.periods());
        periods
            .view_mut((g1, 2 * g1), (g2, 2 * g2))
            .copy_from(other.periods());
        // A block-diagonal of two full-rank lattices has full rank.
        ComplexTorus::new(periods, f64::INFINITY).expect("product of valid tori is valid")
    }

    /// Whether `self` has exactly the period matrix of `a.product(b)`.
    pub fn is_product_of(&self, a: &ComplexTorus, b: &ComplexTorus) -> bool {
        let (g1, g2) = (a.genus(), b.genus());
        if self.genus() != g1 + g2 {
            return false;
        }
        let p = self.periods();
        (0..g1 + g2).all(|r| {
            (0..2 * (g1 + g2)).all(|c| {
                let want = match (r < g1, c < 2 * g1) {
                    (true, true) => a.periods()[(r, c)],
                    (false, false) => b.periods()[(r - g1, c - 2 * g1)],
                    _ => C64::new(0.0, 0.0),
                };
                p[(r, c)] == want
            })
        })
    }

    /// The origin.
    pub fn origin(&self) -> TorusPoint {
        TorusPoint {
            torus: self.clone(),
            lift: vec![C64::new(0.0, 0.0); self.genus()],
        }
    }

    /// Point with the given lift.
    pub fn point(&self, lift: Vec<C64>) -> Result<TorusPoint> {
        TorusPoint::new(self, lift)
    }

    /// Point with the given lattice coordinates.
    pub fn point_at(&self, t: &[f64]) -> Result<TorusPoint> {
        if t.len() != self.real_dim() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} lattice coordinates, got {}",
                self.real_dim(),
                t.len()
            )));
        }
        Ok(TorusPoint {
            torus: self.clone(),
            lift: self.from_lattice_coords(t),
        })
    }
}

/// Validates `Π` and builds the torus; see [`ComplexTorus::new`].
pub fn validate_torus(periods: DMatrix<C64>, kappa_max: f64) -> Result<ComplexTorus> {
    ComplexTorus::new(periods, kappa_max)
}

/// A point of a torus, remembered by a lift to the universal cover.
///
/// Two points compare equal when their lifts differ by a lattice vector.
#[derive(Clone, Debug)]
pub struct TorusPoint {
    torus: ComplexTorus,
    lift: Vec<C64>,
}

impl TorusPoint {
    pub fn new(torus: &ComplexTorus, lift: Vec<C64>) -> Result<Self> {
        if lift.len() != torus.genus() {
            return Err(Error::ShapeMismatch(format!(
                "lift has {} coordinates, torus has genus {}",
                lift.len(),
                torus.genus()
            )));
        }
        if lift.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite lift".into()));
        }
        Ok(Self {
            torus: torus.clone(),
            lift,
        })
    }

    pub fn torus(&self) -> &ComplexTorus {
        &self.torus
    }

    pub fn lift(&self) -> &[C64] {
        &self.lift
    }

    pub fn lattice_coords(&self) -> Vec<f64> {
        self.torus.lattice_coords(&self.lift)
    }

    /// Representative whose lattice coordinates lie in `[0,1)^{2g}`.
    pub fn reduce(&self) -> TorusPoint {
        let t = self.lattice_coords();
        if t.iter().all(|x| (0.0..1.0).contains(x)) {
            return self.clone();
        }
        let reduced: Vec<f64> = t
            .iter()
            .map(|x| {
                let f = x - x.floor();
                if f >= 1.0 {
                    0.0
                } else {
                    f
                }
            })
            .collect();
        TorusPoint {
            torus: self.torus.clone(),
            lift: self.torus.from_lattice_coords(&reduced),
        }
    }

    /// The addition map `A × A → A`.
    pub fn add(&self, other: &TorusPoint) -> Result<TorusPoint> {
        if self.torus != other.torus {
            return Err(Error::TorusMismatch);
        }
        let lift = self
            .lift
            .iter()
            .zip(&other.lift)
            .map(|(a, b)| a + b)
            .collect();
        Ok(TorusPoint {
            torus: self.torus.clone(),
            lift,
        }
        .reduce())
    }

    /// Additive inverse.
    pub fn neg(&self) -> TorusPoint {
        TorusPoint {
            torus: self.torus.clone(),
            lift: self.lift.iter().map(|a| -a).collect(),
        }
        .reduce()
    }

    /// Maximum lattice-coordinate distance of `self − other` from `Λ`.
    pub fn distance_defect(&self, other: &TorusPoint) -> f64 {
        let diff: Vec<C64> = self
            .lift
            .iter()
            .zip(&other.lift)
            .map(|(a, b)| a - b)
            .collect();
        self.torus.lattice_defect(&diff)
    }
}

/// `α(p, q) = p + q`.
pub fn add(p: &TorusPoint, q: &TorusPoint) -> Result<TorusPoint> {
    p.add(q)
}

/// See [`TorusPoint::reduce`].
pub fn reduce(p: &TorusPoint) -> TorusPoint {
    p.reduce()
}

impl PartialEq for TorusPoint {
    fn eq(&self, other: &Self) -> bool {
        self.torus == other.torus && self.distance_defect(other) <= POINT_TOL
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn square() -> ComplexTorus {
        ComplexTorus::from_rows(&[vec![c(1.0, 0.0), c(0.0, 1.0)]], 1e6).unwrap()
    }

    #[test]
    fn square_lattice_is_valid() {
        let t = square();
        assert_eq!(t.genus(), 1);
        assert!((t.condition_number() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_periods_rejected() {
        let r = ComplexTorus::from_rows(&[vec![c(1.0, 0.0), c(2.0, 0.0)]], 1e6);
        assert!(matches!(r, Err(Error::DegenerateLattice(_))));
    }

    #[test]
    fn ill_conditioned_rejected() {
        let r = ComplexTorus::from_rows(&[vec![c(1.0, 0.0), c(1.0, 1e-9)]], 1e6);
        assert!(matches!(r, Err(Error::DegenerateLattice(_))));
    }

    #[test]
    fn wrong_shape_rejected() {
        let p = DMatrix::from_element(1, 3, c(1.0, 0.0));
        assert!(matches!(
            ComplexTorus::new(p, 1e6),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn genus_two_diagonal_is_valid() {
        let t = ComplexTorus::from_rows(
            &[
                vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)],
                vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 2.0)],
            ],
            DEFAULT_KAPPA_MAX,
        )
        .unwrap();
        // Stacked real matrix is diag-like with singular values {1,1,1,2}.
        assert!((t.condition_number() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reduce_integer_translation() {
        let t = square();
        let p = t.point(vec![c(2.5, 3.5)]).unwrap().reduce();
        assert!((p.lift()[0] - c(0.5, 0.5)).norm() < 1e-12);
        let o = t.origin().reduce();
        assert_eq!(o.lift()[0], c(0.0, 0.0));
    }

    #[test]
    fn reduce_negative_coordinates() {
        let t = square();
        let p = t.point(vec![c(-0.25, -1.75)]).unwrap().reduce();
        assert!((p.lift()[0] - c(0.75, 0.25)).norm() < 1e-12);
    }

    #[test]
    fn addition_wraps() {
        let t = square();
        let p = t.point(vec![c(0.7, 0.0)]).unwrap();
        let q = t.point(vec![c(0.6, 0.0)]).unwrap();
        let s = add(&p, &q).unwrap();
        assert!((s.lift()[0] - c(0.3, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn addition_checks_torus() {
        let a = square();
        let b = ComplexTorus::from_rows(&[vec![c(1.0, 0.0), c(0.5, 1.0)]], 1e6).unwrap();
        assert_eq!(
            a.origin().add(&b.origin()).unwrap_err(),
            Error::TorusMismatch
        );
    }

    #[test]
    fn generator_out_of_range() {
        assert!(matches!(
            square().generator(2),
            Err(Error::IndexOutOfRange { index: 2, bound: 2 })
        ));
    }

    #[test]
    fn product_generators_are_block() {
        let t = square();
        let p = t.product(&t);
        assert_eq!(p.genus(), 2);
        assert_eq!(p.generator(1).unwrap(), vec![c(0.0, 1.0), c(0.0, 0.0)]);
        assert_eq!(p.generator(3).unwrap(), vec![c(0.0, 0.0), c(0.0, 1.0)]);
    }
}
