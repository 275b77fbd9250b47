//! Translation-invariant differential forms of degree at most two.
//!
//! Coefficients are stored against the ordered bases
//!
//! | bidegree | basis                         | storage              |
//! |----------|-------------------------------|----------------------|
//! | (0,0)    | `1`                           | `1 × 1`              |
//! | (1,0)    | `dz_j`                        | `g × 1`              |
//! | (0,1)    | `dz̄_j`                        | `g × 1`              |
//! | (1,1)    | `dz_j ∧ dz̄_k`                 | `g × g`              |
//! | (2,0)    | `dz_j ∧ dz_k`, `j < k`        | antisymmetric `g × g`|
//! | (0,2)    | `dz̄_j ∧ dz̄_k`, `j < k`        | antisymmetric `g × g`|
//!
//! For the pure bidegrees the full antisymmetric matrix is kept, so that
//! `ω(u, v) = uᵀ A v` for (2,0).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::torus::ComplexTorus;
use crate::C64;

const ANTISYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantForm {
    bidegree: (usize, usize),
    coeffs: DMatrix<C64>,
}

impl InvariantForm {
    pub fn new(bidegree: (usize, usize), coeffs: DMatrix<C64>) -> Result<Self> {
        let (p, q) = bidegree;
        if p + q > 2 {
            return Err(Error::InvalidForm(format!(
                "bidegree ({p},{q}) exceeds total degree 2"
            )));
        }
        let g = coeffs.nrows();
        let expected = match bidegree {
            (0, 0) => (1, 1),
            (1, 0) | (0, 1) => (g, 1),
            _ => (g, g),
        };
        if coeffs.shape() != expected {
            return Err(Error::ShapeMismatch(format!(
                "({p},{q})-form needs {expected:?} coefficients, got {:?}",
                coeffs.shape()
            )));
        }
        if matches!(bidegree, (2, 0) | (0, 2)) {
            let defect = (&coeffs + coeffs.transpose())
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max);
            if defect > ANTISYMMETRY_TOL {
                return Err(Error::InvalidForm(format!(
                    "({p},{q}) coefficients not antisymmetric (defect {defect:e})"
                )));
            }
        }
        Ok(Self { bidegree, coeffs })
    }

    pub fn zero(bidegree: (usize, usize), genus: usize) -> Self {
        let shape = match bidegree {
            (0, 0) => (1, 1),
            (1, 0) | (0, 1) => (genus, 1),
            _ => (genus, genus),
        };
        Self {
            bidegree,
            coeffs: DMatrix::zeros(shape.0, shape.1),
        }
    }

    /// The (1,0)-form `Σ c_j dz_j`; elements of `H⁰(A, Ω_A)`.
    pub fn holomorphic_covector(c: &[C64]) -> Self {
        Self {
            bidegree: (1, 0),
            coeffs: DMatrix::from_column_slice(c.len(), 1, c),
        }
    }

    /// The (1,1)-form `Σ c_jk dz_j ∧ dz̄_k`.
    pub fn from_11(c: DMatrix<C64>) -> Result<Self> {
        Self::new((1, 1), c)
    }

    pub fn bidegree(&self) -> (usize, usize) {
        self.bidegree
    }

    pub fn degree(&self) -> usize {
        self.bidegree.0 + self.bidegree.1
    }

    pub fn coeffs(&self) -> &DMatrix<C64> {
        &self.coeffs
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            bidegree: self.bidegree,
            coeffs: &self.coeffs * s,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.bidegree != other.bidegree || self.coeffs.shape() != other.coeffs.shape() {
            return Err(Error::ShapeMismatch("forms of different type".into()));
        }
        Ok(Self {
            bidegree: self.bidegree,
            coeffs: &self.coeffs + &other.coeffs,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Evaluates a 1-form on a real tangent vector `u ∈ C^g`.
    pub fn eval1(&self, u: &[C64]) -> Result<C64> {
        let c = &self.coeffs;
        match self.bidegree {
            (1, 0) => Ok((0..u.len()).map(|j| c[(j, 0)] * u[j]).sum()),
            (0, 1) => Ok((0..u.len()).map(|j| c[(j, 0)] * u[j].conj()).sum()),
            _ => Err(Error::InvalidForm("expected a 1-form".into())),
        }
    }

    /// Evaluates a 2-form on a pair of real tangent vectors `u, v ∈ C^g`.
    pub fn eval2(&self, u: &[C64], v: &[C64]) -> Result<C64> {
        let c = &self.coeffs;
        let g = c.nrows();
        if u.len() != g || v.len() != g {
            return Err(Error::ShapeMismatch(
                "tangent vector of wrong length".into(),
            ));
        }
        let mut acc = C64::new(0.0, 0.0);
        match self.bidegree {
            (1, 1) => {
                for j in 0..g {
                    for k in 0..g {
                        acc += c[(j, k)] * (u[j] * v[k].conj() - v[j] * u[k].conj());
                    }
                }
            }
            (2, 0) => {
                for j in 0..g {
                    for k in 0..g {
                        acc += c[(j, k)] * u[j] * v[k];
                    }
                }
            }
            (0, 2) => {
                for j in 0..g {
                    for k in 0..g {
                        acc += c[(j, k)] * u[j].conj() * v[k].conj();
                    }
                }
            }
            _ => return Err(Error::InvalidForm("expected a 2-form".into())),
        }
        Ok(acc)
    }

    /// Pullback along the C-linear map with matrix `m` (`g_target × g_source`).
    pub fn pullback(&self, m: &DMatrix<C64>) -> Result<Self> {
        let g = match self.bidegree {
            (0, 0) => m.nrows(),
            _ => self.coeffs.nrows(),
        };
        if m.nrows() != g {
            return Err(Error::ShapeMismatch(format!(
                "map has {} rows, form lives on C^{g}",
                m.nrows()
            )));
        }
        let mc = m.map(|x| x.conj());
        let coeffs = match self.bidegree {
            (0, 0) => self.coeffs.clone(),
            (1, 0) => m.transpose() * &self.coeffs,
            (0, 1) => mc.transpose() * &self.coeffs,
            (1, 1) => m.transpose() * &self.coeffs * &mc,
            (2, 0) => m.transpose() * &self.coeffs * m,
            (0, 2) => mc.transpose() * &self.coeffs * &mc,
            _ => unreachable!("validated at construction"),
        };
        Ok(Self {
            bidegree: self.bidegree,
            coeffs,
        })
    }
}

/// Pairing of a constant 2-form with the 2-cycle spanned by `λ_j, λ_k`
/// (0-based generator indices). For constant forms this is `ω(λ_j, λ_k)`.
pub fn cycle_integral(
    torus: &ComplexTorus,
    form: &InvariantForm,
    j: usize,
    k: usize,
) -> Result<C64> {
    if form.degree() != 2 {
        return Err(Error::InvalidForm(format!(
            "cycle integral needs a 2-form, got bidegree {:?}",
            form.bidegree()
        )));
    }
    let lj = torus.generator(j)?;
    let lk = torus.generator(k)?;
    form.eval2(&lj, &lk)
}

/// The `2g × 2g` matrix of cycle integrals `ω(λ_j, λ_k)`.
pub fn cycle_matrix(torus: &ComplexTorus, form: &InvariantForm) -> Result<DMatrix<C64>> {
    let n = torus.real_dim();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            out[(j, k)] = cycle_integral(torus, form, j, k)?;
        }
    }
    Ok(out)
}
