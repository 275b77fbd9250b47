//! Holomorphic line bundles on complex tori in Appell–Humbert form.
//!
//! A datum `(H, χ)` is a hermitian form `H` on `C^g` (linear in the first
//! slot) whose imaginary part `E = Im H` is integral on the lattice, together
//! with a semicharacter `χ: Λ → U(1)`,
//!
//! ```text
//! χ(λ + μ) = χ(λ) χ(μ) exp(iπ E(λ, μ)).
//! ```
//!
//! The bundle is `(C^g × C) / Λ` with factor of automorphy
//!
//! ```text
//! a(λ, z) = χ(λ) exp(π H(z, λ) + (π/2) H(λ, λ)),
//! ```
//!
//! so that sections are functions with `s(z + λ) = a(λ, z) s(z)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::torus::{ComplexTorus, TorusPoint, POINT_TOL};
use crate::C64;

/// Tolerance for `H = H*`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance for integrality of `E` on lattice pairs.
pub const INTEGRALITY_TOL: f64 = 1e-8;
/// Tolerance for `|χ(λ_j)| = 1`.
pub const UNIT_TOL: f64 = 1e-12;

/// `H(u, v) = Σ H_jk u_j v̄_k`.
pub fn hermitian_pairing(h: &DMatrix<C64>, u: &[C64], v: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (j, uj) in u.iter().enumerate() {
        for (k, vk) in v.iter().enumerate() {
            acc += h[(j, k)] * uj * vk.conj();
        }
    }
    acc
}

fn mat_vec(m: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)] * v[c]).sum())
        .collect()
}

/// An Appell–Humbert datum on a fixed torus.
#[derive(Clone, Debug)]
pub struct AhDatum {
    torus: ComplexTorus,
    h: DMatrix<C64>,
    chi: Vec<C64>,
    /// `E(λ_j, λ_k)` rounded to integers.
    e: Vec<Vec<i64>>,
}

impl AhDatum {
    /// Validates `H` and the generator values of `χ`.
    pub fn new(torus: &ComplexTorus, h: DMatrix<C64>, chi: Vec<C64>) -> Result<Self> {
        let g = torus.genus();
        let n = torus.real_dim();
        if h.shape() != (g, g) {
            return Err(Error::ShapeMismatch(format!(
                "H must be {g}×{g}, got {:?}",
                h.shape()
            )));
        }
        if chi.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "χ needs {n} generator values, got {}",
                chi.len()
            )));
        }
        let herm_defect = (&h - h.adjoint())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if !(herm_defect <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian(herm_defect));
        }
        let gens = torus.generators();
        let mut e = vec![vec![0i64; n]; n];
        for j in 0..n {
            for k in 0..n {
                let value = hermitian_pairing(&h, &gens[j], &gens[k]).im;
                let rounded = value.round();
                if !((value - rounded).abs() <= INTEGRALITY_TOL) {
                    return Err(Error::NonIntegralE { j, k, value });
                }
                e[j][k] = rounded as i64;
            }
        }
        for (j, c) in chi.iter().enumerate() {
            if !((c.norm() - 1.0).abs() <= UNIT_TOL) {
                return Err(Error::SemicharacterInconsistent(format!(
                    "|χ(λ_{j})| = {} is not 1",
                    c.norm()
                )));
            }
        }
        let datum = Self {
            torus: torus.clone(),
            h,
            chi,
            e,
        };
        datum.check_semicharacter()?;
        Ok(datum)
    }

    /// `(H, χ)` with `χ ≡ 1` on the generators.
    ///
    /// This is the canonical semicharacter when the generators split into two
    /// `E`-isotropic halves, e.g. `Π = [I | τ]` with `E` in block form.
    pub fn with_trivial_character(torus: &ComplexTorus, h: DMatrix<C64>) -> Result<Self> {
        let chi = vec![C64::new(1.0, 0.0); torus.real_dim()];
        Self::new(torus, h, chi)
    }

    /// The trivial bundle `(0, 1)`.
    pub fn trivial(torus: &ComplexTorus) -> Self {
        let g = torus.genus();
        Self::with_trivial_character(torus, DMatrix::zeros(g, g)).expect("trivial datum is valid")
    }

    /// Generator values given as phases in turns, `χ(λ_j) = exp(2πi φ_j)`.
    pub fn from_turns(torus: &ComplexTorus, h: DMatrix<C64>, turns: &[f64]) -> Result<Self> {
        let chi = turns
            .iter()
            .map(|t| C64::from_polar(1.0, 2.0 * PI * t))
            .collect();
        Self::new(torus, h, chi)
    }

    pub fn torus(&self) -> &ComplexTorus {
        &self.torus
    }

    pub fn hermitian(&self) -> &DMatrix<C64> {
        &self.h
    }

    /// `χ` on the generators.
    pub fn character_values(&self) -> &[C64] {
        &self.chi
    }

    /// `E(λ_j, λ_k)` as an integer matrix.
    pub fn e_matrix(&self) -> &[Vec<i64>] {
        &self.e
    }

    /// `H(u, v)` for this datum.
    pub fn h(&self, u: &[C64], v: &[C64]) -> C64 {
        hermitian_pairing(&self.h, u, v)
    }

    /// `E(u, v) = Im H(u, v)` for arbitrary vectors.
    pub fn e(&self, u: &[C64], v: &[C64]) -> f64 {
        self.h(u, v).im
    }

    /// `χ` at the lattice vector with integer coordinates `n`:
    /// `Π χ(λ_j)^{n_j} · exp(iπ Σ_{j<k} n_j n_k E(λ_j, λ_k))`.
    pub fn character_at(&self, n: &[i64]) -> C64 {
        let mut angle = 0.0;
        for (j, nj) in n.iter().enumerate() {
            angle += *nj as f64 * self.chi[j].arg();
        }
        // parity of Σ_{j<k} n_j n_k E_jk
        let mut parity: i64 = 0;
        for j in 0..n.len() {
            for k in (j + 1)..n.len() {
                parity = (parity + (n[j] % 2) * (n[k] % 2) * (self.e[j][k] % 2)).rem_euclid(2);
            }
        }
        let sign = if parity == 0 { 1.0 } else { -1.0 };
        C64::from_polar(sign, angle)
    }

    /// `χ(λ)` for a lattice vector `λ`.
    pub fn character(&self, lambda: &[C64]) -> Result<C64> {
        let n = self.torus.integer_coords(lambda, POINT_TOL)?;
        Ok(self.character_at(&n))
    }

    fn check_semicharacter(&self) -> Result<()> {
        let n = self.torus.real_dim();
        let half_turn = |e: i64| if e.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        for j in 0..n {
            for k in 0..n {
                if j == k {
                    continue;
                }
                let mut coords = vec![0i64; n];
                coords[j] += 1;
                coords[k] += 1;
                let extended = self.character_at(&coords);
                let rule = self.chi[j] * self.chi[k] * half_turn(self.e[j][k]);
                let defect = (extended - rule).norm();
                if defect > 1e-9 {
                    return Err(Error::SemicharacterInconsistent(format!(
                        "χ(λ_{j}+λ_{k}) off by {defect:e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The factor of automorphy `a(λ, z)`.
    pub fn factor_of_automorphy(&self, lambda: &[C64], z: &[C64]) -> Result<C64> {
        let chi = self.character(lambda)?;
        let exponent = self.h(z, lambda) * PI + self.h(lambda, lambda) * (PI / 2.0);
        Ok(chi * exponent.exp())
    }

    /// The dual bundle `(−H, χ̄)`.
    pub fn dual(&self) -> Self {
        Self {
            torus: self.torus.clone(),
            h: -&self.h,
            chi: self.chi.iter().map(|c| c.conj()).collect(),
            e: self
                .e
                .iter()
                .map(|row| row.iter().map(|x| -x).collect())
                .collect(),
        }
    }

    /// The tensor product `(H₁ + H₂, χ₁ χ₂)`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.torus != other.torus {
            return Err(Error::TorusMismatch);
        }
        Self::new(
            &self.torus,
            &self.h + &other.h,
            self.chi
                .iter()
                .zip(&other.chi)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    /// Largest `|E(λ_j, λ_k)|`.
    pub fn max_abs_e(&self) -> i64 {
        self.e.iter().flatten().map(|x| x.abs()).max().unwrap_or(0)
    }

    /// Fieldwise comparison: `H` entries and `χ` generator phases.
    pub fn max_difference(&self, other: &Self) -> Result<f64> {
        if self.torus != other.torus {
            return Err(Error::TorusMismatch);
        }
        let dh = (&self.h - &other.h)
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        let dchi = self
            .chi
            .iter()
            .zip(&other.chi)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        Ok(dh.max(dchi))
    }
}

/// Validates `(H, χ)` on `torus`; see [`AhDatum::new`].
pub fn validate_datum(torus: &ComplexTorus, h: DMatrix<C64>, chi: Vec<C64>) -> Result<AhDatum> {
    AhDatum::new(torus, h, chi)
}

/// `a(λ, z)` for `datum`.
pub fn factor_of_automorphy(datum: &AhDatum, lambda: &[C64], z: &[C64]) -> Result<C64> {
    datum.factor_of_automorphy(lambda, z)
}

/// The affine map `z ↦ M z + t` between tori, with `M Λ_source ⊂ Λ_target`.
#[derive(Clone, Debug)]
pub struct TorusHomomorphism {
    source: ComplexTorus,
    target: ComplexTorus,
    matrix: DMatrix<C64>,
    translation: Vec<C64>,
}

impl TorusHomomorphism {
    pub fn new(
        source: &ComplexTorus,
        target: &ComplexTorus,
        matrix: DMatrix<C64>,
        translation: Vec<C64>,
    ) -> Result<Self> {
        if matrix.shape() != (target.genus(), source.genus()) {
            return Err(Error::ShapeMismatch(format!(
                "map matrix must be {}×{}, got {:?}",
                target.genus(),
                source.genus(),
                matrix.shape()
            )));
        }
        if translation.len() != target.genus() {
            return Err(Error::ShapeMismatch("translation has wrong length".into()));
        }
        let defect = source
            .generators()
            .iter()
            .map(|lam| target.lattice_defect(&mat_vec(&matrix, lam)))
            .fold(0.0, f64::max);
        if defect > POINT_TOL {
            return Err(Error::LatticeNotPreserved(defect));
        }
        Ok(Self {
            source: source.clone(),
            target: target.clone(),
            matrix,
            translation,
        })
    }

    pub fn identity(torus: &ComplexTorus) -> Self {
        let g = torus.genus();
        Self::new(
            torus,
            torus,
            DMatrix::identity(g, g),
            vec![C64::new(0.0, 0.0); g],
        )
        .expect("identity preserves the lattice")
    }

    /// `z ↦ z + x`.
    pub fn translation(torus: &ComplexTorus, x: &TorusPoint) -> Result<Self> {
        if x.torus() != torus {
            return Err(Error::TorusMismatch);
        }
        let g = torus.genus();
        Self::new(torus, torus, DMatrix::identity(g, g), x.lift().to_vec())
    }

    /// The addition map `α: A × A → A`, `(z, w) ↦ z + w`.
    pub fn addition(torus: &ComplexTorus) -> Self {
        let g = torus.genus();
        let mut m = DMatrix::zeros(g, 2 * g);
        for i in 0..g {
            m[(i, i)] = C64::new(1.0, 0.0);
            m[(i, g + i)] = C64::new(1.0, 0.0);
        }
        Self::new(&torus.product(torus), torus, m, vec![C64::new(0.0, 0.0); g])
            .expect("addition preserves the lattice")
    }

    /// Projection `p_i: A × A → A` onto factor `i ∈ {1, 2}`.
    pub fn projection(torus: &ComplexTorus, factor: usize) -> Result<Self> {
        if !(1..=2).contains(&factor) {
            return Err(Error::IndexOutOfRange {
                index: factor,
                bound: 3,
            });
        }
        let g = torus.genus();
        let mut m = DMatrix::zeros(g, 2 * g);
        let offset = (factor - 1) * g;
        for i in 0..g {
            m[(i, offset + i)] = C64::new(1.0, 0.0);
        }
        Self::new(&torus.product(torus), torus, m, vec![C64::new(0.0, 0.0); g])
    }

    /// `z ↦ (z, x)`: inclusion of the slice `A × {x}`.
    pub fn slice_inclusion(product: &ComplexTorus, x: &TorusPoint) -> Result<Self> {
        Self::into_product(product, x, false)
    }

    /// `f_y: x ↦ (y, x)`, a section of the second projection.
    pub fn section_at(product: &ComplexTorus, y: &TorusPoint) -> Result<Self> {
        Self::into_product(product, y, true)
    }

    fn into_product(product: &ComplexTorus, fixed: &TorusPoint, fixed_first: bool) -> Result<Self> {
        let a = fixed.torus();
        let g = a.genus();
        if !product.is_product_of(a, a) {
            return Err(Error::TorusMismatch);
        }
        let mut m = DMatrix::zeros(2 * g, g);
        let mut t = vec![C64::new(0.0, 0.0); 2 * g];
        let (moving, pinned) = if fixed_first { (g, 0) } else { (0, g) };
        for i in 0..g {
            m[(moving + i, i)] = C64::new(1.0, 0.0);
            t[pinned + i] = fixed.lift()[i];
        }
        Self::new(a, product, m, t)
    }

    pub fn source(&self) -> &ComplexTorus {
        &self.source
    }

    pub fn target(&self) -> &ComplexTorus {
        &self.target
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn translation_part(&self) -> &[C64] {
        &self.translation
    }

    /// Image of a lift.
    pub fn apply_lift(&self, z: &[C64]) -> Vec<C64> {
        mat_vec(&self.matrix, z)
            .into_iter()
            .zip(&self.translation)
            .map(|(a, b)| a + b)
            .collect()
    }

    /// Linear part applied to a tangent vector.
    pub fn apply_linear(&self, v: &[C64]) -> Vec<C64> {
        mat_vec(&self.matrix, v)
    }

    pub fn apply(&self, p: &TorusPoint) -> Result<TorusPoint> {
        if p.torus() != &self.source {
            return Err(Error::TorusMismatch);
        }
        self.target.point(self.apply_lift(p.lift()))
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &TorusHomomorphism) -> Result<Self> {
        if inner.target != self.source {
            return Err(Error::TorusMismatch);
        }
        Self::new(
            &inner.source,
            &self.target,
            &self.matrix * &inner.matrix,
            self.apply_lift(&inner.translation),
        )
    }

    /// Coefficients `c` of the linear function `l(z) = Σ c_a z_a` such that
    /// `exp(l)` converts the pulled-back factor `a(Mλ, Mz + t)` into the
    /// Appell–Humbert factor of the pulled-back datum:
    ///
    /// ```text
    /// a_pull(λ, z) = a(Mλ, Mz + t) · exp(l(z + λ)) / exp(l(z)).
    /// ```
    ///
    /// Here `l(z) = −π H(Mz, t)`.
    pub fn frame_exponent(&self, datum: &AhDatum) -> Vec<C64> {
        let ht: Vec<C64> = (0..datum.h.nrows())
            .map(|r| {
                (0..datum.h.ncols())
                    .map(|c| datum.h[(r, c)] * self.translation[c].conj())
                    .sum()
            })
            .collect();
        (0..self.matrix.ncols())
            .map(|a| {
                -PI * (0..self.matrix.nrows())
                    .map(|r| self.matrix[(r, a)] * ht[r])
                    .sum::<C64>()
            })
            .collect()
    }
}

/// Evaluates `l(z) = Σ c_a z_a`.
pub fn linear_value(c: &[C64], z: &[C64]) -> C64 {
    c.iter().zip(z).map(|(a, b)| a * b).sum()
}

/// Pullback of a datum along an affine homomorphism.
///
/// `H_pull(u, v) = H(Mu, Mv)` and `χ_pull(λ) = χ(Mλ) · exp(2πi E(t, Mλ))`.
/// The phase is the one that makes the pulled-back factor agree with
/// `a(Mλ, Mz + t)` up to the holomorphic frame change in
/// [`TorusHomomorphism::frame_exponent`].
pub fn pullback(f: &TorusHomomorphism, datum: &AhDatum) -> Result<AhDatum> {
    if datum.torus() != f.target() {
        return Err(Error::TorusMismatch);
    }
    let m = f.matrix();
    let h_pull = m.transpose() * datum.hermitian() * m.map(|x| x.conj());
    let mut chi = Vec::with_capacity(f.source().real_dim());
    for lam in f.source().generators() {
        let image = f.apply_linear(&lam);
        let base = datum.character(&image)?;
        let phase = 2.0 * PI * datum.e(f.translation_part(), &image);
        chi.push(base * C64::from_polar(1.0, phase));
    }
    AhDatum::new(f.source(), h_pull, chi)
}

/// Relative defect of the pullback cocycle comparison at `(λ, z)`:
/// `a_pull(λ, z)` against `a(Mλ, Mz + t) · exp(l(λ))`.
pub fn pullback_cocycle_defect(
    f: &TorusHomomorphism,
    datum: &AhDatum,
    pulled: &AhDatum,
    lambda: &[C64],
    z: &[C64],
) -> Result<f64> {
    let lhs = pulled.factor_of_automorphy(lambda, z)?;
    let l = f.frame_exponent(datum);
    let rhs = datum.factor_of_automorphy(&f.apply_linear(lambda), &f.apply_lift(z))?
        * linear_value(&l, lambda).exp();
    Ok((lhs - rhs).norm() / lhs.norm())
}

/// The datum of `(p₁* L*) ⊗ (α* L)` on `A × A`.
pub fn build_family(datum: &AhDatum) -> Result<AhDatum> {
    let a = datum.torus();
    let p1 = TorusHomomorphism::projection(a, 1)?;
    let alpha = TorusHomomorphism::addition(a);
    pullback(&p1, &datum.dual())?.tensor(&pullback(&alpha, datum)?)
}

/// The slice datum on `A × {x}`, pulled back along `z ↦ (z, x)`.
pub fn restrict_slice(family: &AhDatum, x: &TorusPoint) -> Result<AhDatum> {
    let f = TorusHomomorphism::slice_inclusion(family.torus(), x)?;
    pullback(&f, family)
}

/// Degree-zero test: `E = 0` and `H = 0`.
pub fn is_topologically_trivial(datum: &AhDatum) -> bool {
    let h_max = datum
        .hermitian()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    datum.max_abs_e() == 0 && h_max <= 1e-10
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

    fn principal() -> AhDatum {
        AhDatum::with_trivial_character(&square(), DMatrix::from_element(1, 1, c(1.0, 0.0)))
            .unwrap()
    }

    #[test]
    fn trivial_datum_is_valid_and_trivial() {
        let d = AhDatum::trivial(&square());
        assert!(is_topologically_trivial(&d));
        let a = d
            .factor_of_automorphy(&[c(0.0, 1.0)], &[c(0.3, 0.4)])
            .unwrap();
        assert!((a - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn principal_e_is_minus_one() {
        let d = principal();
        assert_eq!(d.e_matrix()[0][1], -1);
        assert_eq!(d.e_matrix()[1][0], 1);
        assert!(!is_topologically_trivial(&d));
    }

    #[test]
    fn half_form_is_not_integral() {
        let r =
            AhDatum::with_trivial_character(&square(), DMatrix::from_element(1, 1, c(0.5, 0.0)));
        match r {
            Err(Error::NonIntegralE { value, .. }) => assert!((value.abs() - 0.5).abs() < 1e-12),
            other => panic!("expected NonIntegralE, got {other:?}"),
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let t = ComplexTorus::from_rows(
            &[
                vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)],
                vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)],
            ],
            1e6,
        )
        .unwrap();
        let h =
            DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            AhDatum::with_trivial_character(&t, h),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn non_unit_character_rejected() {
        let r = AhDatum::new(
            &square(),
            DMatrix::from_element(1, 1, c(1.0, 0.0)),
            vec![c(1.0, 0.0), c(2.0, 0.0)],
        );
        assert!(matches!(r, Err(Error::SemicharacterInconsistent(_))));
    }

    #[test]
    fn non_lattice_vector_rejected() {
        assert!(matches!(
            principal().factor_of_automorphy(&[c(0.5, 0.0)], &[c(0.0, 0.0)]),
            Err(Error::NotLatticeVector(_))
        ));
    }

    #[test]
    fn dual_is_involutive_and_cancels() {
        let d = principal();
        assert!(d.dual().dual().max_difference(&d).unwrap() == 0.0);
        let t = d.tensor(&d.dual()).unwrap();
        assert!(t.max_difference(&AhDatum::trivial(&square())).unwrap() < 1e-15);
        assert_eq!(d.dual().e_matrix()[0][1], 1);
    }

    #[test]
    fn identity_pullback_is_identity() {
        let d = principal();
        let p = pullback(&TorusHomomorphism::identity(&square()), &d).unwrap();
        assert!(p.max_difference(&d).unwrap() < 1e-15);
    }

    #[test]
    fn zero_slice_is_trivial() {
        let d = principal();
        let fam = build_family(&d).unwrap();
        let s = restrict_slice(&fam, &square().origin()).unwrap();
        assert!(s.max_difference(&AhDatum::trivial(&square())).unwrap() < 1e-12);
    }

    #[test]
    fn projection_factor_out_of_range() {
        assert!(TorusHomomorphism::projection(&square(), 3).is_err());
    }

    #[test]
    fn non_lattice_map_rejected() {
        let t = square();
        let r = TorusHomomorphism::new(
            &t,
            &t,
            DMatrix::from_element(1, 1, c(0.5, 0.0)),
            vec![c(0.0, 0.0)],
        );
        assert!(matches!(r, Err(Error::LatticeNotPreserved(_))));
    }
}
