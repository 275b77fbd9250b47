//! Connections on Appell–Humbert bundles and their curvature.
//!
//! A connection is written as a (1,0)-covector field `θ` on the universal
//! cover, in a global frame of the pulled-back bundle: `∇ = d + θ`. The frame
//! is the Appell–Humbert frame twisted by `exp(l)` for a linear function `l`
//! (see [`ConnectionForm::frame`]); changing the twist shifts `θ` by the
//! constant covector of `l` and leaves the curvature alone.
//!
//! Curvature is reported as the matrix `K_jk = ∂θ_j/∂z̄_k`, read against the
//! ordered basis `dz_j ∧ dz̄_k`. With that convention the Chern form
//! `ω = (i/2π) K` pairs with the lattice 2-cycles to give `E = Im H`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::appell_humbert::{build_family, pullback, AhDatum, TorusHomomorphism};
use crate::error::{Error, Result};
use crate::forms::InvariantForm;
use crate::grid::{dbar_at, dbar_fd, dbar_sampled, GridFunction};
use crate::torus::{ComplexTorus, TorusPoint};
use crate::C64;

/// Normalisation `c_norm = i / 2π` taking curvature to the Chern form.
pub const C_NORM: C64 = C64::new(0.0, 1.0 / (2.0 * PI));

/// `θ_j(z) = c_j + Σ_k A_jk z_k + Σ_k B_jk z̄_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineCovectorField {
    pub constant: Vec<C64>,
    pub linear: DMatrix<C64>,
    pub antilinear: DMatrix<C64>,
}

impl AffineCovectorField {
    pub fn zero(genus: usize) -> Self {
        Self {
            constant: vec![C64::new(0.0, 0.0); genus],
            linear: DMatrix::zeros(genus, genus),
            antilinear: DMatrix::zeros(genus, genus),
        }
    }

    pub fn eval(&self, z: &[C64]) -> Vec<C64> {
        let g = self.constant.len();
        (0..g)
            .map(|j| {
                let mut acc = self.constant[j];
                for (k, zk) in z.iter().enumerate() {
                    acc += self.linear[(j, k)] * zk + self.antilinear[(j, k)] * zk.conj();
                }
                acc
            })
            .collect()
    }

    fn add(&self, other: &Self) -> Self {
        Self {
            constant: self
                .constant
                .iter()
                .zip(&other.constant)
                .map(|(a, b)| a + b)
                .collect(),
            linear: &self.linear + &other.linear,
            antilinear: &self.antilinear + &other.antilinear,
        }
    }

    fn neg(&self) -> Self {
        Self {
            constant: self.constant.iter().map(|a| -a).collect(),
            linear: -&self.linear,
            antilinear: -&self.antilinear,
        }
    }

    /// `z ↦ Mᵀ θ(Mz + t)`.
    fn pullback(&self, f: &TorusHomomorphism) -> Self {
        let m = f.matrix();
        let mt = m.transpose();
        let shifted = self.eval(f.translation_part());
        Self {
            constant: (0..m.ncols())
                .map(|a| (0..m.nrows()).map(|r| m[(r, a)] * shifted[r]).sum())
                .collect(),
            linear: &mt * &self.linear * m,
            antilinear: &mt * &self.antilinear * m.map(|x| x.conj()),
        }
    }
}

/// The connection covector field.
#[derive(Clone, Debug)]
pub enum CovectorField {
    /// Closed form, evaluable anywhere on the cover.
    Affine(AffineCovectorField),
    /// Values at the nodes of a periodic grid. Only meaningful for fields that
    /// are periodic on the cover, i.e. flat bundles in a unitary frame.
    Sampled(GridFunction),
}

/// A connection `∇ = d + θ` on the bundle of `datum`.
#[derive(Clone, Debug)]
pub struct ConnectionForm {
    datum: AhDatum,
    frame: Vec<C64>,
    field: CovectorField,
}

impl ConnectionForm {
    /// Connection in the frame twisted by `l(z) = Σ frame_a z_a`.
    pub fn new(datum: AhDatum, frame: Vec<C64>, field: CovectorField) -> Result<Self> {
        let g = datum.torus().genus();
        if frame.len() != g {
            return Err(Error::ShapeMismatch(
                "frame exponent has wrong length".into(),
            ));
        }
        match &field {
            CovectorField::Affine(a) => {
                if a.constant.len() != g
                    || a.linear.shape() != (g, g)
                    || a.antilinear.shape() != (g, g)
                {
                    return Err(Error::ShapeMismatch("affine field has wrong shape".into()));
                }
            }
            CovectorField::Sampled(grid) => {
                if grid.torus() != datum.torus() || grid.width() != g {
                    return Err(Error::ShapeMismatch("sampled field has wrong shape".into()));
                }
            }
        }
        Ok(Self {
            datum,
            frame,
            field,
        })
    }

    pub fn datum(&self) -> &AhDatum {
        &self.datum
    }

    pub fn torus(&self) -> &ComplexTorus {
        self.datum.torus()
    }

    /// Coefficients of the frame twist `l`. The frame in use has factor of
    /// automorphy `a(λ, z) · exp(−l(λ))`, with `a` the Appell–Humbert factor.
    pub fn frame(&self) -> &[C64] {
        &self.frame
    }

    pub fn field(&self) -> &CovectorField {
        &self.field
    }

    pub fn affine(&self) -> Option<&AffineCovectorField> {
        match &self.field {
            CovectorField::Affine(a) => Some(a),
            CovectorField::Sampled(_) => None,
        }
    }

    /// `θ(z)`. Sampled fields are looked up at the nearest grid node.
    pub fn eval(&self, z: &[C64]) -> Vec<C64> {
        match &self.field {
            CovectorField::Affine(a) => a.eval(z),
            CovectorField::Sampled(grid) => {
                let n = grid.resolution() as f64;
                let t = self.torus().lattice_coords(z);
                let mut node = 0usize;
                for x in t {
                    let i = ((x * n).round() as i64).rem_euclid(grid.resolution() as i64) as usize;
                    node = node * grid.resolution() + i;
                }
                grid.at(node).to_vec()
            }
        }
    }

    /// Same connection expressed in the untwisted Appell–Humbert frame.
    pub fn in_normal_frame(&self) -> Result<Self> {
        let g = self.torus().genus();
        let field = match &self.field {
            CovectorField::Affine(a) => {
                let mut a = a.clone();
                for (c, l) in a.constant.iter_mut().zip(&self.frame) {
                    *c -= l;
                }
                CovectorField::Affine(a)
            }
            CovectorField::Sampled(grid) => {
                let shift = GridFunction::constant(grid.torus(), grid.resolution(), &self.frame)?;
                CovectorField::Sampled(grid.sub(&shift)?)
            }
        };
        Self::new(self.datum.clone(), vec![C64::new(0.0, 0.0); g], field)
    }

    pub fn neg(&self) -> Self {
        let field = match &self.field {
            CovectorField::Affine(a) => CovectorField::Affine(a.neg()),
            CovectorField::Sampled(g) => CovectorField::Sampled(g.neg()),
        };
        Self {
            datum: self.datum.dual(),
            frame: self.frame.iter().map(|c| -c).collect(),
            field,
        }
    }

    /// Connection on the tensor product bundle.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let datum = self.datum.tensor(&other.datum)?;
        let frame = self
            .frame
            .iter()
            .zip(&other.frame)
            .map(|(a, b)| a + b)
            .collect();
        let field = match (&self.field, &other.field) {
            (CovectorField::Affine(a), CovectorField::Affine(b)) => CovectorField::Affine(a.add(b)),
            (CovectorField::Sampled(a), CovectorField::Sampled(b)) => {
                CovectorField::Sampled(a.add(b)?)
            }
            _ => {
                return Err(Error::ShapeMismatch(
                    "cannot tensor analytic and sampled connections".into(),
                ))
            }
        };
        Self::new(datum, frame, field)
    }

    /// Pullback along `f`, expressed in the pulled-back frame.
    pub fn pullback(&self, f: &TorusHomomorphism) -> Result<Self> {
        let CovectorField::Affine(a) = &self.field else {
            return Err(Error::ShapeMismatch(
                "only analytic connections can be pulled back".into(),
            ));
        };
        let datum = pullback(f, &self.datum)?;
        let m = f.matrix();
        let lf = f.frame_exponent(&self.datum);
        let frame = (0..m.ncols())
            .map(|col| {
                lf[col]
                    + (0..m.nrows())
                        .map(|r| m[(r, col)] * self.frame[r])
                        .sum::<C64>()
            })
            .collect();
        Self::new(datum, frame, CovectorField::Affine(a.pullback(f)))
    }

    /// Defect of `θ(z + λ) − θ(z) = −∂ log a(λ, ·)|_z = −π H(dz, λ)`.
    pub fn automorphy_defect(&self, lambda: &[C64], z: &[C64]) -> Result<f64> {
        self.torus()
            .integer_coords(lambda, crate::torus::POINT_TOL)?;
        let zl: Vec<C64> = z.iter().zip(lambda).map(|(a, b)| a + b).collect();
        let (t1, t0) = (self.eval(&zl), self.eval(z));
        let h = self.datum.hermitian();
        let g = t0.len();
        Ok((0..g)
            .map(|j| {
                let expected: C64 = -PI * (0..g).map(|k| h[(j, k)] * lambda[k].conj()).sum::<C64>();
                (t1[j] - t0[j] - expected).norm()
            })
            .fold(0.0, f64::max))
    }

    /// Curvature `K_jk = ∂θ_j/∂z̄_k` at a point, by central differences.
    pub fn curvature_at(&self, z: &[C64], h: f64) -> Vec<C64> {
        dbar_at(self.torus(), &|w: &[C64]| self.eval(w), z, h)
    }

    /// Exact curvature matrix of an analytic field.
    pub fn analytic_curvature(&self) -> Option<DMatrix<C64>> {
        self.affine().map(|a| a.antilinear.clone())
    }
}

/// Curvature sampled on a grid, `[j·g + k] = K_jk`.
#[derive(Clone, Debug)]
pub struct CurvatureForm {
    grid: GridFunction,
}

impl CurvatureForm {
    pub fn grid(&self) -> &GridFunction {
        &self.grid
    }

    pub fn genus(&self) -> usize {
        self.grid.torus().genus()
    }

    /// Largest variation `|K(z) − K(z₀)|` over the grid.
    pub fn variation(&self) -> f64 {
        let first = self.grid.at(0).to_vec();
        self.grid.max_deviation_from(&first).expect("same width")
    }

    /// Grid average as a constant (1,1)-form.
    pub fn mean_form(&self) -> InvariantForm {
        let g = self.genus();
        let m = self.grid.mean();
        InvariantForm::from_11(DMatrix::from_row_slice(g, g, &m)).expect("g×g")
    }

    /// Largest deviation from a constant coefficient matrix.
    pub fn max_deviation_from(&self, k: &DMatrix<C64>) -> Result<f64> {
        let g = self.genus();
        let flat: Vec<C64> = (0..g)
            .flat_map(|j| (0..g).map(move |l| k[(j, l)]))
            .collect();
        self.grid.max_deviation_from(&flat)
    }

    pub fn max_abs(&self) -> f64 {
        self.grid.max_abs()
    }
}

/// The Chern connection of the metric `exp(−π H(z, z))`:
/// `θ(z) = ∂ log h = −π H(dz, z)`, i.e. `θ_j = −π Σ_k H_jk z̄_k`.
pub fn canonical_connection(datum: &AhDatum) -> ConnectionForm {
    let g = datum.torus().genus();
    let mut field = AffineCovectorField::zero(g);
    field.antilinear = datum.hermitian() * C64::new(-PI, 0.0);
    ConnectionForm::new(
        datum.clone(),
        vec![C64::new(0.0, 0.0); g],
        CovectorField::Affine(field),
    )
    .expect("shapes agree")
}

/// `∂̄θ` on a resolution-`n` grid of the fundamental domain.
///
/// Analytic fields are differenced on the cover with step `1/n`; sampled
/// fields with periodic wrap-around.
pub fn curvature(theta: &ConnectionForm, n: usize) -> Result<CurvatureForm> {
    let grid = match theta.field() {
        CovectorField::Affine(a) => {
            let g = theta.torus().genus();
            dbar_sampled(theta.torus(), n, 1.0 / n as f64, g, |z| a.eval(z))?
        }
        CovectorField::Sampled(s) => {
            if s.resolution() != n {
                return Err(Error::ShapeMismatch(format!(
                    "sampled at N={}, asked for N={n}",
                    s.resolution()
                )));
            }
            dbar_fd(s)?
        }
    };
    Ok(CurvatureForm { grid })
}

/// `ω = c_norm · K` with `K = −π H` read against `dz_j ∧ dz̄_k`.
pub fn chern_form(datum: &AhDatum) -> InvariantForm {
    InvariantForm::from_11(datum.hermitian() * (C64::new(-PI, 0.0) * C_NORM)).expect("g×g")
}

/// Exact curvature matrix `K = −π H` of the canonical connection.
pub fn curvature_matrix(datum: &AhDatum) -> DMatrix<C64> {
    datum.hermitian() * C64::new(-PI, 0.0)
}

/// The connection `∇_𝓛` on `(p₁* L*) ⊗ (α* L)` induced by `∇_L`.
#[derive(Clone, Debug)]
pub struct FamilyConnection {
    base: AhDatum,
    form: ConnectionForm,
}

impl FamilyConnection {
    pub fn base(&self) -> &AhDatum {
        &self.base
    }

    pub fn form(&self) -> &ConnectionForm {
        &self.form
    }

    pub fn product(&self) -> &ComplexTorus {
        self.form.torus()
    }

    /// Largest deviation of the pointwise curvature at `point` (a lift on
    /// `A × A`) from `α*K − p₁*K`.
    pub fn curvature_identity_defect(&self, point: &[C64], h: f64) -> Result<f64> {
        let a = self.base.torus();
        let k = InvariantForm::from_11(curvature_matrix(&self.base))?;
        let alpha = TorusHomomorphism::addition(a);
        let p1 = TorusHomomorphism::projection(a, 1)?;
        let expected = k.pullback(alpha.matrix())?.sub(&k.pullback(p1.matrix())?)?;
        let got = self.form.curvature_at(point, h);
        let g2 = 2 * a.genus();
        Ok((0..g2)
            .flat_map(|j| (0..g2).map(move |l| (j, l)))
            .map(|(j, l)| (got[j * g2 + l] - expected.coeffs()[(j, l)]).norm())
            .fold(0.0, f64::max))
    }
}

/// `∇_𝓛 = p₁*∇_{L*} ⊗ α*∇_L` on `A × A`.
pub fn family_connection(datum: &AhDatum) -> Result<FamilyConnection> {
    let a = datum.torus();
    let p1 = TorusHomomorphism::projection(a, 1)?;
    let alpha = TorusHomomorphism::addition(a);
    let dual_part = canonical_connection(&datum.dual()).pullback(&p1)?;
    let main_part = canonical_connection(datum).pullback(&alpha)?;
    let form = dual_part.tensor(&main_part)?;
    debug_assert!(
        form.datum()
            .max_difference(&build_family(datum)?)
            .unwrap_or(f64::MAX)
            < 1e-9
    );
    Ok(FamilyConnection {
        base: datum.clone(),
        form,
    })
}

/// `∇ˣ_𝓛`: restriction of `∇_𝓛` to the slice `A × {x}`.
///
/// The result lives in the restriction of the product frame, which varies
/// holomorphically with `x`; [`ConnectionForm::in_normal_frame`] converts it
/// to the Appell–Humbert frame of the slice datum.
pub fn slice_connection(family: &FamilyConnection, x: &TorusPoint) -> Result<ConnectionForm> {
    if x.torus() != family.base.torus() {
        return Err(Error::TorusMismatch);
    }
    let f = TorusHomomorphism::slice_inclusion(family.product(), x)?;
    family.form.pullback(&f)
}

/// `f_y* ∇_𝓛`, the pullback along the section `x ↦ (y, x)`.
pub fn section_connection(family: &FamilyConnection, y: &TorusPoint) -> Result<ConnectionForm> {
    if y.torus() != family.base.torus() {
        return Err(Error::TorusMismatch);
    }
    let f = TorusHomomorphism::section_at(family.product(), y)?;
    family.form.pullback(&f)
}

/// Max deviation of `f_y* 𝒦(∇_𝓛)` from the curvature of `∇_L`, sampled on a
/// resolution-`n` grid.
pub fn check_eq_i(family: &FamilyConnection, y: &TorusPoint, n: usize) -> Result<f64> {
    let pulled = section_connection(family, y)?;
    curvature(&pulled, n)?.max_deviation_from(&curvature_matrix(&family.base))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::cycle_integral;

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
    fn trivial_connection_vanishes() {
        let th = canonical_connection(&AhDatum::trivial(&square()));
        assert_eq!(th.eval(&[c(0.3, 0.9)]), vec![c(0.0, 0.0)]);
        assert!(curvature(&th, 8).unwrap().max_abs() == 0.0);
        assert_eq!(chern_form(&AhDatum::trivial(&square())).max_abs(), 0.0);
    }

    #[test]
    fn principal_connection_is_minus_pi_zbar() {
        let th = canonical_connection(&principal());
        let z = c(0.25, -0.6);
        assert!((th.eval(&[z])[0] - (-PI * z.conj())).norm() < 1e-15);
    }

    #[test]
    fn principal_chern_pairing_is_minus_one() {
        let w = chern_form(&principal());
        let v = cycle_integral(&square(), &w, 0, 1).unwrap();
        assert!((v - c(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn duality_negates_connection() {
        let d = principal();
        let a = canonical_connection(&d);
        let b = canonical_connection(&d.dual());
        let z = [c(0.4, 0.1)];
        assert!((a.eval(&z)[0] + b.eval(&z)[0]).norm() == 0.0);
    }

    #[test]
    fn zero_slice_connection_vanishes() {
        let fam = family_connection(&principal()).unwrap();
        let th = slice_connection(&fam, &square().origin()).unwrap();
        assert!(th.eval(&[c(0.7, 0.2)])[0].norm() < 1e-15);
    }

    #[test]
    fn slice_in_normal_frame_is_zero() {
        let fam = family_connection(&principal()).unwrap();
        let x = square().point(vec![c(0.3, 0.2)]).unwrap();
        let th = slice_connection(&fam, &x)
            .unwrap()
            .in_normal_frame()
            .unwrap();
        assert!(th.eval(&[c(0.1, 0.8)])[0].norm() < 1e-14);
    }

    #[test]
    fn sampled_curvature_needs_matching_resolution() {
        let t = square();
        let grid = GridFunction::zeros(&t, 8, 1).unwrap();
        let th = ConnectionForm::new(
            AhDatum::trivial(&t),
            vec![c(0.0, 0.0)],
            CovectorField::Sampled(grid),
        )
        .unwrap();
        assert!(curvature(&th, 8).unwrap().max_abs() == 0.0);
        assert!(matches!(curvature(&th, 16), Err(Error::ShapeMismatch(_))));
    }
}
