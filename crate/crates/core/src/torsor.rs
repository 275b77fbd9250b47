//! Torsors under the trivial bundle `𝒱 = A × V`, `V = H⁰(A, Ω_A) ≅ C^g`.
//!
//! A torsor is presented by a smooth reference section together with that
//! section's obstruction form `Θ`, the `V`-valued (0,1)-form measuring how far
//! the section is from holomorphic. Every other section is `ref + u` for a
//! `V`-valued offset `u`, with obstruction `Θ + ∂̄u`. Holomorphic sections are
//! those with vanishing obstruction.
//!
//! The two torsors of interest are
//!
//! * `𝒞_L`, the holomorphic connections on `L`, with reference `σ = ∇_L`;
//! * `𝒵_L`, the families of flat connections on the slices of
//!   `(p₁* L*) ⊗ (α* L)`, with reference `τ: x ↦ ∇ˣ_𝓛`.
//!
//! In both cases the reference is read in a frame that is holomorphic in the
//! base point, so it is a `V`-valued function on the universal cover and `Θ`
//! is its `∂̄` derivative. Obstruction grids use the layout
//! `[j·g + k] = coefficient of e_j ⊗ dz̄_k`.

use std::fmt;
use std::sync::Arc;

use crate::appell_humbert::AhDatum;
use crate::connection::{canonical_connection, family_connection, slice_connection};
use crate::error::{Error, Result};
use crate::grid::{dbar_fd, dbar_sampled, GridFunction};
use crate::torus::ComplexTorus;
use crate::C64;

/// A `V`-valued function on the universal cover.
pub type Family = Arc<dyn Fn(&[C64]) -> Vec<C64> + Send + Sync>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReferenceLabel {
    /// `σ`: the unitary connection with invariant curvature, in `𝒞_L`.
    Sigma,
    /// `τ`: the family of flat slice connections, in `𝒵_L`.
    Tau,
    Custom(String),
}

impl fmt::Display for ReferenceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceLabel::Sigma => f.write_str("sigma"),
            ReferenceLabel::Tau => f.write_str("tau"),
            ReferenceLabel::Custom(s) => write!(f, "custom:{s}"),
        }
    }
}

/// A `𝒱`-torsor given by a reference section and its obstruction.
#[derive(Clone)]
pub struct TorsorPresentation {
    torus: ComplexTorus,
    label: ReferenceLabel,
    datum: Option<AhDatum>,
    step: f64,
    reference: Option<Family>,
    theta: GridFunction,
}

impl fmt::Debug for TorsorPresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorsorPresentation")
            .field("label", &self.label)
            .field("resolution", &self.theta.resolution())
            .field("step", &self.step)
            .finish_non_exhaustive()
    }
}

impl TorsorPresentation {
    /// Presentation whose reference section is the `V`-valued function
    /// `reference`; `Θ` is its `∂̄` at the nodes of a resolution-`n` grid, by
    /// central differences of step `h` on the cover.
    pub fn from_reference(
        torus: &ComplexTorus,
        label: ReferenceLabel,
        n: usize,
        h: f64,
        reference: Family,
    ) -> Result<Self> {
        let g = torus.genus();
        let r = reference.clone();
        let theta = dbar_sampled(torus, n, h, g, move |z| r(z))?;
        Ok(Self {
            torus: torus.clone(),
            label,
            datum: None,
            step: h,
            reference: Some(reference),
            theta,
        })
    }

    /// Presentation known only through its obstruction grid.
    pub fn from_obstruction(label: ReferenceLabel, theta: GridFunction) -> Result<Self> {
        let g = theta.torus().genus();
        if theta.width() != g * g {
            return Err(Error::ShapeMismatch(format!(
                "obstruction grid needs width {}, got {}",
                g * g,
                theta.width()
            )));
        }
        Ok(Self {
            torus: theta.torus().clone(),
            label,
            datum: None,
            step: theta.spacing(),
            reference: None,
            theta,
        })
    }

    /// `𝒞_L` with reference `σ = ∇_L`: at `x` the reference is the connection
    /// form `θ_L(x)` in the Appell–Humbert frame of `L`.
    pub fn connections(datum: &AhDatum, n: usize, h: f64) -> Result<Self> {
        let theta = canonical_connection(datum);
        let reference: Family = Arc::new(move |x: &[C64]| theta.eval(x));
        let mut p = Self::from_reference(datum.torus(), ReferenceLabel::Sigma, n, h, reference)?;
        p.datum = Some(datum.clone());
        Ok(p)
    }

    /// `𝒵_L` with reference `τ: x ↦ ∇ˣ_𝓛`, read at the fixed point `z0` of
    /// the slice in the restricted product frame.
    pub fn flat_families(datum: &AhDatum, n: usize, h: f64, z0: &[C64]) -> Result<Self> {
        let family = family_connection(datum)?;
        let torus = datum.torus().clone();
        let z0 = z0.to_vec();
        if z0.len() != torus.genus() {
            return Err(Error::ShapeMismatch("z0 has wrong length".into()));
        }
        let reference: Family = Arc::new(move |x: &[C64]| {
            let point = torus.point(x.to_vec()).expect("finite lift");
            slice_connection(&family, &point)
                .expect("slice of a valid family")
                .eval(&z0)
        });
        let mut p = Self::from_reference(datum.torus(), ReferenceLabel::Tau, n, h, reference)?;
        p.datum = Some(datum.clone());
        Ok(p)
    }

    /// The presentation over the reference `ref + w`, with `Θ` recomputed from
    /// scratch by differencing the perturbed reference.
    pub fn perturbed(&self, name: &str, w: Family) -> Result<Self> {
        let base = self.reference.clone().ok_or_else(|| {
            Error::ShapeMismatch("presentation has no reference to perturb".into())
        })?;
        let reference: Family =
            Arc::new(move |x: &[C64]| base(x).iter().zip(w(x)).map(|(a, b)| a + b).collect());
        Self::from_reference(
            &self.torus,
            ReferenceLabel::Custom(name.to_string()),
            self.theta.resolution(),
            self.step,
            reference,
        )
    }

    pub fn torus(&self) -> &ComplexTorus {
        &self.torus
    }

    pub fn label(&self) -> &ReferenceLabel {
        &self.label
    }

    pub fn datum(&self) -> Option<&AhDatum> {
        self.datum.as_ref()
    }

    pub fn resolution(&self) -> usize {
        self.theta.resolution()
    }

    /// Difference step used for `Θ` and chart-local offsets.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// The reference obstruction `Θ`.
    pub fn theta(&self) -> &GridFunction {
        &self.theta
    }

    /// The reference section at a lift, when known analytically.
    pub fn reference_at(&self, x: &[C64]) -> Option<Vec<C64>> {
        self.reference.as_ref().map(|r| r(x))
    }

    /// Largest variation of `Θ` over the grid.
    pub fn theta_variation(&self) -> f64 {
        let first = self.theta.at(0).to_vec();
        self.theta.max_deviation_from(&first).expect("same width")
    }
}

/// The section `ref + u` of a presentation.
#[derive(Clone)]
pub struct TorsorSection {
    presentation: Arc<TorsorPresentation>,
    offset: GridFunction,
    /// Non-periodic offset defined on the fundamental-domain chart only.
    chart_local: Option<Family>,
}

impl fmt::Debug for TorsorSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorsorSection")
            .field("presentation", &self.presentation.label)
            .field("chart_local", &self.chart_local.is_some())
            .finish_non_exhaustive()
    }
}

impl TorsorSection {
    /// `ref + u` for a periodic offset grid `u`.
    pub fn new(presentation: &Arc<TorsorPresentation>, offset: GridFunction) -> Result<Self> {
        let g = presentation.torus.genus();
        if offset.torus() != &presentation.torus
            || offset.resolution() != presentation.resolution()
            || offset.width() != g
        {
            return Err(Error::ShapeMismatch(format!(
                "offset must be a width-{g} grid at N={}",
                presentation.resolution()
            )));
        }
        Ok(Self {
            presentation: presentation.clone(),
            offset,
            chart_local: None,
        })
    }

    /// The reference section itself.
    pub fn zero(presentation: &Arc<TorsorPresentation>) -> Self {
        let g = presentation.torus.genus();
        let offset = GridFunction::zeros(&presentation.torus, presentation.resolution(), g)
            .expect("presentation grid is valid");
        Self {
            presentation: presentation.clone(),
            offset,
            chart_local: None,
        }
    }

    /// `ref + u` for an offset defined on the fundamental-domain chart only.
    pub fn chart_local(presentation: &Arc<TorsorPresentation>, u: Family) -> Self {
        let mut s = Self::zero(presentation);
        s.chart_local = Some(u);
        s
    }

    pub fn presentation(&self) -> &Arc<TorsorPresentation> {
        &self.presentation
    }

    pub fn offset(&self) -> &GridFunction {
        &self.offset
    }

    pub fn is_chart_local(&self) -> bool {
        self.chart_local.is_some()
    }

    /// Acts by the `V`-valued grid function `v`.
    pub fn act(&self, v: &GridFunction) -> Result<Self> {
        Ok(Self {
            presentation: self.presentation.clone(),
            offset: self.offset.add(v)?,
            chart_local: self.chart_local.clone(),
        })
    }

    /// The unique `v` with `act(self, v) = other`.
    pub fn difference(&self, other: &Self) -> Result<GridFunction> {
        if !Arc::ptr_eq(&self.presentation, &other.presentation) {
            return Err(Error::BaseMismatch);
        }
        if self.is_chart_local() || other.is_chart_local() {
            return Err(Error::ShapeMismatch(
                "difference of chart-local sections is not a grid function".into(),
            ));
        }
        other.offset.sub(&self.offset)
    }

    /// The obstruction `Θ + ∂̄u`.
    pub fn obstruction(&self) -> Result<GridFunction> {
        let p = &self.presentation;
        let mut out = p.theta.add(&dbar_fd(&self.offset)?)?;
        if let Some(u) = &self.chart_local {
            let u = u.clone();
            let local = dbar_sampled(
                &p.torus,
                p.resolution(),
                p.step,
                p.torus.genus(),
                move |z| u(z),
            )?;
            out = out.add(&local)?;
        }
        Ok(out)
    }

    /// Whether the obstruction vanishes within `tol`, with its max modulus.
    pub fn is_holomorphic(&self, tol: f64) -> Result<(bool, f64)> {
        let err = self.obstruction()?.max_abs();
        Ok((err <= tol, err))
    }
}

/// `act(s, v)`; see [`TorsorSection::act`].
pub fn act(s: &TorsorSection, v: &GridFunction) -> Result<TorsorSection> {
    s.act(v)
}

/// `ω̂_s`; see [`TorsorSection::obstruction`].
pub fn obstruction(s: &TorsorSection) -> Result<GridFunction> {
    s.obstruction()
}

/// See [`TorsorSection::is_holomorphic`].
pub fn is_holomorphic(s: &TorsorSection, tol: f64) -> Result<(bool, f64)> {
    s.is_holomorphic(tol)
}

/// The affine map `ref₁ + v ↦ ref₂ + s·v + c` between two presentations.
#[derive(Clone, Debug)]
pub struct TorsorMorphism {
    source: Arc<TorsorPresentation>,
    target: Arc<TorsorPresentation>,
    sign: f64,
    shift: Vec<C64>,
}

impl TorsorMorphism {
    fn new(
        source: &Arc<TorsorPresentation>,
        target: &Arc<TorsorPresentation>,
        sign: f64,
    ) -> Result<Self> {
        if source.torus != target.torus {
            return Err(Error::BaseMismatch);
        }
        if source.resolution() != target.resolution() {
            return Err(Error::ShapeMismatch(format!(
                "presentations sampled at N={} and N={}",
                source.resolution(),
                target.resolution()
            )));
        }
        let g = source.torus.genus();
        Ok(Self {
            source: source.clone(),
            target: target.clone(),
            sign,
            shift: vec![C64::new(0.0, 0.0); g],
        })
    }

    /// Adds a constant `c ∈ V` to the image.
    pub fn with_shift(mut self, shift: Vec<C64>) -> Result<Self> {
        if shift.len() != self.shift.len() {
            return Err(Error::ShapeMismatch("shift has wrong length".into()));
        }
        self.shift = shift;
        Ok(self)
    }

    pub fn source(&self) -> &Arc<TorsorPresentation> {
        &self.source
    }

    pub fn target(&self) -> &Arc<TorsorPresentation> {
        &self.target
    }

    /// `+1` for torsor maps, `−1` for the duality maps.
    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn shift(&self) -> &[C64] {
        &self.shift
    }

    /// Image of a section of the source.
    pub fn apply(&self, s: &TorsorSection) -> Result<TorsorSection> {
        if !Arc::ptr_eq(s.presentation(), &self.source) {
            return Err(Error::BaseMismatch);
        }
        let sign = self.sign;
        let shift = self.shift.clone();
        let g = shift.len();
        let offset = if self.shift.iter().all(|c| *c == C64::new(0.0, 0.0)) {
            s.offset.scale(sign)
        } else {
            let c = GridFunction::constant(s.offset.torus(), s.offset.resolution(), &shift)?;
            s.offset.scale(sign).add(&c)?
        };
        debug_assert_eq!(offset.width(), g);
        let chart_local = s.chart_local.clone().map(|u| -> Family {
            Arc::new(move |z: &[C64]| u(z).into_iter().map(|x| x * sign).collect())
        });
        Ok(TorsorSection {
            presentation: self.target.clone(),
            offset,
            chart_local,
        })
    }

    /// The obstruction of the morphism, `Θ₂ − s·Θ₁`: it maps holomorphic
    /// sections to holomorphic sections iff this vanishes.
    pub fn obstruction(&self) -> Result<GridFunction> {
        self.target.theta.sub(&self.source.theta.scale(self.sign))
    }

    /// Whether the morphism is holomorphic within `tol`, with the max error.
    pub fn is_holomorphic(&self, tol: f64) -> Result<(bool, f64)> {
        let err = self.obstruction()?.max_abs();
        Ok((err <= tol, err))
    }

    /// Max offset defect of `m(act(s, v)) = act(m(s), s·v)`.
    pub fn equivariance_defect(&self, s: &TorsorSection, v: &GridFunction) -> Result<f64> {
        let lhs = self.apply(&s.act(v)?)?;
        let rhs = self.apply(s)?.act(&v.scale(self.sign))?;
        lhs.offset.max_abs_diff(&rhs.offset)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &TorsorMorphism) -> Result<Self> {
        if !Arc::ptr_eq(&inner.target, &self.source) {
            return Err(Error::BaseMismatch);
        }
        let shift = inner
            .shift
            .iter()
            .zip(&self.shift)
            .map(|(a, b)| a * self.sign + b)
            .collect();
        Ok(Self {
            source: inner.source.clone(),
            target: self.target.clone(),
            sign: self.sign * inner.sign,
            shift,
        })
    }

    pub fn is_identity(&self) -> bool {
        Arc::ptr_eq(&self.source, &self.target)
            && self.sign == 1.0
            && self.shift.iter().all(|c| *c == C64::new(0.0, 0.0))
    }
}

/// The morphism `ref₁ + v ↦ ref₂ + v`.
pub fn canonical_morphism(
    source: &Arc<TorsorPresentation>,
    target: &Arc<TorsorPresentation>,
) -> Result<TorsorMorphism> {
    TorsorMorphism::new(source, target, 1.0)
}

/// See [`TorsorMorphism::is_holomorphic`].
pub fn is_holomorphic_morphism(m: &TorsorMorphism, tol: f64) -> Result<(bool, f64)> {
    m.is_holomorphic(tol)
}

/// The map `ref_L + v ↦ ref_{L*} − v` between the torsors of `L` and `L*`.
pub fn duality_map(
    p_l: &Arc<TorsorPresentation>,
    p_dual: &Arc<TorsorPresentation>,
) -> Result<TorsorMorphism> {
    if let (Some(a), Some(b)) = (p_l.datum(), p_dual.datum()) {
        if a.torus() != b.torus() {
            return Err(Error::BaseMismatch);
        }
        if a.dual().max_difference(b)? > 1e-12 {
            return Err(Error::ShapeMismatch(
                "target presentation is not built from the dual datum".into(),
            ));
        }
    }
    TorsorMorphism::new(p_l, p_dual, -1.0)
}

/// Grid average of `Θ`, the invariant part of the obstruction class.
pub fn trivialization_class(p: &TorsorPresentation) -> Vec<C64> {
    p.theta.mean()
}

/// Whether the invariant part of `Θ` vanishes within `tol`, with its max modulus.
pub fn is_trivializable(p: &TorsorPresentation, tol: f64) -> (bool, f64) {
    let m = trivialization_class(p)
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    (m <= tol, m)
}

/// The chart-local holomorphic section `ref + u` with
/// `u_j(z) = −Σ_k Θ̄_jk z̄_k`, where `Θ̄` is the class of `p`.
pub fn local_holomorphic_section(p: &Arc<TorsorPresentation>) -> TorsorSection {
    let g = p.torus.genus();
    let class = trivialization_class(p);
    let u: Family = Arc::new(move |z: &[C64]| {
        (0..g)
            .map(|j| -(0..g).map(|k| class[j * g + k] * z[k].conj()).sum::<C64>())
            .collect()
    });
    TorsorSection::chart_local(p, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

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

    fn sigma(d: &AhDatum) -> Arc<TorsorPresentation> {
        Arc::new(TorsorPresentation::connections(d, 16, 1.0 / 16.0).unwrap())
    }

    #[test]
    fn zero_action_is_identity() {
        let p = sigma(&principal());
        let s = TorsorSection::zero(&p);
        let zero = GridFunction::zeros(p.torus(), 16, 1).unwrap();
        assert!(s.act(&zero).unwrap().offset().bitwise_eq(s.offset()));
    }

    #[test]
    fn offset_shape_checked() {
        let p = sigma(&principal());
        let bad = GridFunction::zeros(p.torus(), 8, 1).unwrap();
        assert!(matches!(
            TorsorSection::new(&p, bad),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn trivial_sigma_is_holomorphic() {
        let p = sigma(&AhDatum::trivial(&square()));
        let (ok, err) = TorsorSection::zero(&p).is_holomorphic(1e-12).unwrap();
        assert!(ok && err == 0.0);
        assert!(is_trivializable(&p, 1e-12).0);
    }

    #[test]
    fn principal_sigma_is_not_holomorphic() {
        let p = sigma(&principal());
        let (ok, err) = TorsorSection::zero(&p).is_holomorphic(1e-6).unwrap();
        assert!(!ok);
        assert!((err - std::f64::consts::PI).abs() < 1e-9);
        assert!(!is_trivializable(&p, 1e-6).0);
    }

    #[test]
    fn constant_offset_keeps_obstruction() {
        let p = sigma(&principal());
        let s = TorsorSection::zero(&p);
        let v = GridFunction::constant(p.torus(), 16, &[c(2.0, -3.0)]).unwrap();
        let a = s.obstruction().unwrap();
        let b = s.act(&v).unwrap().obstruction().unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
    }

    #[test]
    fn identity_morphism() {
        let p = sigma(&principal());
        let m = canonical_morphism(&p, &p).unwrap();
        assert!(m.is_identity());
        assert_eq!(m.is_holomorphic(0.0).unwrap(), (true, 0.0));
    }

    #[test]
    fn base_mismatch() {
        let other = ComplexTorus::from_rows(&[vec![c(1.0, 0.0), c(0.5, 1.0)]], 1e6).unwrap();
        let p = sigma(&principal());
        let q = sigma(&AhDatum::trivial(&other));
        assert_eq!(canonical_morphism(&p, &q).unwrap_err(), Error::BaseMismatch);
    }

    #[test]
    fn duality_rejects_non_dual_target() {
        let p = sigma(&principal());
        let q = sigma(&principal());
        assert!(duality_map(&p, &q).is_err());
    }

    #[test]
    fn difference_is_simply_transitive() {
        let p = sigma(&principal());
        let s = TorsorSection::zero(&p);
        let v = GridFunction::sample(p.torus(), 16, 1, |z| vec![z[0] * 0.5]).unwrap();
        let t = s.act(&v).unwrap();
        assert!(s.difference(&t).unwrap().bitwise_eq(&v));
    }
}
