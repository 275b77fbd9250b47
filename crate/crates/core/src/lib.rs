//! Cotangent torsors of line bundles on compact complex tori.
//!
//! For a holomorphic line bundle `L` on a torus `A = C^g / Λ` this crate
//! builds the torsor `𝒞_L` of holomorphic connections on `L` and the torsor
//! `𝒵_L` of families of flat connections on the slices of
//! `(p₁* L*) ⊗ (α* L) → A × A`, each presented by a canonical smooth section
//! and its obstruction form, and checks numerically that the two obstruction
//! forms coincide, so that the affine map matching the two sections is
//! holomorphic.
//!
//! Modules, bottom up:
//!
//! * [`torus`], [`forms`], [`grid`]: lattices, points, invariant forms and the
//!   finite-difference `∂̄` operator;
//! * [`appell_humbert`]: line bundles as `(H, χ)` data, with dual, tensor and
//!   pullback;
//! * [`connection`]: the unitary connection with invariant curvature, the
//!   induced family connection and its slices;
//! * [`torsor`]: presentations, sections, obstructions, morphisms;
//! * [`verifier`]: configuration, the check suite, and JSON reports.

// `!(x <= tol)` is deliberate: validation must reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod appell_humbert;
pub mod connection;
pub mod error;
pub mod forms;
pub mod grid;
pub mod torsor;
pub mod torus;
pub mod verifier;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tori.md")]
    mod tori {}
    #[doc = include_str!("../../../book/src/bundles.md")]
    mod bundles {}
    #[doc = include_str!("../../../book/src/connections.md")]
    mod connections {}
    #[doc = include_str!("../../../book/src/dbar.md")]
    mod dbar {}
    #[doc = include_str!("../../../book/src/torsors.md")]
    mod torsors {}
    #[doc = include_str!("../../../book/src/verifier.md")]
    mod verifier {}
}
