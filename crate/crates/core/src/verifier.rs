//! Configuration, the verification suite, and machine-readable reports.
//!
//! A run parses a [`VerificationConfig`], builds the torus and line bundle it
//! describes, and executes the named checks in a fixed order. Each check
//! produces one [`CheckRecord`]; a check that errors or panics is recorded as
//! failed and the remaining checks still run.
//!
//! Configs are JSON with complex numbers written as `[re, im]`:
//!
//! ```json
//! {
//!   "torus":  { "genus": 1, "period_matrix": [[[1, 0], [0, 1]]] },
//!   "bundle": { "hermitian": [[[1, 0]]], "character_turns": [0, 0] },
//!   "numeric": { "grid": 64, "seed": 7 }
//! }
//! ```
//!
//! `"bundle": "trivial"` selects the trivial bundle.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::appell_humbert::{hermitian_pairing, AhDatum};
use crate::connection::{
    canonical_connection, check_eq_i, chern_form, curvature, curvature_matrix, family_connection,
    slice_connection,
};
use crate::error::{Error, Result};
use crate::forms::cycle_matrix;
use crate::grid::{dbar_fd, GridFunction};
use crate::torsor::{
    canonical_morphism, duality_map, is_trivializable, local_holomorphic_section, Family,
    TorsorPresentation, TorsorSection,
};
use crate::torus::ComplexTorus;
use crate::C64;

/// Environment variable that redirects relative report paths.
pub const OUTPUT_DIR_ENV: &str = "TORUS_TORSOR_OUT_DIR";

/// Minimum error contraction when the grid is refined by two.
pub const CONVERGENCE_RATIO: f64 = 3.5;

/// Names of all checks, in execution order.
pub const CHECK_NAMES: [&str; 13] = [
    "datum_integrality",
    "cycle_integral_anchor",
    "curvature_translation_invariance",
    "obstruction_sigma",
    "slice_flatness",
    "eq_i_pullback",
    "obstruction_tau",
    "theorem_gamma_holomorphic",
    "proposition_perturbed",
    "duality_involution",
    "trivial_bundle",
    "fd_convergence",
    "local_holomorphic_witness",
];

fn default_grid() -> usize {
    64
}
fn default_step() -> StepPolicy {
    StepPolicy::Grid
}
fn default_analytic_tol() -> f64 {
    1e-8
}
fn default_fd_tol() -> f64 {
    1e-6
}
fn default_exact_tol() -> f64 {
    1e-9
}
fn default_seed() -> u64 {
    0x5eed
}
fn default_samples() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusSpec {
    pub genus: usize,
    /// `g` rows of `2g` complex entries.
    pub period_matrix: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BundleSpec {
    Named(String),
    Datum {
        /// `g × g` hermitian matrix, first slot linear.
        hermitian: Vec<Vec<[f64; 2]>>,
        /// `χ(λ_j) = exp(2πi φ_j)`; defaults to all zeros.
        #[serde(default)]
        character_turns: Option<Vec<f64>>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepPolicy {
    /// Difference step equal to the grid spacing `1/N`.
    Grid,
    /// A fixed step in lattice coordinates.
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericSpec {
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_step")]
    pub fd_step: StepPolicy,
    /// Identities that hold in closed form.
    #[serde(default = "default_analytic_tol")]
    pub analytic_tol: f64,
    /// Identities mediated by finite differences.
    #[serde(default = "default_fd_tol")]
    pub fd_tol: f64,
    /// Degenerate and structural checks.
    #[serde(default = "default_exact_tol")]
    pub exact_tol: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for NumericSpec {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            fd_step: default_step(),
            analytic_tol: default_analytic_tol(),
            fd_tol: default_fd_tol(),
            exact_tol: default_exact_tol(),
            seed: default_seed(),
            samples: default_samples(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationConfig {
    pub torus: TorusSpec,
    pub bundle: BundleSpec,
    #[serde(default)]
    pub numeric: NumericSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn cx(pair: [f64; 2]) -> C64 {
    C64::new(pair[0], pair[1])
}

fn pair(c: C64) -> [f64; 2] {
    [c.re, c.im]
}

impl VerificationConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Built-in configurations: `principal-g1`, `principal-g2`, `trivial`.
    pub fn demo(name: &str) -> Result<Self> {
        let z = [0.0, 0.0];
        let one = [1.0, 0.0];
        match name {
            "principal-g1" => Ok(Self {
                torus: TorusSpec {
                    genus: 1,
                    period_matrix: vec![vec![one, [0.0, 1.0]]],
                    kappa_max: None,
                },
                bundle: BundleSpec::Datum {
                    hermitian: vec![vec![one]],
                    character_turns: Some(vec![0.0, 0.0]),
                },
                numeric: NumericSpec::default(),
                checks: None,
                output: None,
            }),
            "principal-g2" => Ok(Self {
                torus: TorusSpec {
                    genus: 2,
                    period_matrix: vec![vec![one, z, [0.0, 1.0], z], vec![z, one, z, [0.0, 2.0]]],
                    kappa_max: None,
                },
                bundle: BundleSpec::Datum {
                    hermitian: vec![vec![one, z], vec![z, [0.5, 0.0]]],
                    character_turns: Some(vec![0.0; 4]),
                },
                numeric: NumericSpec {
                    grid: 16,
                    ..NumericSpec::default()
                },
                checks: None,
                output: None,
            }),
            "trivial" => Ok(Self {
                torus: TorusSpec {
                    genus: 1,
                    period_matrix: vec![vec![one, [0.0, 1.0]]],
                    kappa_max: None,
                },
                bundle: BundleSpec::Named("trivial".into()),
                numeric: NumericSpec::default(),
                checks: None,
                output: None,
            }),
            other => Err(Error::ConfigInvalid(format!(
                "unknown demo `{other}` (expected principal-g1, principal-g2 or trivial)"
            ))),
        }
    }

    /// Builds a config from an already constructed torus and datum.
    pub fn from_datum(datum: &AhDatum, numeric: NumericSpec) -> Self {
        let t = datum.torus();
        let rows = (0..t.genus())
            .map(|r| {
                (0..t.real_dim())
                    .map(|c| pair(t.periods()[(r, c)]))
                    .collect()
            })
            .collect();
        let h = datum.hermitian();
        Self {
            torus: TorusSpec {
                genus: t.genus(),
                period_matrix: rows,
                kappa_max: None,
            },
            bundle: BundleSpec::Datum {
                hermitian: (0..h.nrows())
                    .map(|r| (0..h.ncols()).map(|c| pair(h[(r, c)])).collect())
                    .collect(),
                character_turns: Some(
                    datum
                        .character_values()
                        .iter()
                        .map(|c| c.arg() / (2.0 * PI))
                        .collect(),
                ),
            },
            numeric,
            checks: None,
            output: None,
        }
    }

    /// SHA-256 of the canonical serialisation.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .fold(String::with_capacity(64), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }

    pub fn build_torus(&self) -> Result<ComplexTorus> {
        let spec = &self.torus;
        if spec.period_matrix.len() != spec.genus {
            return Err(Error::ConfigInvalid(format!(
                "period_matrix has {} rows, genus is {}",
                spec.period_matrix.len(),
                spec.genus
            )));
        }
        let rows: Vec<Vec<C64>> = spec
            .period_matrix
            .iter()
            .map(|r| r.iter().copied().map(cx).collect())
            .collect();
        let kappa = spec.kappa_max.unwrap_or(crate::torus::DEFAULT_KAPPA_MAX);
        ComplexTorus::from_rows(&rows, kappa).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    pub fn build_datum(&self, torus: &ComplexTorus) -> Result<AhDatum> {
        match &self.bundle {
            BundleSpec::Named(name) if name == "trivial" => Ok(AhDatum::trivial(torus)),
            BundleSpec::Named(other) => {
                Err(Error::ConfigInvalid(format!("unknown bundle `{other}`")))
            }
            BundleSpec::Datum {
                hermitian,
                character_turns,
            } => {
                let g = torus.genus();
                if hermitian.len() != g || hermitian.iter().any(|r| r.len() != g) {
                    return Err(Error::ConfigInvalid(format!("hermitian must be {g}×{g}")));
                }
                let h = DMatrix::from_fn(g, g, |r, c| cx(hermitian[r][c]));
                let turns = character_turns
                    .clone()
                    .unwrap_or_else(|| vec![0.0; torus.real_dim()]);
                // Datum errors keep their own variant so the diagnostic names
                // the failing invariant.
                AhDatum::from_turns(torus, h, &turns)
            }
        }
    }

    fn validate_numeric(&self) -> Result<()> {
        let n = &self.numeric;
        if n.grid < crate::grid::MIN_RESOLUTION {
            return Err(Error::ConfigInvalid(format!("grid {} below 4", n.grid)));
        }
        if let StepPolicy::Fixed(h) = n.fd_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::ConfigInvalid(format!(
                    "fd step {h} must be positive"
                )));
            }
        }
        for (name, tol) in [
            ("analytic_tol", n.analytic_tol),
            ("fd_tol", n.fd_tol),
            ("exact_tol", n.exact_tol),
        ] {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::ConfigInvalid(format!("{name} must be positive")));
            }
        }
        if let Some(checks) = &self.checks {
            for c in checks {
                if !CHECK_NAMES.contains(&c.as_str()) {
                    return Err(Error::ConfigInvalid(format!("unknown check `{c}`")));
                }
            }
        }
        Ok(())
    }

    /// Path the report should be written to, honouring [`OUTPUT_DIR_ENV`]
    /// for relative paths.
    pub fn resolve_output(&self, explicit: Option<&Path>) -> Option<PathBuf> {
        let raw = explicit
            .map(Path::to_path_buf)
            .or_else(|| self.output.as_ref().map(PathBuf::from))?;
        if raw.is_relative() {
            if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
                return Some(Path::new(&dir).join(raw));
            }
        }
        Some(raw)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// One line of the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub status: Status,
    /// `null` when the check crashed.
    pub max_error: Option<f64>,
    pub tolerance: f64,
    pub samples: usize,
    pub wall_time_ms: f64,
    /// Free-form detail for the text summary; not part of the JSON schema.
    #[serde(skip)]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub version: String,
    pub config_digest: String,
    pub seed: u64,
    pub overall: Status,
    pub checks: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.overall == Status::Pass
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable summary, one line per check.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "torus-torsor {} seed={} config={}",
            self.version,
            self.seed,
            &self.config_digest[..12.min(self.config_digest.len())]
        );
        for c in &self.checks {
            let status = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
            };
            let err = c
                .max_error
                .map_or_else(|| "crashed".to_string(), |e| format!("{e:.3e}"));
            let _ = write!(
                out,
                "[{status}] {:<34} max_error={err:<10} tol={:.1e} samples={:<6} {:>9.1} ms",
                c.name, c.tolerance, c.samples, c.wall_time_ms
            );
            if let Some(note) = &c.note {
                let _ = write!(out, "  ({note})");
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "overall: {}",
            if self.passed() { "pass" } else { "fail" }
        );
        out
    }
}

struct Outcome {
    max_error: f64,
    tolerance: f64,
    samples: usize,
    note: Option<String>,
}

impl Outcome {
    fn new(max_error: f64, tolerance: f64, samples: usize) -> Self {
        Self {
            max_error,
            tolerance,
            samples,
            note: None,
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// State shared by the checks of one run.
#[derive(Clone, Copy)]
enum Bundle {
    Main = 0,
    Dual = 1,
    Trivial = 2,
}

struct Suite {
    torus: ComplexTorus,
    /// Base point of the flat-family presentations.
    z0: Vec<C64>,
    presentations: [OnceLock<Arc<TorsorPresentation>>; 6],
    datum: AhDatum,
    n: usize,
    h: f64,
    numeric: NumericSpec,
}

impl Suite {
    fn step_for(&self, n: usize) -> f64 {
        match self.numeric.fd_step {
            StepPolicy::Grid => 1.0 / n as f64,
            StepPolicy::Fixed(h) => h,
        }
    }

    fn rng(&self, check: usize) -> Pcg64 {
        Pcg64::seed_from_u64(
            self.numeric
                .seed
                .wrapping_add((check as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
        )
    }

    fn random_point(&self, rng: &mut Pcg64) -> Vec<C64> {
        let t: Vec<f64> = (0..self.torus.real_dim())
            .map(|_| rng.random::<f64>())
            .collect();
        self.torus.from_lattice_coords(&t)
    }

    fn bundle(&self, which: Bundle) -> AhDatum {
        match which {
            Bundle::Main => self.datum.clone(),
            Bundle::Dual => self.datum.dual(),
            Bundle::Trivial => AhDatum::trivial(&self.torus),
        }
    }

    /// Presentations are expensive and shared by several checks, so each is
    /// built at most once per run.
    fn cached(
        &self,
        slot: usize,
        build: impl FnOnce() -> Result<TorsorPresentation>,
    ) -> Result<Arc<TorsorPresentation>> {
        if let Some(p) = self.presentations[slot].get() {
            return Ok(p.clone());
        }
        let p = Arc::new(build()?);
        Ok(self.presentations[slot].get_or_init(|| p).clone())
    }

    fn sigma(&self, which: Bundle) -> Result<Arc<TorsorPresentation>> {
        self.cached(2 * which as usize, || {
            TorsorPresentation::connections(&self.bundle(which), self.n, self.h)
        })
    }

    fn tau(&self, which: Bundle) -> Result<Arc<TorsorPresentation>> {
        self.cached(2 * which as usize + 1, || {
            TorsorPresentation::flat_families(&self.bundle(which), self.n, self.h, &self.z0)
        })
    }

    fn omega_flat(&self) -> Vec<C64> {
        let k = curvature_matrix(&self.datum);
        let g = self.torus.genus();
        (0..g)
            .flat_map(|j| (0..g).map(move |l| (j, l)))
            .map(|(j, l)| k[(j, l)])
            .collect()
    }

    fn run(&self, index: usize, name: &str) -> Result<Outcome> {
        match name {
            "datum_integrality" => self.datum_integrality(),
            "cycle_integral_anchor" => self.cycle_integral_anchor(),
            "curvature_translation_invariance" => self.curvature_translation_invariance(),
            "obstruction_sigma" => self.obstruction_sigma(),
            "slice_flatness" => self.slice_flatness(index),
            "eq_i_pullback" => self.eq_i_pullback(index),
            "obstruction_tau" => self.obstruction_tau(),
            "theorem_gamma_holomorphic" => self.theorem_gamma(index),
            "proposition_perturbed" => self.proposition_perturbed(index),
            "duality_involution" => self.duality(index),
            "trivial_bundle" => self.trivial_bundle(index),
            "fd_convergence" => self.fd_convergence(index),
            "local_holomorphic_witness" => self.local_witness(),
            other => Err(Error::ConfigInvalid(format!("unknown check `{other}`"))),
        }
    }

    fn datum_integrality(&self) -> Result<Outcome> {
        let gens = self.torus.generators();
        let mut worst: f64 = 0.0;
        for a in &gens {
            for b in &gens {
                let e = hermitian_pairing(self.datum.hermitian(), a, b).im;
                worst = worst.max((e - e.round()).abs());
            }
        }
        Ok(Outcome::new(
            worst,
            crate::appell_humbert::INTEGRALITY_TOL,
            gens.len() * gens.len(),
        ))
    }

    fn cycle_integral_anchor(&self) -> Result<Outcome> {
        let m = cycle_matrix(&self.torus, &chern_form(&self.datum))?;
        let e = self.datum.e_matrix();
        let n = self.torus.real_dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in 0..n {
                worst = worst.max((m[(j, k)] - C64::new(e[j][k] as f64, 0.0)).norm());
            }
        }
        let rows: Vec<String> = e
            .iter()
            .map(|r| {
                r.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        Ok(Outcome::new(worst, self.numeric.analytic_tol, n * n)
            .with_note(format!("E = [{}]", rows.join("; "))))
    }

    fn curvature_translation_invariance(&self) -> Result<Outcome> {
        let k = curvature(&canonical_connection(&self.datum), self.n)?;
        Ok(Outcome::new(
            k.variation(),
            self.numeric.exact_tol,
            k.grid().nodes(),
        ))
    }

    fn obstruction_sigma(&self) -> Result<Outcome> {
        let p = self.sigma(Bundle::Main)?;
        let err = p.theta().max_deviation_from(&self.omega_flat())?;
        Ok(Outcome::new(err, self.numeric.fd_tol, p.theta().nodes()))
    }

    fn slice_flatness(&self, index: usize) -> Result<Outcome> {
        let mut rng = self.rng(index);
        let fam = family_connection(&self.datum)?;
        let mut worst: f64 = 0.0;
        for _ in 0..self.numeric.samples {
            let x = self.torus.point(self.random_point(&mut rng))?;
            let th = slice_connection(&fam, &x)?;
            worst = worst.max(curvature(&th, self.n)?.max_abs());
        }
        Ok(Outcome::new(
            worst,
            self.numeric.analytic_tol,
            self.numeric.samples,
        ))
    }

    fn eq_i_pullback(&self, index: usize) -> Result<Outcome> {
        let mut rng = self.rng(index);
        let fam = family_connection(&self.datum)?;
        let mut worst: f64 = 0.0;
        for _ in 0..self.numeric.samples {
            let y = self.torus.point(self.random_point(&mut rng))?;
            worst = worst.max(check_eq_i(&fam, &y, self.n)?);
        }
        Ok(Outcome::new(
            worst,
            self.numeric.analytic_tol,
            self.numeric.samples,
        ))
    }

    fn obstruction_tau(&self) -> Result<Outcome> {
        let p = self.tau(Bundle::Main)?;
        let err = p.theta().max_deviation_from(&self.omega_flat())?;
        Ok(Outcome::new(err, self.numeric.fd_tol, p.theta().nodes()))
    }

    fn theorem_gamma(&self, index: usize) -> Result<Outcome> {
        let mut rng = self.rng(index);
        let sigma = self.sigma(Bundle::Main)?;
        let tau = self.tau(Bundle::Main)?;
        let gamma = canonical_morphism(&sigma, &tau)?;
        let (_, err) = gamma.is_holomorphic(self.numeric.fd_tol)?;
        // γ must also be equivariant.
        let v = random_periodic(&self.torus, &mut rng, 3);
        let v = GridFunction::sample(&self.torus, self.n, self.torus.genus(), |z| v(z))?;
        let equi = gamma.equivariance_defect(&TorsorSection::zero(&sigma), &v)?;
        Ok(Outcome::new(
            err.max(equi),
            self.numeric.fd_tol,
            sigma.theta().nodes(),
        ))
    }

    fn proposition_perturbed(&self, index: usize) -> Result<Outcome> {
        let mut rng = self.rng(index);
        let w = random_periodic(&self.torus, &mut rng, 3);
        let sigma = self.sigma(Bundle::Main)?;
        let tau = self.tau(Bundle::Main)?;
        let perturbed = Arc::new(tau.perturbed("tau+w", w.clone())?);
        let gamma = canonical_morphism(&sigma, &perturbed)?;
        let w_grid = GridFunction::sample(&self.torus, self.n, self.torus.genus(), |z| w(z))?;
        let expected = dbar_fd(&w_grid)?;
        let err = gamma.obstruction()?.max_abs_diff(&expected)?;
        Ok(Outcome::new(
            err,
            2.0 * self.numeric.fd_tol,
            expected.nodes(),
        ))
    }

    fn duality(&self, index: usize) -> Result<Outcome> {
        let mut rng = self.rng(index);
        let pairs = [
            (self.sigma(Bundle::Main)?, self.sigma(Bundle::Dual)?),
            (self.tau(Bundle::Main)?, self.tau(Bundle::Dual)?),
        ];
        let g = self.torus.genus();
        let mut worst: f64 = 0.0;
        let mut failures = Vec::new();
        for (p, q) in &pairs {
            let there = duality_map(p, q)?;
            let back = duality_map(q, p)?;
            if !back.compose(&there)?.is_identity() {
                failures.push(format!("{}: δ∘δ is not the identity", p.label()));
            }
            let zero_image = there.apply(&TorsorSection::zero(p))?;
            worst = worst.max(zero_image.offset().max_abs());
            for _ in 0..self.numeric.samples {
                let u = random_periodic(&self.torus, &mut rng, 2);
                let v = random_periodic(&self.torus, &mut rng, 2);
                let u = GridFunction::sample(&self.torus, self.n, g, |z| u(z))?;
                let v = GridFunction::sample(&self.torus, self.n, g, |z| v(z))?;
                let s = TorsorSection::new(p, u)?;
                let twice = back.apply(&there.apply(&s)?)?;
                if !twice.offset().bitwise_eq(s.offset()) {
                    failures.push(format!("{}: δ∘δ moved a section", p.label()));
                }
                worst = worst.max(there.equivariance_defect(&s, &v)?);
            }
            // References dualise: ref_{L*} = −ref_L.
            for node in (0..p.theta().nodes()).step_by((p.theta().nodes() / 64).max(1)) {
                let x = p.theta().node_lift(node);
                let (a, b) = (p.reference_at(&x), q.reference_at(&x));
                if let (Some(a), Some(b)) = (a, b) {
                    let d = a
                        .iter()
                        .zip(&b)
                        .map(|(x, y)| (x + y).norm())
                        .fold(0.0, f64::max);
                    worst = worst.max(d);
                }
            }
            worst = worst.max(there.obstruction()?.max_abs());
        }
        let out = Outcome::new(worst, self.numeric.exact_tol, 2 * self.numeric.samples);
        if failures.is_empty() {
            Ok(out)
        } else {
            Ok(Outcome::new(f64::INFINITY, out.tolerance, out.samples)
                .with_note(failures.join("; ")))
        }
    }

    fn trivial_bundle(&self, index: usize) -> Result<Outcome> {
        let mut rng = self.rng(index);
        let trivial = AhDatum::trivial(&self.torus);
        let mut worst = chern_form(&trivial).max_abs();
        let sigma = self.sigma(Bundle::Trivial)?;
        let tau = self.tau(Bundle::Trivial)?;
        for p in [&sigma, &tau] {
            worst = worst.max(is_trivializable(p, self.numeric.exact_tol).1);
            worst = worst.max(
                TorsorSection::zero(p)
                    .is_holomorphic(self.numeric.exact_tol)?
                    .1,
            );
        }
        let gamma = canonical_morphism(&sigma, &tau)?;
        worst = worst.max(gamma.is_holomorphic(self.numeric.exact_tol)?.1);
        // γ sends σ to τ: both references are the zero connection.
        let x = self.random_point(&mut rng);
        if let (Some(a), Some(b)) = (sigma.reference_at(&x), tau.reference_at(&x)) {
            worst = worst.max(a.iter().chain(&b).map(|c| c.norm()).fold(0.0, f64::max));
        }
        Ok(Outcome::new(
            worst,
            self.numeric.exact_tol,
            sigma.theta().nodes(),
        ))
    }

    /// Second-order convergence of the difference scheme on a non-affine
    /// integrand: `ω̂_σ` recomputed in the holomorphic gauge `exp(φ)`,
    /// `φ(z) = Σ_j sin(z_j + c_j)`, which shifts the reference by `∂φ`.
    ///
    /// Reports how far the contraction factor `err(2N) / err(N)` exceeds
    /// `1 / CONVERGENCE_RATIO`, so a converging scheme reports exactly zero.
    fn fd_convergence(&self, index: usize) -> Result<Outcome> {
        let mut rng = self.rng(index);
        let g = self.torus.genus();
        let phases: Vec<C64> = (0..g)
            .map(|_| C64::new(rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let theta = canonical_connection(&self.datum);
        let reference: Family = Arc::new(move |x: &[C64]| {
            theta
                .eval(x)
                .into_iter()
                .zip(x.iter().zip(&phases))
                .map(|(t, (xj, cj))| t + (xj + cj).cos())
                .collect()
        });
        let omega = self.omega_flat();
        let err_at = |n: usize| -> Result<f64> {
            let p = TorsorPresentation::from_reference(
                &self.torus,
                crate::torsor::ReferenceLabel::Custom("gauged-sigma".into()),
                n,
                self.step_for(n),
                reference.clone(),
            )?;
            p.theta().max_deviation_from(&omega)
        };
        let coarse = err_at(self.n)?;
        let fine = err_at(2 * self.n)?;
        let factor = if coarse > 0.0 {
            fine / coarse
        } else {
            f64::INFINITY
        };
        let shortfall = (factor - 1.0 / CONVERGENCE_RATIO).max(0.0);
        Ok(Outcome::new(shortfall, 0.0, 2).with_note(format!(
            "err(N={})={coarse:.3e} err(N={})={fine:.3e} ratio={:.2}",
            self.n,
            2 * self.n,
            coarse / fine
        )))
    }

    fn local_witness(&self) -> Result<Outcome> {
        let sigma = self.sigma(Bundle::Main)?;
        let local = local_holomorphic_section(&sigma);
        let (_, err) = local.is_holomorphic(self.numeric.exact_tol)?;
        let (trivializable, class) = is_trivializable(&sigma, self.numeric.exact_tol);
        let nontrivial = self.datum.max_abs_e() != 0;
        let note = format!("class max {class:.3e}, trivializable={trivializable}");
        if nontrivial == trivializable {
            return Ok(
                Outcome::new(f64::INFINITY, self.numeric.exact_tol, sigma.theta().nodes())
                    .with_note(format!("class disagrees with E: {note}")),
            );
        }
        Ok(Outcome::new(err, self.numeric.exact_tol, sigma.theta().nodes()).with_note(note))
    }
}

/// A seeded smooth periodic `V`-valued function: a few Fourier modes in
/// lattice coordinates.
pub fn random_periodic(torus: &ComplexTorus, rng: &mut Pcg64, modes: usize) -> Family {
    let g = torus.genus();
    let dim = torus.real_dim();
    let terms: Vec<(usize, Vec<f64>, C64)> = (0..g)
        .flat_map(|_| 0..modes)
        .enumerate()
        .map(|(i, _)| {
            let comp = i / modes;
            let mut m: Vec<f64> = (0..dim)
                .map(|_| (rng.random_range(0..3) as f64) - 1.0)
                .collect();
            if m.iter().all(|x| *x == 0.0) {
                m[i % dim] = 1.0;
            }
            let amp = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            (comp, m, amp)
        })
        .collect();
    let torus = torus.clone();
    Arc::new(move |z: &[C64]| {
        let t = torus.lattice_coords(z);
        let mut out = vec![C64::new(0.0, 0.0); g];
        for (comp, m, amp) in &terms {
            let phase: f64 = m.iter().zip(&t).map(|(a, b)| a * b).sum();
            out[*comp] += amp * C64::from_polar(1.0, 2.0 * PI * phase);
        }
        out
    })
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

/// Runs the configured checks in order.
///
/// Fails up front with the datum's own error (e.g. [`Error::NonIntegralE`])
/// or [`Error::ConfigInvalid`] when the configuration does not describe a
/// valid torus and bundle.
pub fn run_suite(cfg: &VerificationConfig) -> Result<VerificationReport> {
    cfg.validate_numeric()?;
    let torus = cfg.build_torus()?;
    let datum = cfg.build_datum(&torus)?;
    let n = cfg.numeric.grid;
    let mut rng = Pcg64::seed_from_u64(cfg.numeric.seed);
    let t0: Vec<f64> = (0..torus.real_dim()).map(|_| rng.random::<f64>()).collect();
    let suite = Suite {
        z0: torus.from_lattice_coords(&t0),
        presentations: Default::default(),
        h: match cfg.numeric.fd_step {
            StepPolicy::Grid => 1.0 / n as f64,
            StepPolicy::Fixed(h) => h,
        },
        torus,
        datum,
        n,
        numeric: cfg.numeric.clone(),
    };
    let selected: Vec<(usize, &str)> = CHECK_NAMES
        .iter()
        .enumerate()
        .filter(|(_, name)| {
            cfg.checks
                .as_ref()
                .is_none_or(|list| list.iter().any(|c| c == *name))
        })
        .map(|(i, name)| (i, *name))
        .collect();
    let mut checks = Vec::with_capacity(selected.len());
    for (index, name) in selected {
        let start = Instant::now();
        let result =
            catch_unwind(AssertUnwindSafe(|| suite.run(index, name))).unwrap_or_else(|p| {
                Err(Error::CheckCrashed {
                    name: name.to_string(),
                    reason: panic_message(p.as_ref()),
                })
            });
        let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        let record = match result {
            Ok(o) => CheckRecord {
                name: name.to_string(),
                status: if o.max_error <= o.tolerance {
                    Status::Pass
                } else {
                    Status::Fail
                },
                max_error: o.max_error.is_finite().then_some(o.max_error),
                tolerance: o.tolerance,
                samples: o.samples,
                wall_time_ms,
                note: o.note,
            },
            Err(e) => CheckRecord {
                name: name.to_string(),
                status: Status::Fail,
                max_error: None,
                tolerance: 0.0,
                samples: 0,
                wall_time_ms,
                note: Some(e.to_string()),
            },
        };
        checks.push(record);
    }
    let overall = if checks.iter().all(|c| c.status == Status::Pass) {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(VerificationReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_digest: cfg.digest(),
        seed: cfg.numeric.seed,
        overall,
        checks,
    })
}

/// Writes the JSON report to `path` (if given) and prints the summary.
pub fn emit_report(report: &VerificationReport, path: Option<&Path>) -> Result<()> {
    if let Some(path) = path {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut json = report.to_json();
        json.push('\n');
        std::fs::write(path, json)?;
    }
    print!("{}", report.summary());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_configs_round_trip() {
        for name in ["principal-g1", "principal-g2", "trivial"] {
            let cfg = VerificationConfig::demo(name).unwrap();
            let back = VerificationConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(cfg, back);
            assert_eq!(cfg.digest(), back.digest());
        }
    }

    #[test]
    fn unknown_demo_rejected() {
        assert!(matches!(
            VerificationConfig::demo("nope"),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn numeric_defaults_fill_in() {
        let cfg = VerificationConfig::from_json(
            r#"{"torus":{"genus":1,"period_matrix":[[[1,0],[0,1]]]},"bundle":"trivial"}"#,
        )
        .unwrap();
        assert_eq!(cfg.numeric, NumericSpec::default());
    }

    #[test]
    fn fixed_step_parses() {
        let cfg = VerificationConfig::from_json(
            r#"{"torus":{"genus":1,"period_matrix":[[[1,0],[0,1]]]},"bundle":"trivial",
                "numeric":{"fd_step":{"fixed":0.001}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.numeric.fd_step, StepPolicy::Fixed(0.001));
    }

    #[test]
    fn unknown_check_rejected() {
        let mut cfg = VerificationConfig::demo("trivial").unwrap();
        cfg.checks = Some(vec!["bogus".into()]);
        assert!(matches!(run_suite(&cfg), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn degenerate_torus_is_config_error() {
        let mut cfg = VerificationConfig::demo("trivial").unwrap();
        cfg.torus.period_matrix = vec![vec![[1.0, 0.0], [2.0, 0.0]]];
        assert!(matches!(run_suite(&cfg), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn random_periodic_is_periodic() {
        let t =
            ComplexTorus::from_rows(&[vec![C64::new(1.0, 0.0), C64::new(0.2, 1.1)]], 1e6).unwrap();
        let mut rng = Pcg64::seed_from_u64(3);
        let w = random_periodic(&t, &mut rng, 3);
        let z = [C64::new(0.3, 0.4)];
        let shifted = [z[0] + C64::new(0.2, 1.1)];
        assert!((w(&z)[0] - w(&shifted)[0]).norm() < 1e-12);
    }
}
