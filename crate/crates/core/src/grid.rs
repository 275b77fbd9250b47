//! Periodic sampling grids in lattice coordinates and the finite-difference
//! Cauchy–Riemann operator.
//!
//! A grid of resolution `N` on a genus-`g` torus has `N^{2g}` nodes at lattice
//! coordinates `t = i / N`, `i ∈ {0..N-1}^{2g}`, laid out row-major (first
//! coordinate slowest). Each node carries `width` complex values.
//!
//! Derivatives are central differences along the lattice directions,
//! `∂f/∂t_a ≈ (f(t + h e_a) − f(t − h e_a)) / 2h`, mapped to the complex chart
//! through the inverse real period matrix and combined as
//! `∂/∂z̄_k = (∂/∂x_k + i ∂/∂y_k) / 2`. The scheme is exact on functions
//! affine in `(z, z̄)` and second-order accurate on smooth ones.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::torus::ComplexTorus;
use crate::C64;

/// Smallest admissible resolution per real direction.
pub const MIN_RESOLUTION: usize = 4;

/// Largest node count a grid may allocate.
pub const MAX_NODES: usize = 1 << 26;

/// Values sampled on the periodic lattice-coordinate grid of a torus.
#[derive(Clone, Debug)]
pub struct GridFunction {
    torus: ComplexTorus,
    resolution: usize,
    width: usize,
    values: Vec<C64>,
}

fn node_count(torus: &ComplexTorus, n: usize) -> Result<usize> {
    if n < MIN_RESOLUTION {
        return Err(Error::ResolutionTooCoarse(n));
    }
    let dim = u32::try_from(torus.real_dim()).unwrap_or(u32::MAX);
    n.checked_pow(dim)
        .filter(|&c| c <= MAX_NODES)
        .ok_or_else(|| Error::ShapeMismatch(format!("grid {n}^{dim} exceeds {MAX_NODES} nodes")))
}

impl GridFunction {
    /// Wraps raw node-major values. Rejects non-finite entries.
    pub fn from_values(
        torus: &ComplexTorus,
        resolution: usize,
        width: usize,
        values: Vec<C64>,
    ) -> Result<Self> {
        let nodes = node_count(torus, resolution)?;
        if values.len() != nodes * width {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values, got {}",
                nodes * width,
                values.len()
            )));
        }
        if values
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::ShapeMismatch("grid values must be finite".into()));
        }
        Ok(Self {
            torus: torus.clone(),
            resolution,
            width,
            values,
        })
    }

    pub fn zeros(torus: &ComplexTorus, resolution: usize, width: usize) -> Result<Self> {
        let nodes = node_count(torus, resolution)?;
        Ok(Self {
            torus: torus.clone(),
            resolution,
            width,
            values: vec![C64::new(0.0, 0.0); nodes * width],
        })
    }

    /// Samples `f` at the lifts `Π t` of the grid nodes.
    pub fn sample<F>(torus: &ComplexTorus, resolution: usize, width: usize, f: F) -> Result<Self>
    where
        F: Fn(&[C64]) -> Vec<C64> + Sync,
    {
        let mut grid = Self::zeros(torus, resolution, width)?;
        let shape = GridShape {
            torus,
            n: resolution,
        };
        grid.values
            .par_chunks_mut(width)
            .enumerate()
            .for_each(|(node, out)| {
                let z = shape.lift(node);
                let v = f(&z);
                assert_eq!(v.len(), width, "sampled function returned wrong width");
                out.copy_from_slice(&v);
            });
        if grid
            .values
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::ShapeMismatch("sampled values must be finite".into()));
        }
        Ok(grid)
    }

    /// A grid holding the same value at every node.
    pub fn constant(torus: &ComplexTorus, resolution: usize, value: &[C64]) -> Result<Self> {
        let nodes = node_count(torus, resolution)?;
        let values = (0..nodes).flat_map(|_| value.iter().copied()).collect();
        Self::from_values(torus, resolution, value.len(), values)
    }

    pub fn torus(&self) -> &ComplexTorus {
        &self.torus
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / self.width.max(1)
    }

    /// Grid spacing in lattice coordinates.
    pub fn spacing(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn at(&self, node: usize) -> &[C64] {
        &self.values[node * self.width..(node + 1) * self.width]
    }

    /// Lattice coordinates of a node.
    pub fn node_coords(&self, node: usize) -> Vec<f64> {
        self.shape().coords(node)
    }

    /// Lift of a node into the fundamental domain.
    pub fn node_lift(&self, node: usize) -> Vec<C64> {
        self.shape().lift(node)
    }

    fn shape(&self) -> GridShape<'_> {
        GridShape {
            torus: &self.torus,
            n: self.resolution,
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.torus == other.torus
            && self.resolution == other.resolution
            && self.width == other.width
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "grids differ: N={} w={} vs N={} w={}",
                self.resolution, self.width, other.resolution, other.width
            )))
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|a| a * s)
    }

    pub fn neg(&self) -> Self {
        self.map(|a| -a)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64 + Sync) -> Self {
        Self {
            torus: self.torus.clone(),
            resolution: self.resolution,
            width: self.width,
            values: self.values.par_iter().map(|&a| f(a)).collect(),
        }
    }

    fn zip_map(&self, other: &Self, f: impl Fn(C64, C64) -> C64 + Sync) -> Self {
        Self {
            torus: self.torus.clone(),
            resolution: self.resolution,
            width: self.width,
            values: self
                .values
                .par_iter()
                .zip(other.values.par_iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.values
            .par_iter()
            .map(|c| c.norm())
            .reduce(|| 0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self
            .values
            .par_iter()
            .zip(other.values.par_iter())
            .map(|(a, b)| (a - b).norm())
            .reduce(|| 0.0, f64::max))
    }

    /// Largest deviation of any node from a fixed value.
    pub fn max_deviation_from(&self, value: &[C64]) -> Result<f64> {
        if value.len() != self.width {
            return Err(Error::ShapeMismatch(
                "reference value has wrong width".into(),
            ));
        }
        Ok(self
            .values
            .par_chunks(self.width)
            .map(|node| {
                node.iter()
                    .zip(value)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max))
    }

    /// Componentwise grid average, summed pairwise for order independence.
    pub fn mean(&self) -> Vec<C64> {
        let nodes = self.nodes() as f64;
        (0..self.width)
            .map(|c| {
                let column: Vec<C64> = self
                    .values
                    .iter()
                    .skip(c)
                    .step_by(self.width)
                    .copied()
                    .collect();
                pairwise_sum(&column) / nodes
            })
            .collect()
    }

    /// Whether equal bit for bit.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.same_shape(other)
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits())
    }
}

/// Index arithmetic for a grid without its values.
#[derive(Clone, Copy)]
struct GridShape<'a> {
    torus: &'a ComplexTorus,
    n: usize,
}

impl GridShape<'_> {
    fn indices(&self, mut node: usize) -> Vec<usize> {
        let dim = self.torus.real_dim();
        let mut idx = vec![0; dim];
        for a in (0..dim).rev() {
            idx[a] = node % self.n;
            node /= self.n;
        }
        idx
    }

    fn coords(&self, node: usize) -> Vec<f64> {
        let n = self.n as f64;
        self.indices(node)
            .into_iter()
            .map(|i| i as f64 / n)
            .collect()
    }

    fn lift(&self, node: usize) -> Vec<C64> {
        self.torus.from_lattice_coords(&self.coords(node))
    }

    /// Node reached from `node` by `delta` steps along direction `a`, wrapping.
    fn neighbor(&self, node: usize, a: usize, delta: isize) -> usize {
        let dim = self.torus.real_dim();
        let stride = self.n.pow((dim - 1 - a) as u32);
        let i = (node / stride) % self.n;
        let j = (i as isize + delta).rem_euclid(self.n as isize) as usize;
        node - i * stride + j * stride
    }
}

/// Weights `w[k][a]` with `∂f/∂z̄_k = Σ_a w[k][a] ∂f/∂t_a`.
pub fn dbar_weights(torus: &ComplexTorus) -> Vec<Vec<C64>> {
    chart_weights(torus, 1.0)
}

/// Weights `w[k][a]` with `∂f/∂z_k = Σ_a w[k][a] ∂f/∂t_a`.
pub fn del_weights(torus: &ComplexTorus) -> Vec<Vec<C64>> {
    chart_weights(torus, -1.0)
}

fn chart_weights(torus: &ComplexTorus, sign: f64) -> Vec<Vec<C64>> {
    let g = torus.genus();
    let inv = torus.real_inverse();
    (0..g)
        .map(|k| {
            (0..2 * g)
                .map(|a| C64::new(0.5 * inv[(a, k)], 0.5 * sign * inv[(a, g + k)]))
                .collect()
        })
        .collect()
}

fn combine(weights: &[Vec<C64>], dt: &[Vec<C64>], width: usize, out: &mut [C64]) {
    let g = weights.len();
    for c in 0..width {
        for (k, wk) in weights.iter().enumerate() {
            out[c * g + k] = wk.iter().zip(dt).map(|(w, d)| w * d[c]).sum();
        }
    }
}

/// `∂̄` of a periodic grid function by central differences at the grid
/// spacing, with wrap-around.
///
/// Input width `w`, output width `w·g`, laid out as `[c·g + k] = ∂f_c/∂z̄_k`.
pub fn dbar_fd(f: &GridFunction) -> Result<GridFunction> {
    if f.resolution < MIN_RESOLUTION {
        return Err(Error::ResolutionTooCoarse(f.resolution));
    }
    let weights = dbar_weights(&f.torus);
    difference_grid(f, &weights)
}

/// `∂` (the (1,0)-part) of a periodic grid function; same layout as [`dbar_fd`].
pub fn del_fd(f: &GridFunction) -> Result<GridFunction> {
    if f.resolution < MIN_RESOLUTION {
        return Err(Error::ResolutionTooCoarse(f.resolution));
    }
    let weights = del_weights(&f.torus);
    difference_grid(f, &weights)
}

fn difference_grid(f: &GridFunction, weights: &[Vec<C64>]) -> Result<GridFunction> {
    let g = f.torus.genus();
    let dim = 2 * g;
    let width = f.width;
    let shape = f.shape();
    let inv_2h = f.resolution as f64 / 2.0;
    let mut out = GridFunction::zeros(&f.torus, f.resolution, width * g)?;
    out.values
        .par_chunks_mut(width * g)
        .enumerate()
        .for_each(|(node, dst)| {
            let dt: Vec<Vec<C64>> = (0..dim)
                .map(|a| {
                    let fwd = f.at(shape.neighbor(node, a, 1));
                    let bwd = f.at(shape.neighbor(node, a, -1));
                    fwd.iter().zip(bwd).map(|(p, m)| (p - m) * inv_2h).collect()
                })
                .collect();
            combine(weights, &dt, width, dst);
        });
    Ok(out)
}

/// `∂̄f` at a single lift `z` of a function given on the universal cover,
/// by central differences of step `h` (lattice coordinates).
pub fn dbar_at<F>(torus: &ComplexTorus, f: &F, z: &[C64], h: f64) -> Vec<C64>
where
    F: Fn(&[C64]) -> Vec<C64> + ?Sized,
{
    let weights = dbar_weights(torus);
    directional_at(torus, f, z, h, &weights)
}

/// `∂f` at a single lift; companion of [`dbar_at`].
pub fn del_at<F>(torus: &ComplexTorus, f: &F, z: &[C64], h: f64) -> Vec<C64>
where
    F: Fn(&[C64]) -> Vec<C64> + ?Sized,
{
    let weights = del_weights(torus);
    directional_at(torus, f, z, h, &weights)
}

fn directional_at<F>(
    torus: &ComplexTorus,
    f: &F,
    z: &[C64],
    h: f64,
    weights: &[Vec<C64>],
) -> Vec<C64>
where
    F: Fn(&[C64]) -> Vec<C64> + ?Sized,
{
    let g = torus.genus();
    let gens = torus.generators();
    let mut width = 0;
    let dt: Vec<Vec<C64>> = gens
        .iter()
        .map(|lam| {
            let zp: Vec<C64> = z.iter().zip(lam).map(|(a, l)| a + l * h).collect();
            let zm: Vec<C64> = z.iter().zip(lam).map(|(a, l)| a - l * h).collect();
            let (fp, fm) = (f(&zp), f(&zm));
            width = fp.len();
            fp.iter()
                .zip(&fm)
                .map(|(p, m)| (p - m) / (2.0 * h))
                .collect()
        })
        .collect();
    let mut out = vec![C64::new(0.0, 0.0); width * g];
    combine(weights, &dt, width, &mut out);
    out
}

/// `∂̄f` at every node lift of a resolution-`n` grid, for a function given on
/// the universal cover. Uses step `h` rather than wrap-around, so `f` need not
/// be periodic; the result is a chart-valued sample over the fundamental
/// domain.
pub fn dbar_sampled<F>(
    torus: &ComplexTorus,
    n: usize,
    h: f64,
    width: usize,
    f: F,
) -> Result<GridFunction>
where
    F: Fn(&[C64]) -> Vec<C64> + Sync,
{
    if n < MIN_RESOLUTION {
        return Err(Error::ResolutionTooCoarse(n));
    }
    let g = torus.genus();
    GridFunction::sample(torus, n, width * g, |z| dbar_at(torus, &f, z, h))
}

/// Sum with a fixed binary tree, so the result does not depend on how work is
/// split across threads.
pub fn pairwise_sum(xs: &[C64]) -> C64 {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        return xs.iter().fold(C64::new(0.0, 0.0), |acc, x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
