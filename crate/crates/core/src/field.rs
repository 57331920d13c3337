//! Grid-sampled maps and cell measures.
//!
//! A [`SampledMap`] stores the values of a map `R^d -> R^m` on a uniform
//! product grid, row-major with the last axis fastest and the `m` output
//! components interleaved per sample. A [`CellMeasure`] stores `R^m`-valued
//! masses on cells in the same layout. Axes and output components are
//! 0-based throughout the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// Uniform product grid: `shape[a]` points starting at `origin[a]`, step `spacing[a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    pub shape: Vec<usize>,
    pub spacing: Vec<T>,
    pub origin: Vec<T>,
}

impl<T: Scalar> Grid<T> {
    pub fn new(shape: Vec<usize>, spacing: Vec<T>, origin: Vec<T>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 3 {
            return Err(Error::Shape(format!(
                "grid dimension must be 1..=3, got {}",
                shape.len()
            )));
        }
        if spacing.len() != shape.len() || origin.len() != shape.len() {
            return Err(Error::Shape(
                "shape, spacing and origin must have equal length".into(),
            ));
        }
        if let Some(n) = shape.iter().find(|&&n| n < 2) {
            return Err(Error::Shape(format!("every axis needs >= 2 samples, got {n}")));
        }
        if spacing.iter().any(|h| *h <= T::zero()) {
            return Err(Error::InvalidArgument("grid spacing must be positive".into()));
        }
        Ok(Grid {
            shape,
            spacing,
            origin,
        })
    }

    /// Grid with `shape` points spanning `[lo[a], hi[a]]` on each axis.
    pub fn spanning(shape: &[usize], lo: &[T], hi: &[T]) -> Result<Self> {
        if lo.len() != shape.len() || hi.len() != shape.len() {
            return Err(Error::Shape("bounds and shape disagree".into()));
        }
        let mut spacing = Vec::with_capacity(shape.len());
        for a in 0..shape.len() {
            if shape[a] < 2 {
                return Err(Error::Shape(format!("axis {a} needs >= 2 samples")));
            }
            spacing.push((hi[a].clone() - lo[a].clone()) / T::of(shape[a] as i64 - 1));
        }
        Grid::new(shape.to_vec(), spacing, lo.to_vec())
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major strides (last axis fastest).
    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    pub fn coord(&self, axis: usize, i: usize) -> T {
        self.origin[axis].clone() + self.spacing[axis].clone() * T::of(i as i64)
    }

    /// `(lo, hi)` of the sampled range along `axis`.
    pub fn extent(&self, axis: usize) -> (T, T) {
        (
            self.origin[axis].clone(),
            self.coord(axis, self.shape[axis] - 1),
        )
    }

    /// Dual-cell length of node `i` along `axis`: the spacing, halved at the
    /// two end nodes so the dual cells tile the sampled interval exactly.
    pub fn dual_length(&self, axis: usize, i: usize) -> T {
        if i == 0 || i + 1 == self.shape[axis] {
            self.spacing[axis].clone() / T::of(2)
        } else {
            self.spacing[axis].clone()
        }
    }

    /// Index of the cell `[x_i, x_{i+1}]` containing `t`, and the local
    /// coordinate in `[0, 1]`. Values outside the range are clamped.
    pub fn locate(&self, axis: usize, t: &T) -> (usize, T) {
        let n = self.shape[axis];
        let (lo, hi) = self.extent(axis);
        if *t <= lo {
            return (0, T::zero());
        }
        if *t >= hi {
            return (n - 2, T::one());
        }
        // Binary search for the largest i with x_i <= t.
        let (mut a, mut b) = (0usize, n - 1);
        while b - a > 1 {
            let mid = (a + b) / 2;
            if self.coord(axis, mid) <= *t {
                a = mid;
            } else {
                b = mid;
            }
        }
        let local = (t.clone() - self.coord(axis, a)) / self.spacing[axis].clone();
        (a, local)
    }
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for a in (0..shape.len().saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    strides
}

pub(crate) fn unravel(mut flat: usize, shape: &[usize], out: &mut [usize]) {
    for a in (0..shape.len()).rev() {
        out[a] = flat % shape[a];
        flat /= shape[a];
    }
}

/// Samples of a map from a uniform grid in `R^dim_in` to `R^dim_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledMap<T> {
    grid: Grid<T>,
    dim_out: usize,
    values: Vec<T>,
}

impl<T: Scalar> SampledMap<T> {
    pub fn new(grid: Grid<T>, dim_out: usize, values: Vec<T>) -> Result<Self> {
        if !(1..=3).contains(&dim_out) {
            return Err(Error::Shape(format!("dim_out must be 1..=3, got {dim_out}")));
        }
        if values.len() != grid.len() * dim_out {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                grid.len() * dim_out,
                values.len()
            )));
        }
        Ok(SampledMap {
            grid,
            dim_out,
            values,
        })
    }

    /// Samples `f(x, out)` at every node of `grid`.
    pub fn from_fn(grid: Grid<T>, dim_out: usize, f: impl Fn(&[T], &mut [T])) -> Result<Self> {
        let d = grid.ndim();
        let n = grid.len();
        let mut values = vec![T::zero(); n * dim_out];
        let mut idx = vec![0usize; d];
        let mut x = vec![T::zero(); d];
        for p in 0..n {
            unravel(p, &grid.shape, &mut idx);
            for a in 0..d {
                x[a] = grid.coord(a, idx[a]);
            }
            f(&x, &mut values[p * dim_out..(p + 1) * dim_out]);
        }
        SampledMap::new(grid, dim_out, values)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn dim_in(&self) -> usize {
        self.grid.ndim()
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn shape(&self) -> &[usize] {
        &self.grid.shape
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Output vector at flat node index `p`.
    pub fn at(&self, p: usize) -> &[T] {
        &self.values[p * self.dim_out..(p + 1) * self.dim_out]
    }

    /// Output vector at multi-index `idx`.
    pub fn at_index(&self, idx: &[usize]) -> &[T] {
        let strides = self.grid.strides();
        let p: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        self.at(p)
    }

    /// Scalar component `c` as its own map.
    pub fn component(&self, c: usize) -> Result<SampledMap<T>> {
        if c >= self.dim_out {
            return Err(Error::InvalidArgument(format!(
                "component {c} out of range for dim_out {}",
                self.dim_out
            )));
        }
        let values = self
            .values
            .chunks(self.dim_out)
            .map(|v| v[c].clone())
            .collect();
        SampledMap::new(self.grid.clone(), 1, values)
    }

    /// Permutes the domain axes: output axis `a` is input axis `perm[a]`.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<SampledMap<T>> {
        let d = self.dim_in();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&p| p >= d || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument(format!("{perm:?} is not a permutation")));
        }
        let shape: Vec<usize> = perm.iter().map(|&p| self.grid.shape[p]).collect();
        let spacing = perm.iter().map(|&p| self.grid.spacing[p].clone()).collect();
        let origin = perm.iter().map(|&p| self.grid.origin[p].clone()).collect();
        let grid = Grid::new(shape.clone(), spacing, origin)?;
        let old_strides = self.grid.strides();
        let mut idx = vec![0usize; d];
        let m = self.dim_out;
        let mut values = Vec::with_capacity(self.values.len());
        for p in 0..grid.len() {
            unravel(p, &shape, &mut idx);
            let q: usize = (0..d).map(|a| idx[a] * old_strides[perm[a]]).sum();
            values.extend_from_slice(&self.values[q * m..(q + 1) * m]);
        }
        SampledMap::new(grid, m, values)
    }

    /// Reorders output components: new component `c` is old `perm[c]`.
    pub fn permute_outputs(&self, perm: &[usize]) -> Result<SampledMap<T>> {
        let m = self.dim_out;
        let mut seen = vec![false; m];
        if perm.len() != m || perm.iter().any(|&p| p >= m || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument(format!("{perm:?} is not a permutation")));
        }
        let values = self
            .values
            .chunks(m)
            .flat_map(|v| perm.iter().map(move |&p| v[p].clone()))
            .collect();
        SampledMap::new(self.grid.clone(), m, values)
    }
}

impl<T: Real> SampledMap<T> {
    /// Multilinear interpolation at `x`; coordinates outside the grid are
    /// clamped onto it.
    pub fn interpolate(&self, x: &[T], out: &mut [T]) {
        let d = self.dim_in();
        let m = self.dim_out;
        let strides = self.grid.strides();
        let mut base = 0usize;
        let mut w = [T::zero(); 3];
        for a in 0..d {
            let (i, u) = self.grid.locate(a, &x[a]);
            base += i * strides[a];
            w[a] = u;
        }
        out.iter_mut().for_each(|o| *o = T::zero());
        for corner in 0..(1usize << d) {
            let mut weight = T::one();
            let mut p = base;
            for a in 0..d {
                if corner >> a & 1 == 1 {
                    weight = weight * w[a];
                    p += strides[a];
                } else {
                    weight = weight * (T::one() - w[a]);
                }
            }
            if weight != T::zero() {
                for c in 0..m {
                    out[c] = out[c] + weight * self.values[p * m + c];
                }
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Componentwise bounding box of the sampled values.
    pub fn value_bounds(&self) -> (Vec<T>, Vec<T>) {
        let m = self.dim_out;
        let mut lo = vec![T::infinity(); m];
        let mut hi = vec![T::neg_infinity(); m];
        for v in self.values.chunks(m) {
            for c in 0..m {
                lo[c] = lo[c].min(v[c]);
                hi[c] = hi[c].max(v[c]);
            }
        }
        (lo, hi)
    }
}

/// `R^m`-valued masses on the cells of a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMeasure<T> {
    /// Cell counts per axis.
    pub shape: Vec<usize>,
    pub spacing: Vec<T>,
    /// Lower corner of the first cell.
    pub origin: Vec<T>,
    pub m: usize,
    weights: Vec<T>,
}

impl<T: Scalar> CellMeasure<T> {
    pub fn new(
        shape: Vec<usize>,
        spacing: Vec<T>,
        origin: Vec<T>,
        m: usize,
        weights: Vec<T>,
    ) -> Result<Self> {
        if shape.is_empty() || shape.len() > 3 || m == 0 {
            return Err(Error::Shape("measure needs 1..=3 axes and m >= 1".into()));
        }
        if spacing.len() != shape.len() || origin.len() != shape.len() {
            return Err(Error::Shape(
                "shape, spacing and origin must have equal length".into(),
            ));
        }
        let cells: usize = shape.iter().product();
        if weights.len() != cells * m {
            return Err(Error::Shape(format!(
                "expected {} weights, got {}",
                cells * m,
                weights.len()
            )));
        }
        Ok(CellMeasure {
            shape,
            spacing,
            origin,
            m,
            weights,
        })
    }

    pub fn zeros(shape: Vec<usize>, spacing: Vec<T>, origin: Vec<T>, m: usize) -> Result<Self> {
        let n: usize = shape.iter().product::<usize>() * m;
        CellMeasure::new(shape, spacing, origin, m, vec![T::zero(); n])
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn n_cells(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn cell(&self, c: usize) -> &[T] {
        &self.weights[c * self.m..(c + 1) * self.m]
    }

    /// Sum of the absolute values of all components over all cells. This is
    /// the total variation for `m = 1` and the anisotropic (entrywise) mass
    /// otherwise; it needs no square roots, so it is exact on rationals.
    pub fn abs_mass(&self) -> T {
        self.weights
            .iter()
            .fold(T::zero(), |acc, w| acc + w.abs())
    }

    /// Signed sum of every component.
    pub fn signed_mass(&self) -> T {
        self.weights
            .iter()
            .fold(T::zero(), |acc, w| acc + w.clone())
    }

    pub fn scaled(&self, s: &T) -> CellMeasure<T> {
        CellMeasure {
            weights: self.weights.iter().map(|w| w.clone() * s.clone()).collect(),
            ..self.clone()
        }
    }
}

impl<T: Real> CellMeasure<T> {
    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }
}

/// Total variation `|mu|(cells)`: the sum over cells of the Euclidean norm
/// of each cell's `R^m` mass.
pub fn total_variation<T: Real>(mu: &CellMeasure<T>) -> T {
    let m = mu.m;
    mu.weights
        .chunks(m)
        .map(|w| {
            if m == 1 {
                w[0].abs()
            } else {
                w.iter().map(|x| *x * *x).fold(T::zero(), |a, b| a + b).sqrt()
            }
        })
        .fold(T::zero(), |a, b| a + b)
}

/// Forward differences of `f` along `axis`, assigned to the edge cells
/// between consecutive samples and weighted by the transverse dual-cell
/// volume. The result has `shape[axis] - 1` cells along `axis` and one cell
/// per node on the other axes.
pub fn difference_measure<T: Scalar>(f: &SampledMap<T>, axis: usize) -> Result<CellMeasure<T>> {
    let d = f.dim_in();
    if axis >= d {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} out of range for a {d}-dimensional grid"
        )));
    }
    let g = f.grid();
    let m = f.dim_out();
    let mut shape = g.shape.clone();
    shape[axis] -= 1;
    let mut origin = g.origin.clone();
    for a in 0..d {
        if a != axis {
            origin[a] = origin[a].clone() - g.spacing[a].clone() / T::of(2);
        }
    }
    let strides = g.strides();
    let n_cells: usize = shape.iter().product();
    let mut weights = Vec::with_capacity(n_cells * m);
    let mut idx = vec![0usize; d];
    for c in 0..n_cells {
        unravel(c, &shape, &mut idx);
        let mut transverse = T::one();
        let mut p = 0usize;
        for a in 0..d {
            p += idx[a] * strides[a];
            if a != axis {
                transverse = transverse * g.dual_length(a, idx[a]);
            }
        }
        let q = p + strides[axis];
        for k in 0..m {
            let diff = f.values[q * m + k].clone() - f.values[p * m + k].clone();
            weights.push(diff * transverse.clone());
        }
    }
    CellMeasure::new(shape, g.spacing.clone(), origin, m, weights)
}

/// Closed planar polyline; the last vertex connects back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedPolyline<T> {
    vertices: Vec<[T; 2]>,
}

impl<T: Scalar> ClosedPolyline<T> {
    pub fn new(vertices: Vec<[T; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "closed polyline needs >= 3 vertices, got {}",
                vertices.len()
            )));
        }
        Ok(ClosedPolyline { vertices })
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges `(v_i, v_{i+1})` including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (&[T; 2], &[T; 2])> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (&self.vertices[i], &self.vertices[(i + 1) % n]))
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bbox(&self) -> ([T; 2], [T; 2]) {
        let mut lo = self.vertices[0].clone();
        let mut hi = self.vertices[0].clone();
        for v in &self.vertices {
            for a in 0..2 {
                if v[a] < lo[a] {
                    lo[a] = v[a].clone();
                }
                if v[a] > hi[a] {
                    hi[a] = v[a].clone();
                }
            }
        }
        (lo, hi)
    }
}

impl<T: Real> ClosedPolyline<T> {
    pub fn all_finite(&self) -> bool {
        self.vertices.iter().all(|v| v[0].is_finite() && v[1].is_finite())
    }

    /// Euclidean length, i.e. the one-dimensional variation of the closed path.
    pub fn length(&self) -> T {
        self.edges()
            .map(|(a, b)| ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt())
            .fold(T::zero(), |x, y| x + y)
    }
}

/// Radial mollifier profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MollifierProfile {
    /// `(1 - r^2)^3` on the unit ball.
    #[default]
    CubicBump,
    /// `exp(-1 / (1 - r^2))` on the unit ball.
    SmoothBump,
}

impl MollifierProfile {
    pub fn eval(self, r2: f64) -> f64 {
        if r2 >= 1.0 {
            return 0.0;
        }
        match self {
            MollifierProfile::CubicBump => (1.0 - r2).powi(3),
            MollifierProfile::SmoothBump => (-1.0 / (1.0 - r2)).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub epsilon: f64,
    #[serde(default)]
    pub profile: MollifierProfile,
}

impl MollifierSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mollifier radius must be positive, got {epsilon}"
            )));
        }
        Ok(MollifierSpec {
            epsilon,
            profile: MollifierProfile::CubicBump,
        })
    }

    pub fn with_profile(mut self, profile: MollifierProfile) -> Self {
        self.profile = profile;
        self
    }
}

/// Result of [`mollify`].
#[derive(Debug, Clone)]
pub struct Mollified {
    pub map: SampledMap<f64>,
    /// Set when the radius was below one grid spacing and `map` is the input.
    pub unchanged: bool,
}

/// Discrete convolution with the renormalized sampled kernel. The output
/// lives on the nodes whose kernel support stays inside the input grid.
pub fn mollify(f: &SampledMap<f64>, spec: &MollifierSpec) -> Result<Mollified> {
    if !(spec.epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mollifier radius must be positive, got {}",
            spec.epsilon
        )));
    }
    let g = f.grid();
    let d = f.dim_in();
    let h_min = g.spacing.iter().cloned().fold(f64::INFINITY, f64::min);
    if spec.epsilon < h_min {
        log::warn!(
            "mollifier radius {} below grid spacing {h_min}; returning input",
            spec.epsilon
        );
        return Ok(Mollified {
            map: f.clone(),
            unchanged: true,
        });
    }
    let radius: Vec<usize> = (0..d)
        .map(|a| (spec.epsilon / g.spacing[a] + 1e-9).floor() as usize)
        .collect();
    let mut out_shape = Vec::with_capacity(d);
    for a in 0..d {
        let n = g.shape[a] as i64 - 2 * radius[a] as i64;
        if n < 2 {
            return Err(Error::Shape(format!(
                "mollifier radius {} leaves fewer than 2 samples on axis {a}",
                spec.epsilon
            )));
        }
        out_shape.push(n as usize);
    }

    // Kernel offsets and weights, renormalized to unit sum.
    let kshape: Vec<usize> = radius.iter().map(|r| 2 * r + 1).collect();
    let kn: usize = kshape.iter().product();
    let mut offsets: Vec<Vec<i64>> = Vec::new();
    let mut kweights = Vec::new();
    let mut kidx = vec![0usize; d];
    for p in 0..kn {
        unravel(p, &kshape, &mut kidx);
        let off: Vec<i64> = (0..d).map(|a| kidx[a] as i64 - radius[a] as i64).collect();
        let r2: f64 = (0..d)
            .map(|a| (off[a] as f64 * g.spacing[a] / spec.epsilon).powi(2))
            .sum();
        let w = spec.profile.eval(r2);
        if w > 0.0 {
            offsets.push(off);
            kweights.push(w);
        }
    }
    let total: f64 = kweights.iter().sum();
    kweights.iter_mut().for_each(|w| *w /= total);

    let strides = g.strides();
    let flat_offsets: Vec<i64> = offsets
        .iter()
        .map(|off| (0..d).map(|a| off[a] * strides[a] as i64).sum())
        .collect();
    let m = f.dim_out();
    let out_n: usize = out_shape.iter().product();
    let values: Vec<f64> = {
        use rayon::prelude::*;
        let rows: Vec<Vec<f64>> = (0..out_n)
            .into_par_iter()
            .map(|p| {
                let mut idx = vec![0usize; d];
                unravel(p, &out_shape, &mut idx);
                let centre: i64 = (0..d)
                    .map(|a| ((idx[a] + radius[a]) * strides[a]) as i64)
                    .sum();
                // Averaging differences from the centre value keeps constants exact.
                let base = &f.values[centre as usize * m..(centre as usize + 1) * m];
                let mut acc = vec![0.0; m];
                for (off, w) in flat_offsets.iter().zip(&kweights) {
                    let q = (centre + off) as usize;
                    for c in 0..m {
                        acc[c] += w * (f.values[q * m + c] - base[c]);
                    }
                }
                acc.iter().zip(base).map(|(a, b)| b + a).collect()
            })
            .collect();
        rows.into_iter().flatten().collect()
    };
    let origin = (0..d).map(|a| g.coord(a, radius[a])).collect();
    let grid = Grid::new(out_shape, g.spacing.clone(), origin)?;
    Ok(Mollified {
        map: SampledMap::new(grid, m, values)?,
        unchanged: false,
    })
}

/// Restriction of a 3D map to the plane `x_axis = t`, interpolated linearly
/// between the two bracketing sample planes. The remaining axes keep their
/// order.
pub fn restrict_slice<T: Scalar>(f: &SampledMap<T>, axis: usize, t: &T) -> Result<SampledMap<T>> {
    if f.dim_in() != 3 {
        return Err(Error::Shape(format!(
            "slicing needs a 3D domain, got dim_in {}",
            f.dim_in()
        )));
    }
    if axis >= 3 {
        return Err(Error::InvalidArgument(format!("slice axis {axis} not in 0..3")));
    }
    let g = f.grid();
    let (lo, hi) = g.extent(axis);
    if *t < lo || *t > hi {
        return Err(Error::InvalidArgument(format!(
            "slice position {t:?} outside [{lo:?}, {hi:?}] on axis {axis}"
        )));
    }
    let (i0, u) = g.locate(axis, t);
    let rest: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
    let shape: Vec<usize> = rest.iter().map(|&a| g.shape[a]).collect();
    let spacing = rest.iter().map(|&a| g.spacing[a].clone()).collect();
    let origin = rest.iter().map(|&a| g.origin[a].clone()).collect();
    let grid = Grid::new(shape.clone(), spacing, origin)?;
    let strides = g.strides();
    let m = f.dim_out();
    let one_minus = T::one() - u.clone();
    let mut values = Vec::with_capacity(shape[0] * shape[1] * m);
    for i in 0..shape[0] {
        for j in 0..shape[1] {
            let p = i0 * strides[axis] + i * strides[rest[0]] + j * strides[rest[1]];
            let q = p + strides[axis];
            for c in 0..m {
                let v = if u.is_zero() {
                    f.values[p * m + c].clone()
                } else {
                    one_minus.clone() * f.values[p * m + c].clone()
                        + u.clone() * f.values[q * m + c].clone()
                };
                values.push(v);
            }
        }
    }
    SampledMap::new(grid, m, values)
}

/// Drops output component `j` of a 3-component map, keeping the other two
/// in increasing order.
pub fn coordinate_pair<T: Scalar>(slice: &SampledMap<T>, j: usize) -> Result<SampledMap<T>> {
    if slice.dim_out() != 3 {
        return Err(Error::Shape(format!(
            "coordinate pair needs 3 outputs, got {}",
            slice.dim_out()
        )));
    }
    if j >= 3 {
        return Err(Error::InvalidArgument(format!("dropped component {j} not in 0..3")));
    }
    let (a, b) = match j {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let values = slice
        .values
        .chunks(3)
        .flat_map(|v| [v[a].clone(), v[b].clone()])
        .collect();
    SampledMap::new(slice.grid.clone(), 2, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn unit_grid(shape: &[usize]) -> Grid<f64> {
        let d = shape.len();
        Grid::spanning(shape, &vec![0.0; d], &vec![1.0; d]).unwrap()
    }

    #[test]
    fn grid_rejects_degenerate_axes() {
        assert!(Grid::new(vec![1, 4], vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(Grid::new(vec![3, 4], vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(Grid::new(vec![3, 4, 2, 2], vec![1.0; 4], vec![0.0; 4]).is_err());
    }

    #[test]
    fn total_variation_examples() {
        let zero = CellMeasure::zeros(vec![4], vec![1.0], vec![0.0], 2).unwrap();
        assert_eq!(total_variation(&zero), 0.0);
        let one = CellMeasure::new(vec![1], vec![1.0], vec![0.0], 2, vec![3.0, 4.0]).unwrap();
        assert_eq!(total_variation(&one), 5.0);
        let two =
            CellMeasure::new(vec![2], vec![1.0], vec![0.0], 2, vec![1.0, 0.0, -2.0, 0.0]).unwrap();
        assert_eq!(total_variation(&two), 3.0);
    }

    #[test]
    fn identity_slice_and_pairs() {
        let g = unit_grid(&[5, 5, 5]);
        let f = SampledMap::from_fn(g, 3, |x, o| o.copy_from_slice(x)).unwrap();
        let s = restrict_slice(&f, 2, &0.5).unwrap();
        assert_eq!(s.shape(), &[5, 5]);
        for i in 0..5 {
            for j in 0..5 {
                let v = s.at_index(&[i, j]);
                assert_eq!(v, &[i as f64 / 4.0, j as f64 / 4.0, 0.5]);
            }
        }
        let p = coordinate_pair(&s, 1).unwrap();
        assert_eq!(p.at_index(&[3, 1]), &[0.75, 0.5]);
    }

    #[test]
    fn slice_between_planes_interpolates() {
        let g = unit_grid(&[3, 3, 3]);
        let f = SampledMap::from_fn(g, 3, |x, o| {
            o[0] = x[0] * x[0];
            o[1] = x[1];
            o[2] = x[2];
        })
        .unwrap();
        let s = restrict_slice(&f, 0, &0.25).unwrap();
        // Linear between 0 and 0.25 along axis 0.
        assert!((s.at(0)[0] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn slice_errors() {
        let g = unit_grid(&[3, 3, 3]);
        let f = SampledMap::from_fn(g, 3, |x, o| o.copy_from_slice(x)).unwrap();
        assert!(restrict_slice(&f, 3, &0.5).is_err());
        assert!(restrict_slice(&f, 0, &1.5).is_err());
        let s = restrict_slice(&f, 0, &0.0).unwrap();
        assert!(coordinate_pair(&s, 3).is_err());
    }

    #[test]
    fn rational_slice_is_exact() {
        let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        let g = Grid::spanning(&[4, 4, 4], &[q(0, 1), q(0, 1), q(0, 1)], &[q(1, 1), q(1, 1), q(1, 1)])
            .unwrap();
        let f = SampledMap::from_fn(g, 3, |x, o| {
            o[0] = x[0].clone() * x[0].clone();
            o[1] = x[1].clone();
            o[2] = x[2].clone();
        })
        .unwrap();
        let s = restrict_slice(&f, 0, &q(1, 2)).unwrap();
        // Between x=1/3 and x=2/3: (1/9 + 4/9) / 2.
        assert_eq!(s.at(0)[0], q(5, 18));
    }

    #[test]
    fn mollify_constant_and_linear() {
        let g = unit_grid(&[41, 41]);
        let c = SampledMap::from_fn(g.clone(), 2, |_, o| {
            o[0] = 3.25;
            o[1] = -1.5;
        })
        .unwrap();
        let mc = mollify(&c, &MollifierSpec::new(0.1).unwrap()).unwrap();
        assert!(!mc.unchanged);
        for v in mc.map.values().chunks(2) {
            assert!((v[0] - 3.25).abs() < 1e-14 && (v[1] + 1.5).abs() < 1e-14);
        }
        let lin = SampledMap::from_fn(g, 2, |x, o| {
            o[0] = 2.0 * x[0] - x[1];
            o[1] = 0.5 * x[1];
        })
        .unwrap();
        let ml = mollify(&lin, &MollifierSpec::new(0.1).unwrap()).unwrap().map;
        assert_eq!(ml.shape(), &[33, 33]);
        let (x0, y0) = (ml.grid().origin[0], ml.grid().origin[1]);
        for i in 0..33 {
            for j in 0..33 {
                let x = x0 + i as f64 * 0.025;
                let y = y0 + j as f64 * 0.025;
                let v = ml.at_index(&[i, j]);
                assert!((v[0] - (2.0 * x - y)).abs() < 1e-12);
                assert!((v[1] - 0.5 * y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mollify_small_radius_returns_input() {
        let g = unit_grid(&[11]);
        let f = SampledMap::from_fn(g, 1, |x, o| o[0] = x[0]).unwrap();
        let m = mollify(&f, &MollifierSpec::new(0.05).unwrap()).unwrap();
        assert!(m.unchanged);
        assert_eq!(m.map, f);
        assert!(MollifierSpec::new(0.0).is_err());
        assert!(MollifierSpec::new(-1.0).is_err());
    }

    #[test]
    fn mollified_step_keeps_jump() {
        let g = unit_grid(&[201]);
        let f = SampledMap::from_fn(g, 1, |x, o| o[0] = if x[0] < 0.5 { 0.0 } else { 1.0 }).unwrap();
        let m = mollify(&f, &MollifierSpec::new(0.1).unwrap()).unwrap().map;
        let v = m.values();
        assert!(v.windows(2).all(|w| w[1] >= w[0]));
        // Exact discrete summation oracle: a monotone ramp from 0 to 1.
        let tv: f64 = v.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        assert!((tv - 1.0).abs() < 1e-12, "tv = {tv}");
    }

    #[test]
    fn difference_measure_uses_dual_cells() {
        let g = unit_grid(&[5, 9]);
        let f = SampledMap::from_fn(g, 1, |x, o| o[0] = x[1]).unwrap();
        let d1 = difference_measure(&f, 1).unwrap();
        assert_eq!(d1.shape, vec![5, 8]);
        assert!((d1.abs_mass() - 1.0).abs() < 1e-15);
        let d0 = difference_measure(&f, 0).unwrap();
        assert_eq!(d0.abs_mass(), 0.0);
        assert!(difference_measure(&f, 2).is_err());
    }

    #[test]
    fn interpolation_is_exact_on_multilinear_data() {
        let g = unit_grid(&[4, 5, 6]);
        let f = SampledMap::from_fn(g, 1, |x, o| o[0] = 1.0 + x[0] - 2.0 * x[1] + x[0] * x[2])
            .unwrap();
        let mut out = [0.0];
        // x0 * x2 is multilinear, so interpolation reproduces it exactly.
        f.interpolate(&[0.37, 0.81, 0.123], &mut out);
        assert!((out[0] - (1.0 + 0.37 - 2.0 * 0.81 + 0.37 * 0.123)).abs() < 1e-14);
    }

    #[test]
    fn permutations_relabel_axes() {
        let g = Grid::spanning(&[3, 4, 5], &[0.0; 3], &[1.0, 2.0, 3.0]).unwrap();
        let f = SampledMap::from_fn(g, 3, |x, o| o.copy_from_slice(x)).unwrap();
        let p = f.permute_axes(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[5, 3, 4]);
        assert_eq!(p.at_index(&[4, 2, 3]), f.at_index(&[2, 3, 4]));
        assert!(f.permute_axes(&[0, 0, 1]).is_err());
        let q = f.permute_outputs(&[2, 0, 1]).unwrap();
        assert_eq!(q.at(7)[0], f.at(7)[2]);
    }

    #[test]
    fn polyline_needs_three_vertices() {
        assert!(ClosedPolyline::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        let p = ClosedPolyline::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(p.edges().count(), 3);
        assert!((p.length() - (2.0 + 2f64.sqrt())).abs() < 1e-15);
    }
}
