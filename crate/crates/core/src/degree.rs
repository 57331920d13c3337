//! Planar topological degree via boundary winding numbers.
//!
//! The degree of `g` on a region at `y` is the winding number of the image
//! of the region's boundary around `y`. Boundaries are sampled as polylines;
//! for grid-sampled maps every grid-line crossing is inserted as a vertex so
//! the polyline follows the piecewise-bilinear interpolant closely. A point
//! closer to the image polyline than the stability margin (twice the largest
//! chord deviation of one boundary step) is refused instead of guessed.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ClosedPolyline, Grid, SampledMap};
use crate::gallery::GalleryMap;
use crate::report::{Check, VerificationReport};
use crate::scalar::Scalar;

/// Slope of the casting ray `y + s (1, GOLDEN_SLOPE)`.
pub const GOLDEN_SLOPE: f64 = 0.618_033_988_749_894_9;

/// Relative distance below which a point counts as lying on a polyline.
pub const ON_BOUNDARY_REL: f64 = 1e-12;

/// Skipped raster area above which an integral is rejected.
pub const MAX_SKIPPED_FRACTION: f64 = 0.05;

/// A continuous map of (part of) the plane into the plane.
pub trait PlanarMap: Sync {
    fn eval(&self, p: [f64; 2]) -> [f64; 2];

    /// Sampling grid whose lines must become boundary vertices, if any.
    fn grid(&self) -> Option<&Grid<f64>> {
        None
    }

    /// Closed rectangle on which the map is defined, if bounded.
    fn domain(&self) -> Option<([f64; 2], [f64; 2])> {
        None
    }

    fn validate(&self) -> Result<()> {
        Ok(())
    }
}

impl PlanarMap for SampledMap<f64> {
    fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        self.interpolate(&p, &mut out);
        out
    }

    fn grid(&self) -> Option<&Grid<f64>> {
        Some(SampledMap::grid(self))
    }

    fn domain(&self) -> Option<([f64; 2], [f64; 2])> {
        let g = SampledMap::grid(self);
        let (x0, x1) = g.extent(0);
        let (y0, y1) = g.extent(1);
        Some(([x0, y0], [x1, y1]))
    }

    fn validate(&self) -> Result<()> {
        if self.dim_in() != 2 || self.dim_out() != 2 {
            return Err(Error::Shape(format!(
                "planar degree needs a map R^2 -> R^2, got R^{} -> R^{}",
                self.dim_in(),
                self.dim_out()
            )));
        }
        Ok(())
    }
}

impl PlanarMap for GalleryMap {
    fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        GalleryMap::eval(self, &p, &mut out);
        out
    }

    fn domain(&self) -> Option<([f64; 2], [f64; 2])> {
        let (lo, hi) = self.spec().domain();
        Some(([lo[0], lo[1]], [hi[0], hi[1]]))
    }

    fn validate(&self) -> Result<()> {
        if self.dim_in() != 2 {
            return Err(Error::Shape(format!("{} is not planar", self.spec().label())));
        }
        Ok(())
    }
}

/// Closure adaptor: `FnMap(|p| [p[1], p[0]])`.
pub struct FnMap<F>(pub F);

impl<F: Fn([f64; 2]) -> [f64; 2] + Sync> PlanarMap for FnMap<F> {
    fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        (self.0)(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionKind {
    Disk { center: [f64; 2], radius: f64 },
    Rect { corner: [f64; 2], sides: [f64; 2] },
    /// Disk sector between the lattice angles `2π start / lattice` and
    /// `2π end / lattice`; arcs share vertices with a disk of the same
    /// radius sampled at `lattice` points.
    Sector {
        center: [f64; 2],
        radius: f64,
        start: usize,
        end: usize,
        lattice: usize,
    },
    /// Simple polygon with counterclockwise vertices.
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarRegion {
    pub kind: RegionKind,
    pub boundary_resolution: usize,
}

/// Default number of boundary samples.
pub const DEFAULT_BOUNDARY_RESOLUTION: usize = 512;

fn lattice_point(center: [f64; 2], radius: f64, i: usize, n: usize) -> [f64; 2] {
    let a = 2.0 * PI * i as f64 / n as f64;
    [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Squared distance from `p` to the segment `ab`.
pub fn segment_dist2(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return dist2(p, a);
    }
    let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    dist2(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

impl PlanarRegion {
    pub fn disk(center: [f64; 2], radius: f64) -> Self {
        PlanarRegion {
            kind: RegionKind::Disk { center, radius },
            boundary_resolution: DEFAULT_BOUNDARY_RESOLUTION,
        }
    }

    pub fn rect(corner: [f64; 2], sides: [f64; 2]) -> Self {
        PlanarRegion {
            kind: RegionKind::Rect { corner, sides },
            boundary_resolution: DEFAULT_BOUNDARY_RESOLUTION,
        }
    }

    pub fn sector(center: [f64; 2], radius: f64, start: usize, end: usize, lattice: usize) -> Self {
        PlanarRegion {
            kind: RegionKind::Sector {
                center,
                radius,
                start,
                end,
                lattice,
            },
            boundary_resolution: DEFAULT_BOUNDARY_RESOLUTION,
        }
    }

    pub fn polygon(vertices: Vec<[f64; 2]>) -> Self {
        PlanarRegion {
            kind: RegionKind::Polygon { vertices },
            boundary_resolution: DEFAULT_BOUNDARY_RESOLUTION,
        }
    }

    pub fn with_resolution(mut self, n: usize) -> Self {
        self.boundary_resolution = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.boundary_resolution < 8 {
            return Err(Error::InvalidArgument(format!(
                "boundary resolution must be >= 8, got {}",
                self.boundary_resolution
            )));
        }
        let ok = match &self.kind {
            RegionKind::Disk { center, radius } => *radius > 0.0 && finite(center) && radius.is_finite(),
            RegionKind::Rect { corner, sides } => {
                sides[0] > 0.0 && sides[1] > 0.0 && finite(corner) && finite(sides)
            }
            RegionKind::Sector {
                center,
                radius,
                start,
                end,
                lattice,
            } => {
                *radius > 0.0 && finite(center) && *lattice >= 3 && start < end && end - start <= *lattice
            }
            RegionKind::Polygon { vertices } => {
                vertices.len() >= 3 && vertices.iter().all(finite) && shoelace(vertices) > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid region {:?}", self.kind)))
        }
    }

    pub fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        match &self.kind {
            RegionKind::Disk { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            RegionKind::Rect { corner, sides } => {
                (*corner, [corner[0] + sides[0], corner[1] + sides[1]])
            }
            RegionKind::Sector { .. } | RegionKind::Polygon { .. } => {
                let pts: Vec<[f64; 2]> = self.pieces().iter().flat_map(|p| p.extremes()).collect();
                let mut lo = pts[0];
                let mut hi = pts[0];
                for p in &pts {
                    for a in 0..2 {
                        lo[a] = lo[a].min(p[a]);
                        hi[a] = hi[a].max(p[a]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Closed membership test.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match &self.kind {
            RegionKind::Disk { center, radius } => dist2(p, *center) <= radius * radius,
            RegionKind::Rect { corner, sides } => {
                p[0] >= corner[0]
                    && p[0] <= corner[0] + sides[0]
                    && p[1] >= corner[1]
                    && p[1] <= corner[1] + sides[1]
            }
            RegionKind::Sector {
                center,
                radius,
                start,
                end,
                lattice,
            } => {
                if dist2(p, *center) > radius * radius {
                    return false;
                }
                if p == *center {
                    return true;
                }
                let a0 = 2.0 * PI * *start as f64 / *lattice as f64;
                let span = 2.0 * PI * (*end - *start) as f64 / *lattice as f64;
                let ang = (p[1] - center[1]).atan2(p[0] - center[0]);
                let rel = (ang - a0).rem_euclid(2.0 * PI);
                rel <= span + 1e-12 || rel >= 2.0 * PI - 1e-12
            }
            RegionKind::Polygon { vertices } => {
                let n = vertices.len();
                let mut inside = false;
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    if segment_dist2(p, a, b) == 0.0 {
                        return true;
                    }
                    if (a[1] > p[1]) != (b[1] > p[1]) {
                        let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                        if p[0] < x {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }

    pub fn area(&self) -> f64 {
        match &self.kind {
            RegionKind::Disk { radius, .. } => PI * radius * radius,
            RegionKind::Rect { sides, .. } => sides[0] * sides[1],
            RegionKind::Sector {
                radius,
                start,
                end,
                lattice,
                ..
            } => PI * radius * radius * (*end - *start) as f64 / *lattice as f64,
            RegionKind::Polygon { vertices } => shoelace(vertices),
        }
    }

    fn pieces(&self) -> Vec<Piece> {
        let n = self.boundary_resolution;
        match &self.kind {
            RegionKind::Disk { center, radius } => (0..n)
                .map(|i| Piece::Arc {
                    center: *center,
                    radius: *radius,
                    i,
                    lattice: n,
                })
                .collect(),
            RegionKind::Rect { corner, sides } => {
                let c = [
                    *corner,
                    [corner[0] + sides[0], corner[1]],
                    [corner[0] + sides[0], corner[1] + sides[1]],
                    [corner[0], corner[1] + sides[1]],
                ];
                let perim = 2.0 * (sides[0] + sides[1]);
                (0..4)
                    .map(|k| {
                        let len = sides[k % 2];
                        Piece::Seg(c[k], c[(k + 1) % 4], subdivisions(n, len, perim))
                    })
                    .collect()
            }
            RegionKind::Sector {
                center,
                radius,
                start,
                end,
                lattice,
            } => {
                let radial = (n / 8).max(2);
                let mut out = vec![Piece::Seg(
                    *center,
                    lattice_point(*center, *radius, *start, *lattice),
                    radial,
                )];
                for i in *start..*end {
                    out.push(Piece::Arc {
                        center: *center,
                        radius: *radius,
                        i,
                        lattice: *lattice,
                    });
                }
                out.push(Piece::Seg(
                    lattice_point(*center, *radius, *end, *lattice),
                    *center,
                    radial,
                ));
                out
            }
            RegionKind::Polygon { vertices } => {
                let m = vertices.len();
                let perim: f64 = (0..m)
                    .map(|i| dist2(vertices[i], vertices[(i + 1) % m]).sqrt())
                    .sum();
                (0..m)
                    .map(|i| {
                        let (a, b) = (vertices[i], vertices[(i + 1) % m]);
                        Piece::Seg(a, b, subdivisions(n, dist2(a, b).sqrt(), perim))
                    })
                    .collect()
            }
        }
    }

    /// Boundary steps `(start, parameter midpoint)` in counterclockwise order.
    pub fn boundary_steps(&self, grid: Option<&Grid<f64>>) -> Vec<([f64; 2], [f64; 2])> {
        let mut out = Vec::new();
        for piece in self.pieces() {
            piece.steps(grid, &mut out);
        }
        out
    }
}

fn finite(p: &[f64; 2]) -> bool {
    p[0].is_finite() && p[1].is_finite()
}

fn shoelace(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    0.5 * (0..n)
        .map(|i| v[i][0] * v[(i + 1) % n][1] - v[(i + 1) % n][0] * v[i][1])
        .sum::<f64>()
}

fn subdivisions(n: usize, len: f64, perim: f64) -> usize {
    ((n as f64 * len / perim).ceil() as usize).max(1)
}

enum Piece {
    /// Straight segment split into `usize` equal parts.
    Seg([f64; 2], [f64; 2], usize),
    /// Arc between lattice angles `i` and `i + 1`.
    Arc {
        center: [f64; 2],
        radius: f64,
        i: usize,
        lattice: usize,
    },
}

impl Piece {
    fn extremes(&self) -> Vec<[f64; 2]> {
        match self {
            Piece::Seg(a, b, _) => vec![*a, *b],
            Piece::Arc {
                center,
                radius,
                i,
                lattice,
            } => {
                let mut v = vec![
                    lattice_point(*center, *radius, *i, *lattice),
                    lattice_point(*center, *radius, i + 1, *lattice),
                ];
                let a0 = 2.0 * PI * *i as f64 / *lattice as f64;
                let a1 = 2.0 * PI * (i + 1) as f64 / *lattice as f64;
                for q in 0..8 {
                    let a = q as f64 * PI / 2.0;
                    if a > a0 && a < a1 {
                        v.push([center[0] + radius * a.cos(), center[1] + radius * a.sin()]);
                    }
                }
                v
            }
        }
    }

    fn steps(&self, grid: Option<&Grid<f64>>, out: &mut Vec<([f64; 2], [f64; 2])>) {
        match self {
            Piece::Seg(p, q, m) => {
                // Work from the lexicographically smaller end so a segment
                // shared by two regions yields identical vertices.
                let rev = q < p;
                let (lo, hi) = if rev { (*q, *p) } else { (*p, *q) };
                let mut params: Vec<f64> = (0..=*m).map(|k| k as f64 / *m as f64).collect();
                if let Some(g) = grid {
                    for a in 0..2 {
                        let (x0, x1) = (lo[a].min(hi[a]), lo[a].max(hi[a]));
                        if hi[a] == lo[a] {
                            continue;
                        }
                        for x in grid_lines_between(g, a, x0, x1) {
                            params.push((x - lo[a]) / (hi[a] - lo[a]));
                        }
                    }
                }
                params.retain(|s| (0.0..=1.0).contains(s));
                params.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
                params.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
                let at = |s: f64| -> [f64; 2] {
                    if s == 1.0 {
                        hi
                    } else {
                        [lo[0] + (hi[0] - lo[0]) * s, lo[1] + (hi[1] - lo[1]) * s]
                    }
                };
                let k = params.len();
                if rev {
                    for i in (1..k).rev() {
                        out.push((at(params[i]), at(0.5 * (params[i - 1] + params[i]))));
                    }
                } else {
                    for i in 0..k - 1 {
                        out.push((at(params[i]), at(0.5 * (params[i] + params[i + 1]))));
                    }
                }
            }
            Piece::Arc {
                center,
                radius,
                i,
                lattice,
            } => {
                let a0 = 2.0 * PI * *i as f64 / *lattice as f64;
                let a1 = 2.0 * PI * (i + 1) as f64 / *lattice as f64;
                let mut angles = vec![a0, a1];
                if let Some(g) = grid {
                    let p0 = lattice_point(*center, *radius, *i, *lattice);
                    let p1 = lattice_point(*center, *radius, i + 1, *lattice);
                    for a in 0..2 {
                        let lo = p0[a].min(p1[a]) - radius * (a1 - a0);
                        let hi = p0[a].max(p1[a]) + radius * (a1 - a0);
                        for x in grid_lines_between(g, a, lo, hi) {
                            let c = (x - center[a]) / radius;
                            if c.abs() > 1.0 {
                                continue;
                            }
                            let base = if a == 0 { c.acos() } else { c.asin() };
                            let cands = if a == 0 {
                                [base, -base]
                            } else {
                                [base, PI - base]
                            };
                            for t in cands {
                                let k = ((a0 - t) / (2.0 * PI)).ceil();
                                let t = t + 2.0 * PI * k;
                                if t > a0 && t < a1 {
                                    angles.push(t);
                                }
                            }
                        }
                    }
                }
                angles.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
                angles.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
                let pt = |t: f64| [center[0] + radius * t.cos(), center[1] + radius * t.sin()];
                for w in angles.windows(2) {
                    let start = if w[0] == a0 {
                        lattice_point(*center, *radius, *i, *lattice)
                    } else {
                        pt(w[0])
                    };
                    out.push((start, pt(0.5 * (w[0] + w[1]))));
                }
            }
        }
    }
}

/// Grid-line coordinates strictly inside `(lo, hi)` on `axis`.
fn grid_lines_between(g: &Grid<f64>, axis: usize, lo: f64, hi: f64) -> Vec<f64> {
    let h = g.spacing[axis];
    let o = g.origin[axis];
    let n = g.shape[axis];
    let i0 = (((lo - o) / h).floor().max(0.0)) as usize;
    let i1 = ((((hi - o) / h).ceil()).max(0.0) as usize).min(n - 1);
    (i0..=i1)
        .map(|i| g.coord(axis, i))
        .filter(|x| *x > lo && *x < hi)
        .collect()
}

/// Winding number of `poly` around `y`, by signed crossings of the ray
/// `y + s (1, ξ)`, `s > 0`, with `ξ` the golden-ratio slope. Vertices on the
/// ray's line count as lying above it. Exact in rational arithmetic.
pub fn winding_number<T: Scalar>(poly: &ClosedPolyline<T>, y: &[T; 2]) -> Result<i64> {
    let (lo, hi) = poly.bbox();
    let sq = |v: T| v.clone() * v;
    let diam2 = sq(hi[0].clone() - lo[0].clone()) + sq(hi[1].clone() - lo[1].clone());
    let rel = T::from_f64(ON_BOUNDARY_REL * ON_BOUNDARY_REL).expect("representable tolerance");
    let tol2 = diam2 * rel;
    let xi = T::from_f64(GOLDEN_SLOPE).expect("representable slope");
    let side = |p: &[T; 2]| {
        (p[1].clone() - y[1].clone()) - xi.clone() * (p[0].clone() - y[0].clone())
    };
    let mut w = 0i64;
    for (a, b) in poly.edges() {
        let d2 = segment_dist2_generic(y, a, b);
        if d2 <= tol2 {
            return Err(Error::OnBoundary {
                distance: d2.approx().sqrt(),
            });
        }
        let (sa, sb) = (side(a), side(b));
        let zero = T::zero();
        let upward = sa < zero && sb >= zero;
        let downward = sa >= zero && sb < zero;
        if !(upward || downward) {
            continue;
        }
        let is_left = (b[0].clone() - a[0].clone()) * (y[1].clone() - a[1].clone())
            - (y[0].clone() - a[0].clone()) * (b[1].clone() - a[1].clone());
        if is_left.is_zero() {
            return Err(Error::OnBoundary { distance: 0.0 });
        }
        if upward && is_left > zero {
            w += 1;
        } else if downward && is_left < zero {
            w -= 1;
        }
    }
    Ok(w)
}

fn segment_dist2_generic<T: Scalar>(p: &[T; 2], a: &[T; 2], b: &[T; 2]) -> T {
    let d0 = b[0].clone() - a[0].clone();
    let d1 = b[1].clone() - a[1].clone();
    let len2 = d0.clone() * d0.clone() + d1.clone() * d1.clone();
    let r0 = p[0].clone() - a[0].clone();
    let r1 = p[1].clone() - a[1].clone();
    if len2.is_zero() {
        return r0.clone() * r0 + r1.clone() * r1;
    }
    let mut t = (r0.clone() * d0.clone() + r1.clone() * d1.clone()) / len2;
    if t < T::zero() {
        t = T::zero();
    }
    if t > T::one() {
        t = T::one();
    }
    let e0 = r0 - t.clone() * d0;
    let e1 = r1 - t * d1;
    e0.clone() * e0 + e1.clone() * e1
}

/// Sampled image of a region boundary with its stability margin.
#[derive(Debug, Clone)]
pub struct BoundaryImage {
    pub poly: ClosedPolyline<f64>,
    /// Largest distance between the image of a step's parameter midpoint and
    /// the midpoint of the step's image chord.
    pub chord_deviation: f64,
    /// Points closer than this to `poly` are refused.
    pub margin: f64,
    pub diameter: f64,
}

fn check_inside_domain<M: PlanarMap + ?Sized>(g: &M, region: &PlanarRegion) -> Result<()> {
    if let Some((dlo, dhi)) = g.domain() {
        let (lo, hi) = region.bbox();
        let tol = 1e-9 * (dhi[0] - dlo[0]).abs().max(dhi[1] - dlo[1]).max(1.0);
        for a in 0..2 {
            if lo[a] < dlo[a] - tol || hi[a] > dhi[a] + tol {
                return Err(Error::InvalidArgument(format!(
                    "region {:?} leaves the map domain [{:?}, {:?}]",
                    region.kind, dlo, dhi
                )));
            }
        }
    }
    Ok(())
}

pub fn boundary_image<M: PlanarMap + ?Sized>(g: &M, region: &PlanarRegion) -> Result<BoundaryImage> {
    g.validate()?;
    region.validate()?;
    check_inside_domain(g, region)?;
    let steps = region.boundary_steps(g.grid());
    let images: Vec<([f64; 2], [f64; 2])> = steps
        .par_iter()
        .map(|(s, m)| (g.eval(*s), g.eval(*m)))
        .collect();
    let n = images.len();
    let mut dev2: f64 = 0.0;
    for i in 0..n {
        let a = images[i].0;
        let b = images[(i + 1) % n].0;
        let chord_mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        dev2 = dev2.max(dist2(images[i].1, chord_mid));
    }
    let vertices: Vec<[f64; 2]> = images.iter().map(|p| p.0).collect();
    if vertices.iter().any(|v| !finite(v)) {
        return Err(Error::InvalidArgument("non-finite boundary image".into()));
    }
    let poly = ClosedPolyline::new(vertices)?;
    let (lo, hi) = poly.bbox();
    let diameter = dist2(lo, hi).sqrt();
    let chord_deviation = dev2.sqrt();
    Ok(BoundaryImage {
        poly,
        chord_deviation,
        margin: 2.0 * chord_deviation + ON_BOUNDARY_REL * diameter,
        diameter,
    })
}

/// Result of [`degree_integral`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeIntegral {
    /// `∫ deg dy`.
    pub signed: f64,
    /// `∫ |deg| dy`.
    pub absolute: f64,
    /// Raster area within the stability margin, left out of both integrals.
    pub skipped_area: f64,
    /// Area of the rasterized image bounding box.
    pub box_area: f64,
    pub raster: usize,
}

impl BoundaryImage {
    /// Minimum distance from `y` to the polyline.
    pub fn distance(&self, y: [f64; 2]) -> f64 {
        self.poly
            .edges()
            .map(|(a, b)| segment_dist2(y, *a, *b))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    pub fn degree(&self, y: [f64; 2]) -> Result<i64> {
        let d = self.distance(y);
        if d <= ON_BOUNDARY_REL * self.diameter {
            return Err(Error::OnBoundary { distance: d });
        }
        if d < self.margin {
            return Err(Error::UnstableDegree {
                distance: d,
                margin: self.margin,
            });
        }
        winding_number(&self.poly, &y)
    }

    /// Degrees at the centres of an `raster x raster` grid over the polyline's
    /// bounding box, with `None` for centres inside the stability margin.
    pub fn raster_degrees(&self, raster: usize) -> Option<RasterDegrees> {
        let (lo, hi) = self.poly.bbox();
        let w = [hi[0] - lo[0], hi[1] - lo[1]];
        let floor = ON_BOUNDARY_REL * self.diameter.max(f64::MIN_POSITIVE);
        if raster == 0 || w[0] <= floor || w[1] <= floor {
            return None;
        }
        let cell = [w[0] / raster as f64, w[1] / raster as f64];
        let yc = |j: usize| lo[1] + (j as f64 + 0.5) * cell[1];
        let xc = |i: usize| lo[0] + (i as f64 + 0.5) * cell[0];

        // Horizontal-scanline crossings per row, half-open in y.
        let mut rows: Vec<Vec<(f64, i32)>> = vec![Vec::new(); raster];
        for (a, b) in self.poly.edges() {
            if a[1] == b[1] {
                continue;
            }
            let (ylo, yhi, sign) = if a[1] < b[1] {
                (a[1], b[1], 1)
            } else {
                (b[1], a[1], -1)
            };
            let j0 = ((ylo - lo[1]) / cell[1] - 0.5).ceil().max(0.0) as usize;
            let mut j = j0.saturating_sub(1);
            while j < raster {
                let y = yc(j);
                if y >= yhi {
                    break;
                }
                if y >= ylo {
                    let x = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                    rows[j].push((x, sign));
                }
                j += 1;
            }
        }
        let mut degrees: Vec<i32> = rows
            .par_iter_mut()
            .flat_map_iter(|row| {
                row.sort_by(|p, q| p.0.partial_cmp(&q.0).expect("finite crossing"));
                let total: i32 = row.iter().map(|c| c.1).sum();
                let mut passed = 0i32;
                let mut k = 0usize;
                (0..raster)
                    .map(|i| {
                        let x = xc(i);
                        while k < row.len() && row[k].0 <= x {
                            passed += row[k].1;
                            k += 1;
                        }
                        total - passed
                    })
                    .collect::<Vec<i32>>()
            })
            .collect();

        // Centres within the margin of some edge are unresolved.
        let mut skipped = vec![false; raster * raster];
        let m = self.margin;
        let m2 = m * m;
        for (a, b) in self.poly.edges() {
            let (x0, x1) = (a[0].min(b[0]) - m, a[0].max(b[0]) + m);
            let (y0, y1) = (a[1].min(b[1]) - m, a[1].max(b[1]) + m);
            let i0 = ((x0 - lo[0]) / cell[0] - 0.5).ceil().max(0.0) as usize;
            let j0 = ((y0 - lo[1]) / cell[1] - 0.5).ceil().max(0.0) as usize;
            let i1 = (((x1 - lo[0]) / cell[0] - 0.5).floor()).min(raster as f64 - 1.0);
            let j1 = (((y1 - lo[1]) / cell[1] - 0.5).floor()).min(raster as f64 - 1.0);
            if i1 < 0.0 || j1 < 0.0 {
                continue;
            }
            for j in j0..=(j1 as usize) {
                for i in i0..=(i1 as usize) {
                    if segment_dist2([xc(i), yc(j)], *a, *b) < m2 {
                        skipped[j * raster + i] = true;
                    }
                }
            }
        }
        for (d, s) in degrees.iter_mut().zip(&skipped) {
            if *s {
                *d = 0;
            }
        }
        Some(RasterDegrees {
            lo,
            cell,
            raster,
            degrees,
            skipped,
        })
    }

    pub fn degree_integral(&self, raster: usize) -> Result<DegreeIntegral> {
        let Some(r) = self.raster_degrees(raster) else {
            return Ok(DegreeIntegral {
                signed: 0.0,
                absolute: 0.0,
                skipped_area: 0.0,
                box_area: 0.0,
                raster,
            });
        };
        let area = r.cell[0] * r.cell[1];
        let n_skipped = r.skipped.iter().filter(|s| **s).count();
        let frac = n_skipped as f64 / (raster * raster) as f64;
        if frac > MAX_SKIPPED_FRACTION {
            return Err(Error::DegenerateBoundary {
                skipped_fraction: frac,
                context: String::new(),
            });
        }
        let mut signed = 0i64;
        let mut absolute = 0i64;
        for d in &r.degrees {
            signed += *d as i64;
            absolute += d.unsigned_abs() as i64;
        }
        Ok(DegreeIntegral {
            signed: signed as f64 * area,
            absolute: absolute as f64 * area,
            skipped_area: n_skipped as f64 * area,
            box_area: area * (raster * raster) as f64,
            raster,
        })
    }
}

/// Degrees on a raster of cell centres.
#[derive(Debug, Clone)]
pub struct RasterDegrees {
    pub lo: [f64; 2],
    pub cell: [f64; 2],
    pub raster: usize,
    /// Row-major (`y` rows, `x` fastest); zero where skipped.
    pub degrees: Vec<i32>,
    pub skipped: Vec<bool>,
}

/// `deg(g, region, y)`; refuses points within the stability margin.
pub fn topological_degree<M: PlanarMap + ?Sized>(
    g: &M,
    region: &PlanarRegion,
    y: [f64; 2],
) -> Result<i64> {
    boundary_image(g, region)?.degree(y)
}

/// `∫ deg(g, region, y) dy` and `∫ |deg| dy` over a raster of the image
/// bounding box.
pub fn degree_integral<M: PlanarMap + ?Sized>(
    g: &M,
    region: &PlanarRegion,
    raster: usize,
) -> Result<DegreeIntegral> {
    boundary_image(g, region)?.degree_integral(raster)
}

fn in_triangle(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    let d1 = cross(a, b, p);
    let d2 = cross(b, c, p);
    let d3 = cross(c, a, p);
    let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(neg && pos)
}

/// Distance from `p` to the convex hull of four points.
fn hull_distance(p: [f64; 2], q: &[[f64; 2]; 4]) -> f64 {
    for (a, b, c) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
        if in_triangle(p, q[a], q[b], q[c]) {
            return 0.0;
        }
    }
    let mut best = f64::INFINITY;
    for a in 0..4 {
        for b in a + 1..4 {
            best = best.min(segment_dist2(p, q[a], q[b]));
        }
    }
    best.sqrt()
}

/// Resolution-stamped count of preimage components of `y`: cells of a
/// `res x res` cover of the region are marked when `y` lies within one image
/// diameter of the hull of the cell's corner images, and the marked cells are
/// grouped into 4-connected components.
pub fn preimage_count<M: PlanarMap + ?Sized>(
    g: &M,
    region: &PlanarRegion,
    y: [f64; 2],
    res: usize,
) -> Result<usize> {
    g.validate()?;
    region.validate()?;
    check_inside_domain(g, region)?;
    if res == 0 {
        return Err(Error::InvalidArgument("search resolution must be positive".into()));
    }
    let (lo, hi) = region.bbox();
    let step = [(hi[0] - lo[0]) / res as f64, (hi[1] - lo[1]) / res as f64];
    let node = |i: usize, j: usize| [lo[0] + i as f64 * step[0], lo[1] + j as f64 * step[1]];
    let n1 = res + 1;
    let images: Vec<([f64; 2], bool)> = (0..n1 * n1)
        .into_par_iter()
        .map(|p| {
            let x = node(p % n1, p / n1);
            (g.eval(x), region.contains(x))
        })
        .collect();
    let marked: Vec<bool> = (0..res * res)
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c % res, c / res);
            let ids = [j * n1 + i, j * n1 + i + 1, (j + 1) * n1 + i + 1, (j + 1) * n1 + i];
            let centre = [lo[0] + (i as f64 + 0.5) * step[0], lo[1] + (j as f64 + 0.5) * step[1]];
            if !(region.contains(centre) || ids.iter().any(|&k| images[k].1)) {
                return false;
            }
            let q = ids.map(|k| images[k].0);
            let mut diam2: f64 = 0.0;
            for a in 0..4 {
                for b in a + 1..4 {
                    diam2 = diam2.max(dist2(q[a], q[b]));
                }
            }
            hull_distance(y, &q) <= diam2.sqrt()
        })
        .collect();
    let mut seen = vec![false; res * res];
    let mut components = 0;
    let mut queue = VecDeque::new();
    for start in 0..res * res {
        if !marked[start] || seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            let (i, j) = (c % res, c / res);
            let mut visit = |k: usize| {
                if marked[k] && !seen[k] {
                    seen[k] = true;
                    queue.push_back(k);
                }
            };
            if i > 0 {
                visit(c - 1);
            }
            if i + 1 < res {
                visit(c + 1);
            }
            if j > 0 {
                visit(c - res);
            }
            if j + 1 < res {
                visit(c + res);
            }
        }
    }
    Ok(components)
}

/// Both sides of a decomposition or excision identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomSides {
    pub whole: i64,
    pub parts: Vec<i64>,
}

impl AxiomSides {
    pub fn sum(&self) -> i64 {
        self.parts.iter().sum()
    }

    pub fn holds(&self) -> bool {
        self.whole == self.sum()
    }
}

/// Evaluates `deg(g, region, y)` and `deg(g, D_i, y)` when the identity
/// applies, i.e. `y ∉ g(region \ ∪ D_i)`. Membership is tested on a
/// `res x res` sample of the region: a sample outside every `D_i` whose
/// image lies within one local image step of `y` makes the case
/// inapplicable (`Ok(None)`).
pub fn degree_axiom_sides<M: PlanarMap + ?Sized>(
    g: &M,
    region: &PlanarRegion,
    decomposition: &[PlanarRegion],
    y: [f64; 2],
    res: usize,
) -> Result<Option<AxiomSides>> {
    g.validate()?;
    region.validate()?;
    for d in decomposition {
        d.validate()?;
    }
    let (lo, hi) = region.bbox();
    let step = [(hi[0] - lo[0]) / res as f64, (hi[1] - lo[1]) / res as f64];
    let n1 = res + 1;
    let nodes: Vec<[f64; 2]> = (0..n1 * n1)
        .map(|p| [lo[0] + (p % n1) as f64 * step[0], lo[1] + (p / n1) as f64 * step[1]])
        .collect();
    let images: Vec<[f64; 2]> = nodes.par_iter().map(|x| g.eval(*x)).collect();
    let hits = (0..n1 * n1).into_par_iter().any(|p| {
        let x = nodes[p];
        if !region.contains(x) || decomposition.iter().any(|d| d.contains(x)) {
            return false;
        }
        let (i, j) = (p % n1, p / n1);
        let mut reach: f64 = 0.0;
        for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (a, b) = (i as i64 + di, j as i64 + dj);
            if a >= 0 && b >= 0 && (a as usize) < n1 && (b as usize) < n1 {
                reach = reach.max(dist2(images[p], images[b as usize * n1 + a as usize]));
            }
        }
        dist2(images[p], y) <= reach
    });
    if hits {
        return Ok(None);
    }
    let whole = topological_degree(g, region, y)?;
    let parts = decomposition
        .iter()
        .map(|d| topological_degree(g, d, y))
        .collect::<Result<Vec<i64>>>()?;
    Ok(Some(AxiomSides { whole, parts }))
}

/// Report form of [`degree_axiom_sides`]. Inapplicable cases yield a report
/// with a single informational row.
pub fn check_degree_axioms<M: PlanarMap + ?Sized>(
    g: &M,
    region: &PlanarRegion,
    decomposition: &[PlanarRegion],
    y: [f64; 2],
    res: usize,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("degree-axioms");
    report.meta("y", y).meta("pieces", decomposition.len());
    match degree_axiom_sides(g, region, decomposition, y, res)? {
        Some(s) => {
            report.push(Check::integer("degree_additivity", s.whole, s.sum()));
            report.meta("parts", &s.parts);
        }
        None => {
            report.push(
                Check::absolute("degree_additivity", 0.0, 0.0, 0.0)
                    .informational()
                    .with_note("not applicable: y is attained outside the pieces"),
            );
        }
    }
    Ok(report)
}

/// Random guillotine partition of a rectangle into `pieces` rectangles.
pub fn random_guillotine<R: Rng>(region: &PlanarRegion, pieces: usize, rng: &mut R) -> Result<Vec<PlanarRegion>> {
    let RegionKind::Rect { corner, sides } = region.kind else {
        return Err(Error::InvalidArgument("guillotine split needs a rectangle".into()));
    };
    let mut rects = vec![(corner, sides)];
    while rects.len() < pieces.max(1) {
        // Split the largest piece across its longer side.
        let (k, _) = rects
            .iter()
            .enumerate()
            .map(|(k, r)| (k, r.1[0] * r.1[1]))
            .fold((0, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        let (c, s) = rects.remove(k);
        let axis = if s[0] >= s[1] { 0 } else { 1 };
        let f = rng.gen_range(0.25..0.75);
        let mut s1 = s;
        s1[axis] = s[axis] * f;
        let mut c2 = c;
        c2[axis] = c[axis] + s1[axis];
        let mut s2 = s;
        s2[axis] = s[axis] - s1[axis];
        rects.insert(k, (c2, s2));
        rects.insert(k, (c, s1));
    }
    Ok(rects
        .into_iter()
        .map(|(c, s)| PlanarRegion::rect(c, s).with_resolution(region.boundary_resolution))
        .collect())
}

/// Random partition of a disk into `pieces` lattice sectors.
pub fn random_sectors<R: Rng>(region: &PlanarRegion, pieces: usize, rng: &mut R) -> Result<Vec<PlanarRegion>> {
    let RegionKind::Disk { center, radius } = region.kind else {
        return Err(Error::InvalidArgument("sector split needs a disk".into()));
    };
    let n = region.boundary_resolution;
    let pieces = pieces.clamp(2, n / 2);
    let mut cuts: Vec<usize> = Vec::with_capacity(pieces);
    while cuts.len() < pieces {
        let c = rng.gen_range(0..n);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(pieces);
    for k in 0..pieces {
        let start = cuts[k];
        let end = if k + 1 < pieces { cuts[k + 1] } else { cuts[0] + n };
        out.push(PlanarRegion::sector(center, radius, start, end, n).with_resolution(n));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::GallerySpec;
    use num_rational::BigRational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn circle(n: usize, turns: usize) -> ClosedPolyline<f64> {
        ClosedPolyline::new(
            (0..n)
                .map(|i| {
                    let t = 2.0 * PI * (turns * i) as f64 / n as f64;
                    [t.cos(), t.sin()]
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn winding_examples() {
        assert_eq!(winding_number(&circle(64, 1), &[0.0, 0.0]).unwrap(), 1);
        assert_eq!(winding_number(&circle(64, 1), &[2.0, 0.0]).unwrap(), 0);
        assert_eq!(winding_number(&circle(64, 2), &[0.0, 0.0]).unwrap(), 2);
        let cw = ClosedPolyline::new(circle(64, 1).vertices().iter().rev().cloned().collect()).unwrap();
        assert_eq!(winding_number(&cw, &[0.1, 0.2]).unwrap(), -1);
        assert!(matches!(
            winding_number(&circle(64, 1), &[1.0, 0.0]),
            Err(Error::OnBoundary { .. })
        ));
    }

    #[test]
    fn winding_on_ray_vertices_in_rationals() {
        let q = |n: i64| BigRational::from_integer(n.into());
        // Square with a vertex exactly on the horizontal through y and
        // edges through the ray's line.
        let poly = ClosedPolyline::new(vec![
            [q(-1), q(-1)],
            [q(1), q(-1)],
            [q(1), q(0)],
            [q(1), q(1)],
            [q(-1), q(1)],
        ])
        .unwrap();
        assert_eq!(winding_number(&poly, &[q(0), q(0)]).unwrap(), 1);
        assert_eq!(winding_number(&poly, &[q(3), q(0)]).unwrap(), 0);
    }

    #[test]
    fn identity_degree_and_integral() {
        let id = FnMap(|p: [f64; 2]| p);
        let disk = PlanarRegion::disk([0.0, 0.0], 1.0);
        assert_eq!(topological_degree(&id, &disk, [0.0, 0.0]).unwrap(), 1);
        let r = 0.5;
        let di = degree_integral(&id, &PlanarRegion::disk([0.0, 0.0], r), 256).unwrap();
        assert!((di.signed - PI * r * r).abs() / (PI * r * r) < 0.02);
    }

    #[test]
    fn zpow_degree_and_integral() {
        let z2 = GallerySpec::Zpow { k: 2 }.evaluator().unwrap();
        let disk = PlanarRegion::disk([0.0, 0.0], 1.0).with_resolution(1024);
        assert_eq!(topological_degree(&z2, &disk, [0.3, 0.1]).unwrap(), 2);
        let di = degree_integral(&z2, &disk, 512).unwrap();
        assert!((di.signed - 2.0 * PI).abs() / (2.0 * PI) < 0.02, "{di:?}");
        assert!((di.absolute - 2.0 * PI).abs() / (2.0 * PI) < 0.02);
        assert_eq!(preimage_count(&z2, &disk, [0.3, 0.1], 256).unwrap(), 2);
    }

    #[test]
    fn reflection_has_negative_degree() {
        let refl = FnMap(|p: [f64; 2]| [p[1], p[0]]);
        let sq = PlanarRegion::rect([0.0, 0.0], [1.0, 1.0]);
        assert_eq!(topological_degree(&refl, &sq, [0.3, 0.6]).unwrap(), -1);
        let di = degree_integral(&refl, &sq, 256).unwrap();
        assert!((di.signed + 1.0).abs() < 0.02 && (di.absolute - 1.0).abs() < 0.02);
    }

    #[test]
    fn preimage_count_examples() {
        let id = FnMap(|p: [f64; 2]| p);
        let sq = PlanarRegion::rect([0.0, 0.0], [1.0, 1.0]);
        assert_eq!(preimage_count(&id, &sq, [0.4, 0.4], 64).unwrap(), 1);
        assert_eq!(preimage_count(&id, &sq, [3.0, 3.0], 64).unwrap(), 0);
    }

    #[test]
    fn sampled_map_boundary_follows_grid() {
        let g = Grid::spanning(&[9, 9], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let f = SampledMap::from_fn(g, 2, |x, o| {
            o[0] = x[0] * x[0] + x[1];
            o[1] = x[1];
        })
        .unwrap();
        let bi = boundary_image(&f, &PlanarRegion::rect([0.1, 0.1], [0.8, 0.8]).with_resolution(16)).unwrap();
        // Bilinear interpolant restricted to axis-aligned edges between grid
        // lines is linear, so the polyline has no chord deviation.
        assert!(bi.chord_deviation < 1e-15, "{}", bi.chord_deviation);
        let outside = PlanarRegion::rect([0.5, 0.5], [0.8, 0.8]);
        assert!(boundary_image(&f, &outside).is_err());
    }

    #[test]
    fn unstable_points_are_refused() {
        let z = GallerySpec::Zpow { k: 1 }.evaluator().unwrap();
        let disk = PlanarRegion::disk([0.0, 0.0], 0.5).with_resolution(16);
        let bi = boundary_image(&z, &disk).unwrap();
        assert!(bi.margin > 0.0);
        let near = [0.5 - 0.5 * bi.margin, 0.0];
        assert!(matches!(bi.degree(near), Err(Error::UnstableDegree { .. }) | Err(Error::OnBoundary { .. })));
    }

    #[test]
    fn axioms_examples() {
        let id = FnMap(|p: [f64; 2]| p);
        let sq = PlanarRegion::rect([0.0, 0.0], [1.0, 1.0]);
        let quads: Vec<PlanarRegion> = [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]]
            .iter()
            .map(|c| PlanarRegion::rect(*c, [0.5, 0.5]))
            .collect();
        let s = degree_axiom_sides(&id, &sq, &quads, [0.2, 0.3], 64).unwrap().unwrap();
        assert_eq!(s.whole, 1);
        assert_eq!(s.parts, vec![1, 0, 0, 0]);
        let s = degree_axiom_sides(&id, &sq, &quads, [2.0, 2.0], 64).unwrap().unwrap();
        assert!(s.holds() && s.whole == 0);

        let z2 = GallerySpec::Zpow { k: 2 }.evaluator().unwrap();
        let disk = PlanarRegion::disk([0.0, 0.0], 1.0).with_resolution(512);
        let halves = vec![
            PlanarRegion::sector([0.0, 0.0], 1.0, 0, 256, 512),
            PlanarRegion::sector([0.0, 0.0], 1.0, 256, 512, 512),
        ];
        let s = degree_axiom_sides(&z2, &disk, &halves, [0.3, 0.1], 128).unwrap().unwrap();
        assert_eq!((s.whole, s.parts.clone()), (2, vec![1, 1]));

        // Excision: a sub-square missing the preimage is inapplicable.
        let small = vec![PlanarRegion::rect([0.6, 0.6], [0.2, 0.2])];
        assert!(degree_axiom_sides(&id, &sq, &small, [0.2, 0.3], 64).unwrap().is_none());
        let s = degree_axiom_sides(&id, &sq, &small, [0.7, 0.7], 64).unwrap().unwrap();
        assert!(s.holds());
    }

    #[test]
    fn random_partitions_cover() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sq = PlanarRegion::rect([0.0, 0.0], [1.0, 2.0]);
        let parts = random_guillotine(&sq, 5, &mut rng).unwrap();
        assert_eq!(parts.len(), 5);
        let a: f64 = parts.iter().map(|p| p.area()).sum();
        assert!((a - 2.0).abs() < 1e-12);
        let disk = PlanarRegion::disk([0.0, 0.0], 1.0).with_resolution(64);
        let secs = random_sectors(&disk, 3, &mut rng).unwrap();
        let a: f64 = secs.iter().map(|p| p.area()).sum();
        assert!((a - PI).abs() < 1e-12);
    }

    #[test]
    fn sector_membership() {
        let s = PlanarRegion::sector([0.0, 0.0], 1.0, 0, 2, 8);
        assert!(s.contains([0.5, 0.1]));
        assert!(s.contains([0.1, 0.5]));
        assert!(!s.contains([-0.5, 0.1]));
        let wrap = PlanarRegion::sector([0.0, 0.0], 1.0, 6, 10, 8);
        assert!(wrap.contains([0.5, -0.1]) && wrap.contains([0.5, 0.1]));
    }
}
