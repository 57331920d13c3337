//! Distributional Jacobians of planar maps and the degree side of the
//! Jacobian measure.
//!
//! [`distributional_jacobian`] pairs the sampled map with a test function in
//! the weak form `J_g(φ) = -∫ g_1 (∂_1 φ ∂_2 g_2 - ∂_2 φ ∂_1 g_2)`.
//! [`DyadicSurvey`] instead evaluates `J_g(Q) = ∫ deg(g, Q, y) dy` on dyadic
//! cells: every depth shares one raster of the image and one finest-level
//! boundary network, so cell winding numbers are exactly additive across
//! depths.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degree::{
    boundary_image, segment_dist2, PlanarMap, PlanarRegion, RegionKind, MAX_SKIPPED_FRACTION,
    ON_BOUNDARY_REL,
};
use crate::error::{Error, Result};
use crate::field::{coordinate_pair, mollify, CellMeasure, MollifierSpec, SampledMap};
use crate::report::{Check, VerificationReport};

/// Smooth, compactly supported scalar function on the plane.
pub trait TestFunction: Sync {
    fn value(&self, x: [f64; 2]) -> f64;
    fn grad(&self, x: [f64; 2]) -> [f64; 2];
    /// Closed box outside which the function vanishes.
    fn support(&self) -> ([f64; 2], [f64; 2]);
}

fn bump_profile(v: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        (-1.0 / v).exp()
    }
}

fn bump_profile_deriv(v: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        (-1.0 / v).exp() / (v * v)
    }
}

/// Smooth step: 1 for `u <= 0`, 0 for `u >= 1`.
pub fn smooth_step(u: f64) -> f64 {
    let a = bump_profile(1.0 - u);
    let b = bump_profile(u);
    if a + b == 0.0 {
        return if u <= 0.0 { 1.0 } else { 0.0 };
    }
    a / (a + b)
}

pub fn smooth_step_deriv(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let (a, b) = (bump_profile(1.0 - u), bump_profile(u));
    let (da, db) = (-bump_profile_deriv(1.0 - u), bump_profile_deriv(u));
    (da * b - a * db) / ((a + b) * (a + b))
}

/// `exp(-1 / (1 - |x - c|^2 / r^2))` on the disk `B(c, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Bump {
    /// `∫ φ` by composite Simpson on the radial profile.
    pub fn integral(&self) -> f64 {
        let n = 20_000;
        let h = 1.0 / n as f64;
        let f = |s: f64| bump_profile(1.0 - s * s) * s;
        let mut acc = f(0.0) + f(1.0);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        2.0 * PI * self.radius * self.radius * acc * h / 3.0
    }
}

impl TestFunction for Bump {
    fn value(&self, x: [f64; 2]) -> f64 {
        let s2 = ((x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2))
            / (self.radius * self.radius);
        bump_profile(1.0 - s2)
    }

    fn grad(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        let r2 = self.radius * self.radius;
        let s2 = (d[0] * d[0] + d[1] * d[1]) / r2;
        let k = -bump_profile_deriv(1.0 - s2) * 2.0 / r2;
        [k * d[0], k * d[1]]
    }

    fn support(&self) -> ([f64; 2], [f64; 2]) {
        (
            [self.center[0] - self.radius, self.center[1] - self.radius],
            [self.center[0] + self.radius, self.center[1] + self.radius],
        )
    }
}

/// Smoothed indicator `Φ_δ` of a disk or rectangle: 1 at depth `>= δ`
/// inside the region, 0 outside it, with a smooth radial (or per-axis)
/// transition in between.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifiedIndicator {
    pub region: RegionKind,
    pub delta: f64,
}

impl MollifiedIndicator {
    pub fn new(region: &PlanarRegion, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!("width must be positive, got {delta}")));
        }
        match &region.kind {
            RegionKind::Disk { radius, .. } if delta < *radius => {}
            RegionKind::Rect { sides, .. } if 2.0 * delta < sides[0].min(sides[1]) => {}
            RegionKind::Disk { .. } | RegionKind::Rect { .. } => {
                return Err(Error::InvalidArgument(format!(
                    "width {delta} too large for region {:?}",
                    region.kind
                )))
            }
            other => {
                return Err(Error::Unsupported(format!(
                    "smoothed indicators exist for disks and rectangles, not {other:?}"
                )))
            }
        }
        Ok(MollifiedIndicator {
            region: region.kind.clone(),
            delta,
        })
    }

    fn axis_factor(&self, t: f64, a: f64, b: f64) -> (f64, f64) {
        let d = self.delta;
        let (u1, u2) = ((a + d - t) / d, (t - (b - d)) / d);
        let (s1, s2) = (smooth_step(u1), smooth_step(u2));
        let ds = -smooth_step_deriv(u1) / d * s2 + s1 * smooth_step_deriv(u2) / d;
        (s1 * s2, ds)
    }
}

impl TestFunction for MollifiedIndicator {
    fn value(&self, x: [f64; 2]) -> f64 {
        match &self.region {
            RegionKind::Disk { center, radius } => {
                let s = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
                smooth_step((s - (radius - self.delta)) / self.delta)
            }
            RegionKind::Rect { corner, sides } => {
                self.axis_factor(x[0], corner[0], corner[0] + sides[0]).0
                    * self.axis_factor(x[1], corner[1], corner[1] + sides[1]).0
            }
            _ => unreachable!("checked in the constructor"),
        }
    }

    fn grad(&self, x: [f64; 2]) -> [f64; 2] {
        match &self.region {
            RegionKind::Disk { center, radius } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                let s = (d[0] * d[0] + d[1] * d[1]).sqrt();
                if s == 0.0 {
                    return [0.0, 0.0];
                }
                let k = smooth_step_deriv((s - (radius - self.delta)) / self.delta) / self.delta / s;
                [k * d[0], k * d[1]]
            }
            RegionKind::Rect { corner, sides } => {
                let (fx, dfx) = self.axis_factor(x[0], corner[0], corner[0] + sides[0]);
                let (fy, dfy) = self.axis_factor(x[1], corner[1], corner[1] + sides[1]);
                [dfx * fy, fx * dfy]
            }
            _ => unreachable!("checked in the constructor"),
        }
    }

    fn support(&self) -> ([f64; 2], [f64; 2]) {
        match &self.region {
            RegionKind::Disk { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            RegionKind::Rect { corner, sides } => {
                (*corner, [corner[0] + sides[0], corner[1] + sides[1]])
            }
            _ => unreachable!("checked in the constructor"),
        }
    }
}

fn planar_check(g: &SampledMap<f64>) -> Result<()> {
    PlanarMap::validate(g)
}

/// `J_g(φ) = -Σ_cells g_1 (∂_1 φ Δ_2 g_2 - ∂_2 φ Δ_1 g_2)` at cell centres,
/// with `g_1` averaged over the cell corners and the differences averaged
/// over the two parallel cell edges.
pub fn distributional_jacobian(g: &SampledMap<f64>, phi: &dyn TestFunction) -> Result<f64> {
    planar_check(g)?;
    let grid = g.grid();
    let (h0, h1) = (grid.spacing[0], grid.spacing[1]);
    let (slo, shi) = phi.support();
    let (x0, x1) = grid.extent(0);
    let (y0, y1) = grid.extent(1);
    let eps = 1e-9 * h0.min(h1);
    if slo[0] < x0 + h0 - eps || shi[0] > x1 - h0 + eps || slo[1] < y0 + h1 - eps || shi[1] > y1 - h1 + eps {
        return Err(Error::InvalidArgument(format!(
            "test-function support [{slo:?}, {shi:?}] needs a one-cell margin inside the grid"
        )));
    }
    let n = grid.shape[1];
    let i_lo = ((slo[0] - x0) / h0).floor().max(0.0) as usize;
    let i_hi = (((shi[0] - x0) / h0).ceil() as usize).min(grid.shape[0] - 1);
    let j_lo = ((slo[1] - y0) / h1).floor().max(0.0) as usize;
    let j_hi = (((shi[1] - y0) / h1).ceil() as usize).min(n - 1);
    let v = g.values();
    let row_sums: Vec<f64> = (i_lo..i_hi)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in j_lo..j_hi {
                let p00 = i * n + j;
                let p01 = p00 + 1;
                let p10 = p00 + n;
                let p11 = p10 + 1;
                let g1 = 0.25 * (v[2 * p00] + v[2 * p01] + v[2 * p10] + v[2 * p11]);
                let d1g2 = 0.5 * ((v[2 * p10 + 1] - v[2 * p00 + 1]) + (v[2 * p11 + 1] - v[2 * p01 + 1])) / h0;
                let d2g2 = 0.5 * ((v[2 * p01 + 1] - v[2 * p00 + 1]) + (v[2 * p11 + 1] - v[2 * p10 + 1])) / h1;
                let c = [x0 + (i as f64 + 0.5) * h0, y0 + (j as f64 + 0.5) * h1];
                let dphi = phi.grad(c);
                acc += g1 * (dphi[0] * d2g2 - dphi[1] * d1g2);
            }
            acc
        })
        .collect();
    Ok(-row_sums.iter().sum::<f64>() * h0 * h1)
}

/// Richardson limit of values at widths `δ, δ/2, δ/4` under an expansion
/// `J0 + a δ + b δ^2`.
pub fn richardson3(j_delta: f64, j_half: f64, j_quarter: f64) -> f64 {
    (8.0 * j_quarter - 6.0 * j_half + j_delta) / 3.0
}

/// Both sides of the degree identity on one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeIdentity {
    /// `∫ deg(g, region, y) dy`.
    pub degree_side: f64,
    /// Extrapolated `J_g(1_region)`.
    pub jacobian_side: f64,
    /// Widths `δ, δ/2, δ/4`.
    pub deltas: [f64; 3],
    /// `J_g(Φ_δ)` at the three widths.
    pub pairings: [f64; 3],
    pub skipped_area: f64,
}

impl DegreeIdentity {
    pub fn gap(&self) -> f64 {
        crate::report::relative_gap(self.jacobian_side, self.degree_side)
    }
}

/// Compares `∫ deg(g, region, y) dy` with the distributional Jacobian
/// paired against smoothed indicators of the region.
pub fn degree_identity(
    g: &SampledMap<f64>,
    region: &PlanarRegion,
    raster: usize,
    delta: f64,
) -> Result<DegreeIdentity> {
    let di = boundary_image(g, region)?.degree_integral(raster)?;
    let deltas = [delta, delta / 2.0, delta / 4.0];
    let h = g.grid().spacing[0].max(g.grid().spacing[1]);
    if deltas[2] < 6.0 * h {
        log::warn!("smallest indicator width {} spans fewer than 6 grid cells", deltas[2]);
    }
    let mut pairings = [0.0; 3];
    for (p, d) in pairings.iter_mut().zip(deltas) {
        let phi = MollifiedIndicator::new(region, d)?;
        *p = distributional_jacobian(g, &phi)?;
    }
    Ok(DegreeIdentity {
        degree_side: di.signed,
        jacobian_side: richardson3(pairings[0], pairings[1], pairings[2]),
        deltas,
        pairings,
        skipped_area: di.skipped_area,
    })
}

pub fn verify_degree_identity(
    g: &SampledMap<f64>,
    region: &PlanarRegion,
    raster: usize,
    delta: f64,
    tol: f64,
) -> Result<VerificationReport> {
    let d = degree_identity(g, region, raster, delta)?;
    let mut r = VerificationReport::new("degree-identity");
    r.push(Check::relative("degree_integral_vs_jacobian", d.degree_side, d.jacobian_side, tol));
    r.meta("deltas", d.deltas)
        .meta("pairings", d.pairings)
        .meta("skipped_area", d.skipped_area);
    Ok(r)
}

/// Anchor offsets, as fractions of the cell side, tried in order when a
/// dyadic grid meets a degenerate boundary.
pub const JITTER: [f64; 4] = [0.0, 0.309_016_994_374_947_4, 0.118_033_988_749_894_9, 0.427_050_983_124_842_3];

/// Position of the survey raster points inside their raster cells. Gallery
/// maps take dyadic values on dyadic lines, so centred points would sit
/// exactly on cell-boundary images.
const RASTER_OFFSET: [f64; 2] = [0.530_901_699_437_494_7, 0.518_033_988_749_894_9];

/// Dyadic squares of side `side / 2^depth` aligned to `anchor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicGrid {
    pub anchor: [f64; 2],
    /// Side of the depth-0 squares.
    pub side: f64,
}

impl DyadicGrid {
    /// Grid whose depth-0 square is the bounding square of the rectangle.
    pub fn for_rect(corner: [f64; 2], sides: [f64; 2]) -> Self {
        DyadicGrid {
            anchor: corner,
            side: sides[0].max(sides[1]),
        }
    }

    /// Lattice coordinates of depth `depth` on one axis, clipped to `[lo, hi]`.
    fn lines(&self, axis: usize, lo: f64, hi: f64, depth: u32, jitter: f64) -> Vec<(f64, i64)> {
        let s = self.side / (1u64 << depth) as f64;
        let a = self.anchor[axis] + jitter * s;
        let k0 = ((lo - a) / s).floor() as i64;
        let k1 = ((hi - a) / s).ceil() as i64;
        let mut out = vec![(lo, i64::MIN)];
        for k in k0..=k1 {
            let x = a + k as f64 * s;
            if x > lo + 1e-12 * s && x < hi - 1e-12 * s {
                out.push((x, k));
            }
        }
        out.push((hi, i64::MAX));
        out
    }
}

/// Per-depth Jacobian masses of dyadic cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMasses {
    pub depth: u32,
    /// Cell counts `(nx, ny)`; cells are row-major with `y` fastest.
    pub shape: [usize; 2],
    /// Cell rectangles `(corner, sides)` after clipping to the region.
    pub cells: Vec<([f64; 2], [f64; 2])>,
    /// `∫ deg(g, Q, y) dy` per cell.
    pub signed: Vec<f64>,
    /// `∫ |deg(g, Q, y)| dy` per cell.
    pub absolute: Vec<f64>,
    /// Raster sums of `deg` and `|deg|` per cell; the masses above are these
    /// times `pixel_area`.
    pub signed_counts: Vec<i64>,
    pub absolute_counts: Vec<i64>,
    pub pixel_area: f64,
}

impl DepthMasses {
    /// `Σ_Q |∫ deg|`.
    pub fn u(&self) -> f64 {
        self.signed_counts.iter().map(|c| c.abs()).sum::<i64>() as f64 * self.pixel_area
    }

    /// `Σ_Q ∫ |deg|`.
    pub fn v(&self) -> f64 {
        self.absolute_counts.iter().sum::<i64>() as f64 * self.pixel_area
    }

    /// Signed masses as a cell measure; clipped boundary cells keep the
    /// nominal spacing.
    pub fn measure(&self, side: f64) -> Result<CellMeasure<f64>> {
        let origin = self.cells.first().map(|c| c.0).unwrap_or([0.0, 0.0]);
        CellMeasure::new(
            self.shape.to_vec(),
            vec![side, side],
            origin.to_vec(),
            1,
            self.signed.clone(),
        )
    }
}

/// Dyadic Jacobian survey of a planar map over a rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicSurvey {
    pub depths: Vec<DepthMasses>,
    /// Index into [`JITTER`] of the anchor offset that was used.
    pub jitter_index: usize,
    pub raster: usize,
    pub skipped_fraction: f64,
    pub cell_side: f64,
}

/// Survey settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurveyConfig {
    /// Deepest level; every level `1..=max_depth` is reported.
    pub max_depth: u32,
    /// Raster points per axis over the image of the whole region.
    pub raster: usize,
    /// Straight pieces per finest-cell edge (grid crossings come on top).
    pub edge_subdivisions: usize,
}

impl Default for SurveyConfig {
    fn default() -> Self {
        SurveyConfig {
            max_depth: 2,
            raster: 256,
            edge_subdivisions: 8,
        }
    }
}

/// Image polyline of one finest-lattice edge, oriented from its
/// lexicographically smaller end.
struct EdgeImage {
    points: Vec<[f64; 2]>,
}

impl DyadicSurvey {
    pub fn at_depth(&self, depth: u32) -> Option<&DepthMasses> {
        self.depths.iter().find(|d| d.depth == depth)
    }

    pub fn finest(&self) -> &DepthMasses {
        self.depths.last().expect("at least one depth")
    }

    /// Runs the survey with each anchor offset in [`JITTER`] until no cell is
    /// degenerate.
    pub fn run<M: PlanarMap + ?Sized>(
        g: &M,
        corner: [f64; 2],
        sides: [f64; 2],
        dyadic: &DyadicGrid,
        config: &SurveyConfig,
    ) -> Result<DyadicSurvey> {
        g.validate()?;
        if config.max_depth == 0 || config.max_depth > 12 {
            return Err(Error::InvalidArgument(format!(
                "dyadic depth must be in 1..=12, got {}",
                config.max_depth
            )));
        }
        if config.raster < 2 || config.edge_subdivisions == 0 {
            return Err(Error::InvalidArgument("raster and subdivisions must be positive".into()));
        }
        if let Some(grid) = g.grid() {
            let side = dyadic.side / (1u64 << config.max_depth) as f64;
            let per_side = side / grid.spacing[0].max(grid.spacing[1]);
            if per_side < 3.0 {
                log::warn!(
                    "finest dyadic cells span {per_side:.1} grid steps; refine the grid or lower the depth"
                );
            }
        }
        let region = PlanarRegion::rect(corner, sides);
        region.validate()?;
        if let Some((dlo, dhi)) = g.domain() {
            let tol = 1e-9 * sides[0].max(sides[1]);
            if corner[0] < dlo[0] - tol
                || corner[1] < dlo[1] - tol
                || corner[0] + sides[0] > dhi[0] + tol
                || corner[1] + sides[1] > dhi[1] + tol
            {
                return Err(Error::InvalidArgument("survey rectangle leaves the map domain".into()));
            }
        }
        let mut last_err = None;
        for (k, &jitter) in JITTER.iter().enumerate() {
            match survey_once(g, corner, sides, dyadic, config, jitter) {
                Ok(mut s) => {
                    s.jitter_index = k;
                    return Ok(s);
                }
                Err(e @ Error::DegenerateBoundary { .. }) => {
                    log::debug!("dyadic anchor offset {jitter} rejected: {e}");
                    last_err = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_err.expect("at least one attempt"))
    }
}

fn survey_once<M: PlanarMap + ?Sized>(
    g: &M,
    corner: [f64; 2],
    sides: [f64; 2],
    dyadic: &DyadicGrid,
    config: &SurveyConfig,
    jitter: f64,
) -> Result<DyadicSurvey> {
    let dmax = config.max_depth;
    let hi = [corner[0] + sides[0], corner[1] + sides[1]];
    let xs = dyadic.lines(0, corner[0], hi[0], dmax, jitter);
    let ys = dyadic.lines(1, corner[1], hi[1], dmax, jitter);
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    let sub = config.edge_subdivisions;
    let grid = g.grid();

    // Horizontal edges h[j][i]: y = ys[j], x in [xs[i], xs[i+1]].
    let edge = |a: [f64; 2], b: [f64; 2], axis: usize| -> Vec<[f64; 2]> {
        let mut params: Vec<f64> = (0..=sub).map(|k| k as f64 / sub as f64).collect();
        if let Some(gr) = grid {
            let (lo, hi) = (a[axis], b[axis]);
            let hstep = gr.spacing[axis];
            let o = gr.origin[axis];
            let i0 = ((lo - o) / hstep).floor().max(0.0) as usize;
            let i1 = (((hi - o) / hstep).ceil().max(0.0) as usize).min(gr.shape[axis] - 1);
            for i in i0..=i1 {
                let x = gr.coord(axis, i);
                if x > lo && x < hi {
                    params.push((x - lo) / (hi - lo));
                }
            }
        }
        params.sort_by(|p, q| p.partial_cmp(q).expect("finite"));
        params.dedup_by(|p, q| (*p - *q).abs() < 1e-14);
        params
            .iter()
            .map(|&s| {
                if s == 0.0 {
                    a
                } else if s == 1.0 {
                    b
                } else {
                    let mut p = a;
                    p[axis] = a[axis] + (b[axis] - a[axis]) * s;
                    p
                }
            })
            .collect()
    };
    struct Built {
        image: EdgeImage,
        dev2: f64,
    }
    let build = |pts: Vec<[f64; 2]>| -> Built {
        let images: Vec<[f64; 2]> = pts.iter().map(|p| g.eval(*p)).collect();
        let mut dev2: f64 = 0.0;
        for k in 0..pts.len() - 1 {
            let mid = [0.5 * (pts[k][0] + pts[k + 1][0]), 0.5 * (pts[k][1] + pts[k + 1][1])];
            let gm = g.eval(mid);
            let cm = [
                0.5 * (images[k][0] + images[k + 1][0]),
                0.5 * (images[k][1] + images[k + 1][1]),
            ];
            dev2 = dev2.max((gm[0] - cm[0]).powi(2) + (gm[1] - cm[1]).powi(2));
        }
        Built {
            image: EdgeImage { points: images },
            dev2,
        }
    };
    let horizontal: Vec<Built> = (0..(ny + 1) * nx)
        .into_par_iter()
        .map(|e| {
            let (j, i) = (e / nx, e % nx);
            build(edge([xs[i].0, ys[j].0], [xs[i + 1].0, ys[j].0], 0))
        })
        .collect();
    let vertical: Vec<Built> = (0..(nx + 1) * ny)
        .into_par_iter()
        .map(|e| {
            let (i, j) = (e / ny, e % ny);
            build(edge([xs[i].0, ys[j].0], [xs[i].0, ys[j + 1].0], 1))
        })
        .collect();
    let hedge = |j: usize, i: usize| &horizontal[j * nx + i].image;
    let vedge = |i: usize, j: usize| &vertical[i * ny + j].image;

    // Global raster over the image of the whole network.
    let mut lo = [f64::INFINITY; 2];
    let mut hi_img = [f64::NEG_INFINITY; 2];
    let mut dev2: f64 = 0.0;
    for b in horizontal.iter().chain(&vertical) {
        dev2 = dev2.max(b.dev2);
        for p in &b.image.points {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::InvalidArgument("non-finite boundary image".into()));
            }
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi_img[a] = hi_img[a].max(p[a]);
            }
        }
    }
    let w = [hi_img[0] - lo[0], hi_img[1] - lo[1]];
    let diameter = (w[0] * w[0] + w[1] * w[1]).sqrt();
    let margin = 2.0 * dev2.sqrt() + ON_BOUNDARY_REL * diameter;
    let r = config.raster;
    let degenerate = w[0] <= ON_BOUNDARY_REL * diameter || w[1] <= ON_BOUNDARY_REL * diameter || diameter == 0.0;

    let side = dyadic.side / (1u64 << dmax) as f64;
    let depth_cells = |d: u32| -> (Vec<usize>, Vec<usize>) {
        let step = 1i64 << (dmax - d);
        let pick = |lines: &[(f64, i64)]| -> Vec<usize> {
            let mut v: Vec<usize> = (0..lines.len())
                .filter(|&k| {
                    k == 0 || k == lines.len() - 1 || lines[k].1.rem_euclid(step) == 0
                })
                .collect();
            v.dedup();
            v
        };
        (pick(&xs), pick(&ys))
    };

    if degenerate {
        let depths = (1..=dmax)
            .map(|d| {
                let (bx, by) = depth_cells(d);
                let cells = cells_of(&bx, &by, &xs, &ys);
                let n = cells.len();
                DepthMasses {
                    depth: d,
                    shape: [bx.len() - 1, by.len() - 1],
                    cells,
                    signed: vec![0.0; n],
                    absolute: vec![0.0; n],
                    signed_counts: vec![0; n],
                    absolute_counts: vec![0; n],
                    pixel_area: 0.0,
                }
            })
            .collect();
        return Ok(DyadicSurvey {
            depths,
            jitter_index: 0,
            raster: r,
            skipped_fraction: 0.0,
            cell_side: side,
        });
    }

    let cell = [w[0] / r as f64, w[1] / r as f64];
    let area = cell[0] * cell[1];
    let xc = |i: usize| lo[0] + (i as f64 + RASTER_OFFSET[0]) * cell[0];
    let yc = |j: usize| lo[1] + (j as f64 + RASTER_OFFSET[1]) * cell[1];

    // Raster points within the margin of any finest edge are left out at
    // every depth.
    let m2 = margin * margin;
    let skip_rows: Vec<Vec<usize>> = {
        let mut marks: Vec<Vec<usize>> = vec![Vec::new(); r];
        for b in horizontal.iter().chain(&vertical) {
            for seg in b.image.points.windows(2) {
                let (a, c) = (seg[0], seg[1]);
                let i0 = (((a[0].min(c[0]) - margin - lo[0]) / cell[0]) - RASTER_OFFSET[0]).ceil().max(0.0) as usize;
                let j0 = (((a[1].min(c[1]) - margin - lo[1]) / cell[1]) - RASTER_OFFSET[1]).ceil().max(0.0) as usize;
                let i1 = ((a[0].max(c[0]) + margin - lo[0]) / cell[0] - RASTER_OFFSET[0]).floor();
                let j1 = ((a[1].max(c[1]) + margin - lo[1]) / cell[1] - RASTER_OFFSET[1]).floor();
                if i1 < 0.0 || j1 < 0.0 {
                    continue;
                }
                let i1 = (i1 as usize).min(r - 1);
                let j1 = (j1 as usize).min(r - 1);
                for j in j0..=j1 {
                    for i in i0..=i1 {
                        if segment_dist2([xc(i), yc(j)], a, c) < m2 {
                            marks[j].push(i);
                        }
                    }
                }
            }
        }
        marks
            .into_iter()
            .map(|mut v| {
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect()
    };
    let skipped_total: usize = skip_rows.iter().map(|v| v.len()).sum();
    let skipped_fraction = skipped_total as f64 / (r * r) as f64;
    if skipped_fraction > MAX_SKIPPED_FRACTION {
        return Err(Error::DegenerateBoundary {
            skipped_fraction,
            context: format!("dyadic network at anchor offset {jitter}"),
        });
    }

    let mut depths = Vec::with_capacity(dmax as usize);
    for d in 1..=dmax {
        let (bx, by) = depth_cells(d);
        let cells = cells_of(&bx, &by, &xs, &ys);
        let (cnx, cny) = (bx.len() - 1, by.len() - 1);
        let results: Vec<Result<(i64, i64)>> = (0..cnx * cny)
            .into_par_iter()
            .map(|c| {
                let (ci, cj) = (c / cny, c % cny);
                let (i0, i1) = (bx[ci], bx[ci + 1]);
                let (j0, j1) = (by[cj], by[cj + 1]);
                // Counterclockwise boundary from the shared edge images.
                let mut poly: Vec<[f64; 2]> = Vec::new();
                for i in i0..i1 {
                    let e = &hedge(j0, i).points;
                    poly.extend_from_slice(&e[..e.len() - 1]);
                }
                for j in j0..j1 {
                    let e = &vedge(i1, j).points;
                    poly.extend_from_slice(&e[..e.len() - 1]);
                }
                for i in (i0..i1).rev() {
                    let e = &hedge(j1, i).points;
                    poly.extend(e[1..].iter().rev());
                }
                for j in (j0..j1).rev() {
                    let e = &vedge(i0, j).points;
                    poly.extend(e[1..].iter().rev());
                }
                let counts = cell_counts(&poly, lo, cell, r, &skip_rows);
                if counts.in_box >= 100 && counts.skipped as f64 > MAX_SKIPPED_FRACTION * counts.in_box as f64 {
                    return Err(Error::DegenerateBoundary {
                        skipped_fraction: counts.skipped as f64 / counts.in_box as f64,
                        context: format!("depth {d} cell ({ci}, {cj})"),
                    });
                }
                Ok((counts.signed, counts.absolute))
            })
            .collect();
        let (signed_counts, absolute_counts): (Vec<i64>, Vec<i64>) =
            results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
        depths.push(DepthMasses {
            depth: d,
            shape: [cnx, cny],
            cells,
            signed: signed_counts.iter().map(|&c| c as f64 * area).collect(),
            absolute: absolute_counts.iter().map(|&c| c as f64 * area).collect(),
            signed_counts,
            absolute_counts,
            pixel_area: area,
        });
    }
    Ok(DyadicSurvey {
        depths,
        jitter_index: 0,
        raster: r,
        skipped_fraction,
        cell_side: side,
    })
}

fn cells_of(bx: &[usize], by: &[usize], xs: &[(f64, i64)], ys: &[(f64, i64)]) -> Vec<([f64; 2], [f64; 2])> {
    let mut out = Vec::new();
    for ci in 0..bx.len() - 1 {
        for cj in 0..by.len() - 1 {
            let c = [xs[bx[ci]].0, ys[by[cj]].0];
            out.push((c, [xs[bx[ci + 1]].0 - c[0], ys[by[cj + 1]].0 - c[1]]));
        }
    }
    out
}

struct Counts {
    signed: i64,
    absolute: i64,
    in_box: usize,
    skipped: usize,
}

/// Winding numbers of `poly` at the raster centres inside its bounding box.
/// Crossings are computed from the lower endpoint of each edge, so an edge
/// shared by two cells contributes opposite signs at exactly the same points.
fn cell_counts(poly: &[[f64; 2]], lo: [f64; 2], cell: [f64; 2], r: usize, skip_rows: &[Vec<usize>]) -> Counts {
    let mut plo = [f64::INFINITY; 2];
    let mut phi = [f64::NEG_INFINITY; 2];
    for p in poly {
        for a in 0..2 {
            plo[a] = plo[a].min(p[a]);
            phi[a] = phi[a].max(p[a]);
        }
    }
    let first = |v: f64, a: usize| -> usize { ((v - lo[a]) / cell[a] - RASTER_OFFSET[a]).ceil().max(0.0) as usize };
    let j0 = first(plo[1], 1).saturating_sub(1);
    let j1 = (((phi[1] - lo[1]) / cell[1] - RASTER_OFFSET[1]).floor() + 1.0).clamp(0.0, r as f64) as usize;
    let i0 = first(plo[0], 0).saturating_sub(1);
    let i1 = (((phi[0] - lo[0]) / cell[0] - RASTER_OFFSET[0]).floor() + 1.0).clamp(0.0, r as f64) as usize;
    let mut out = Counts {
        signed: 0,
        absolute: 0,
        in_box: 0,
        skipped: 0,
    };
    if j0 >= j1 || i0 >= i1 {
        return out;
    }
    let rows = j1 - j0;
    let mut crossings: Vec<Vec<(f64, i32)>> = vec![Vec::new(); rows];
    let n = poly.len();
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        if a[1] == b[1] {
            continue;
        }
        let (p, q, sign) = if a[1] < b[1] { (a, b, 1) } else { (b, a, -1) };
        let js = (((p[1] - lo[1]) / cell[1] - RASTER_OFFSET[1]).ceil().max(0.0) as usize).max(j0);
        let mut j = js.saturating_sub(1).max(j0);
        while j < j1 {
            let y = lo[1] + (j as f64 + RASTER_OFFSET[1]) * cell[1];
            if y >= q[1] {
                break;
            }
            if y >= p[1] {
                let x = p[0] + (y - p[1]) * (q[0] - p[0]) / (q[1] - p[1]);
                crossings[j - j0].push((x, sign));
            }
            j += 1;
        }
    }
    for (jr, row) in crossings.iter_mut().enumerate() {
        let j = j0 + jr;
        row.sort_by(|u, v| u.0.partial_cmp(&v.0).expect("finite").then(u.1.cmp(&v.1)));
        let total: i32 = row.iter().map(|c| c.1).sum();
        let mut passed = 0;
        let mut k = 0;
        let skips = &skip_rows[j];
        let mut s = skips.partition_point(|&i| i < i0);
        for i in i0..i1 {
            let x = lo[0] + (i as f64 + RASTER_OFFSET[0]) * cell[0];
            while k < row.len() && row[k].0 <= x {
                passed += row[k].1;
                k += 1;
            }
            out.in_box += 1;
            if s < skips.len() && skips[s] == i {
                s += 1;
                out.skipped += 1;
                continue;
            }
            let deg = (total - passed) as i64;
            out.signed += deg;
            out.absolute += deg.abs();
        }
    }
    out
}

/// Signed Jacobian masses `∫ deg(g, Q, y) dy` of the dyadic cells at `depth`.
pub fn jacobian_measure<M: PlanarMap + ?Sized>(
    g: &M,
    corner: [f64; 2],
    sides: [f64; 2],
    dyadic: &DyadicGrid,
    depth: u32,
    raster: usize,
) -> Result<CellMeasure<f64>> {
    let config = SurveyConfig {
        max_depth: depth,
        raster,
        ..SurveyConfig::default()
    };
    let s = DyadicSurvey::run(g, corner, sides, dyadic, &config)?;
    s.finest().measure(s.cell_side)
}

/// `U_d = Σ_Q |∫ deg|` and `V_d = Σ_Q ∫ |deg|` for depths `1..=max_depth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaVariation {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl AreaVariation {
    pub fn sup_u(&self) -> f64 {
        self.u.iter().cloned().fold(0.0, f64::max)
    }

    pub fn sup_v(&self) -> f64 {
        self.v.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn area_variation<M: PlanarMap + ?Sized>(
    g: &M,
    corner: [f64; 2],
    sides: [f64; 2],
    dyadic: &DyadicGrid,
    config: &SurveyConfig,
) -> Result<AreaVariation> {
    let s = DyadicSurvey::run(g, corner, sides, dyadic, config)?;
    Ok(AreaVariation {
        u: s.depths.iter().map(|d| d.u()).collect(),
        v: s.depths.iter().map(|d| d.v()).collect(),
    })
}

/// Two-sided bounds on the area of a surface `F: R^2 -> R^3` from the
/// variations of its three coordinate projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaBounds {
    pub lower: f64,
    pub upper: f64,
    /// `V(g_j)` with `g_j` the projection dropping output `j`.
    pub projections: [f64; 3],
}

pub fn lebesgue_area_bounds(
    f: &SampledMap<f64>,
    corner: [f64; 2],
    sides: [f64; 2],
    dyadic: &DyadicGrid,
    config: &SurveyConfig,
) -> Result<AreaBounds> {
    if f.dim_in() != 2 || f.dim_out() != 3 {
        return Err(Error::Shape("area bounds need a surface R^2 -> R^3".into()));
    }
    let mut projections = [0.0; 3];
    for (j, v) in projections.iter_mut().enumerate() {
        let gj = coordinate_pair(f, j)?;
        let s = DyadicSurvey::run(&gj, corner, sides, dyadic, config)?;
        *v = s.finest().v();
    }
    Ok(AreaBounds {
        lower: projections.iter().cloned().fold(0.0, f64::max),
        upper: projections.iter().sum(),
        projections,
    })
}

/// `Σ g_1(arc midpoint) (g_2(x_{i+1}) - g_2(x_i))` counterclockwise around
/// the circle `∂B(center, radius)` sampled at `n` points.
pub fn boundary_pairing<M: PlanarMap + ?Sized>(g: &M, center: [f64; 2], radius: f64, n: usize) -> Result<f64> {
    g.validate()?;
    if n < 64 {
        return Err(Error::InvalidArgument(format!("boundary pairing needs >= 64 points, got {n}")));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    let pt = |t: f64| [center[0] + radius * t.cos(), center[1] + radius * t.sin()];
    let terms: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t0 = 2.0 * PI * i as f64 / n as f64;
            let t1 = 2.0 * PI * (i + 1) as f64 / n as f64;
            let a = g.eval(pt(t0));
            let b = g.eval(pt(t1));
            let m = g.eval(pt(0.5 * (t0 + t1)));
            m[0] * (b[1] - a[1])
        })
        .collect();
    let total: f64 = terms.iter().sum();
    if !total.is_finite() {
        return Err(Error::DegenerateBoundary {
            skipped_fraction: 1.0,
            context: "non-finite boundary values".into(),
        });
    }
    Ok(total)
}

/// Boundary-variation sequence under shrinking mollification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConvergence {
    /// Variation of the unmollified map along the circle.
    pub reference: f64,
    pub epsilons: Vec<f64>,
    pub variations: Vec<f64>,
    pub degree_integrals: Vec<f64>,
    /// `|TV_ε - TV_0| / TV_0` (absolute when `TV_0 = 0`).
    pub gaps: Vec<f64>,
}

impl BoundaryConvergence {
    /// Final gap below `tol` and below the first gap.
    pub fn converged(&self, tol: f64) -> bool {
        if self.reference == 0.0 && self.variations.iter().all(|v| *v == 0.0) {
            return true;
        }
        let (Some(first), Some(last)) = (self.gaps.first(), self.gaps.last()) else {
            return false;
        };
        *last <= tol && (*last < *first || *first <= 1e-12)
    }
}

/// Mollifies `g` at each radius in `eps` (decreasing) and compares the
/// variation of `g_ε` along `∂B(center, radius)` with that of `g`.
pub fn mollified_boundary_convergence(
    g: &SampledMap<f64>,
    center: [f64; 2],
    radius: f64,
    eps: &[f64],
    boundary_resolution: usize,
    raster: usize,
) -> Result<BoundaryConvergence> {
    planar_check(g)?;
    if eps.is_empty() || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("mollifier radii must be strictly decreasing".into()));
    }
    let disk = PlanarRegion::disk(center, radius).with_resolution(boundary_resolution);
    let base = boundary_image(g, &disk)?;
    let reference = base.poly.length();
    let mut out = BoundaryConvergence {
        reference,
        epsilons: eps.to_vec(),
        variations: Vec::new(),
        degree_integrals: Vec::new(),
        gaps: Vec::new(),
    };
    for &e in eps {
        let m = mollify(g, &MollifierSpec::new(e)?)?;
        let bi = boundary_image(&m.map, &disk)
            .map_err(|err| err.at(format!("mollified at epsilon {e}")))?;
        let tv = bi.poly.length();
        let di = bi.degree_integral(raster)?;
        out.gaps.push(if reference == 0.0 {
            tv.abs()
        } else {
            (tv - reference).abs() / reference
        });
        out.variations.push(tv);
        out.degree_integrals.push(di.signed);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{make_map, CantorStaircase, GallerySpec};
    use crate::field::Grid;

    fn linear(a: [f64; 4], n: usize) -> SampledMap<f64> {
        let g = Grid::spanning(&[n, n], &[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        SampledMap::from_fn(g, 2, |x, o| {
            o[0] = a[0] * x[0] + a[1] * x[1];
            o[1] = a[2] * x[0] + a[3] * x[1];
        })
        .unwrap()
    }

    #[test]
    fn smooth_step_shape() {
        assert_eq!(smooth_step(-0.1), 1.0);
        assert_eq!(smooth_step(1.1), 0.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        let h = 1e-6;
        for u in [0.2, 0.5, 0.77] {
            let fd = (smooth_step(u + h) - smooth_step(u - h)) / (2.0 * h);
            assert!((fd - smooth_step_deriv(u)).abs() < 1e-6);
        }
    }

    #[test]
    fn jacobian_of_identity_and_linear_maps() {
        let phi = Bump {
            center: [0.1, -0.2],
            radius: 0.5,
        };
        let mass = phi.integral();
        let id = linear([1.0, 0.0, 0.0, 1.0], 201);
        let j = distributional_jacobian(&id, &phi).unwrap();
        assert!((j - mass).abs() / mass < 0.01, "{j} vs {mass}");
        let a = linear([2.0, 0.5, -0.3, 1.5], 201);
        let j = distributional_jacobian(&a, &phi).unwrap();
        let det = 2.0 * 1.5 + 0.5 * 0.3;
        assert!((j - det * mass).abs() / (det * mass) < 0.01);
        let wide = Bump {
            center: [0.0, 0.0],
            radius: 1.0,
        };
        assert!(distributional_jacobian(&id, &wide).is_err());
    }

    #[test]
    fn jacobian_of_cantor_product_against_exact_oracle() {
        let h = CantorStaircase::new(6).unwrap();
        let g = Grid::spanning(&[730, 101], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let f = SampledMap::from_fn(g, 2, |x, o| {
            o[0] = h.eval(x[0]);
            o[1] = x[1];
        })
        .unwrap();
        let phi = Bump {
            center: [0.45, 0.5],
            radius: 0.3,
        };
        let j = distributional_jacobian(&f, &phi).unwrap();
        // ∫∫ φ dh(x) dy: h is linear between knots, so integrate φ against
        // each slope with a fine tensor Gauss-Legendre rule per piece.
        let gl = [
            (-0.906_179_845_938_664, 0.236_926_885_056_189),
            (-0.538_469_310_105_683, 0.478_628_670_499_366),
            (0.0, 0.568_888_888_888_889),
            (0.538_469_310_105_683, 0.478_628_670_499_366),
            (0.906_179_845_938_664, 0.236_926_885_056_189),
        ];
        let ny = 400;
        let mut oracle = 0.0;
        for w in h.knots().windows(2) {
            let (x0, x1) = (w[0].0, w[1].0);
            let slope = (w[1].1 - w[0].1) / (x1 - x0);
            let sub = 4;
            for s in 0..sub {
                let a = x0 + (x1 - x0) * s as f64 / sub as f64;
                let b = x0 + (x1 - x0) * (s + 1) as f64 / sub as f64;
                for (u, wu) in gl {
                    let x = 0.5 * (a + b) + 0.5 * (b - a) * u;
                    for k in 0..ny {
                        let (c, d) = (k as f64 / ny as f64, (k + 1) as f64 / ny as f64);
                        for (v, wv) in gl {
                            let y = 0.5 * (c + d) + 0.5 * (d - c) * v;
                            oracle += slope * phi.value([x, y]) * wu * wv * 0.25 * (b - a) * (d - c);
                        }
                    }
                }
            }
        }
        assert!((j - oracle).abs() / oracle < 0.01, "{j} vs {oracle}");
    }

    #[test]
    fn degree_identity_examples() {
        let id = linear([1.0, 0.0, 0.0, 1.0], 257);
        let disk = PlanarRegion::disk([0.0, 0.0], 0.5).with_resolution(1024);
        let d = degree_identity(&id, &disk, 512, 0.16).unwrap();
        assert!((d.degree_side - PI / 4.0).abs() / (PI / 4.0) < 0.02);
        assert!(d.gap() < 0.02, "{d:?}");
        let a = linear([2.0, 0.0, 0.0, 1.0], 257);
        let rect = PlanarRegion::rect([-0.6, -0.5], [1.0, 0.8]);
        let d = degree_identity(&a, &rect, 512, 0.24).unwrap();
        assert!((d.degree_side - 1.6).abs() / 1.6 < 0.02);
        assert!(d.gap() < 0.02, "{d:?}");
    }

    #[test]
    fn identity_survey_is_area() {
        let id = make_map(&GallerySpec::Linear { matrix: vec![1.0, 0.0, 0.0, 1.0] }, &[65, 65]).unwrap();
        let cfg = SurveyConfig {
            max_depth: 3,
            raster: 256,
            edge_subdivisions: 4,
        };
        let s = DyadicSurvey::run(&id, [0.0, 0.0], [1.0, 1.0], &DyadicGrid::for_rect([0.0, 0.0], [1.0, 1.0]), &cfg)
            .unwrap();
        for d in &s.depths {
            assert!((d.u() - 1.0).abs() < 0.02 && (d.v() - 1.0).abs() < 0.02);
            for (w, (_, sides)) in d.signed.iter().zip(&d.cells) {
                assert!((w - sides[0] * sides[1]).abs() < 0.02 * sides[0] * sides[1] + 1e-3);
            }
        }
        assert_eq!(s.depths[2].signed.len(), 64);
    }

    #[test]
    fn fold_map_u_and_v() {
        let g = Grid::spanning(&[129, 65], &[-1.0, 0.0], &[1.0, 1.0]).unwrap();
        let fold = SampledMap::from_fn(g, 2, |x, o| {
            o[0] = f64::abs(x[0]);
            o[1] = x[1];
        })
        .unwrap();
        let cfg = SurveyConfig {
            max_depth: 3,
            raster: 256,
            edge_subdivisions: 4,
        };
        let dy = DyadicGrid {
            anchor: [-1.0, 0.0],
            side: 1.0,
        };
        let av = area_variation(&fold, [-1.0, 0.0], [2.0, 1.0], &dy, &cfg).unwrap();
        for v in &av.v {
            assert!((v - 2.0).abs() < 0.04, "{av:?}");
        }
        for w in av.u.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!((av.u.last().unwrap() - 2.0).abs() < 0.04);
        // A coarse anchor whose cells straddle the fold sees cancellation.
        let straddle = DyadicGrid {
            anchor: [-1.5, 0.0],
            side: 2.0,
        };
        let cfg1 = SurveyConfig { max_depth: 1, ..cfg };
        let av = area_variation(&fold, [-1.0, 0.0], [2.0, 1.0], &straddle, &cfg1).unwrap();
        assert!(av.u[0] < 1.1, "{av:?}");
    }

    #[test]
    fn lebesgue_bounds_examples() {
        let g = Grid::spanning(&[33, 33], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let cfg = SurveyConfig::default();
        let dy = DyadicGrid::for_rect([0.0, 0.0], [1.0, 1.0]);
        let flat = SampledMap::from_fn(g.clone(), 3, |x, o| {
            o[0] = x[0];
            o[1] = x[1];
            o[2] = 0.3;
        })
        .unwrap();
        let b = lebesgue_area_bounds(&flat, [0.0, 0.0], [1.0, 1.0], &dy, &cfg).unwrap();
        assert!((b.lower - 1.0).abs() < 0.02 && (b.upper - 1.0).abs() < 0.02, "{b:?}");
        let tilted = SampledMap::from_fn(g.clone(), 3, |x, o| {
            o[0] = x[0];
            o[1] = x[1];
            o[2] = x[0];
        })
        .unwrap();
        let b = lebesgue_area_bounds(&tilted, [0.0, 0.0], [1.0, 1.0], &dy, &cfg).unwrap();
        assert!((b.lower - 1.0).abs() < 0.02 && (b.upper - 2.0).abs() < 0.04, "{b:?}");
        assert!(b.lower <= 2f64.sqrt() && 2f64.sqrt() <= b.upper);
        let h = CantorStaircase::new(6).unwrap();
        let cantor = SampledMap::from_fn(g, 3, |x, o| {
            o[0] = h.eval(x[0]);
            o[1] = x[1];
            o[2] = 0.5;
        })
        .unwrap();
        let b = lebesgue_area_bounds(&cantor, [0.0, 0.0], [1.0, 1.0], &dy, &cfg).unwrap();
        assert!((b.lower - 2.0).abs() < 0.04 && (b.upper - 2.0).abs() < 0.04, "{b:?}");
    }

    #[test]
    fn boundary_pairing_examples() {
        let id = crate::degree::FnMap(|p: [f64; 2]| p);
        assert!((boundary_pairing(&id, [0.0, 0.0], 1.0, 256).unwrap() - PI).abs() / PI < 0.01);
        let z2 = GallerySpec::Zpow { k: 2 }.evaluator().unwrap();
        let v = boundary_pairing(&z2, [0.0, 0.0], 1.0, 1024).unwrap();
        assert!((v - 2.0 * PI).abs() / (2.0 * PI) < 0.02);
        let c = crate::degree::FnMap(|_: [f64; 2]| [0.3, -0.2]);
        assert_eq!(boundary_pairing(&c, [0.0, 0.0], 1.0, 64).unwrap(), 0.0);
    }

    #[test]
    fn mollified_cantor_boundary_converges() {
        let g = Grid::spanning(&[257, 257], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let h = CantorStaircase::new(6).unwrap();
        let f = SampledMap::from_fn(g, 2, |x, o| {
            o[0] = h.eval(x[0]);
            o[1] = x[1];
        })
        .unwrap();
        let bc = mollified_boundary_convergence(&f, [0.5, 0.5], 0.2, &[0.08, 0.04, 0.02, 0.01], 1024, 128).unwrap();
        assert!(bc.converged(0.05), "{bc:?}");
    }
}
