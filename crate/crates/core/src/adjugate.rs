//! The distributional adjugate of 3D maps, the slice-area measure, sampled
//! inversion of homeomorphisms and the regularity verdict built from them.
//!
//! Entry `(k, j)` of the adjugate integrates, over the slices `x_k = t`, the
//! total variation of the planar Jacobian measure of the slice with output
//! `j` dropped. Indices are 0-based throughout.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distjac::{DyadicGrid, DyadicSurvey, SurveyConfig};
use crate::error::{Error, Result};
use crate::field::{coordinate_pair, restrict_slice, CellMeasure, Grid, SampledMap};
use crate::gallery::{make_map, minor3, oracle, GalleryMap, GallerySpec, Quantity};
use crate::report::{relative_gap, Check, VerificationReport};

/// Settings shared by the adjugate, the slice-area measure and the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjugateConfig {
    /// Midpoint slices per axis.
    pub n_slices: usize,
    pub survey: SurveyConfig,
    /// Random points used by the injectivity screen.
    pub injectivity_samples: usize,
    pub seed: u64,
}

impl Default for AdjugateConfig {
    fn default() -> Self {
        AdjugateConfig {
            n_slices: 33,
            survey: SurveyConfig {
                max_depth: 3,
                raster: 256,
                edge_subdivisions: 2,
            },
            injectivity_samples: 20_000,
            seed: 0,
        }
    }
}

impl AdjugateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_slices < 8 {
            return Err(Error::InvalidArgument(format!(
                "at least 8 slices per axis are needed, got {}",
                self.n_slices
            )));
        }
        Ok(())
    }
}

/// A slice that failed twice and was left out of the quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedSlice {
    pub axis: usize,
    pub t: f64,
    pub reason: String,
}

/// Results for one slice `x_k = t`, indexed by the dropped output `j`.
#[derive(Debug, Clone, PartialEq)]
struct SliceResult {
    axis: usize,
    t: f64,
    /// `Σ_Q |∫ deg|` at the finest depth.
    u: [f64; 3],
    /// `Σ_Q ∫ |deg|` at the finest depth.
    v: [f64; 3],
    /// Finest-depth cells `(centre, |mass|)` per dropped output.
    cells: [Vec<([f64; 2], f64)>; 3],
}

/// Slice-by-slice planar surveys of a 3D map, shared by the adjugate, the
/// slice-area measure and the adjugate density.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSurvey {
    grid: Grid<f64>,
    n_slices: usize,
    slices: Vec<SliceResult>,
    pub skipped: Vec<SkippedSlice>,
}

fn check_3d(f: &SampledMap<f64>) -> Result<()> {
    if f.dim_in() != 3 || f.dim_out() != 3 {
        return Err(Error::Shape(format!(
            "expected a map R^3 -> R^3, got R^{} -> R^{}",
            f.dim_in(),
            f.dim_out()
        )));
    }
    if !f.all_finite() {
        return Err(Error::InvalidArgument("map has non-finite samples".into()));
    }
    Ok(())
}

/// Screens for non-injectivity: cells must share one orientation, and
/// images of random points are sorted so that neighbours with (nearly)
/// equal images but distinct preimages are caught.
pub fn check_injective(f: &SampledMap<f64>, samples: usize, seed: u64) -> Result<()> {
    check_3d(f)?;
    let dets = cell_differentials(f)
        .into_iter()
        .map(|d| d[0] * minor3(&d, 0, 0) - d[1] * minor3(&d, 0, 1) + d[2] * minor3(&d, 0, 2));
    let (mut pos, mut neg, mut scale) = (0usize, 0usize, 0.0f64);
    let dets: Vec<f64> = dets.collect();
    for d in &dets {
        scale = scale.max(d.abs());
    }
    for d in &dets {
        if *d > 1e-9 * scale {
            pos += 1;
        } else if *d < -1e-9 * scale {
            neg += 1;
        }
    }
    if pos > 0 && neg > 0 {
        return Err(Error::NotInjective(format!(
            "{pos} cells preserve and {neg} reverse orientation"
        )));
    }
    let d = f.dim_in();
    let g = f.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = f.value_bounds();
    let diam = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    let mut pts: Vec<(Vec<f64>, Vec<f64>)> = (0..samples)
        .map(|_| {
            let x: Vec<f64> = (0..d)
                .map(|a| {
                    let (l, h) = g.extent(a);
                    rng.gen_range(l..=h)
                })
                .collect();
            let mut y = vec![0.0; f.dim_out()];
            f.interpolate(&x, &mut y);
            (x, y)
        })
        .collect();
    pts.sort_by(|a, b| {
        a.1.iter()
            .zip(&b.1)
            .map(|(u, v)| u.partial_cmp(v).expect("finite"))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let h = g.spacing.iter().cloned().fold(f64::INFINITY, f64::min);
    for w in pts.windows(2) {
        let dy = w[0].1.iter().zip(&w[1].1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let dx = w[0].0.iter().zip(&w[1].0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if dy <= 1e-12 * diam && dx > 1e-3 * h {
            return Err(Error::NotInjective(format!(
                "{:?} and {:?} share the image {:?}",
                w[0].0, w[1].0, w[0].1
            )));
        }
    }
    Ok(())
}

impl SliceSurvey {
    pub fn run(f: &SampledMap<f64>, config: &AdjugateConfig) -> Result<SliceSurvey> {
        check_3d(f)?;
        config.validate()?;
        check_injective(f, config.injectivity_samples, config.seed)?;
        let grid = f.grid().clone();
        let n = config.n_slices;
        let jobs: Vec<(usize, usize)> = (0..3).flat_map(|k| (0..n).map(move |i| (k, i))).collect();
        let outcomes: Vec<Outcome> = jobs
            .par_iter()
            .map(|&(k, i)| {
                let (lo, hi) = grid.extent(k);
                let dt = (hi - lo) / n as f64;
                let t = lo + (i as f64 + 0.5) * dt;
                match survey_slice(f, k, t, &config.survey) {
                    Ok(r) => Outcome::Done(r),
                    Err(first) if retryable(&first) => {
                        let t2 = t + 0.25 * dt;
                        log::debug!("slice axis {k} t {t} failed ({first}); retrying at {t2}");
                        match survey_slice(f, k, t2, &config.survey) {
                            Ok(r) => Outcome::Done(r),
                            Err(e) => Outcome::Skipped(SkippedSlice {
                                axis: k,
                                t,
                                reason: e.to_string(),
                            }),
                        }
                    }
                    Err(e) => Outcome::Fatal(e),
                }
            })
            .collect();
        let mut slices = Vec::new();
        let mut skipped = Vec::new();
        for o in outcomes {
            match o {
                Outcome::Done(r) => slices.push(r),
                Outcome::Skipped(s) => skipped.push(s),
                Outcome::Fatal(e) => return Err(e),
            }
        }
        for s in &skipped {
            log::warn!("slice axis {} t {} skipped: {}", s.axis, s.t, s.reason);
        }
        Ok(SliceSurvey {
            grid,
            n_slices: n,
            slices,
            skipped,
        })
    }

    /// Midpoint weight of a slice on `axis`, rescaled so skipped slices do
    /// not bias the integral.
    fn weight(&self, axis: usize) -> f64 {
        let (lo, hi) = self.grid.extent(axis);
        let done = self.slices.iter().filter(|s| s.axis == axis).count();
        if done == 0 {
            0.0
        } else {
            (hi - lo) / done as f64
        }
    }

    pub fn adjugate(&self) -> AdjugateTable {
        let mut entries: [[AdjugateEntry; 3]; 3] = Default::default();
        let mut slice_ts: [Vec<f64>; 3] = Default::default();
        for s in &self.slices {
            slice_ts[s.axis].push(s.t);
            for j in 0..3 {
                entries[s.axis][j].masses.push(s.u[j]);
            }
        }
        for (k, row) in entries.iter_mut().enumerate() {
            let w = self.weight(k);
            for e in row.iter_mut() {
                e.integrated = w * e.masses.iter().sum::<f64>();
            }
        }
        let total = entries.iter().flatten().map(|e| e.integrated).sum();
        AdjugateTable {
            entries,
            slice_ts,
            total,
            skipped: self.skipped.clone(),
        }
    }

    /// Slice-image area bound `Σ_j V_j` integrated over each axis.
    pub fn mu(&self) -> MuMeasure {
        let mut per_axis = [0.0; 3];
        for s in &self.slices {
            per_axis[s.axis] += s.v.iter().sum::<f64>();
        }
        for (k, p) in per_axis.iter_mut().enumerate() {
            *p *= self.weight(k);
        }
        MuMeasure {
            per_axis,
            total: per_axis.iter().sum(),
        }
    }

    /// `|ADJ Df|` as masses on an `r^3` grid over the domain: each slice
    /// cell deposits its mass times the slice weight at its centre.
    pub fn density(&self, r: usize) -> Result<CellMeasure<f64>> {
        let g = &self.grid;
        let lo: Vec<f64> = (0..3).map(|a| g.extent(a).0).collect();
        let size: Vec<f64> = (0..3).map(|a| (g.extent(a).1 - lo[a]) / r as f64).collect();
        let mut w = vec![0.0; r * r * r];
        let bin = |a: usize, x: f64| (((x - lo[a]) / size[a]).floor().max(0.0) as usize).min(r - 1);
        for s in &self.slices {
            let rest: Vec<usize> = (0..3).filter(|&a| a != s.axis).collect();
            let wt = self.weight(s.axis);
            for cells in &s.cells {
                for (c, m) in cells {
                    let mut idx = [0usize; 3];
                    idx[s.axis] = bin(s.axis, s.t);
                    idx[rest[0]] = bin(rest[0], c[0]);
                    idx[rest[1]] = bin(rest[1], c[1]);
                    w[(idx[0] * r + idx[1]) * r + idx[2]] += m * wt;
                }
            }
        }
        CellMeasure::new(vec![r; 3], size, lo, 1, w)
    }

    pub fn n_slices(&self) -> usize {
        self.n_slices
    }
}

enum Outcome {
    Done(SliceResult),
    Skipped(SkippedSlice),
    Fatal(Error),
}

fn retryable(e: &Error) -> bool {
    matches!(
        e.root(),
        Error::DegenerateBoundary { .. } | Error::UnstableDegree { .. } | Error::OnBoundary { .. }
    )
}

fn survey_slice(f: &SampledMap<f64>, k: usize, t: f64, config: &SurveyConfig) -> Result<SliceResult> {
    let slice = restrict_slice(f, k, &t)?;
    let sg = slice.grid();
    let corner = [sg.extent(0).0, sg.extent(1).0];
    let sides = [sg.extent(0).1 - corner[0], sg.extent(1).1 - corner[1]];
    let dyadic = DyadicGrid::for_rect(corner, sides);
    let mut out = SliceResult {
        axis: k,
        t,
        u: [0.0; 3],
        v: [0.0; 3],
        cells: Default::default(),
    };
    for j in 0..3 {
        let pair = coordinate_pair(&slice, j)?;
        let s = DyadicSurvey::run(&pair, corner, sides, &dyadic, config)
            .map_err(|e| e.at(format!("slice k={k} t={t} j={j}")))?;
        let fin = s.finest();
        out.u[j] = fin.u();
        out.v[j] = fin.v();
        out.cells[j] = fin
            .cells
            .iter()
            .zip(&fin.signed)
            .map(|((c, sd), m)| ([c[0] + 0.5 * sd[0], c[1] + 0.5 * sd[1]], m.abs()))
            .collect();
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdjugateEntry {
    /// Per-slice `|J|` masses in slice order.
    pub masses: Vec<f64>,
    /// Midpoint-rule integral over the slice parameter.
    pub integrated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjugateTable {
    /// `entries[k][j]`: slice axis `k`, dropped output `j`.
    pub entries: [[AdjugateEntry; 3]; 3],
    pub slice_ts: [Vec<f64>; 3],
    pub total: f64,
    pub skipped: Vec<SkippedSlice>,
}

impl AdjugateTable {
    pub fn integrated(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for (k, row) in self.entries.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                out[k][j] = e.integrated;
            }
        }
        out
    }

    pub fn off_diagonal_max(&self) -> f64 {
        let m = self.integrated();
        (0..3)
            .flat_map(|k| (0..3).filter(move |&j| j != k).map(move |j| (k, j)))
            .map(|(k, j)| m[k][j])
            .fold(0.0, f64::max)
    }
}

pub fn distributional_adjugate(f: &SampledMap<f64>, config: &AdjugateConfig) -> Result<AdjugateTable> {
    Ok(SliceSurvey::run(f, config)?.adjugate())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuMeasure {
    pub per_axis: [f64; 3],
    pub total: f64,
}

pub fn mu_measure(f: &SampledMap<f64>, config: &AdjugateConfig) -> Result<MuMeasure> {
    Ok(SliceSurvey::run(f, config)?.mu())
}

/// `∫ Σ_{k,j} |minor_{j,k}(Df)|` over the domain with a midpoint rule on an
/// `n^3` lattice, using the classical differential where it exists. Points
/// where it does not are skipped and counted.
pub fn pointwise_adjugate_total(map: &GalleryMap, n: usize) -> Result<(f64, usize)> {
    if map.dim_in() != 3 {
        return Err(Error::Shape("pointwise adjugate needs a 3D map".into()));
    }
    let (lo, hi) = map.spec().domain();
    let h: Vec<f64> = (0..3).map(|a| (hi[a] - lo[a]) / n as f64).collect();
    let rows: Vec<(f64, usize, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (mut acc, mut ok, mut bad) = (0.0, 0usize, 0usize);
            for j in 0..n {
                for k in 0..n {
                    let x = [
                        lo[0] + (i as f64 + 0.5) * h[0],
                        lo[1] + (j as f64 + 0.5) * h[1],
                        lo[2] + (k as f64 + 0.5) * h[2],
                    ];
                    match map.ae_differential(&x) {
                        Some(d) => {
                            ok += 1;
                            acc += (0..3)
                                .flat_map(|r| (0..3).map(move |c| (r, c)))
                                .map(|(r, c)| minor3(&d, r, c).abs())
                                .sum::<f64>();
                        }
                        None => bad += 1,
                    }
                }
            }
            (acc, ok, bad)
        })
        .collect();
    let (acc, ok, bad) = rows
        .iter()
        .fold((0.0, 0, 0), |s, r| (s.0 + r.0, s.1 + r.1, s.2 + r.2));
    if ok == 0 {
        return Err(Error::Coverage("differential undefined at every quadrature point".into()));
    }
    let vol: f64 = (0..3).map(|a| hi[a] - lo[a]).product();
    Ok((acc / ok as f64 * vol, bad))
}

/// Row-major differentials at cell centres from edge-averaged differences.
fn cell_differentials(f: &SampledMap<f64>) -> Vec<[f64; 9]> {
    let g = f.grid();
    let s = g.shape.clone();
    let h = g.spacing.clone();
    let v = f.values();
    let idx = |i: usize, j: usize, k: usize| ((i * s[1] + j) * s[2] + k) * 3;
    (0..s[0] - 1)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut row = Vec::with_capacity((s[1] - 1) * (s[2] - 1));
            for j in 0..s[1] - 1 {
                for k in 0..s[2] - 1 {
                    let mut d = [0.0; 9];
                    for c in 0..3 {
                        for a in 0..3 {
                            let mut sum = 0.0;
                            for e in 0..4 {
                                let (p, q) = (e & 1, e >> 1);
                                let (base, step) = match a {
                                    0 => (idx(i, j + p, k + q), idx(i + 1, j + p, k + q)),
                                    1 => (idx(i + p, j, k + q), idx(i + p, j + 1, k + q)),
                                    _ => (idx(i + p, j + q, k), idx(i + p, j + q, k + 1)),
                                };
                                sum += v[step + c] - v[base + c];
                            }
                            d[c * 3 + a] = sum / (4.0 * h[a]);
                        }
                    }
                    row.push(d);
                }
            }
            row
        })
        .collect()
}

/// Same total from cell-centred finite differences of the samples.
pub fn sampled_adjugate_total(f: &SampledMap<f64>) -> Result<f64> {
    check_3d(f)?;
    let h = &f.grid().spacing;
    let total: f64 = cell_differentials(f)
        .iter()
        .map(|d| {
            (0..3)
                .flat_map(|r| (0..3).map(move |c| (r, c)))
                .map(|(r, c)| minor3(d, r, c).abs())
                .sum::<f64>()
        })
        .sum();
    Ok(total * h[0] * h[1] * h[2])
}

/// Inverse of a sampled homeomorphism on a grid over its image box.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledInverse {
    /// Inverse values; absent nodes hold the nearest defined value.
    pub map: SampledMap<f64>,
    /// Nodes where the inverse was computed.
    pub defined: Vec<bool>,
    /// Nodes outside the image.
    pub absent: usize,
    /// Nodes inside some cell box where no local solve succeeded.
    pub unresolved: usize,
    /// Absent nodes filled from a defined neighbour.
    pub filled: usize,
}

fn trilinear(c: &[[f64; 3]; 8], u: [f64; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut p = [0.0; 3];
    let mut jac = [[0.0; 3]; 3];
    for (corner, v) in c.iter().enumerate() {
        let bits = [corner >> 2 & 1, corner >> 1 & 1, corner & 1];
        let f = |a: usize| if bits[a] == 1 { u[a] } else { 1.0 - u[a] };
        let df = |a: usize| if bits[a] == 1 { 1.0 } else { -1.0 };
        let w = f(0) * f(1) * f(2);
        let dw = [df(0) * f(1) * f(2), f(0) * df(1) * f(2), f(0) * f(1) * df(2)];
        for r in 0..3 {
            p[r] += w * v[r];
            for a in 0..3 {
                jac[r][a] += dw[a] * v[r];
            }
        }
    }
    (p, jac)
}

fn solve3(m: &[[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let flat = [m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2]];
    let det = m[0][0] * minor3(&flat, 0, 0) - m[0][1] * minor3(&flat, 0, 1) + m[0][2] * minor3(&flat, 0, 2);
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for (i, xi) in x.iter_mut().enumerate() {
        let mut mi = *m;
        for r in 0..3 {
            mi[r][i] = b[r];
        }
        let f = [mi[0][0], mi[0][1], mi[0][2], mi[1][0], mi[1][1], mi[1][2], mi[2][0], mi[2][1], mi[2][2]];
        *xi = (mi[0][0] * minor3(&f, 0, 0) - mi[0][1] * minor3(&f, 0, 1) + mi[0][2] * minor3(&f, 0, 2)) / det;
    }
    Some(x)
}

enum Local {
    Inside([f64; 3]),
    Outside,
    Failed,
}

/// Damped Newton for the local coordinates of `y` in a trilinear cell.
fn locate_in_cell(c: &[[f64; 3]; 8], y: [f64; 3], scale: f64) -> Local {
    let tol = 1e-10 * scale.max(1e-300);
    let mut u = [0.5; 3];
    let res = |u: [f64; 3]| {
        let (p, _) = trilinear(c, u);
        [p[0] - y[0], p[1] - y[1], p[2] - y[2]]
    };
    let norm = |r: [f64; 3]| (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    let mut r = res(u);
    for _ in 0..60 {
        if norm(r) <= tol {
            let eps = 1e-9;
            return if u.iter().all(|&a| (-eps..=1.0 + eps).contains(&a)) {
                Local::Inside(u)
            } else {
                Local::Outside
            };
        }
        let (_, jac) = trilinear(c, u);
        let Some(step) = solve3(&jac, r) else {
            return Local::Failed;
        };
        let mut lambda = 1.0;
        loop {
            let cand = [u[0] - lambda * step[0], u[1] - lambda * step[1], u[2] - lambda * step[2]];
            let rc = res(cand);
            if norm(rc) < norm(r) || lambda < 1e-6 {
                u = cand;
                r = rc;
                break;
            }
            lambda *= 0.5;
        }
        if u.iter().any(|a| a.abs() > 10.0) {
            return Local::Outside;
        }
    }
    if norm(r) <= tol * 1e3 && u.iter().all(|&a| (-1e-9..=1.0 + 1e-9).contains(&a)) {
        Local::Inside(u)
    } else {
        Local::Failed
    }
}

/// Samples the inverse of `f` on an `image_shape` grid spanning the image
/// bounding box.
pub fn invert_homeomorphism(f: &SampledMap<f64>, image_shape: &[usize]) -> Result<SampledInverse> {
    check_3d(f)?;
    if image_shape.len() != 3 {
        return Err(Error::Shape("image grid needs three axes".into()));
    }
    let g = f.grid();
    let s = g.shape.clone();
    let (ylo, yhi) = f.value_bounds();
    let igrid = Grid::spanning(image_shape, &ylo, &yhi)?;
    let vals = f.values();
    let node = |i: usize, j: usize, k: usize| {
        let p = ((i * s[1] + j) * s[2] + k) * 3;
        [vals[p], vals[p + 1], vals[p + 2]]
    };
    let ncell = [s[0] - 1, s[1] - 1, s[2] - 1];
    let n_cells = ncell[0] * ncell[1] * ncell[2];
    let corners = |c: usize| -> [[f64; 3]; 8] {
        let (i, j, k) = (c / (ncell[1] * ncell[2]), c / ncell[2] % ncell[1], c % ncell[2]);
        let mut out = [[0.0; 3]; 8];
        for (e, o) in out.iter_mut().enumerate() {
            *o = node(i + (e >> 2 & 1), j + (e >> 1 & 1), k + (e & 1));
        }
        out
    };
    // Cell image boxes binned on a coarse lattice over the image box.
    let nb = 32usize;
    let bsize: Vec<f64> = (0..3).map(|a| ((yhi[a] - ylo[a]) / nb as f64).max(1e-300)).collect();
    let bin = |a: usize, v: f64| (((v - ylo[a]) / bsize[a]).floor().max(0.0) as usize).min(nb - 1);
    let boxes: Vec<([f64; 3], [f64; 3])> = (0..n_cells)
        .into_par_iter()
        .map(|c| {
            let cs = corners(c);
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for p in &cs {
                for a in 0..3 {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
            (lo, hi)
        })
        .collect();
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); nb * nb * nb];
    for (c, (lo, hi)) in boxes.iter().enumerate() {
        for bi in bin(0, lo[0])..=bin(0, hi[0]) {
            for bj in bin(1, lo[1])..=bin(1, hi[1]) {
                for bk in bin(2, lo[2])..=bin(2, hi[2]) {
                    bins[(bi * nb + bj) * nb + bk].push(c as u32);
                }
            }
        }
    }
    let diam = (0..3).map(|a| (yhi[a] - ylo[a]).powi(2)).sum::<f64>().sqrt();
    let n_nodes = igrid.len();
    let (ia, ja) = (image_shape[1] * image_shape[2], image_shape[2]);
    enum Node {
        Found([f64; 3]),
        Absent,
        Unresolved,
    }
    let solved: Vec<Node> = (0..n_nodes)
        .into_par_iter()
        .map(|p| {
            let y = [
                igrid.coord(0, p / ia),
                igrid.coord(1, p / ja % image_shape[1]),
                igrid.coord(2, p % ja),
            ];
            let pad = 1e-9 * diam;
            let mut failed = false;
            for &c in &bins[(bin(0, y[0]) * nb + bin(1, y[1])) * nb + bin(2, y[2])] {
                let (lo, hi) = &boxes[c as usize];
                if (0..3).any(|a| y[a] < lo[a] - pad || y[a] > hi[a] + pad) {
                    continue;
                }
                let cs = corners(c as usize);
                let scale = (0..3).map(|a| (hi[a] - lo[a]).powi(2)).sum::<f64>().sqrt();
                match locate_in_cell(&cs, y, scale) {
                    Local::Inside(u) => {
                        let c = c as usize;
                        let idx = [c / (ncell[1] * ncell[2]), c / ncell[2] % ncell[1], c % ncell[2]];
                        let mut x = [0.0; 3];
                        for a in 0..3 {
                            x[a] = g.coord(a, idx[a]) + u[a].clamp(0.0, 1.0) * g.spacing[a];
                        }
                        return Node::Found(x);
                    }
                    Local::Outside => {}
                    Local::Failed => failed = true,
                }
            }
            if failed {
                Node::Unresolved
            } else {
                Node::Absent
            }
        })
        .collect();
    let mut values = vec![0.0; n_nodes * 3];
    let mut defined = vec![false; n_nodes];
    let (mut absent, mut unresolved) = (0, 0);
    for (p, n) in solved.iter().enumerate() {
        match n {
            Node::Found(x) => {
                values[p * 3..p * 3 + 3].copy_from_slice(x);
                defined[p] = true;
            }
            Node::Absent => absent += 1,
            Node::Unresolved => unresolved += 1,
        }
    }
    let interior = n_nodes - absent;
    if unresolved as f64 > 0.01 * interior as f64 {
        return Err(Error::InversionFailure { unresolved, interior });
    }
    let filled = fill_nearest(&mut values, &defined, image_shape);
    Ok(SampledInverse {
        map: SampledMap::new(igrid, 3, values)?,
        defined,
        absent,
        unresolved,
        filled,
    })
}

/// Breadth-first extension of defined values into undefined nodes.
fn fill_nearest(values: &mut [f64], defined: &[bool], shape: &[usize]) -> usize {
    let mut seen = defined.to_vec();
    let mut queue: VecDeque<usize> = (0..defined.len()).filter(|&p| defined[p]).collect();
    let strides = [shape[1] * shape[2], shape[2], 1];
    let mut filled = 0;
    while let Some(p) = queue.pop_front() {
        let idx = [p / strides[0], p / strides[1] % shape[1], p % shape[2]];
        for a in 0..3 {
            for dir in [-1i64, 1] {
                let q = idx[a] as i64 + dir;
                if q < 0 || q >= shape[a] as i64 {
                    continue;
                }
                let n = (p as i64 + dir * strides[a] as i64) as usize;
                if !seen[n] {
                    seen[n] = true;
                    for c in 0..3 {
                        values[n * 3 + c] = values[p * 3 + c];
                    }
                    filled += 1;
                    queue.push_back(n);
                }
            }
        }
    }
    filled
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseVariation {
    pub per_coordinate: [f64; 3],
    pub total: f64,
    /// Fraction of non-absent nodes where the inverse is defined.
    pub coverage: f64,
}

/// Anisotropic variation of each inverse coordinate over the cells whose
/// eight corners are all defined.
pub fn inverse_variation(inv: &SampledInverse) -> Result<InverseVariation> {
    let total_nodes = inv.defined.len();
    let defined = inv.defined.iter().filter(|d| **d).count();
    let considered = total_nodes - inv.absent;
    let coverage = if considered == 0 { 0.0 } else { defined as f64 / considered as f64 };
    if coverage < 0.95 {
        return Err(Error::Coverage(format!(
            "inverse defined on {:.1}% of interior nodes",
            100.0 * coverage
        )));
    }
    let g = inv.map.grid();
    let s = g.shape.clone();
    let h = g.spacing.clone();
    let v = inv.map.values();
    let node = |i: usize, j: usize, k: usize| (i * s[1] + j) * s[2] + k;
    let face = [h[1] * h[2], h[0] * h[2], h[0] * h[1]];
    let rows: Vec<[f64; 3]> = (0..s[0] - 1)
        .into_par_iter()
        .map(|i| {
            let mut acc = [0.0; 3];
            for j in 0..s[1] - 1 {
                'cell: for k in 0..s[2] - 1 {
                    let mut cn = [0usize; 8];
                    for (e, c) in cn.iter_mut().enumerate() {
                        *c = node(i + (e >> 2 & 1), j + (e >> 1 & 1), k + (e & 1));
                        if !inv.defined[*c] {
                            continue 'cell;
                        }
                    }
                    for (a, bit) in [4usize, 2, 1].iter().enumerate() {
                        for e in (0..8).filter(|e| e & bit == 0) {
                            let (p, q) = (cn[e], cn[e | bit]);
                            for c in 0..3 {
                                acc[c] += (v[q * 3 + c] - v[p * 3 + c]).abs() * 0.25 * face[a];
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut per_coordinate = [0.0; 3];
    for r in &rows {
        for c in 0..3 {
            per_coordinate[c] += r[c];
        }
    }
    Ok(InverseVariation {
        per_coordinate,
        total: per_coordinate.iter().sum(),
        coverage,
    })
}

/// Concentration statistic of a pushed-forward cell measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardTrend {
    /// Image bins per axis at each scale.
    pub resolutions: Vec<usize>,
    /// Mass fraction carried by the densest 1% of image bins.
    pub fractions: Vec<f64>,
    /// Least-squares slope of the fractions against the scale index.
    pub slope: f64,
}

/// Pushes the masses of `mu` forward through `f`, spreading each cell's
/// mass over the image bins its image box overlaps.
pub fn pushforward_ac_test(f: &SampledMap<f64>, mu: &CellMeasure<f64>, n_scales: usize) -> Result<PushforwardTrend> {
    let d = f.dim_in();
    if f.dim_out() != d || mu.shape.len() != d || mu.m != 1 || !(2..=3).contains(&d) {
        return Err(Error::Shape("pushforward needs a map R^d -> R^d and a scalar measure on R^d".into()));
    }
    if n_scales == 0 {
        return Err(Error::InvalidArgument("need at least one scale".into()));
    }
    let (ylo, yhi) = f.value_bounds();
    let n = mu.n_cells();
    let mut idx = vec![0usize; d];
    let mut cell_boxes = Vec::with_capacity(n);
    let mut y = vec![0.0; d];
    for c in 0..n {
        crate::field::unravel(c, &mu.shape, &mut idx);
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for corner in 0..(1usize << d) {
            let x: Vec<f64> = (0..d)
                .map(|a| mu.origin[a] + (idx[a] + (corner >> a & 1)) as f64 * mu.spacing[a])
                .collect();
            f.interpolate(&x, &mut y);
            for a in 0..d {
                lo[a] = lo[a].min(y[a]);
                hi[a] = hi[a].max(y[a]);
            }
        }
        cell_boxes.push((lo, hi, mu.weights()[c].abs()));
    }
    let total: f64 = cell_boxes.iter().map(|b| b.2).sum();
    let r0: usize = if d == 3 { 5 } else { 10 };
    let mut out = PushforwardTrend {
        resolutions: Vec::new(),
        fractions: Vec::new(),
        slope: 0.0,
    };
    for s in 0..n_scales {
        let r = r0 << s;
        let size: Vec<f64> = (0..d).map(|a| ((yhi[a] - ylo[a]) / r as f64).max(1e-300)).collect();
        let mut bins = vec![0.0; r.pow(d as u32)];
        for (lo, hi, m) in &cell_boxes {
            if *m == 0.0 {
                continue;
            }
            // Per-axis overlap weights; degenerate extents act as points.
            let per_axis: Vec<Vec<(usize, f64)>> = (0..d)
                .map(|a| {
                    let b0 = (((lo[a] - ylo[a]) / size[a]).floor().max(0.0) as usize).min(r - 1);
                    let b1 = (((hi[a] - ylo[a]) / size[a]).floor().max(0.0) as usize).min(r - 1);
                    let w = hi[a] - lo[a];
                    if w <= 1e-12 * size[a] || b0 == b1 {
                        return vec![(b0, 1.0)];
                    }
                    (b0..=b1)
                        .map(|b| {
                            let bl = ylo[a] + b as f64 * size[a];
                            let ov = (hi[a].min(bl + size[a]) - lo[a].max(bl)).max(0.0);
                            (b, ov / w)
                        })
                        .collect()
                })
                .collect();
            let mut stack = vec![(0usize, 0usize, *m)];
            while let Some((a, flat, w)) = stack.pop() {
                if a == d {
                    bins[flat] += w;
                    continue;
                }
                for &(b, wb) in &per_axis[a] {
                    if wb > 0.0 {
                        stack.push((a + 1, flat * r + b, w * wb));
                    }
                }
            }
        }
        bins.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        let k = ((0.01 * bins.len() as f64).ceil() as usize).max(1);
        let top: f64 = bins[..k].iter().sum();
        out.resolutions.push(r);
        out.fractions.push(if total > 0.0 { top / total } else { 0.0 });
    }
    let m = out.fractions.len() as f64;
    if m > 1.0 {
        let xm = (m - 1.0) / 2.0;
        let ym = out.fractions.iter().sum::<f64>() / m;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (i, f) in out.fractions.iter().enumerate() {
            sxy += (i as f64 - xm) * (f - ym);
            sxx += (i as f64 - xm).powi(2);
        }
        out.slope = sxy / sxx;
    }
    Ok(out)
}

/// Everything the verdict needs beyond the adjugate settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictConfig {
    pub adjugate: AdjugateConfig,
    /// Inverse grid; defaults to the domain grid shape.
    pub inverse_shape: Option<Vec<usize>>,
    /// Lattice points per axis for the pointwise adjugate quadrature.
    pub pointwise_points: usize,
    pub pushforward_scales: usize,
    /// Cells per axis of the adjugate density.
    pub density_cells: usize,
}

impl Default for VerdictConfig {
    fn default() -> Self {
        VerdictConfig {
            adjugate: AdjugateConfig::default(),
            inverse_shape: None,
            pointwise_points: 96,
            pushforward_scales: 4,
            density_cells: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityVerdict {
    pub adj: AdjugateTable,
    pub adj_finite: bool,
    pub mu: MuMeasure,
    pub slice_areas_finite: bool,
    pub inverse_tv: InverseVariation,
    /// `∫ |adj Df|` from the a.e. differential, when an analytic map is known.
    pub pointwise_adj: Option<f64>,
    /// Quadrature points where the differential was undefined.
    pub pointwise_skipped: usize,
    /// `∫ |adj Df|` from finite differences of the samples.
    pub sampled_adj: f64,
    pub pushforward: PushforwardTrend,
    pub consistency_gaps: BTreeMap<String, f64>,
    pub inversion: InversionStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionStats {
    pub absent: usize,
    pub unresolved: usize,
    pub filled: usize,
}

/// Runs the adjugate, slice-area, inversion and pushforward stages on one
/// sampled map. `analytic` enables the pointwise adjugate quadrature.
pub fn regularity_verdict(
    f: &SampledMap<f64>,
    analytic: Option<&GalleryMap>,
    config: &VerdictConfig,
) -> Result<RegularityVerdict> {
    let survey = SliceSurvey::run(f, &config.adjugate).map_err(|e| e.at("adjugate"))?;
    let adj = survey.adjugate();
    let mu = survey.mu();
    let shape = config.inverse_shape.clone().unwrap_or_else(|| f.shape().to_vec());
    let inv = invert_homeomorphism(f, &shape).map_err(|e| e.at("inversion"))?;
    let inverse_tv = inverse_variation(&inv).map_err(|e| e.at("inverse variation"))?;
    let density = survey.density(config.density_cells).map_err(|e| e.at("density"))?;
    let pushforward =
        pushforward_ac_test(f, &density, config.pushforward_scales).map_err(|e| e.at("pushforward"))?;
    let (pointwise_adj, pointwise_skipped) = match analytic {
        Some(m) => {
            let (v, skipped) = pointwise_adjugate_total(m, config.pointwise_points).map_err(|e| e.at("pointwise adjugate"))?;
            (Some(v), skipped)
        }
        None => (None, 0),
    };
    let sampled_adj = sampled_adjugate_total(f).map_err(|e| e.at("sampled adjugate"))?;
    let mut gaps = BTreeMap::new();
    gaps.insert("inverse_tv_vs_mu".to_string(), relative_gap(inverse_tv.total, mu.total));
    gaps.insert("adj_vs_inverse_tv".to_string(), relative_gap(adj.total, inverse_tv.total));
    if let Some(p) = pointwise_adj {
        gaps.insert("inverse_tv_vs_pointwise_adj".to_string(), relative_gap(inverse_tv.total, p));
        gaps.insert("adj_minus_pointwise_adj".to_string(), adj.total - p);
    }
    Ok(RegularityVerdict {
        adj_finite: adj.total.is_finite(),
        slice_areas_finite: mu.per_axis.iter().all(|v| v.is_finite()),
        adj,
        mu,
        inverse_tv,
        pointwise_adj,
        pointwise_skipped,
        sampled_adj,
        pushforward,
        consistency_gaps: gaps,
        inversion: InversionStats {
            absent: inv.absent,
            unresolved: inv.unresolved,
            filled: inv.filled,
        },
    })
}

/// Adjugate totals along a sequence of maps: the supremum must stay within
/// 10% of the infimum and the last total must match `limit` within `tol`.
pub fn weak_convergence_stability(
    specs: &[GallerySpec],
    shape: &[usize],
    config: &AdjugateConfig,
    limit: Option<f64>,
    tol: f64,
) -> Result<VerificationReport> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument("empty map sequence".into()));
    }
    let mut report = VerificationReport::new("stability");
    let mut totals = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let f = make_map(spec, shape)?;
        let t = distributional_adjugate(&f, config).map_err(|e| e.at(format!("map {i} ({})", spec.label())))?;
        let reference = oracle(spec, Quantity::AdjTotalVariation).ok();
        let check = match reference {
            Some(r) => Check::relative(format!("total[{i}]"), t.total, r, tol),
            None => Check::relative(format!("total[{i}]"), t.total, t.total, tol).informational(),
        };
        report.push(check.with_note(serde_json::to_string(spec).unwrap_or_default()));
        totals.push(t.total);
    }
    let max = totals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = totals.iter().cloned().fold(f64::INFINITY, f64::min);
    report.push(Check::at_most("sup_over_inf", max, 1.1 * min, 0.0));
    if let Some(l) = limit {
        report.push(Check::relative("limit", *totals.last().expect("non-empty"), l, tol));
    }
    report.meta("totals", &totals);
    Ok(report)
}
