//! Total variation, line slicing, perimeters, coarea and Hausdorff content.
//!
//! The primary functional is the anisotropic (`l1` over directions) total
//! variation built from [`difference_measure`]. With dual-cell transverse
//! weights the discrete coarea identity holds exactly, which the generic
//! functions here can confirm in rational arithmetic.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{difference_measure, total_variation, unravel, SampledMap};
use crate::report::{Check, VerificationReport};
use crate::scalar::{Real, Scalar};

/// `Σ |s_{i+1} - s_i|`.
pub fn tv_1d<T: Scalar>(samples: &[T]) -> Result<T> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "tv_1d needs >= 2 samples, got {}",
            samples.len()
        )));
    }
    Ok(samples
        .windows(2)
        .fold(T::zero(), |acc, w| acc + (w[1].clone() - w[0].clone()).abs()))
}

fn check_axis(d: usize, axis: usize) -> Result<()> {
    if axis >= d {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} out of range for a {d}-dimensional grid"
        )));
    }
    Ok(())
}

/// `Σ_lines (variation along the line) · (transverse dual width)` for the
/// lines of `f` parallel to `axis`. Vector outputs use the Euclidean norm of
/// each step. Equals `total_variation(difference_measure(f, axis))`.
pub fn slice_variation_integral<T: Real>(f: &SampledMap<T>, axis: usize) -> Result<T> {
    let d = f.dim_in();
    check_axis(d, axis)?;
    let g = f.grid();
    let m = f.dim_out();
    let strides = g.strides();
    let n_line = g.shape[axis];
    // Lines are indexed by the transverse multi-index (axis coordinate fixed to 0).
    let mut tshape = g.shape.clone();
    tshape[axis] = 1;
    let n_lines: usize = tshape.iter().product();
    let mut idx = vec![0usize; d];
    let mut total = T::zero();
    let mut line = vec![T::zero(); n_line];
    for l in 0..n_lines {
        unravel(l, &tshape, &mut idx);
        let mut width = T::one();
        let mut base = 0usize;
        for a in 0..d {
            base += idx[a] * strides[a];
            if a != axis {
                width = width * g.dual_length(a, idx[a]);
            }
        }
        let var = if m == 1 {
            for (i, v) in line.iter_mut().enumerate() {
                *v = f.values()[base + i * strides[axis]];
            }
            tv_1d(&line)?
        } else {
            (0..n_line - 1)
                .map(|i| {
                    let p = f.at(base + i * strides[axis]);
                    let q = f.at(base + (i + 1) * strides[axis]);
                    p.iter()
                        .zip(q)
                        .map(|(a, b)| (*b - *a) * (*b - *a))
                        .fold(T::zero(), |s, x| s + x)
                        .sqrt()
                })
                .fold(T::zero(), |s, x| s + x)
        };
        total = total + var * width;
    }
    Ok(total)
}

/// Anisotropic total variation `Σ_axes Σ_components |Δ| · dual width`.
/// Uses only field operations, so it is exact on rationals.
pub fn anisotropic_tv<T: Scalar>(f: &SampledMap<T>) -> Result<T> {
    let mut total = T::zero();
    for axis in 0..f.dim_in() {
        total = total + difference_measure(f, axis)?.abs_mass();
    }
    Ok(total)
}

/// Isotropic total variation of a scalar field: `Σ_cells |∇u| · vol`, with
/// the gradient taken from edge differences averaged over each cell.
/// Secondary estimator; the coarea identity holds only up to `O(spacing)`.
pub fn isotropic_tv<T: Real>(u: &SampledMap<T>) -> Result<T> {
    if u.dim_out() != 1 {
        return Err(Error::Shape("isotropic_tv needs a scalar field".into()));
    }
    let g = u.grid();
    let d = g.ndim();
    let strides = g.strides();
    let cshape: Vec<usize> = g.shape.iter().map(|n| n - 1).collect();
    let n_cells: usize = cshape.iter().product();
    let vol = g.spacing.iter().fold(T::one(), |a, h| a * *h);
    let corners = 1usize << d;
    let half = T::one() / T::from_usize(corners / 2).expect("small integer");
    let mut idx = vec![0usize; d];
    let mut total = T::zero();
    for c in 0..n_cells {
        unravel(c, &cshape, &mut idx);
        let base: usize = (0..d).map(|a| idx[a] * strides[a]).sum();
        let mut norm2 = T::zero();
        for a in 0..d {
            let mut acc = T::zero();
            for corner in 0..corners {
                if corner >> a & 1 == 1 {
                    continue;
                }
                let p = base + (0..d).filter(|&b| corner >> b & 1 == 1).map(|b| strides[b]).sum::<usize>();
                acc = acc + u.values()[p + strides[a]] - u.values()[p];
            }
            let grad = acc * half / g.spacing[a];
            norm2 = norm2 + grad * grad;
        }
        total = total + norm2.sqrt() * vol;
    }
    Ok(total)
}

/// Relative anisotropic perimeter of `{u > t}`: every pair of adjacent
/// samples on opposite sides of `t` contributes its transverse dual width.
/// The domain boundary is not counted.
pub fn superlevel_perimeter<T: Scalar>(u: &SampledMap<T>, t: &T) -> Result<T> {
    if u.dim_out() != 1 {
        return Err(Error::Shape("superlevel_perimeter needs a scalar field".into()));
    }
    let g = u.grid();
    let d = g.ndim();
    let strides = g.strides();
    let vals = u.values();
    let mut total = T::zero();
    let mut idx = vec![0usize; d];
    for p in 0..g.len() {
        unravel(p, &g.shape, &mut idx);
        let above = vals[p] > *t;
        for axis in 0..d {
            if idx[axis] + 1 == g.shape[axis] {
                continue;
            }
            let q = p + strides[axis];
            if above != (vals[q] > *t) {
                let mut w = T::one();
                for a in 0..d {
                    if a != axis {
                        w = w * g.dual_length(a, idx[a]);
                    }
                }
                total = total + w;
            }
        }
    }
    Ok(total)
}

/// Superlevel perimeters at the midpoints between consecutive distinct
/// sample values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetProfile<T> {
    pub thresholds: Vec<T>,
    /// Gap between the two sample values bracketing each threshold.
    pub widths: Vec<T>,
    pub perimeters: Vec<T>,
}

impl<T: Scalar> LevelSetProfile<T> {
    /// `Σ P({u > t_i}) · width_i`, the exact layer-cake integral.
    pub fn integral(&self) -> T {
        self.perimeters
            .iter()
            .zip(&self.widths)
            .fold(T::zero(), |acc, (p, w)| acc + p.clone() * w.clone())
    }
}

pub fn level_set_profile<T: Scalar>(u: &SampledMap<T>) -> Result<LevelSetProfile<T>> {
    if u.dim_out() != 1 {
        return Err(Error::Shape("level_set_profile needs a scalar field".into()));
    }
    let mut levels: Vec<T> = u.values().to_vec();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("comparable samples"));
    levels.dedup();
    let pairs: Vec<(T, T)> = levels
        .windows(2)
        .map(|w| (T::midpoint(&w[0], &w[1]), w[1].clone() - w[0].clone()))
        .collect();
    let perimeters = pairs
        .par_iter()
        .map(|(t, _)| superlevel_perimeter(u, t))
        .collect::<Result<Vec<T>>>()?;
    let (thresholds, widths) = pairs.into_iter().unzip();
    Ok(LevelSetProfile {
        thresholds,
        widths,
        perimeters,
    })
}

/// Both sides of the discrete coarea identity: anisotropic `|Du|` and the
/// layer-cake integral of superlevel perimeters.
pub fn coarea_sides<T: Scalar>(u: &SampledMap<T>) -> Result<(T, T)> {
    if u.dim_out() != 1 {
        return Err(Error::Shape("coarea needs a scalar field".into()));
    }
    let tv = anisotropic_tv(u)?;
    let layer = level_set_profile(u)?.integral();
    Ok((tv, layer))
}

/// Coarea comparison for a float field, with the isotropic estimator
/// reported alongside.
pub fn coarea_check(u: &SampledMap<f64>, tol: f64) -> Result<VerificationReport> {
    let (tv, layer) = coarea_sides(u)?;
    let mut report = VerificationReport::new("coarea");
    report.push(Check::relative("anisotropic_tv_vs_layer_cake", tv, layer, tol));
    let iso = isotropic_tv(u)?;
    report.push(Check::relative("isotropic_tv_vs_layer_cake", iso, layer, tol).informational());
    Ok(report)
}

/// Result of [`hausdorff_content`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentEstimate {
    /// Best (smallest) of the passes.
    pub value: f64,
    /// Lexicographic, centre-out and reverse-lexicographic passes.
    pub passes: [f64; 3],
}

fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct SpatialHash<const D: usize> {
    cell: f64,
    buckets: HashMap<[i64; D], Vec<usize>>,
}

impl<const D: usize> SpatialHash<D> {
    fn new(points: &[[f64; D]], cell: f64) -> Self {
        let mut buckets: HashMap<[i64; D], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key_of(p, cell)).or_default().push(i);
        }
        SpatialHash { cell, buckets }
    }

    fn key_of(p: &[f64; D], cell: f64) -> [i64; D] {
        let mut k = [0i64; D];
        for a in 0..D {
            k[a] = (p[a] / cell).floor() as i64;
        }
        k
    }

    /// Indices of points within `r` of `p` (bucket-level superset, then filtered).
    fn within(&self, points: &[[f64; D]], p: &[f64; D], r: f64, out: &mut Vec<usize>) {
        out.clear();
        let reach = (r / self.cell).ceil() as i64;
        let centre = Self::key_of(p, self.cell);
        let span = (2 * reach + 1) as usize;
        let r2 = r * r;
        for flat in 0..span.pow(D as u32) {
            let mut key = centre;
            let mut rem = flat;
            for k in key.iter_mut() {
                *k += (rem % span) as i64 - reach;
                rem /= span;
            }
            if let Some(b) = self.buckets.get(&key) {
                out.extend(b.iter().copied().filter(|&i| dist2(&points[i], p) <= r2));
            }
        }
    }
}

fn greedy_pass<const D: usize>(
    points: &[[f64; D]],
    order: &[usize],
    hash: &SpatialHash<D>,
    k: u32,
    delta: f64,
) -> f64 {
    let n = points.len();
    let mut owner = vec![usize::MAX; n];
    let mut total = 0.0;
    let mut near = Vec::new();
    let mut probe = Vec::new();
    for (cluster_id, &seed) in order.iter().enumerate() {
        if owner[seed] != usize::MAX {
            continue;
        }
        hash.within(points, &points[seed], delta / 2.0, &mut near);
        let members: Vec<usize> = near.iter().copied().filter(|&i| owner[i] == usize::MAX).collect();
        for &i in &members {
            owner[i] = cluster_id;
        }
        let mut diam2: f64 = 0.0;
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                diam2 = diam2.max(dist2(&points[i], &points[j]));
            }
        }
        // Gap to the nearest point outside the cluster, so consecutive cover
        // elements leave no hole between samples of a continuum.
        let mut gap2 = f64::INFINITY;
        hash.within(points, &points[seed], delta / 2.0 + delta, &mut near);
        for &q in near.iter().filter(|&&q| owner[q] != cluster_id) {
            hash.within(points, &points[q], delta, &mut probe);
            for &p in probe.iter().filter(|&&p| owner[p] == cluster_id) {
                gap2 = gap2.min(dist2(&points[p], &points[q]));
            }
        }
        let charge = if gap2.is_infinite() {
            if k == 2 {
                diam2.min(delta * delta)
            } else {
                diam2.sqrt().min(delta)
            }
        } else {
            let d = (diam2.sqrt() + gap2.sqrt().min(delta)).min(delta);
            d.powi(k as i32)
        };
        total += charge;
    }
    total
}

/// Greedy upper estimate of the unnormalized Hausdorff content
/// `H^k_delta = inf Σ diam^k` of a finite point cloud. Each pass seeds a
/// cluster at the next unassigned point, absorbs the unassigned points
/// within `delta / 2`, and charges the cluster diameter plus the gap to the
/// nearest outside point (capped at `delta`). The best of three orderings is
/// returned.
pub fn hausdorff_content<const D: usize>(
    points: &[[f64; D]],
    k: u32,
    delta: f64,
) -> Result<ContentEstimate> {
    if !(k == 1 || k == 2) {
        return Err(Error::InvalidArgument(format!("content exponent must be 1 or 2, got {k}")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty point cloud".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite point coordinates".into()));
    }
    let hash = SpatialHash::new(points, delta / 2.0);
    let cmp = |a: &usize, b: &usize| {
        points[*a]
            .partial_cmp(&points[*b])
            .expect("finite coordinates")
            .then(a.cmp(b))
    };
    let mut lex: Vec<usize> = (0..points.len()).collect();
    lex.sort_by(cmp);
    let rev: Vec<usize> = lex.iter().rev().copied().collect();
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        for a in 0..D {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let mut centre = [0.0; D];
    for a in 0..D {
        centre[a] = 0.5 * (lo[a] + hi[a]);
    }
    let mut out: Vec<usize> = (0..points.len()).collect();
    out.sort_by(|a, b| {
        dist2(&points[*a], &centre)
            .partial_cmp(&dist2(&points[*b], &centre))
            .expect("finite")
            .then(cmp(a, b))
    });
    let passes = [
        greedy_pass(points, &lex, &hash, k, delta),
        greedy_pass(points, &out, &hash, k, delta),
        greedy_pass(points, &rev, &hash, k, delta),
    ];
    let value = passes.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(ContentEstimate { value, passes })
}

/// Total variation of the directional difference measure, the cell-based
/// counterpart of [`slice_variation_integral`].
pub fn directional_variation<T: Real>(f: &SampledMap<T>, axis: usize) -> Result<T> {
    Ok(total_variation(&difference_measure(f, axis)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::gallery::{cantor_function, CantorStaircase};
    use num_rational::BigRational;

    fn unit(shape: &[usize]) -> Grid<f64> {
        let d = shape.len();
        Grid::spanning(shape, &vec![0.0; d], &vec![1.0; d]).unwrap()
    }

    #[test]
    fn tv_1d_examples() {
        assert_eq!(tv_1d(&[1.0, 2.0, 5.0]).unwrap(), 4.0);
        assert!(tv_1d(&[1.0]).is_err());
        let c = cantor_function(8).unwrap();
        let n = 3usize.pow(8);
        let s: Vec<f64> = (0..=n).map(|i| c.eval(&(i as f64 / n as f64))).collect();
        assert_eq!(tv_1d(&s).unwrap(), 1.0);
        let s: Vec<f64> = (0..1001)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / 1000.0).sin())
            .collect();
        assert!((tv_1d(&s).unwrap() - 4.0).abs() < 1e-4);
    }

    #[test]
    fn slice_integral_examples() {
        let f = SampledMap::from_fn(unit(&[11, 21]), 1, |x, o| o[0] = x[1]).unwrap();
        assert!((slice_variation_integral(&f, 1).unwrap() - 1.0).abs() < 1e-14);
        let h = CantorStaircase::new(6).unwrap();
        let f = SampledMap::from_fn(unit(&[730, 9]), 2, |x, o| {
            o[0] = h.eval(x[0]);
            o[1] = x[1];
        })
        .unwrap();
        assert!((slice_variation_integral(&f, 0).unwrap() - 2.0).abs() < 1e-12);
        let c = SampledMap::from_fn(unit(&[5, 5]), 1, |_, o| o[0] = 7.0).unwrap();
        assert_eq!(slice_variation_integral(&c, 0).unwrap(), 0.0);
        assert!(slice_variation_integral(&c, 2).is_err());
    }

    #[test]
    fn perimeter_examples() {
        let u = SampledMap::from_fn(unit(&[101, 101]), 1, |x, o| o[0] = x[0]).unwrap();
        assert!((superlevel_perimeter(&u, &0.5).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(superlevel_perimeter(&u, &2.0).unwrap(), 0.0);
        let n = 201;
        let h = 1.0 / (n - 1) as f64;
        let d = SampledMap::from_fn(unit(&[n, n]), 1, |x, o| {
            o[0] = ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt()
        })
        .unwrap();
        let p = superlevel_perimeter(&d, &0.25).unwrap();
        assert!((p - 2.0).abs() <= 2.0 * 4.0 * h, "{p}");
    }

    #[test]
    fn coarea_exact_on_examples() {
        let u = SampledMap::from_fn(unit(&[17, 9]), 1, |x, o| o[0] = x[0]).unwrap();
        let (a, b) = coarea_sides(&u).unwrap();
        assert!((a - 1.0).abs() < 1e-12 && (a - b).abs() < 1e-12);
        let c = SampledMap::from_fn(unit(&[4, 4]), 1, |_, o| o[0] = 1.0).unwrap();
        assert_eq!(coarea_sides(&c).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn coarea_is_exact_in_rationals() {
        let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        let g = Grid::new(vec![3, 4], vec![q(1, 2), q(1, 3)], vec![q(0, 1), q(0, 1)]).unwrap();
        let vals = [3, -1, 4, 1, -5, 9, 2, 6, 5, 3, 5, 8];
        let u = SampledMap::new(g, 1, vals.iter().map(|&v| q(v, 7)).collect()).unwrap();
        let (tv, layer) = coarea_sides(&u).unwrap();
        assert_eq!(tv, layer);
    }

    #[test]
    fn content_examples() {
        let seg: Vec<[f64; 2]> = (0..1001).map(|i| [i as f64 * 0.002, 0.0]).collect();
        let c = hausdorff_content(&seg, 1, 0.1).unwrap();
        assert!((2.0..=2.2).contains(&c.value), "{c:?}");
        assert_eq!(hausdorff_content(&[[0.3, 0.4]], 1, 0.1).unwrap().value, 0.0);
        let grid: Vec<[f64; 2]> = (0..101 * 101)
            .map(|i| [(i / 101) as f64 / 100.0, (i % 101) as f64 / 100.0])
            .collect();
        let c = hausdorff_content(&grid, 2, 2.0).unwrap();
        assert!(c.value <= 2.0, "{c:?}");
        assert!(hausdorff_content(&grid, 3, 2.0).is_err());
        assert!(hausdorff_content(&grid, 1, 0.0).is_err());
    }

    #[test]
    fn isotropic_tv_of_linear_field() {
        let u = SampledMap::from_fn(unit(&[9, 9]), 1, |x, o| o[0] = 3.0 * x[0] + 4.0 * x[1]).unwrap();
        assert!((isotropic_tv(&u).unwrap() - 5.0).abs() < 1e-12);
        assert!((anisotropic_tv(&u).unwrap() - 7.0).abs() < 1e-12);
    }
}
