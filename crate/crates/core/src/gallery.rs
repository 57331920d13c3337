//! Closed-form example maps and their analytic reference values.
//!
//! The Cantor-based maps use the piecewise-linear level-`L` approximant of
//! the ternary Cantor function, so every map in the gallery is a genuine
//! homeomorphism at finite level. The reference values in [`oracle`] are
//! derived from the closed forms (exact piecewise-linear integration, minors
//! of constant matrices) and never call the numerical pipeline.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, SampledMap};
use crate::scalar::Scalar;

/// Level-`L` piecewise-linear approximant `c_L` of the Cantor ternary function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CantorFunction {
    level: u32,
}

/// Deepest level for which the knot table is materialized.
pub const MAX_CANTOR_LEVEL: u32 = 24;

/// Depth used to decide whether a point lies off the limiting Cantor set.
const CANTOR_SET_DEPTH: u32 = 60;

pub fn cantor_function(level: i64) -> Result<CantorFunction> {
    if level < 0 {
        return Err(Error::InvalidArgument(format!(
            "Cantor level must be >= 0, got {level}"
        )));
    }
    if level > MAX_CANTOR_LEVEL as i64 {
        return Err(Error::InvalidArgument(format!(
            "Cantor level {level} exceeds the supported maximum {MAX_CANTOR_LEVEL}"
        )));
    }
    Ok(CantorFunction {
        level: level as u32,
    })
}

impl CantorFunction {
    pub fn level(&self) -> u32 {
        self.level
    }

    /// `c_L(x)` in any ordered field; exact on rationals. Arguments are
    /// clamped to `[0, 1]`.
    pub fn eval<T: Scalar>(&self, x: &T) -> T {
        let (zero, one) = (T::zero(), T::one());
        let (two, three) = (T::of(2), T::of(3));
        let mut x = if *x < zero {
            zero.clone()
        } else if *x > one {
            one.clone()
        } else {
            x.clone()
        };
        let mut offset = zero;
        let mut scale = one;
        for _ in 0..self.level {
            let third = x.clone() * three.clone();
            if third < T::one() {
                x = third;
                scale = scale / two.clone();
            } else if third > two {
                x = third - two.clone();
                scale = scale / two.clone();
                offset = offset + scale.clone();
            } else {
                return offset + scale / two;
            }
        }
        offset + scale * x
    }

    /// Knots `(x_i, c_L(x_i))` of the piecewise-linear graph, increasing in `x`.
    pub fn knots(&self) -> Vec<(f64, f64)> {
        let n = 1usize << self.level;
        let width = 3f64.powi(-(self.level as i32));
        let mut out = Vec::with_capacity(2 * n);
        for m in 0..n {
            // Left end of the m-th rising interval: ternary digits of m in {0, 2}.
            let mut x = 0.0;
            let mut w = 1.0;
            for bit in (0..self.level).rev() {
                w /= 3.0;
                if m >> bit & 1 == 1 {
                    x += 2.0 * w;
                }
            }
            let c0 = m as f64 / n as f64;
            let c1 = (m + 1) as f64 / n as f64;
            out.push((x, c0));
            out.push((x + width, c1));
        }
        out
    }

    /// Classical derivative of `c_L` (`None` at knots).
    pub fn derivative(&self, x: f64) -> Option<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Some(0.0);
        }
        let slope = 1.5f64.powi(self.level as i32);
        let mut u = x;
        for _ in 0..self.level {
            let t = 3.0 * u;
            if t < 1.0 {
                u = t;
            } else if t > 2.0 {
                u = t - 2.0;
            } else if t == 1.0 || t == 2.0 {
                return None;
            } else {
                return Some(0.0);
            }
        }
        if u == 0.0 || u == 1.0 {
            None
        } else {
            Some(slope)
        }
    }
}

/// Derivative of the limiting Cantor function: zero on every removed middle
/// third, undefined on the (null) Cantor set itself.
pub fn cantor_limit_derivative(x: f64) -> Option<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Some(0.0);
    }
    let mut u = x;
    for _ in 0..CANTOR_SET_DEPTH {
        let t = 3.0 * u;
        if t > 1.0 && t < 2.0 {
            return Some(0.0);
        }
        u = if t <= 1.0 { t } else { t - 2.0 };
    }
    None
}

/// `h(x) = x + c_L(x)` together with its piecewise-linear inverse.
#[derive(Debug, Clone)]
pub struct CantorStaircase {
    cantor: CantorFunction,
    /// Knots `(x, h(x))` including both ends.
    knots: Vec<(f64, f64)>,
}

impl CantorStaircase {
    pub fn new(level: u32) -> Result<Self> {
        let cantor = cantor_function(level as i64)?;
        let mut knots: Vec<(f64, f64)> = Vec::new();
        for (x, c) in cantor.knots() {
            let p = (x, x + c);
            if knots.last().is_none_or(|q| q.0 < p.0) {
                knots.push(p);
            }
        }
        if knots.first().is_none_or(|q| q.0 > 0.0) {
            knots.insert(0, (0.0, 0.0));
        }
        if knots.last().is_none_or(|q| q.0 < 1.0) {
            knots.push((1.0, 2.0));
        }
        Ok(CantorStaircase { cantor, knots })
    }

    pub fn cantor(&self) -> &CantorFunction {
        &self.cantor
    }

    pub fn eval(&self, x: f64) -> f64 {
        x + self.cantor.eval(&x)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// `g = h^{-1}` on `[0, 2]`, piecewise linear between the knot images.
    pub fn inverse(&self, y: f64) -> f64 {
        let y = y.clamp(0.0, 2.0);
        let i = self.knots.partition_point(|k| k.1 <= y);
        if i == 0 {
            return self.knots[0].0;
        }
        if i == self.knots.len() {
            return self.knots[i - 1].0;
        }
        let (x0, y0) = self.knots[i - 1];
        let (x1, y1) = self.knots[i];
        x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    }

    /// Total variation of `h` on `[0, 1]` by summing the linear pieces.
    pub fn variation(&self) -> f64 {
        self.knots.windows(2).map(|w| (w[1].1 - w[0].1).abs()).sum()
    }
}

/// Names and parameters of the gallery maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum GallerySpec {
    /// `h(x) = x + c_L(x)` on `[0, 1]`.
    Cantor1d { level: u32 },
    /// `(x, y, z) -> (x + c_L(x), y, z)` on `(0, 1)^3`.
    CantorShear3d { level: u32 },
    Identity3d,
    /// `x -> A x` on the unit square or cube; `matrix` is row-major 2x2 or 3x3.
    Linear { matrix: Vec<f64> },
    /// Angle-multiplying map `r e^{i theta} -> r e^{i k theta}` on `[-1, 1]^2`.
    Zpow { k: i32 },
    /// `x -> |x|^{power - 1} x` on `[-1, 1]^2`.
    RadialStretch { power: f64 },
    /// `(x, y) -> (x + amount sin(pi y), y)` on `[0, 1]^2`.
    Shear2d { amount: f64 },
}

impl GallerySpec {
    pub fn label(&self) -> &'static str {
        match self {
            GallerySpec::Cantor1d { .. } => "cantor1d",
            GallerySpec::CantorShear3d { .. } => "cantor_shear3d",
            GallerySpec::Identity3d => "identity3d",
            GallerySpec::Linear { .. } => "linear",
            GallerySpec::Zpow { .. } => "zpow",
            GallerySpec::RadialStretch { .. } => "radial_stretch",
            GallerySpec::Shear2d { .. } => "shear2d",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GallerySpec::Cantor1d { level } | GallerySpec::CantorShear3d { level } => {
                cantor_function(*level as i64).map(|_| ())
            }
            GallerySpec::Identity3d => Ok(()),
            GallerySpec::Linear { matrix } => {
                let det = match matrix.len() {
                    4 => det2(matrix),
                    9 => det3(matrix),
                    n => {
                        return Err(Error::InvalidArgument(format!(
                            "linear map needs 4 or 9 entries, got {n}"
                        )))
                    }
                };
                if matrix.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("matrix entries must be finite".into()));
                }
                if det == 0.0 {
                    return Err(Error::InvalidArgument("linear map is singular".into()));
                }
                Ok(())
            }
            GallerySpec::Zpow { k } => {
                if *k == 0 {
                    Err(Error::InvalidArgument("zpow needs k != 0".into()))
                } else {
                    Ok(())
                }
            }
            GallerySpec::RadialStretch { power } => {
                if *power > 0.0 && power.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument("radial stretch needs power > 0".into()))
                }
            }
            GallerySpec::Shear2d { amount } => {
                if amount.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument("shear amount must be finite".into()))
                }
            }
        }
    }

    pub fn dim_in(&self) -> usize {
        match self {
            GallerySpec::Cantor1d { .. } => 1,
            GallerySpec::CantorShear3d { .. } | GallerySpec::Identity3d => 3,
            GallerySpec::Linear { matrix } => {
                if matrix.len() == 9 {
                    3
                } else {
                    2
                }
            }
            _ => 2,
        }
    }

    pub fn dim_out(&self) -> usize {
        self.dim_in()
    }

    /// Canonical sampling domain `(lo, hi)`.
    pub fn domain(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim_in();
        match self {
            GallerySpec::Zpow { .. } | GallerySpec::RadialStretch { .. } => {
                (vec![-1.0; d], vec![1.0; d])
            }
            _ => (vec![0.0; d], vec![1.0; d]),
        }
    }

    pub fn is_homeomorphism(&self) -> bool {
        match self {
            GallerySpec::Zpow { k } => k.abs() == 1,
            _ => true,
        }
    }

    /// Whether the map is smooth (so central differences of its samples
    /// approximate its classical derivative).
    pub fn is_smooth(&self) -> bool {
        match self {
            GallerySpec::Identity3d | GallerySpec::Linear { .. } | GallerySpec::Shear2d { .. } => {
                true
            }
            GallerySpec::RadialStretch { power } => *power == 1.0 || *power >= 2.0,
            _ => false,
        }
    }

    /// Builds the pointwise evaluator.
    pub fn evaluator(&self) -> Result<GalleryMap> {
        self.validate()?;
        let staircase = match self {
            GallerySpec::Cantor1d { level } | GallerySpec::CantorShear3d { level } => {
                Some(CantorStaircase::new(*level)?)
            }
            _ => None,
        };
        Ok(GalleryMap {
            spec: self.clone(),
            staircase,
        })
    }
}

fn det2(m: &[f64]) -> f64 {
    m[0] * m[3] - m[1] * m[2]
}

fn det3(m: &[f64]) -> f64 {
    m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
        + m[2] * (m[3] * m[7] - m[4] * m[6])
}

/// Minor of a row-major 3x3 matrix with row `r` and column `c` removed.
pub fn minor3(m: &[f64], r: usize, c: usize) -> f64 {
    let rows: Vec<usize> = (0..3).filter(|&i| i != r).collect();
    let cols: Vec<usize> = (0..3).filter(|&j| j != c).collect();
    m[rows[0] * 3 + cols[0]] * m[rows[1] * 3 + cols[1]]
        - m[rows[0] * 3 + cols[1]] * m[rows[1] * 3 + cols[0]]
}

/// Pointwise evaluator for a [`GallerySpec`].
#[derive(Debug, Clone)]
pub struct GalleryMap {
    spec: GallerySpec,
    staircase: Option<CantorStaircase>,
}

impl GalleryMap {
    pub fn spec(&self) -> &GallerySpec {
        &self.spec
    }

    pub fn dim_in(&self) -> usize {
        self.spec.dim_in()
    }

    pub fn dim_out(&self) -> usize {
        self.spec.dim_out()
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match &self.spec {
            GallerySpec::Cantor1d { .. } => {
                out[0] = self.staircase.as_ref().expect("staircase").eval(x[0]);
            }
            GallerySpec::CantorShear3d { .. } => {
                out[0] = self.staircase.as_ref().expect("staircase").eval(x[0]);
                out[1] = x[1];
                out[2] = x[2];
            }
            GallerySpec::Identity3d => out.copy_from_slice(&x[..3]),
            GallerySpec::Linear { matrix } => {
                let n = self.dim_in();
                for (r, o) in out.iter_mut().enumerate().take(n) {
                    *o = (0..n).map(|c| matrix[r * n + c] * x[c]).sum();
                }
            }
            GallerySpec::Zpow { k } => {
                let r = x[0].hypot(x[1]);
                if r == 0.0 {
                    out[0] = 0.0;
                    out[1] = 0.0;
                } else {
                    let theta = *k as f64 * x[1].atan2(x[0]);
                    out[0] = r * theta.cos();
                    out[1] = r * theta.sin();
                }
            }
            GallerySpec::RadialStretch { power } => {
                let r = x[0].hypot(x[1]);
                let s = if r == 0.0 { 0.0 } else { r.powf(power - 1.0) };
                out[0] = s * x[0];
                out[1] = s * x[1];
            }
            GallerySpec::Shear2d { amount } => {
                out[0] = x[0] + amount * (PI * x[1]).sin();
                out[1] = x[1];
            }
        }
    }

    pub fn eval_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_out()];
        self.eval(x, &mut out);
        out
    }

    /// Row-major classical differential where it exists. Cantor-based maps
    /// report the differential of the limiting map (the Cantor function has
    /// zero derivative off the Cantor set), i.e. only the absolutely
    /// continuous part of the derivative; `None` on the null exceptional set.
    pub fn ae_differential(&self, x: &[f64]) -> Option<Vec<f64>> {
        match &self.spec {
            GallerySpec::Cantor1d { .. } => Some(vec![1.0 + cantor_limit_derivative(x[0])?]),
            GallerySpec::CantorShear3d { .. } => {
                let d = 1.0 + cantor_limit_derivative(x[0])?;
                Some(vec![d, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
            }
            GallerySpec::Identity3d => Some(vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
            GallerySpec::Linear { matrix } => Some(matrix.clone()),
            GallerySpec::Zpow { k } => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                if r2 == 0.0 {
                    return None;
                }
                let r = r2.sqrt();
                let phi = x[1].atan2(x[0]);
                let kf = *k as f64;
                let (c, s) = ((kf * phi).cos(), (kf * phi).sin());
                // d/dx of r and phi.
                let (rx, ry) = (x[0] / r, x[1] / r);
                let (px, py) = (-x[1] / r2, x[0] / r2);
                Some(vec![
                    rx * c - r * s * kf * px,
                    ry * c - r * s * kf * py,
                    rx * s + r * c * kf * px,
                    ry * s + r * c * kf * py,
                ])
            }
            GallerySpec::RadialStretch { power } => {
                let r = x[0].hypot(x[1]);
                if r == 0.0 {
                    return if *power == 1.0 {
                        Some(vec![1.0, 0.0, 0.0, 1.0])
                    } else {
                        None
                    };
                }
                let s = r.powf(power - 1.0);
                let ds = (power - 1.0) * r.powf(power - 3.0);
                Some(vec![
                    s + ds * x[0] * x[0],
                    ds * x[0] * x[1],
                    ds * x[0] * x[1],
                    s + ds * x[1] * x[1],
                ])
            }
            GallerySpec::Shear2d { amount } => {
                Some(vec![1.0, amount * PI * (PI * x[1]).cos(), 0.0, 1.0])
            }
        }
    }

    /// Analytic inverse for homeomorphisms; `None` outside the image or for
    /// maps that are not injective.
    pub fn inverse(&self, y: &[f64]) -> Option<Vec<f64>> {
        match &self.spec {
            GallerySpec::Cantor1d { .. } => {
                (0.0..=2.0).contains(&y[0]).then(|| vec![self.staircase.as_ref().expect("staircase").inverse(y[0])])
            }
            GallerySpec::CantorShear3d { .. } => Some(vec![
                self.staircase.as_ref().expect("staircase").inverse(y[0]),
                y[1],
                y[2],
            ]),
            GallerySpec::Identity3d => Some(y[..3].to_vec()),
            GallerySpec::Linear { matrix } => {
                if matrix.len() == 4 {
                    let d = det2(matrix);
                    Some(vec![
                        (matrix[3] * y[0] - matrix[1] * y[1]) / d,
                        (-matrix[2] * y[0] + matrix[0] * y[1]) / d,
                    ])
                } else {
                    let d = det3(matrix);
                    // x = adj(A) y / det, adj(A)[i][j] = (-1)^{i+j} M_{ji}.
                    Some(
                        (0..3)
                            .map(|i| {
                                (0..3)
                                    .map(|j| {
                                        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                                        sign * minor3(matrix, j, i) * y[j]
                                    })
                                    .sum::<f64>()
                                    / d
                            })
                            .collect(),
                    )
                }
            }
            GallerySpec::Zpow { k } if k.abs() == 1 => {
                Some(vec![y[0], if *k == 1 { y[1] } else { -y[1] }])
            }
            GallerySpec::Zpow { .. } => None,
            GallerySpec::RadialStretch { power } => {
                let r = y[0].hypot(y[1]);
                let s = if r == 0.0 { 0.0 } else { r.powf(1.0 / power - 1.0) };
                Some(vec![s * y[0], s * y[1]])
            }
            GallerySpec::Shear2d { amount } => {
                Some(vec![y[0] - amount * (PI * y[1]).sin(), y[1]])
            }
        }
    }
}

/// Samples `spec` on `shape` points spanning its canonical domain.
pub fn make_map(spec: &GallerySpec, shape: &[usize]) -> Result<SampledMap<f64>> {
    let (lo, hi) = spec.domain();
    if shape.len() != spec.dim_in() {
        return Err(Error::Shape(format!(
            "{} needs a {}-axis shape, got {:?}",
            spec.label(),
            spec.dim_in(),
            shape
        )));
    }
    let grid = Grid::spanning(shape, &lo, &hi)?;
    make_map_on(spec, grid)
}

/// Samples `spec` on an explicit grid.
pub fn make_map_on(spec: &GallerySpec, grid: Grid<f64>) -> Result<SampledMap<f64>> {
    let eval = spec.evaluator()?;
    if grid.ndim() != spec.dim_in() {
        return Err(Error::Shape(format!(
            "{} needs a {}-dimensional grid",
            spec.label(),
            spec.dim_in()
        )));
    }
    SampledMap::from_fn(grid, spec.dim_out(), |x, o| eval.eval(x, o))
}

/// Quantities with an analytic reference value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `|ADJ Df|((0,1)^3)` under the entrywise-sum norm.
    AdjTotalVariation,
    /// `Σ_i ∫ H^2(f({x_i = t})) dt`.
    MuTotal,
    /// Anisotropic total variation of the inverse on the image.
    InverseTvTotal,
    /// `∫ |adj Df|` with the classical (a.e.) differential.
    PointwiseAdjTotal,
    /// `∫ deg(f, B(0, r), y) dy` for a centred disk.
    JacobianMassDisk { radius: f64 },
    /// Variation of a 1D map over its domain.
    Variation1d,
}

fn unsupported(spec: &GallerySpec, q: Quantity) -> Error {
    Error::Unsupported(format!("no oracle for {q:?} of {}", spec.label()))
}

/// `(ADJ Df)` entry totals `[k][j]` (slice axis `k`, dropped output `j`).
pub fn oracle_adj_entries(spec: &GallerySpec) -> Result<[[f64; 3]; 3]> {
    spec.validate()?;
    match spec {
        GallerySpec::CantorShear3d { level } => {
            let var = CantorStaircase::new(*level)?.variation();
            // x-slices: (y, z) -> (h(t), y, z); dropping output 0 leaves the identity.
            // y-slices: (x, z) -> (h(x), t, z); dropping output 1 leaves [h(x), z].
            // z-slices: (x, y) -> (h(x), y, t); dropping output 2 leaves [h(x), y].
            let mut e = [[0.0; 3]; 3];
            e[0][0] = 1.0;
            e[1][1] = var;
            e[2][2] = var;
            Ok(e)
        }
        GallerySpec::Identity3d => Ok([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
        GallerySpec::Linear { matrix } if matrix.len() == 9 => {
            // Slice x_k = t has Jacobian A with column k removed; dropping output
            // j removes row j.
            let mut e = [[0.0; 3]; 3];
            for (k, row) in e.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = minor3(matrix, j, k).abs();
                }
            }
            Ok(e)
        }
        _ => Err(unsupported(spec, Quantity::AdjTotalVariation)),
    }
}

/// Per-axis slice-image areas integrated over the slice parameter.
pub fn oracle_mu_axes(spec: &GallerySpec) -> Result<[f64; 3]> {
    spec.validate()?;
    match spec {
        GallerySpec::CantorShear3d { level } => {
            let var = CantorStaircase::new(*level)?.variation();
            Ok([1.0, var, var])
        }
        GallerySpec::Identity3d => Ok([1.0, 1.0, 1.0]),
        GallerySpec::Linear { matrix } if matrix.len() == 9 => {
            // Area of the parallelogram spanned by the two remaining columns.
            let mut out = [0.0; 3];
            for (k, o) in out.iter_mut().enumerate() {
                *o = (0..3).map(|j| minor3(matrix, j, k).powi(2)).sum::<f64>().sqrt();
            }
            Ok(out)
        }
        _ => Err(unsupported(spec, Quantity::MuTotal)),
    }
}

/// Per-coordinate anisotropic variation of the inverse over the image.
pub fn oracle_inverse_tv(spec: &GallerySpec) -> Result<[f64; 3]> {
    spec.validate()?;
    match spec {
        GallerySpec::CantorShear3d { level } => {
            let stair = CantorStaircase::new(*level)?;
            // g is monotone from 0 to 1 on every X-line of the unit (Y, Z)
            // square; the other coordinates have unit gradient over the image
            // volume h(1) - h(0).
            let g_var = stair.inverse(2.0) - stair.inverse(0.0);
            let vol = stair.eval(1.0) - stair.eval(0.0);
            Ok([g_var, vol, vol])
        }
        GallerySpec::Identity3d => Ok([1.0, 1.0, 1.0]),
        GallerySpec::Linear { matrix } if matrix.len() == 9 => {
            let det = det3(matrix).abs();
            let mut out = [0.0; 3];
            for (i, o) in out.iter_mut().enumerate() {
                // Row i of A^{-1} is row i of adj(A) / det; integrate over a
                // region of volume |det|.
                *o = (0..3).map(|j| minor3(matrix, j, i).abs()).sum::<f64>() / det * det;
            }
            Ok(out)
        }
        _ => Err(unsupported(spec, Quantity::InverseTvTotal)),
    }
}

/// Reference value of `quantity` for `spec`.
pub fn oracle(spec: &GallerySpec, quantity: Quantity) -> Result<f64> {
    spec.validate()?;
    match quantity {
        Quantity::AdjTotalVariation => Ok(oracle_adj_entries(spec)?.iter().flatten().sum()),
        Quantity::MuTotal => Ok(oracle_mu_axes(spec)?.iter().sum()),
        Quantity::InverseTvTotal => Ok(oracle_inverse_tv(spec)?.iter().sum()),
        Quantity::PointwiseAdjTotal => match spec {
            // adj diag(h', 1, 1) = diag(1, h', h') with h' = 1 a.e. in the limit.
            GallerySpec::CantorShear3d { .. } => Ok(3.0),
            GallerySpec::Identity3d | GallerySpec::Linear { .. } if spec.dim_in() == 3 => {
                Ok(oracle_adj_entries(spec)?.iter().flatten().sum())
            }
            _ => Err(unsupported(spec, quantity)),
        },
        Quantity::JacobianMassDisk { radius } => match spec {
            GallerySpec::Zpow { k } => Ok(*k as f64 * PI * radius * radius),
            GallerySpec::RadialStretch { power } => Ok(PI * radius.powf(2.0 * power)),
            GallerySpec::Shear2d { .. } => Ok(PI * radius * radius),
            GallerySpec::Linear { matrix } if matrix.len() == 4 => {
                Ok(det2(matrix) * PI * radius * radius)
            }
            _ => Err(unsupported(spec, quantity)),
        },
        Quantity::Variation1d => match spec {
            GallerySpec::Cantor1d { level } => Ok(CantorStaircase::new(*level)?.variation()),
            _ => Err(unsupported(spec, quantity)),
        },
    }
}
