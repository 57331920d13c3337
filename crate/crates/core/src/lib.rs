//! Numerical geometric measure theory on sampled maps: total variation,
//! planar degree, distributional Jacobians and the 3D distributional
//! adjugate, with a gallery of closed-form homeomorphisms to check against.
//!
//! Most of the representation layer is generic over [`Scalar`], so the exact
//! discrete identities can be confirmed in rational arithmetic. Raster and
//! quadrature code is `f64` only.

pub mod degree;
pub mod adjugate;
pub mod distjac;
pub mod error;
pub mod field;
pub mod gallery;
pub mod io;
pub mod report;
pub mod scalar;
pub mod variation;

pub use error::{Error, Result};
pub use field::{
    coordinate_pair, difference_measure, mollify, restrict_slice, total_variation, CellMeasure,
    ClosedPolyline, Grid, MollifierProfile, MollifierSpec, SampledMap,
};
pub use report::{Check, VerificationReport};
pub use scalar::{Real, Scalar};

/// Exact rationals.
pub type Rational = num_rational::BigRational;

pub type Map64 = SampledMap<f64>;
pub type Map32 = SampledMap<f32>;
pub type MapQ = SampledMap<Rational>;
pub type Measure64 = CellMeasure<f64>;
pub type MeasureQ = CellMeasure<Rational>;
pub type Polyline64 = ClosedPolyline<f64>;
