//! Domains, density-weighted sampling, boundary strips, fixed-radius
//! neighbor queries and the nearest-point transport map.

mod cloud;
mod csv;
mod density;
mod domain;
mod index;

use thiserror::Error;

pub use self::cloud::{boundary_strip, covering_radius, sample_cloud, BoundaryStrip, DataCloud};
pub use self::csv::{read_cloud_csv, write_cloud_csv};
pub use self::density::Density;
pub use self::domain::{unit_ball_volume, Domain};
pub use self::index::SpatialIndex;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error(
        "rejection sampling acceptance rate {rate:e} after {attempts} proposals is below 1e-4; \
         the density is probably malformed"
    )]
    LowAcceptance { rate: f64, attempts: u64 },
    #[error("point {index} at {point:?} is not strictly inside the domain")]
    PointOutside { index: usize, point: Vec<f64> },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cloud csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Euclidean distance. In one dimension this is exactly `|a - b|`, which keeps
/// closed-ball membership reproducible for decimal ties.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == 1 {
        return (a[0] - b[0]).abs();
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Closed ball membership `|a - b| <= r`.
#[inline]
pub fn within(a: &[f64], b: &[f64], r: f64) -> bool {
    distance(a, b) <= r
}
