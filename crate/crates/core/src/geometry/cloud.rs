use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Density, Domain, GeometryError, SpatialIndex};
use crate::calculus::ScalarField;

/// Proposals between acceptance-rate checks.
const ACCEPTANCE_CHECK_INTERVAL: u64 = 1 << 20;
const MIN_ACCEPTANCE_RATE: f64 = 1e-4;

/// A point set strictly inside a domain; ids are positions in sampling order.
#[derive(Clone, Debug, PartialEq)]
pub struct DataCloud {
    dim: usize,
    coords: Vec<f64>,
    seed: Option<u64>,
    domain: Domain,
}

impl DataCloud {
    /// Wrap explicit points, checking strict containment.
    pub fn from_points(domain: Domain, points: &[Vec<f64>]) -> Result<Self, GeometryError> {
        let dim = domain.dim();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    actual: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        DataCloud::from_coords(domain, coords, None)
    }

    /// Row-major coordinates, `dim` per point.
    pub fn from_coords(
        domain: Domain,
        coords: Vec<f64>,
        seed: Option<u64>,
    ) -> Result<Self, GeometryError> {
        let dim = domain.dim();
        if !coords.len().is_multiple_of(dim) {
            return Err(GeometryError::InvalidArgument(format!(
                "{} coordinates do not split into {dim}-dimensional points",
                coords.len()
            )));
        }
        for (index, p) in coords.chunks_exact(dim).enumerate() {
            if !domain.contains(p) {
                return Err(GeometryError::PointOutside {
                    index,
                    point: p.to_vec(),
                });
            }
        }
        Ok(DataCloud {
            dim,
            coords,
            seed,
            domain,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, id: usize) -> &[f64] {
        &self.coords[id * self.dim..(id + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// `field` evaluated at every point, in id order.
    pub fn sample_field(&self, field: &dyn ScalarField) -> Vec<f64> {
        self.points().map(|p| field.value(p)).collect()
    }
}

/// Draw `n` i.i.d. points from `density` by rejection against the uniform law
/// on the bounding box with envelope `phi1`.
pub fn sample_cloud(
    domain: &Domain,
    density: &Density,
    n: usize,
    seed: u64,
) -> Result<DataCloud, GeometryError> {
    if n == 0 {
        return Err(GeometryError::InvalidArgument(
            "n must be at least 1".into(),
        ));
    }
    if density.dim() != domain.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: domain.dim(),
            actual: density.dim(),
        });
    }
    let dim = domain.dim();
    let (lower, upper) = domain.bounding_box();
    let envelope = density.phi1();
    let uniform = density.is_uniform();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(n * dim);
    let mut x = vec![0.0; dim];
    let (mut attempts, mut accepted) = (0u64, 0u64);
    while accepted < n as u64 {
        attempts += 1;
        for (k, v) in x.iter_mut().enumerate() {
            *v = lower[k] + (upper[k] - lower[k]) * rng.random::<f64>();
        }
        let mark: f64 = if uniform { 0.0 } else { rng.random::<f64>() };
        if domain.contains(&x) && (uniform || mark * envelope <= density.value(&x)) {
            coords.extend_from_slice(&x);
            accepted += 1;
        }
        if attempts % ACCEPTANCE_CHECK_INTERVAL == 0 {
            let rate = accepted as f64 / attempts as f64;
            if rate < MIN_ACCEPTANCE_RATE {
                return Err(GeometryError::LowAcceptance { rate, attempts });
            }
        }
    }
    Ok(DataCloud {
        dim,
        coords,
        seed: Some(seed),
        domain: domain.clone(),
    })
}

/// Cloud ids inside the inner strip `{dist(x, boundary) <= eps}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryStrip {
    pub ids: Vec<usize>,
    /// Set when the strip swallows every point (no interior left).
    pub degenerate: bool,
}

pub fn boundary_strip(cloud: &DataCloud, eps: f64) -> Result<BoundaryStrip, GeometryError> {
    if !(eps > 0.0) {
        return Err(GeometryError::InvalidArgument(format!(
            "strip width must be positive, got {eps}"
        )));
    }
    let domain = cloud.domain();
    let ids: Vec<usize> = cloud
        .points()
        .enumerate()
        .filter(|(_, p)| domain.boundary_distance(p) <= eps)
        .map(|(i, _)| i)
        .collect();
    let degenerate = ids.len() == cloud.len();
    Ok(BoundaryStrip { ids, degenerate })
}

/// Monte Carlo lower bound on `sup_y dist(y, cloud)`: the largest nearest-point
/// distance over `probe_count` uniform probes of the domain.
pub fn covering_radius(
    cloud: &Arc<DataCloud>,
    probe_count: usize,
    seed: u64,
) -> Result<f64, GeometryError> {
    if probe_count == 0 {
        return Err(GeometryError::InvalidArgument(
            "probe_count must be at least 1".into(),
        ));
    }
    if cloud.is_empty() {
        return Err(GeometryError::InvalidArgument("cloud is empty".into()));
    }
    let index = SpatialIndex::for_nearest(Arc::clone(cloud));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut radius: f64 = 0.0;
    for _ in 0..probe_count {
        let y = cloud.domain().sample_uniform(&mut rng);
        let id = index.nearest(&y);
        radius = radius.max(super::distance(&y, cloud.point(id)));
    }
    Ok(radius)
}
