use super::{Domain, GeometryError};
use crate::calculus::{ScalarField, SmoothField};

/// Target cell count of the normalization quadrature.
const QUADRATURE_CELLS: f64 = 1e6;
/// Target point count of the gradient probe used for the Lipschitz bound.
const LIPSCHITZ_PROBES: f64 = 1e4;

/// A sampling density on a domain, rescaled so that it integrates to one.
#[derive(Clone, Debug)]
pub struct Density {
    field: SmoothField,
    scale: f64,
    phi_min: f64,
    phi_max: f64,
    lipschitz_bound: f64,
    volume: f64,
}

fn per_axis(dim: usize, total: f64) -> usize {
    (total.powf(1.0 / dim as f64).floor() as usize).max(2)
}

impl Density {
    /// The uniform law on `domain`.
    pub fn uniform(domain: &Domain) -> Self {
        Density::new(SmoothField::constant(1.0, domain.dim()), domain)
            .expect("constant densities are valid")
    }

    /// Normalize `field` on `domain` and record its bounds.
    ///
    /// The integral is the midpoint rule on the bounding box restricted to the
    /// domain, expressed as `|domain| * mean(phi)` so constant densities are
    /// normalized exactly. The envelope `phi1` adds a Lipschitz margin of
    /// half a cell diagonal to the largest sampled value.
    pub fn new(field: SmoothField, domain: &Domain) -> Result<Self, GeometryError> {
        let dim = domain.dim();
        if field.dim() != dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                actual: field.dim(),
            });
        }
        let volume = domain.volume();

        if field.is_constant() {
            let c = field.value(&vec![0.0; dim]);
            if !(c > 0.0 && c.is_finite()) {
                return Err(GeometryError::InvalidDensity(format!(
                    "constant density must be positive, got {c}"
                )));
            }
            let phi = 1.0 / volume;
            return Ok(Density {
                field,
                scale: 1.0 / (c * volume),
                phi_min: phi,
                phi_max: phi,
                lipschitz_bound: 0.0,
                volume,
            });
        }

        let m = per_axis(dim, QUADRATURE_CELLS);
        let (lower, upper) = domain.bounding_box();
        let cell_diag = lower
            .iter()
            .zip(&upper)
            .map(|(l, u)| ((u - l) / m as f64).powi(2))
            .sum::<f64>()
            .sqrt();
        let (mut sum, mut count) = (0.0, 0usize);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in domain.grid_points(m, false) {
            let v = field.value(&x);
            if !(v.is_finite() && v > 0.0) {
                return Err(GeometryError::InvalidDensity(format!(
                    "density must be positive and finite, got {v} at {x:?}"
                )));
            }
            sum += v;
            count += 1;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if count == 0 {
            return Err(GeometryError::InvalidDensity(
                "quadrature grid missed the domain".into(),
            ));
        }
        let integral = volume * sum / count as f64;
        let scale = 1.0 / integral;

        let mut lipschitz: f64 = 0.0;
        for x in domain.grid_points(per_axis(dim, LIPSCHITZ_PROBES), true) {
            let g = field.gradient(&x);
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm.is_finite() {
                lipschitz = lipschitz.max(norm);
            }
        }
        let lipschitz_bound = scale * lipschitz;
        Ok(Density {
            field,
            scale,
            phi_min: scale * lo,
            phi_max: scale * hi + 0.5 * lipschitz_bound * cell_diag,
            lipschitz_bound,
            volume,
        })
    }

    /// The un-normalized expression (only ratios of it matter to the operator).
    pub fn field(&self) -> &SmoothField {
        &self.field
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Lower bound `phi0` observed on the quadrature grid.
    pub fn phi0(&self) -> f64 {
        self.phi_min
    }

    /// Envelope `phi1`, an upper bound used by rejection sampling.
    pub fn phi1(&self) -> f64 {
        self.phi_max
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn is_uniform(&self) -> bool {
        self.field.is_constant()
    }

    pub fn domain_volume(&self) -> f64 {
        self.volume
    }
}

impl ScalarField for Density {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.scale * self.field.value(x)
    }
}
