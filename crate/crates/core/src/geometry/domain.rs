use rand::Rng;

use super::{distance, GeometryError};

/// Bounded open domains with closed-form boundary distance.
///
/// All kinds satisfy the uniform exterior ball condition: balls and annuli
/// trivially, boxes because they are convex.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Annulus {
        center: Vec<f64>,
        inner_radius: f64,
        outer_radius: f64,
    },
}

fn check_finite(values: &[f64], what: &str) -> Result<(), GeometryError> {
    if values.is_empty() {
        return Err(GeometryError::InvalidDomain(format!(
            "{what} has no coordinates"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::InvalidDomain(format!(
            "{what} is not finite"
        )));
    }
    Ok(())
}

/// Volume of the unit ball in `R^dim`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    let (mut volume, mut k) = if dim.is_multiple_of(2) {
        (1.0, 2)
    } else {
        (2.0, 3)
    };
    while k <= dim {
        volume *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    volume
}

impl Domain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self, GeometryError> {
        check_finite(&center, "ball center")?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::InvalidDomain(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn unit_box(dim: usize) -> Self {
        Domain::Box {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn cuboid(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        check_finite(&lower, "box lower corner")?;
        check_finite(&upper, "box upper corner")?;
        if lower.len() != upper.len() {
            return Err(GeometryError::InvalidDomain(
                "box corners have different dimensions".into(),
            ));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(GeometryError::InvalidDomain(
                "box lower corner must be strictly below the upper corner".into(),
            ));
        }
        Ok(Domain::Box { lower, upper })
    }

    pub fn annulus(
        center: Vec<f64>,
        inner_radius: f64,
        outer_radius: f64,
    ) -> Result<Self, GeometryError> {
        check_finite(&center, "annulus center")?;
        if !(inner_radius > 0.0 && inner_radius < outer_radius && outer_radius.is_finite()) {
            return Err(GeometryError::InvalidDomain(format!(
                "annulus radii must satisfy 0 < inner < outer, got {inner_radius}, {outer_radius}"
            )));
        }
        Ok(Domain::Annulus {
            center,
            inner_radius,
            outer_radius,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { center, .. } | Domain::Annulus { center, .. } => center.len(),
            Domain::Box { lower, .. } => lower.len(),
        }
    }

    /// Signed distance to the boundary: positive inside, negative outside.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Ball { center, radius } => radius - distance(x, center),
            Domain::Box { lower, upper } => {
                let inside = x
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .all(|(v, (l, u))| l < v && v < u);
                if inside {
                    x.iter()
                        .zip(lower.iter().zip(upper))
                        .map(|(v, (l, u))| (v - l).min(u - v))
                        .fold(f64::INFINITY, f64::min)
                } else {
                    let clamped: Vec<f64> = x
                        .iter()
                        .zip(lower.iter().zip(upper))
                        .map(|(v, (l, u))| v.clamp(*l, *u))
                        .collect();
                    -distance(x, &clamped)
                }
            }
            Domain::Annulus {
                center,
                inner_radius,
                outer_radius,
            } => {
                let r = distance(x, center);
                (r - inner_radius).min(outer_radius - r)
            }
        }
    }

    /// Strict membership in the open domain.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| l < v && v < u),
            _ => self.boundary_distance(x) > 0.0,
        }
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        match self {
            Domain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| l <= v && v <= u),
            _ => self.boundary_distance(x) >= 0.0,
        }
    }

    /// Nearest boundary point of an interior point `x`.
    pub fn project_to_boundary(&self, x: &[f64]) -> Vec<f64> {
        let radial = |center: &[f64], radius: f64| -> Vec<f64> {
            let r = distance(x, center);
            if r == 0.0 {
                let mut out = center.to_vec();
                out[0] += radius;
                return out;
            }
            center
                .iter()
                .zip(x)
                .map(|(c, v)| c + radius * (v - c) / r)
                .collect()
        };
        match self {
            Domain::Ball { center, radius } => radial(center, *radius),
            Domain::Annulus {
                center,
                inner_radius,
                outer_radius,
            } => {
                let r = distance(x, center);
                if r - inner_radius <= outer_radius - r {
                    radial(center, *inner_radius)
                } else {
                    radial(center, *outer_radius)
                }
            }
            Domain::Box { lower, upper } => {
                let mut best = (f64::INFINITY, 0, 0.0);
                for (k, (v, (l, u))) in x.iter().zip(lower.iter().zip(upper)).enumerate() {
                    if v - l < best.0 {
                        best = (v - l, k, *l);
                    }
                    if u - v < best.0 {
                        best = (u - v, k, *u);
                    }
                }
                let mut out = x.to_vec();
                out[best.1] = best.2;
                out
            }
        }
    }

    /// Axis-aligned bounding box `(lower, upper)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Domain::Annulus {
                center,
                outer_radius,
                ..
            } => (
                center.iter().map(|c| c - outer_radius).collect(),
                center.iter().map(|c| c + outer_radius).collect(),
            ),
            Domain::Box { lower, upper } => (lower.clone(), upper.clone()),
        }
    }

    pub fn volume(&self) -> f64 {
        let dim = self.dim() as i32;
        match self {
            Domain::Ball { radius, .. } => unit_ball_volume(self.dim()) * radius.powi(dim),
            Domain::Annulus {
                inner_radius,
                outer_radius,
                ..
            } => unit_ball_volume(self.dim()) * (outer_radius.powi(dim) - inner_radius.powi(dim)),
            Domain::Box { lower, upper } => lower.iter().zip(upper).map(|(l, u)| u - l).product(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Ball { radius, .. } => 2.0 * radius,
            Domain::Annulus { outer_radius, .. } => 2.0 * outer_radius,
            Domain::Box { lower, upper } => distance(lower, upper),
        }
    }

    /// One uniform draw from the open domain (rejection from the bounding box).
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let (lower, upper) = self.bounding_box();
        let mut x = vec![0.0; self.dim()];
        loop {
            for (k, v) in x.iter_mut().enumerate() {
                *v = lower[k] + (upper[k] - lower[k]) * rng.random::<f64>();
            }
            if self.contains(&x) {
                return x;
            }
        }
    }

    /// Tensor grid with `per_axis` nodes on each bounding-box axis (cell
    /// centers), keeping the points that lie in the domain. With `closed`,
    /// the grid spans the box corners inclusively and keeps closure points.
    pub fn grid_points(&self, per_axis: usize, closed: bool) -> Vec<Vec<f64>> {
        let per_axis = per_axis.max(1);
        let (lower, upper) = self.bounding_box();
        let dim = self.dim();
        let coord = |k: usize, i: usize| -> f64 {
            let width = upper[k] - lower[k];
            if closed && per_axis > 1 {
                lower[k] + width * i as f64 / (per_axis - 1) as f64
            } else {
                lower[k] + width * (i as f64 + 0.5) / per_axis as f64
            }
        };
        let mut out = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            let x: Vec<f64> = (0..dim).map(|k| coord(k, idx[k])).collect();
            let keep = if closed {
                self.contains_closed(&x)
            } else {
                self.contains(&x)
            };
            if keep {
                out.push(x);
            }
            let mut k = 0;
            loop {
                if k == dim {
                    return out;
                }
                idx[k] += 1;
                if idx[k] < per_axis {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}
