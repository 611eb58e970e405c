use std::sync::Arc;

use super::{distance, DataCloud};

/// Uniform bucket grid over the domain's bounding box.
///
/// Buckets are stored CSR-style; within a bucket ids are ascending. Any query
/// radius is supported, the cell edge only tunes how many buckets a query
/// visits.
#[derive(Clone, Debug)]
pub struct SpatialIndex {
    cloud: Arc<DataCloud>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cell_edge: f64,
    dims: Vec<usize>,
    cell_start: Vec<u32>,
    ids: Vec<u32>,
}

impl SpatialIndex {
    /// Grid with cell edge `cell_edge`, coarsened if it would allocate more
    /// than `4 n` buckets.
    pub fn new(cloud: Arc<DataCloud>, cell_edge: f64) -> Self {
        assert!(cell_edge > 0.0, "cell edge must be positive");
        assert!(
            cloud.len() < u32::MAX as usize,
            "cloud too large for u32 ids"
        );
        let (lower, upper) = cloud.domain().bounding_box();
        let dim = cloud.dim();
        let cap = (4 * cloud.len()).max(1) as f64;
        let mut edge = cell_edge;
        let dims = loop {
            let dims: Vec<usize> = lower
                .iter()
                .zip(&upper)
                .map(|(l, u)| (((u - l) / edge).ceil() as usize).max(1))
                .collect();
            let total: f64 = dims.iter().map(|&d| d as f64).product();
            if total <= cap {
                break dims;
            }
            edge *= (total / cap).powf(1.0 / dim as f64) * 1.0001;
        };

        let mut index = SpatialIndex {
            cloud,
            lower,
            upper,
            cell_edge: edge,
            dims,
            cell_start: Vec::new(),
            ids: Vec::new(),
        };
        let cells: usize = index.dims.iter().product();
        let mut counts = vec![0u32; cells + 1];
        let cell_of: Vec<u32> = index
            .cloud
            .points()
            .map(|p| index.cell_of(p) as u32)
            .collect();
        for &c in &cell_of {
            counts[c as usize + 1] += 1;
        }
        for c in 0..cells {
            counts[c + 1] += counts[c];
        }
        let mut cursor = counts.clone();
        let mut ids = vec![0u32; cell_of.len()];
        for (id, &c) in cell_of.iter().enumerate() {
            let slot = &mut cursor[c as usize];
            ids[*slot as usize] = id as u32;
            *slot += 1;
        }
        index.cell_start = counts;
        index.ids = ids;
        index
    }

    /// Grid tuned for radius-`r` ball queries.
    pub fn for_radius(cloud: Arc<DataCloud>, r: f64) -> Self {
        SpatialIndex::new(cloud, r)
    }

    /// Grid tuned for nearest-point queries (about two points per bucket).
    pub fn for_nearest(cloud: Arc<DataCloud>) -> Self {
        let (lower, upper) = cloud.domain().bounding_box();
        let volume: f64 = lower.iter().zip(&upper).map(|(l, u)| u - l).product();
        let per_point = volume * 2.0 / cloud.len().max(1) as f64;
        let edge = per_point.powf(1.0 / cloud.dim() as f64);
        SpatialIndex::new(cloud, edge)
    }

    pub fn cloud(&self) -> &Arc<DataCloud> {
        &self.cloud
    }

    pub fn cell_edge(&self) -> f64 {
        self.cell_edge
    }

    fn axis_cell(&self, k: usize, v: f64) -> usize {
        let c = ((v - self.lower[k]) / self.cell_edge).floor();
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(self.dims[k] - 1)
        }
    }

    fn cell_of(&self, p: &[f64]) -> usize {
        let mut flat = 0;
        for k in (0..p.len()).rev() {
            flat = flat * self.dims[k] + self.axis_cell(k, p[k]);
        }
        flat
    }

    /// Visit every id in buckets meeting the box `[x - r, x + r]`.
    fn for_each_candidate(&self, x: &[f64], r: f64, mut visit: impl FnMut(u32)) {
        let dim = x.len();
        let mut lo = vec![0usize; dim];
        let mut hi = vec![0usize; dim];
        for k in 0..dim {
            if x[k] + r < self.lower[k] || x[k] - r > self.upper[k] {
                return;
            }
            lo[k] = self.axis_cell(k, x[k] - r);
            hi[k] = self.axis_cell(k, x[k] + r);
        }
        let mut idx = lo.clone();
        loop {
            let mut flat = 0;
            for k in (0..dim).rev() {
                flat = flat * self.dims[k] + idx[k];
            }
            let (a, b) = (self.cell_start[flat], self.cell_start[flat + 1]);
            for &id in &self.ids[a as usize..b as usize] {
                visit(id);
            }
            let mut k = 0;
            loop {
                if k == dim {
                    return;
                }
                if idx[k] < hi[k] {
                    idx[k] += 1;
                    break;
                }
                idx[k] = lo[k];
                k += 1;
            }
        }
    }

    /// Ids with `|Z_i - x| <= r`, ascending, into `out` (cleared first).
    pub fn ball_neighbors_into(&self, x: &[f64], r: f64, out: &mut Vec<u32>) {
        out.clear();
        let cloud = &self.cloud;
        self.for_each_candidate(x, r, |id| {
            if distance(cloud.point(id as usize), x) <= r {
                out.push(id);
            }
        });
        out.sort_unstable();
    }

    /// Ids with `|Z_i - x| <= r` (closed ball), ascending.
    pub fn ball_neighbors(&self, x: &[f64], r: f64) -> Vec<usize> {
        let mut buf = Vec::new();
        self.ball_neighbors_into(x, r, &mut buf);
        buf.into_iter().map(|id| id as usize).collect()
    }

    /// Whether any cloud point lies in the closed ball `B_r(x)`.
    pub fn any_within(&self, x: &[f64], r: f64) -> bool {
        let mut found = false;
        let cloud = &self.cloud;
        self.for_each_candidate(x, r, |id| {
            found = found || distance(cloud.point(id as usize), x) <= r;
        });
        found
    }

    /// Nearest cloud point to `x` (ties to the smaller id): the Voronoi
    /// transport map.
    pub fn nearest(&self, x: &[f64]) -> usize {
        assert!(!self.cloud.is_empty(), "nearest query on an empty cloud");
        let reach = self
            .lower
            .iter()
            .zip(&self.upper)
            .zip(x)
            .map(|((l, u), v)| {
                let d = (v - l).abs().max((u - v).abs());
                d * d
            })
            .sum::<f64>()
            .sqrt();
        let mut r = self.cell_edge;
        loop {
            let mut best: Option<(f64, u32)> = None;
            let cloud = &self.cloud;
            self.for_each_candidate(x, r, |id| {
                let d = distance(cloud.point(id as usize), x);
                let better = match best {
                    None => true,
                    Some((bd, bid)) => d < bd || (d == bd && id < bid),
                };
                if better {
                    best = Some((d, id));
                }
            });
            match best {
                Some((d, id)) if d <= r || r >= reach => return id as usize,
                _ => r *= 2.0,
            }
        }
    }

    /// Alias of [`SpatialIndex::nearest`] under its role as a projection
    /// from the domain onto the cloud.
    pub fn transport(&self, x: &[f64]) -> usize {
        self.nearest(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_cloud, Density, Domain};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(points: &[f64]) -> Arc<DataCloud> {
        let interval = Domain::cuboid(vec![-1.0], vec![2.0]).unwrap();
        let pts: Vec<Vec<f64>> = points.iter().map(|&v| vec![v]).collect();
        Arc::new(DataCloud::from_points(interval, &pts).unwrap())
    }

    #[test]
    fn single_point_contains_itself() {
        let cloud = line(&[0.3]);
        let index = SpatialIndex::for_radius(Arc::clone(&cloud), 0.1);
        for r in [1e-9, 0.1, 5.0] {
            assert_eq!(index.ball_neighbors(&[0.3], r), vec![0]);
        }
    }

    #[test]
    fn closed_ball_examples() {
        let cloud = line(&[0.0, 0.5, 1.0]);
        let index = SpatialIndex::for_radius(cloud, 0.6);
        assert_eq!(index.ball_neighbors(&[0.5], 0.6), vec![0, 1, 2]);
        assert_eq!(index.ball_neighbors(&[0.5], 0.4), vec![1]);
        // Radius exactly at the spacing keeps both ends.
        assert_eq!(index.ball_neighbors(&[0.5], 0.5), vec![0, 1, 2]);
    }

    #[test]
    fn transport_examples() {
        let cloud = line(&[0.0, 1.0]);
        let index = SpatialIndex::for_nearest(cloud);
        assert_eq!(index.transport(&[0.0]), 0);
        assert_eq!(index.transport(&[1.0]), 1);
        assert_eq!(index.transport(&[0.4]), 0);
        assert_eq!(index.transport(&[0.5]), 0);
        assert_eq!(index.transport(&[0.51]), 1);
        assert_eq!(index.transport(&[-0.9]), 0);
    }

    #[test]
    fn queries_outside_the_box() {
        let cloud = line(&[0.0, 1.0]);
        let index = SpatialIndex::for_radius(cloud, 0.25);
        assert!(index.ball_neighbors(&[10.0], 1.0).is_empty());
        assert_eq!(index.ball_neighbors(&[2.5], 1.5), vec![1]);
        assert_eq!(index.nearest(&[25.0]), 1);
    }

    fn random_cloud(n: usize, dim: usize, seed: u64) -> Arc<DataCloud> {
        let domain = if dim == 2 {
            Domain::ball(vec![0.0, 0.0], 1.0).unwrap()
        } else {
            Domain::unit_box(dim)
        };
        let density = Density::uniform(&domain);
        Arc::new(sample_cloud(&domain, &density, n, seed).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn matches_linear_scan(n in 1usize..500, dim in 1usize..4, seed in 0u64..1000, edge in 0.02f64..0.5) {
            let cloud = random_cloud(n, dim, seed);
            let index = SpatialIndex::new(Arc::clone(&cloud), edge);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
            for _ in 0..100 {
                let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.2..1.2)).collect();
                let r = rng.random_range(0.0..0.8);
                let expected: Vec<usize> = (0..cloud.len())
                    .filter(|&i| distance(cloud.point(i), &x) <= r)
                    .collect();
                prop_assert_eq!(index.ball_neighbors(&x, r), expected);
            }
        }

        #[test]
        fn transport_minimizes_distance(n in 1usize..500, dim in 1usize..4, seed in 0u64..1000) {
            let cloud = random_cloud(n, dim, seed);
            let index = SpatialIndex::for_nearest(Arc::clone(&cloud));
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1234);
            for _ in 0..100 {
                let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let t = index.transport(&x);
                let dt = distance(&x, cloud.point(t));
                for j in 0..cloud.len() {
                    let dj = distance(&x, cloud.point(j));
                    prop_assert!(dt < dj || (dt == dj && t <= j));
                }
            }
        }
    }
}
