//! Map and disk pseudo-metrics on finite samples of snake points.
//!
//! The pre-distance of two tree points adds their labels and subtracts twice
//! the better of the two lexicographic-interval minima between them. The
//! metric itself is the largest symmetric function below the pre-distance
//! satisfying the triangle inequality; on a finite sample we take the chain
//! infimum through sampled points (all-pairs shortest paths), which upper
//! bounds the true metric and decreases as the sample grows.
//!
//! Disk variant: chains may not pass through the zero-label boundary, so the
//! pre-distance becomes infinite when both interval minima vanish.

use crate::error::{BgError, Result};
use crate::plane_tree::sample_plane_tree;
use crate::planar_map::schaeffer_forward;
use crate::plane_tree::sample_labels_with;
use crate::rng::{child_seed, make_rng, replica_rng};
use crate::snake::{sample_normalized_snake, SnakeIndex, SnakePath};
use crate::stats::{ks_two_sample, linear_fit};
use rand::Rng as _;
use rayon::prelude::*;

/// Distance rescaling constant for quadrangulations, `(9/8)^{1/4}`.
pub const C4: f64 = 1.029_302_236_643_492_1;

/// Dense symmetric distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    size: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn zeros(size: usize) -> Self {
        DistanceMatrix {
            size,
            data: vec![0.0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.size + j] = v;
        self.data[j * self.size + i] = v;
    }

    fn max_abs_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.size {
            for j in (i + 1)..self.size {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Pre-distance of grid indices `i`, `j`, computed in the order
/// `(Z_i - M) + (Z_j - M)` with `M` the better interval minimum, so the
/// result never falls below `|Z_i - Z_j|` in floating point.
pub fn dcirc(idx: &SnakeIndex, i: usize, j: usize) -> f64 {
    let tip = idx.path().tip();
    let m = idx.interval_min_label(i, j).max(idx.interval_min_label(j, i));
    (tip[i] - m) + (tip[j] - m)
}

/// Disk pre-distance: the pre-distance when the better interval minimum is
/// positive, infinity otherwise. Both points must carry positive labels.
pub fn delta_circ(idx: &SnakeIndex, i: usize, j: usize) -> Result<f64> {
    let tip = idx.path().tip();
    if tip[i] <= 0.0 || tip[j] <= 0.0 {
        return Err(BgError::invalid(
            "disk pre-distance is defined away from the boundary (labels > 0)",
        ));
    }
    let m = idx.interval_min_label(i, j).max(idx.interval_min_label(j, i));
    if m > 0.0 {
        Ok((tip[i] - m) + (tip[j] - m))
    } else {
        Ok(f64::INFINITY)
    }
}

/// All-pairs shortest paths through the sampled points: the restriction of
/// the chain infimum to the sample. Idempotent and entrywise at most the
/// input.
pub fn metric_closure(d0: &DistanceMatrix) -> Result<DistanceMatrix> {
    let n = d0.size();
    for i in 0..n {
        if d0.get(i, i) != 0.0 {
            return Err(BgError::invalid("closure input needs a zero diagonal"));
        }
    }
    if d0.data.iter().any(|&v| v < 0.0 || v.is_nan()) {
        return Err(BgError::invalid("closure input must be nonnegative"));
    }
    if d0.max_abs_asymmetry() > 0.0 {
        return Err(BgError::invalid("closure input must be symmetric"));
    }
    let mut d = d0.clone();
    for k in 0..n {
        let row_k: Vec<f64> = (0..n).map(|j| d.get(k, j)).collect();
        for i in 0..n {
            let dik = d.get(i, k);
            if !dik.is_finite() {
                continue;
            }
            let row_i = &mut d.data[i * n..(i + 1) * n];
            for j in 0..n {
                let via = dik + row_k[j];
                if via < row_i[j] {
                    row_i[j] = via;
                }
            }
        }
    }
    // Restore exact symmetry (relaxation order can leave ulp-level skew).
    for i in 0..n {
        for j in (i + 1)..n {
            let v = d.get(i, j).min(d.get(j, i));
            d.set(i, j, v);
        }
    }
    Ok(d)
}

/// Which pseudo-metric a cloud carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudKind {
    /// Pre-distance on a full snake (map metric).
    Map,
    /// Disk pre-distance on a nonnegative-label snake; chains avoid the boundary.
    Disk,
}

/// How many of the smallest-positive-label points a disk cloud always carries.
pub const FORCED_BOUNDARY_POINTS: usize = 20;

/// A finite sample of tree points with its pre-distance and closed matrices.
pub struct MetricCloud {
    kind: CloudKind,
    points: Vec<usize>,
    labels: Vec<f64>,
    d0: DistanceMatrix,
    d: DistanceMatrix,
    basepoint: usize,
    boundary_count: usize,
}

impl MetricCloud {
    /// Samples `m` distinct grid points (uniformly, plus forced anchors) and
    /// assembles both matrices.
    ///
    /// Map clouds force the global label argmin `a*` into the sample. Disk
    /// clouds, which require every label positive, force the
    /// [`FORCED_BOUNDARY_POINTS`] smallest-positive-label points instead.
    /// After closure every entry is clamped up to `|Z_i - Z_j|`; the clamp
    /// enforces the known lower bound of the metric and makes the basepoint
    /// identity `D(a*, x) = Z_x - Z_*` hold exactly in floating point.
    pub fn build(s: &SnakePath, m: usize, seed: u64, kind: CloudKind) -> Result<MetricCloud> {
        let idx = SnakeIndex::new(s);
        Self::build_with_index(&idx, m, seed, kind)
    }

    /// Same as [`build`](Self::build) when an index already exists.
    pub fn build_with_index(
        idx: &SnakeIndex,
        m: usize,
        seed: u64,
        kind: CloudKind,
    ) -> Result<MetricCloud> {
        let s = idx.path();
        let k = s.grid_size();
        let candidates: Vec<usize> = match kind {
            CloudKind::Map => (0..k).collect(),
            CloudKind::Disk => (0..=k).filter(|&i| s.tip()[i] > 0.0).collect(),
        };
        if candidates.len() < m || m < 2 {
            return Err(BgError::invalid(format!(
                "cannot sample {m} distinct points from {} candidates",
                candidates.len()
            )));
        }

        let mut forced: Vec<usize> = match kind {
            CloudKind::Map => vec![s.argmin_label()],
            CloudKind::Disk => {
                let mut by_label = candidates.clone();
                by_label.sort_by(|&a, &b| s.tip()[a].total_cmp(&s.tip()[b]));
                by_label.truncate(FORCED_BOUNDARY_POINTS.min(m / 2));
                by_label
            }
        };
        forced.sort_unstable();
        forced.dedup();
        let boundary_count = match kind {
            CloudKind::Map => 0,
            CloudKind::Disk => forced.len(),
        };

        let mut rng = make_rng(seed);
        let mut chosen: Vec<usize> = forced.clone();
        let mut taken: std::collections::HashSet<usize> = forced.iter().copied().collect();
        while chosen.len() < m {
            let c = candidates[rng.random_range(0..candidates.len())];
            if taken.insert(c) {
                chosen.push(c);
            }
        }
        // Basepoint first, remaining points in grid order.
        let base_idx = chosen
            .iter()
            .copied()
            .min_by(|&a, &b| s.tip()[a].total_cmp(&s.tip()[b]))
            .unwrap();
        chosen.retain(|&c| c != base_idx);
        chosen.sort_unstable();
        chosen.insert(0, base_idx);

        let labels: Vec<f64> = chosen.iter().map(|&i| s.tip()[i]).collect();
        let mut d0 = DistanceMatrix::zeros(m);
        for a in 0..m {
            for b in (a + 1)..m {
                let v = match kind {
                    CloudKind::Map => dcirc(idx, chosen[a], chosen[b]),
                    CloudKind::Disk => delta_circ(idx, chosen[a], chosen[b])?,
                };
                d0.set(a, b, v);
            }
        }
        let mut d = metric_closure(&d0)?;
        for a in 0..m {
            for b in (a + 1)..m {
                let floor = (labels[a] - labels[b]).abs();
                if d.get(a, b) < floor {
                    d.set(a, b, floor);
                }
            }
        }
        Ok(MetricCloud {
            kind,
            points: chosen,
            labels,
            d0,
            d,
            basepoint: 0,
            boundary_count,
        })
    }

    pub fn kind(&self) -> CloudKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sampled grid indices; entry 0 is the basepoint (label argmin).
    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn pre_distance(&self) -> &DistanceMatrix {
        &self.d0
    }

    pub fn distance(&self) -> &DistanceMatrix {
        &self.d
    }

    /// Position of the basepoint `a*` within the sample.
    pub fn basepoint(&self) -> usize {
        self.basepoint
    }

    /// Positions of the forced near-boundary points (disk clouds).
    pub fn boundary_positions(&self) -> Vec<usize> {
        match self.kind {
            CloudKind::Map => vec![],
            CloudKind::Disk => {
                // The forced points are the `boundary_count` smallest labels.
                let mut order: Vec<usize> = (0..self.len()).collect();
                order.sort_by(|&a, &b| self.labels[a].total_cmp(&self.labels[b]));
                order.truncate(self.boundary_count);
                order
            }
        }
    }

    /// Fraction of the sampled points within distance `r` of `center`, per
    /// radius. Multiplying by the snake duration gives a volume.
    pub fn ball_volume_profile(&self, center: usize, radii: &[f64]) -> Vec<f64> {
        let m = self.len() as f64;
        radii
            .iter()
            .map(|&r| {
                (0..self.len())
                    .filter(|&j| self.d.get(center, j) <= r)
                    .count() as f64
                    / m
            })
            .collect()
    }

    /// Distance from sampled point `x` to the nearest forced boundary point.
    pub fn distance_to_boundary(&self, x: usize) -> f64 {
        self.boundary_positions()
            .iter()
            .map(|&b| self.d.get(x, b))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Two-sample Kolmogorov-Smirnov statistic between a rescaled discrete
/// distance sample and a continuum label sample.
pub fn two_point_compare(discrete: &[f64], continuum: &[f64]) -> Result<f64> {
    if discrete.is_empty() || continuum.is_empty() {
        return Err(BgError::InsufficientSamples(
            "two-point comparison needs non-empty samples".into(),
        ));
    }
    Ok(ks_two_sample(discrete, continuum))
}

/// Draws `draws` values of `c4 n^{-1/4} d_gr(v*, V)` with `V` uniform on the
/// vertices of an independent uniform pointed quadrangulation per draw.
pub fn discrete_two_point_sample(n: usize, draws: usize, seed: u64) -> Result<Vec<f64>> {
    let scale = C4 / (n as f64).powf(0.25);
    (0..draws as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replica_rng(seed, rep);
            let tree_seed: u64 = rng.random();
            let tree = sample_plane_tree(n, tree_seed);
            let labeled = sample_labels_with(&tree, &mut rng);
            let eps: i8 = if rng.random::<bool>() { 1 } else { -1 };
            let q = schaeffer_forward(&labeled, eps)?;
            let d = q.map().bfs_distances(q.pointed_vertex())?;
            let v = rng.random_range(0..q.map().vertex_count());
            Ok(scale * d[v] as f64)
        })
        .collect()
}

/// Draws `draws` values of `Z_U - Z_*` with `U` uniform on the grid of an
/// independent normalized snake per draw.
pub fn continuum_two_point_sample(k: usize, draws: usize, seed: u64) -> Result<Vec<f64>> {
    (0..draws as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replica_rng(seed, rep);
            let snake_seed: u64 = rng.random();
            let s = sample_normalized_snake(k, snake_seed)?;
            let u = rng.random_range(0..s.grid_size());
            Ok(s.tip()[u] - s.min_label())
        })
        .collect()
}

/// Mean ball-volume profile at the basepoint over independent instances:
/// snake of grid `k`, cloud of `m` points, distances after closure.
pub fn mean_ball_profile(
    k: usize,
    m: usize,
    instances: usize,
    radii: &[f64],
    seed: u64,
) -> Result<Vec<f64>> {
    let profiles: Vec<Vec<f64>> = (0..instances as u64)
        .into_par_iter()
        .map(|rep| {
            let s = sample_normalized_snake(k, child_seed(seed, 2 * rep))?;
            let cloud = MetricCloud::build(&s, m, child_seed(seed, 2 * rep + 1), CloudKind::Map)?;
            Ok(cloud.ball_volume_profile(cloud.basepoint(), radii))
        })
        .collect::<Result<_>>()?;
    let mut mean = vec![0.0; radii.len()];
    for p in &profiles {
        for (m_i, v) in mean.iter_mut().zip(p) {
            *m_i += v;
        }
    }
    for v in mean.iter_mut() {
        *v /= instances as f64;
    }
    Ok(mean)
}

/// Least-squares slope of `log volume` against `log radius` over the radii
/// with volumes strictly inside `(0, 1)`.
pub fn log_log_slope(radii: &[f64], volumes: &[f64]) -> Result<(f64, f64)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&r, &v) in radii.iter().zip(volumes) {
        if v > 0.0 && v < 1.0 && r > 0.0 {
            xs.push(r.ln());
            ys.push(v.ln());
        }
    }
    let (slope, _intercept, se) = linear_fit(&xs, &ys)?;
    Ok((slope, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snake::sample_normalized_snake;

    #[test]
    fn closure_of_three_point_example() {
        let mut d0 = DistanceMatrix::zeros(3);
        d0.set(0, 1, 5.0);
        d0.set(0, 2, 1.0);
        d0.set(1, 2, 1.0);
        let d = metric_closure(&d0).unwrap();
        assert_eq!(d.get(0, 1), 2.0);
        assert_eq!(d.get(0, 2), 1.0);
        // Idempotent.
        let d2 = metric_closure(&d).unwrap();
        assert_eq!(d2, d);
    }

    #[test]
    fn closure_rejects_bad_input() {
        let mut d0 = DistanceMatrix::zeros(2);
        d0.set(0, 1, -1.0);
        assert!(metric_closure(&d0).is_err());
        let mut d1 = DistanceMatrix::zeros(2);
        d1.data[1] = 1.0; // asymmetric
        assert!(metric_closure(&d1).is_err());
    }

    #[test]
    fn dcirc_examples_and_lower_bound() {
        let s = sample_normalized_snake(4000, 17).unwrap();
        let idx = SnakeIndex::new(&s);
        let a_star = s.argmin_label();
        let z_star = s.min_label();
        for i in (0..=4000).step_by(97) {
            assert_eq!(dcirc(&idx, i, i), 0.0);
            // Pre-distance from the argmin equals the label gap exactly.
            assert_eq!(dcirc(&idx, a_star, i), s.tip()[i] - z_star);
            for j in (0..=4000).step_by(131) {
                let v = dcirc(&idx, i, j);
                assert!(v >= (s.tip()[i] - s.tip()[j]).abs());
            }
        }
    }

    #[test]
    fn cloud_satisfies_sandwich_and_anchor() {
        let s = sample_normalized_snake(20_000, 23).unwrap();
        let cloud = MetricCloud::build(&s, 60, 5, CloudKind::Map).unwrap();
        let m = cloud.len();
        let z = cloud.labels();
        let z_star = z[cloud.basepoint()];
        for i in 0..m {
            // Exact basepoint identity.
            assert_eq!(cloud.distance().get(cloud.basepoint(), i), z[i] - z_star);
            for j in 0..m {
                let d = cloud.distance().get(i, j);
                assert!(d <= cloud.pre_distance().get(i, j));
                assert!(d >= (z[i] - z[j]).abs());
            }
        }
        // Triangle inequality over sampled triples.
        for i in (0..m).step_by(7) {
            for j in (0..m).step_by(5) {
                for l in (0..m).step_by(11) {
                    let lhs = cloud.distance().get(i, j);
                    let rhs = cloud.distance().get(i, l) + cloud.distance().get(l, j);
                    assert!(lhs <= rhs + 1e-12);
                }
            }
        }
    }

    #[test]
    fn delta_circ_is_infinite_across_the_boundary() {
        // Hand-built nonnegative snake whose label dips to zero in the
        // interior: both cyclic intervals between the two humps touch 0.
        let zeta = vec![0.0, 1.0, 2.0, 1.0, 2.0, 1.0, 0.0];
        let tip = vec![0.0, 0.4, 0.9, 0.0, 0.7, 0.3, 0.0];
        let s = SnakePath::new(6.0, zeta, tip, 0.0).unwrap();
        let idx = SnakeIndex::new(&s);
        assert_eq!(delta_circ(&idx, 2, 4).unwrap(), f64::INFINITY);
        // Within one hump the disk pre-distance is the plain pre-distance.
        assert_eq!(delta_circ(&idx, 1, 2).unwrap(), dcirc(&idx, 1, 2));
        assert!(delta_circ(&idx, 3, 4).is_err()); // boundary-point input
    }

    #[test]
    fn ball_profile_endpoints() {
        let s = sample_normalized_snake(5000, 3).unwrap();
        let cloud = MetricCloud::build(&s, 40, 9, CloudKind::Map).unwrap();
        let prof = cloud.ball_volume_profile(cloud.basepoint(), &[0.0, 1e9]);
        assert!(prof[0] >= 1.0 / 40.0); // at least the center itself
        assert_eq!(prof[1], 1.0); // whole mass inside a huge ball
    }

    #[test]
    fn two_point_compare_basics() {
        let a = vec![0.1, 0.2, 0.3];
        assert_eq!(two_point_compare(&a, &a).unwrap(), 0.0);
        assert!(two_point_compare(&a, &[]).is_err());
    }
}
