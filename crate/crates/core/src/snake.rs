//! Discretized snake trajectories.
//!
//! A snake path is stored as its lifetime sequence `zeta` and tip sequence
//! `tip` on a uniform time grid; those two sequences determine the whole
//! trajectory. `zeta` codes the genealogical tree (heights), `tip` carries
//! the labels. The sampler realizes the tree-indexed Gaussian structure
//! exactly at grid scale: covariance of two tips equals the minimum lifetime
//! between them.
//!
//! Grid measure: each of the `k` steps carries mass `duration / k`; index
//! `k` coincides with index 0 as a tree point and is never counted twice.

use crate::error::{BgError, Result};
use crate::rng::{child_seed, make_rng};
use rand_distr::{Distribution, StandardNormal};

/// A discretized snake trajectory. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SnakePath {
    duration: f64,
    zeta: Vec<f64>,
    tip: Vec<f64>,
    basepoint: f64,
}

impl SnakePath {
    /// Validates the grid invariants: equal lengths, `zeta` starting and
    /// ending at 0 and nonnegative throughout, tip 0 matching the basepoint.
    pub fn new(duration: f64, zeta: Vec<f64>, tip: Vec<f64>, basepoint: f64) -> Result<Self> {
        if zeta.len() < 2 || zeta.len() != tip.len() {
            return Err(BgError::invalid(format!(
                "need matching sequences of length >= 2, got {} and {}",
                zeta.len(),
                tip.len()
            )));
        }
        if !(duration > 0.0) {
            return Err(BgError::invalid("duration must be positive"));
        }
        if zeta[0] != 0.0 || *zeta.last().unwrap() != 0.0 {
            return Err(BgError::invariant("lifetime must start and end at 0"));
        }
        if zeta.iter().any(|&z| z < 0.0 || !z.is_finite()) {
            return Err(BgError::invariant("lifetime must be finite and nonnegative"));
        }
        if tip[0] != basepoint {
            return Err(BgError::invariant("tip at time 0 must equal the basepoint"));
        }
        Ok(SnakePath {
            duration,
            zeta,
            tip,
            basepoint,
        })
    }

    /// Number of grid steps `k`; sequences have `k + 1` entries.
    pub fn grid_size(&self) -> usize {
        self.zeta.len() - 1
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Grid measure of one step.
    pub fn step_measure(&self) -> f64 {
        self.duration / self.grid_size() as f64
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn tip(&self) -> &[f64] {
        &self.tip
    }

    pub fn basepoint(&self) -> f64 {
        self.basepoint
    }

    pub fn min_label(&self) -> f64 {
        self.tip.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_label(&self) -> f64 {
        self.tip.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest grid index attaining the minimal label.
    pub fn argmin_label(&self) -> usize {
        let mut best = 0;
        for i in 1..self.tip.len() {
            if self.tip[i] < self.tip[best] {
                best = i;
            }
        }
        best
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.zeta.len() {
            return Err(BgError::invalid(format!(
                "index {i} out of range 0..={}",
                self.grid_size()
            )));
        }
        Ok(())
    }

    /// Tree pseudo-distance `zeta_i + zeta_j - 2 min zeta over [i, j]`.
    pub fn tree_distance(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        let (lo, hi) = (i.min(j), i.max(j));
        let m = self.zeta[lo..=hi].iter().copied().fold(f64::INFINITY, f64::min);
        Ok((self.zeta[i] - m) + (self.zeta[j] - m))
    }

    /// Minimum label over the cyclic index range `[i, j]`, wrapping through
    /// the duration when `i > j`: the lexicographic-interval minimum.
    pub fn interval_min_label(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i <= j {
            Ok(self.tip[i..=j].iter().copied().fold(f64::INFINITY, f64::min))
        } else {
            let a = self.tip[i..].iter().copied().fold(f64::INFINITY, f64::min);
            let b = self.tip[..=j].iter().copied().fold(f64::INFINITY, f64::min);
            Ok(a.min(b))
        }
    }

    /// Breakpoints `(height, value)` of the historical path of grid index
    /// `i`, from the root up to the tip: grid points `j <= i` whose lifetime
    /// is minimal over `(j, i]`.
    pub fn historical_path(&self, i: usize) -> Vec<(f64, f64)> {
        let mut out = vec![(self.zeta[i], self.tip[i])];
        let mut min = self.zeta[i];
        for j in (0..i).rev() {
            if self.zeta[j] < min {
                out.push((self.zeta[j], self.tip[j]));
                min = self.zeta[j];
            }
        }
        if out.last().unwrap().0 != 0.0 {
            out.push((0.0, self.tip[0]));
        }
        out.reverse();
        out
    }
}

/// Approximates a normalized Brownian excursion (duration 1) on a uniform
/// grid of `k` steps: Brownian-bridge increments followed by the rotation at
/// the argmin, ties broken by lowest index. All interior values are positive.
pub fn sample_excursion(k: usize, seed: u64) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(BgError::invalid("excursion grid needs k >= 2"));
    }
    // A duplicate floating-point minimum would put a zero in the interior;
    // draw again with a derived seed in that (measure-zero) event.
    for attempt in 0..16 {
        let mut rng = make_rng(child_seed(seed, attempt));
        let sd = (1.0 / k as f64).sqrt();
        let mut walk = Vec::with_capacity(k + 1);
        let mut acc = 0.0;
        walk.push(0.0);
        for _ in 0..k {
            let g: f64 = StandardNormal.sample(&mut rng);
            acc += sd * g;
            walk.push(acc);
        }
        let end = walk[k];
        let bridge: Vec<f64> = walk
            .iter()
            .enumerate()
            .map(|(i, &w)| w - end * i as f64 / k as f64)
            .collect();
        let mut argmin = 0;
        for i in 1..k {
            if bridge[i] < bridge[argmin] {
                argmin = i;
            }
        }
        let low = bridge[argmin];
        let mut exc = Vec::with_capacity(k + 1);
        for i in 0..k {
            exc.push(bridge[(argmin + i) % k] - low);
        }
        exc.push(0.0);
        exc[0] = 0.0;
        if exc[1..k].iter().all(|&z| z > 0.0) {
            return Ok(exc);
        }
    }
    Err(BgError::invariant(
        "excursion sampler kept producing interior zeros",
    ))
}

/// Runs the snake evolution over a lifetime sequence: retract the active
/// path to the minimum of consecutive lifetimes, extend with an independent
/// centered Gaussian of variance equal to the height gained. Retraction to a
/// height between recorded breakpoints samples the Brownian bridge there, so
/// the tips form the exact tree-indexed Gaussian field of the grid.
pub fn sample_snake(zeta: Vec<f64>, duration: f64, seed: u64) -> Result<SnakePath> {
    if zeta.len() < 2 {
        return Err(BgError::invalid(
            "lifetime sequence needs at least two entries",
        ));
    }
    let k = zeta.len() - 1;
    let mut rng = make_rng(seed);
    let mut tip = Vec::with_capacity(k + 1);
    tip.push(0.0);
    // Breakpoints of the active path; the top entry is the current tip.
    let mut stack: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for i in 0..k {
        let h0 = zeta[i];
        let h1 = zeta[i + 1];
        let w0 = *tip.last().unwrap();
        if h1 > h0 {
            let g: f64 = StandardNormal.sample(&mut rng);
            let w1 = w0 + (h1 - h0).sqrt() * g;
            tip.push(w1);
            stack.push((h1, w1));
        } else if h1 == h0 {
            tip.push(w0);
        } else {
            let mut popped = *stack.last().unwrap();
            while stack.last().is_some_and(|&(h, _)| h > h1) {
                popped = stack.pop().unwrap();
            }
            let &(h_lo, v_lo) = stack
                .last()
                .ok_or_else(|| BgError::invariant("lifetime dropped below its starting level"))?;
            if h_lo == h1 {
                tip.push(v_lo);
            } else {
                let (h_hi, v_hi) = popped;
                let t = (h1 - h_lo) / (h_hi - h_lo);
                let mean = v_lo + t * (v_hi - v_lo);
                let var = (h1 - h_lo) * (h_hi - h1) / (h_hi - h_lo);
                let g: f64 = StandardNormal.sample(&mut rng);
                let w1 = mean + var.sqrt() * g;
                tip.push(w1);
                stack.push((h1, w1));
            }
        }
    }
    SnakePath::new(duration, zeta, tip, 0.0)
}

/// Samples a normalized Brownian snake: excursion lifetime of duration 1,
/// tips from the snake evolution. Child seeds are derived for the two stages.
pub fn sample_normalized_snake(k: usize, seed: u64) -> Result<SnakePath> {
    let zeta = sample_excursion(k, child_seed(seed, 0))?;
    sample_snake(zeta, 1.0, child_seed(seed, 1))
}

/// Precomputed sparse tables over a snake path for O(1) range minima of both
/// lifetimes and labels; used by the bulk metric constructions.
pub struct SnakeIndex<'a> {
    path: &'a SnakePath,
    zeta_min: MinTable,
    tip_min: MinTable,
}

impl<'a> SnakeIndex<'a> {
    pub fn new(path: &'a SnakePath) -> Self {
        SnakeIndex {
            path,
            zeta_min: MinTable::build(path.zeta()),
            tip_min: MinTable::build(path.tip()),
        }
    }

    pub fn path(&self) -> &SnakePath {
        self.path
    }

    /// `d_h(i, j)` with an O(1) range-minimum lookup.
    pub fn tree_distance(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (i.min(j), i.max(j));
        let m = self.zeta_min.min(lo, hi);
        (self.path.zeta[i] - m) + (self.path.zeta[j] - m)
    }

    /// Cyclic label minimum over `[i, j]` (wrapping when `i > j`).
    pub fn interval_min_label(&self, i: usize, j: usize) -> f64 {
        if i <= j {
            self.tip_min.min(i, j)
        } else {
            let last = self.path.tip.len() - 1;
            self.tip_min.min(i, last).min(self.tip_min.min(0, j))
        }
    }
}

/// Sparse table for range minima over f64 slices.
pub(crate) struct MinTable {
    rows: Vec<Vec<f64>>,
}

impl MinTable {
    pub(crate) fn build(xs: &[f64]) -> Self {
        let n = xs.len();
        let mut rows = vec![xs.to_vec()];
        let mut len = 1;
        while 2 * len <= n {
            let prev = rows.last().unwrap();
            rows.push(
                (0..=n - 2 * len)
                    .map(|i| prev[i].min(prev[i + len]))
                    .collect(),
            );
            len *= 2;
        }
        MinTable { rows }
    }

    /// Minimum over the inclusive range `[lo, hi]`.
    pub(crate) fn min(&self, lo: usize, hi: usize) -> f64 {
        debug_assert!(lo <= hi);
        let span = hi - lo + 1;
        let level = (usize::BITS - 1 - span.leading_zeros()) as usize;
        let len = 1 << level;
        self.rows[level][lo].min(self.rows[level][hi + 1 - len])
    }
}

/// One connected component of `{tree points with label > level}` per output,
/// as a sub-snake with labels shifted by `-level`.
///
/// Components are identified by their debut: walking the grid, an index with
/// label above the level belongs to the component of the highest point on
/// its historical path whose value is at or below the level. The walk keeps
/// the active-path breakpoint stack and, in parallel, the stack of at-or-
/// below-level breakpoints; the top of the latter is the current debut.
pub fn extract_excursions_above(s: &SnakePath, level: f64) -> Vec<SnakePath> {
    let k = s.grid_size();
    // Whole-tree case: every point lies strictly above the level, one
    // component equal to the whole snake shifted.
    if s.min_label() > level {
        let tips: Vec<f64> = s.tip.iter().map(|w| w - level).collect();
        let base = tips[0];
        let out = SnakePath::new(s.duration, s.zeta.clone(), tips, base)
            .expect("shifting labels preserves snake invariants");
        return vec![out];
    }

    struct Entry {
        height: f64,
        id: u64,
    }
    let mut stack: Vec<Entry> = vec![Entry { height: 0.0, id: 0 }];
    let mut next_id = 1u64;
    // Positions in `stack` of entries with value <= level.
    let mut below: Vec<usize> = if s.tip[0] <= level { vec![0] } else { vec![] };

    // Component id -> (debut height, selected grid indices), in first-seen order.
    let mut order: Vec<u64> = Vec::new();
    let mut comps: std::collections::HashMap<u64, (f64, Vec<usize>)> =
        std::collections::HashMap::new();

    for i in 0..k {
        if s.tip[i] > level {
            if let Some(&pos) = below.last() {
                let debut = &stack[pos];
                let key = debut.id;
                let height = debut.height;
                let entry = comps.entry(key).or_insert_with(|| {
                    order.push(key);
                    (height, Vec::new())
                });
                entry.1.push(i);
            }
            // An empty `below` stack can only happen when the basepoint sits
            // above the level, which the whole-tree case already handled.
        }
        // Advance the active path to grid index i + 1.
        let h1 = s.zeta[i + 1];
        let h0 = s.zeta[i];
        if h1 > h0 {
            stack.push(Entry {
                height: h1,
                id: next_id,
            });
            next_id += 1;
            if s.tip[i + 1] <= level {
                below.push(stack.len() - 1);
            }
        } else if h1 < h0 {
            while stack.last().is_some_and(|e| e.height > h1) {
                stack.pop();
            }
            while below.last().is_some_and(|&p| p >= stack.len()) {
                below.pop();
            }
            if stack.last().map(|e| e.height) != Some(h1) {
                stack.push(Entry {
                    height: h1,
                    id: next_id,
                });
                next_id += 1;
                if s.tip[i + 1] <= level {
                    below.push(stack.len() - 1);
                }
            }
        }
    }

    let step = s.step_measure();
    order
        .iter()
        .map(|id| {
            let (debut_height, indices) = &comps[id];
            let mut zeta = Vec::with_capacity(indices.len() + 2);
            let mut tip = Vec::with_capacity(indices.len() + 2);
            zeta.push(0.0);
            tip.push(0.0);
            for &i in indices {
                zeta.push(s.zeta[i] - debut_height);
                tip.push(s.tip[i] - level);
            }
            zeta.push(0.0);
            tip.push(0.0);
            SnakePath::new(indices.len() as f64 * step, zeta, tip, 0.0)
                .expect("extracted component satisfies snake invariants")
        })
        .collect()
}

/// Occupation estimate of the boundary size of a nonnegative snake:
/// `eps^{-2}` times the grid measure of `{ i : 0 < tip_i < eps }`.
pub fn boundary_size_estimate(s: &SnakePath, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(BgError::invalid("eps must be positive"));
    }
    if s.min_label() < 0.0 {
        return Err(BgError::invalid(
            "boundary size is defined for nonnegative-label snakes",
        ));
    }
    let k = s.grid_size();
    let count = (0..k).filter(|&i| s.tip[i] > 0.0 && s.tip[i] < eps).count();
    Ok(count as f64 * s.step_measure() / (eps * eps))
}

/// Default occupation window `(duration / k)^{1/4}`, wide enough that eps^2
/// dominates the grid step.
pub fn default_boundary_eps(s: &SnakePath) -> f64 {
    s.step_measure().powf(0.25)
}
