//! The bijection between labeled plane trees (with a sign) and rooted pointed
//! quadrangulations, in both directions, plus the corner-pair distance bound.
//!
//! Forward: every corner of the tree sends one map edge to its successor, the
//! next corner in clockwise cyclic order whose label is one less, or to the
//! extra vertex `v*` when the corner's label is minimal. The rotation system
//! of the image is assembled from the nesting order of those arcs inside the
//! unique face of the tree: within a corner, incoming arc ends precede the
//! outgoing end in clockwise order, sorted by decreasing cyclic distance of
//! their source corner; around `v*`, arcs appear by decreasing source corner.
//!
//! Inverse: label every vertex by its graph distance from `v*`; each face of
//! a quadrangulation then shows one of two patterns and contributes exactly
//! one tree edge, recovered at corner precision; the root corner and the sign
//! come from the orientation of the root edge.

use super::{CombinatorialMap, PointedQuadrangulation};
use crate::error::{BgError, Result};
use crate::plane_tree::{contour, sample_labels_with, sample_plane_tree, LabeledPlaneTree, PlaneTree};
use crate::rng::make_rng;
use rand::Rng as _;

/// Builds the pointed quadrangulation image of a labeled tree.
///
/// `eps = +1` roots the image at the tree-root end of the arc leaving the
/// root corner, `eps = -1` at the other end.
pub fn schaeffer_forward(t: &LabeledPlaneTree, eps: i8) -> Result<PointedQuadrangulation> {
    if eps != 1 && eps != -1 {
        return Err(BgError::invalid("eps must be +1 or -1"));
    }
    let n = t.tree.edge_count();
    if n == 0 {
        return Err(BgError::invalid(
            "the bijection needs a tree with at least one edge",
        ));
    }
    let corners = contour(&t.tree)?;
    let m = corners.len(); // 2n
    let labels: Vec<i64> = corners.corners.iter().map(|c| t.label(c.vertex)).collect();
    let min_label = *labels.iter().min().unwrap();

    let succ = successors(&labels, min_label);

    // Incoming arcs per corner.
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (j, s) in succ.iter().enumerate() {
        if let Some(i) = s {
            incoming[*i].push(j);
        }
    }

    // Rotation per tree vertex: corners in contour order; within a corner,
    // incoming ends by decreasing cyclic distance (j - i mod 2n), outgoing last.
    let n_vertices = t.tree.node_count();
    let v_star = n_vertices;
    let mut rotation: Vec<Vec<u32>> = vec![Vec::new(); n_vertices + 1];
    for (i, corner) in corners.corners.iter().enumerate() {
        let rot = &mut rotation[corner.vertex];
        let mut inc = incoming[i].clone();
        inc.sort_by_key(|&j| std::cmp::Reverse((j + m - i) % m));
        for j in inc {
            rot.push(2 * j as u32 + 1); // incoming end of arc j
        }
        rot.push(2 * i as u32); // outgoing end of arc i
    }
    // v*: incoming ends from minimal-label corners, by decreasing position.
    for i in (0..m).rev() {
        if succ[i].is_none() {
            rotation[v_star].push(2 * i as u32 + 1);
        }
    }

    let half_edges = 2 * m;
    let mut alpha = vec![0u32; half_edges];
    let mut vertex_of = vec![0u32; half_edges];
    for i in 0..m {
        alpha[2 * i] = 2 * i as u32 + 1;
        alpha[2 * i + 1] = 2 * i as u32;
        vertex_of[2 * i] = corners.corners[i].vertex as u32;
        vertex_of[2 * i + 1] = match succ[i] {
            Some(j) => corners.corners[j].vertex as u32,
            None => v_star as u32,
        };
    }
    let mut sigma = vec![0u32; half_edges];
    for rot in &rotation {
        for k in 0..rot.len() {
            sigma[rot[k] as usize] = rot[(k + 1) % rot.len()];
        }
    }

    let root_half_edge = if eps == 1 { 0 } else { 1 };
    let map = CombinatorialMap::new(alpha, sigma, vertex_of, root_half_edge)?;
    PointedQuadrangulation::new(map, v_star)
}

/// Successor of every corner: the next corner in cyclic order with label one
/// less, or `None` for minimal-label corners (their successor is `v*`).
/// Linear-time right-to-left sweep over the doubled sequence; correctness
/// rests on corner labels changing by at most one along the contour.
fn successors(labels: &[i64], min_label: i64) -> Vec<Option<usize>> {
    let m = labels.len();
    let max_label = *labels.iter().max().unwrap();
    let range = (max_label - min_label + 1) as usize;
    let mut next_at = vec![usize::MAX; range];
    let mut succ = vec![None; m];
    for idx in (0..2 * m).rev() {
        let i = idx % m;
        let lab = (labels[i] - min_label) as usize;
        if labels[i] > min_label {
            let target = lab - 1;
            if idx < m {
                let j = next_at[target];
                debug_assert!(j != usize::MAX, "non-minimal corner must have a successor");
                succ[i] = Some(j % m);
            }
        }
        next_at[lab] = idx;
    }
    succ
}

/// Samples a uniform labeled tree with `n` edges and a uniform sign, and
/// returns the image quadrangulation together with its preimage.
pub fn sample_pointed_quadrangulation(
    n: usize,
    seed: u64,
) -> Result<(PointedQuadrangulation, LabeledPlaneTree, i8)> {
    let mut rng = make_rng(seed);
    let tree_seed: u64 = rng.random();
    let tree = sample_plane_tree(n, tree_seed);
    let labeled = sample_labels_with(&tree, &mut rng);
    let eps: i8 = if rng.random::<bool>() { 1 } else { -1 };
    let q = schaeffer_forward(&labeled, eps)?;
    Ok((q, labeled, eps))
}

/// Recovers the labeled tree and sign from a pointed quadrangulation.
pub fn schaeffer_inverse(q: &PointedQuadrangulation) -> Result<(LabeledPlaneTree, i8)> {
    let map = q.map();
    let v_star = q.pointed_vertex();
    let d = map.bfs_distances(v_star)?;

    // In the image of the bijection adjacent vertices differ by exactly one.
    for h in 0..map.half_edge_count() as u32 {
        let a = d[map.vertex_of(h) as usize];
        let b = d[map.vertex_of(map.alpha(h)) as usize];
        if a.abs_diff(b) != 1 {
            return Err(BgError::invariant(format!(
                "edge with distance labels {a}, {b}; quadrangulations are bipartite"
            )));
        }
    }

    // One tree edge per face, located at corner precision. The corner of a
    // half-edge h is the sector between h and sigma(h) at its origin vertex;
    // the face element h occupies the corner sigma^{-1}(h), so tree-edge ends
    // are hosted there.
    let mut sigma_inv = vec![0u32; map.half_edge_count()];
    for h in 0..map.half_edge_count() as u32 {
        sigma_inv[map.sigma(h) as usize] = h;
    }
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(map.edge_count() / 2);
    for face in map.faces() {
        debug_assert_eq!(face.len(), 4);
        let lab: Vec<u32> = face.iter().map(|&h| d[map.vertex_of(h) as usize]).collect();
        let max = *lab.iter().max().unwrap();
        let at_max: Vec<usize> = (0..4).filter(|&k| lab[k] == max).collect();
        match at_max.len() {
            1 => {
                // Simple face l, l+1, l+2, l+1: the edge joins the top corner
                // to the face corner preceding it around the face.
                let k = at_max[0];
                let (ha, hb) = (face[k], face[(k + 3) % 4]);
                edges.push((sigma_inv[ha as usize], sigma_inv[hb as usize]));
            }
            2 => {
                // Confluent face l, l+1, l, l+1: edge joining the two corners
                // at the larger label, which sit opposite each other.
                if (at_max[0] + 2) % 4 != at_max[1] {
                    return Err(BgError::invariant(
                        "confluent face with adjacent equal maxima",
                    ));
                }
                let (ha, hb) = (face[at_max[0]], face[at_max[1]]);
                edges.push((sigma_inv[ha as usize], sigma_inv[hb as usize]));
            }
            _ => {
                return Err(BgError::invariant(format!(
                    "face labels {lab:?} match no quadrangulation pattern"
                )));
            }
        }
    }

    // Hosts: at each vertex, which corner carries which tree-edge end.
    let by_vertex = map.half_edges_by_vertex();
    let mut pos_in_cycle = vec![u32::MAX; map.half_edge_count()];
    for cycle in &by_vertex {
        for (p, &h) in cycle.iter().enumerate() {
            pos_in_cycle[h as usize] = p as u32;
        }
    }
    let mut host_owner = vec![usize::MAX; map.half_edge_count()];
    let mut adjacency: Vec<Vec<(u32, usize)>> = vec![Vec::new(); map.vertex_count()];
    for (e, &(ha, hb)) in edges.iter().enumerate() {
        for (h, other) in [(ha, hb), (hb, ha)] {
            if host_owner[h as usize] != usize::MAX {
                return Err(BgError::invariant(
                    "two tree edges claim the same corner",
                ));
            }
            host_owner[h as usize] = e;
            let v = map.vertex_of(h) as usize;
            if v == v_star {
                return Err(BgError::invariant(
                    "tree edge incident to the pointed vertex",
                ));
            }
            adjacency[v].push((h, map.vertex_of(other) as usize));
        }
    }

    // Root arc: its end at the larger distance is the root corner c0.
    let r = map.root_half_edge();
    let rr = map.alpha(r);
    let (dv, dw) = (d[map.vertex_of(r) as usize], d[map.vertex_of(rr) as usize]);
    let (anchor, eps) = if dv > dw { (r, 1i8) } else { (rr, -1i8) };
    let rho = map.vertex_of(anchor) as usize;

    // Orders tree-edge ends at `v` clockwise, starting just after `from`.
    let order_from = |v: usize, from: u32, skip: Option<u32>| -> Vec<(u32, usize)> {
        let deg = by_vertex[v].len() as u32;
        let base = pos_in_cycle[from as usize];
        let mut ends = adjacency[v].clone();
        if let Some(s) = skip {
            ends.retain(|&(h, _)| h != s);
        }
        ends.sort_by_key(|&(h, _)| (pos_in_cycle[h as usize] + deg - base) % deg);
        ends
    };

    // Rebuild the plane tree with contour-first-visit ids.
    let tree_vertex_count = map.vertex_count() - 1;
    let mut new_id = vec![usize::MAX; map.vertex_count()];
    let mut children: Vec<Vec<usize>> = Vec::with_capacity(tree_vertex_count);
    let mut labels_new: Vec<i64> = Vec::with_capacity(tree_vertex_count);
    new_id[rho] = 0;
    children.push(Vec::new());
    labels_new.push(0);
    // Stack of (old vertex, ordered ends, cursor).
    let mut stack = vec![(rho, order_from(rho, anchor, None), 0usize)];
    loop {
        let step = match stack.last_mut() {
            None => break,
            Some((v, ends, cursor)) => {
                if *cursor < ends.len() {
                    let e = ends[*cursor];
                    *cursor += 1;
                    Some((*v, e))
                } else {
                    None
                }
            }
        };
        match step {
            None => {
                stack.pop();
            }
            Some((v, (host_here, w))) => {
                if new_id[w] != usize::MAX {
                    return Err(BgError::invariant("recovered edges contain a cycle"));
                }
                let id = children.len();
                new_id[w] = id;
                children[new_id[v]].push(id);
                children.push(Vec::new());
                labels_new.push(d[w] as i64 - d[rho] as i64);
                // The child's own corner order starts after its end of this edge.
                let e = host_owner[host_here as usize];
                let (ha, hb) = edges[e];
                let child_host = if ha == host_here { hb } else { ha };
                debug_assert_eq!(map.vertex_of(child_host) as usize, w);
                let next = order_from(w, child_host, Some(child_host));
                stack.push((w, next, 0));
            }
        }
    }
    if children.len() != tree_vertex_count {
        return Err(BgError::invariant(format!(
            "recovered edges span {} of {} tree vertices",
            children.len(),
            tree_vertex_count
        )));
    }
    let tree = PlaneTree::from_children(children)?;
    let labeled = LabeledPlaneTree::new(tree, labels_new)?;
    Ok((labeled, eps))
}

/// A corner pair violating the distance upper bound, with both sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerBoundViolation {
    pub i: usize,
    pub j: usize,
    pub distance: u64,
    pub bound: i64,
}

/// Verifies, for every corner pair `i <= j`, that the graph distance between
/// the corner vertices is at most
/// `l_i + l_j - 2 max(min over [i,j], min over the complement) + 2`.
/// Returns the first violating pair, or `None` when the bound holds.
pub fn check_corner_bound(
    q: &PointedQuadrangulation,
    t: &LabeledPlaneTree,
) -> Result<Option<CornerBoundViolation>> {
    let corners = contour(&t.tree)?;
    let m = corners.len();
    let labels: Vec<i64> = corners.corners.iter().map(|c| t.label(c.vertex)).collect();

    // Pairwise vertex distances via one BFS per tree vertex.
    let map = q.map();
    let nv = t.tree.node_count();
    let mut dist = Vec::with_capacity(nv);
    for v in 0..nv {
        dist.push(map.bfs_distances(v)?);
    }

    // Sparse table over the doubled label sequence for O(1) range minima.
    let doubled: Vec<i64> = labels.iter().chain(labels.iter()).copied().collect();
    let table = MinTable::build(&doubled);

    for i in 0..m {
        for j in i..m {
            let inner = table.min(i, j); // corners i..=j
            let outer = table.min(j, i + m); // corners j..=2n-1, 0..=i
            let li = labels[i];
            let lj = labels[j];
            let bound = li + lj - 2 * inner.max(outer) + 2;
            let dij = dist[corners.corners[i].vertex][corners.corners[j].vertex] as i64;
            if dij > bound {
                return Ok(Some(CornerBoundViolation {
                    i,
                    j,
                    distance: dij as u64,
                    bound,
                }));
            }
        }
    }
    Ok(None)
}

/// Sparse table for integer range minima on a fixed slice.
struct MinTable {
    rows: Vec<Vec<i64>>,
}

impl MinTable {
    fn build(xs: &[i64]) -> Self {
        let n = xs.len();
        let levels = (usize::BITS - n.leading_zeros()) as usize;
        let mut rows = Vec::with_capacity(levels);
        rows.push(xs.to_vec());
        let mut len = 1;
        while 2 * len <= n {
            let prev = rows.last().unwrap();
            let row: Vec<i64> = (0..=n - 2 * len)
                .map(|i| prev[i].min(prev[i + len]))
                .collect();
            rows.push(row);
            len *= 2;
        }
        MinTable { rows }
    }

    /// Minimum over the inclusive range `[lo, hi]`.
    fn min(&self, lo: usize, hi: usize) -> i64 {
        debug_assert!(lo <= hi);
        let span = hi - lo + 1;
        let level = (usize::BITS - 1 - span.leading_zeros()) as usize;
        let len = 1 << level;
        self.rows[level][lo].min(self.rows[level][hi + 1 - len])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane_tree::{enumerate_labeled_trees, sample_fixture_tree};
    use crate::rng::child_seed;

    fn one_edge_tree(child_label: i64) -> LabeledPlaneTree {
        let tree = PlaneTree::from_children(vec![vec![1], vec![]]).unwrap();
        LabeledPlaneTree::new(tree, vec![0, child_label]).unwrap()
    }

    #[test]
    fn one_edge_tree_maps_to_one_face() {
        for eps in [1, -1] {
            let q = schaeffer_forward(&one_edge_tree(-1), eps).unwrap();
            assert_eq!(q.face_count(), 1);
            assert_eq!(q.map().edge_count(), 2);
            assert_eq!(q.map().vertex_count(), 3);
        }
    }

    #[test]
    fn fixture_tree_successors_match_the_worked_example() {
        // The 8-edge fixture: arcs c0->c1, c1->v*, c2->c5, c3->c4.
        let t = sample_fixture_tree();
        let corners = contour(&t.tree).unwrap();
        let labels: Vec<i64> = corners.corners.iter().map(|c| t.label(c.vertex)).collect();
        let min = *labels.iter().min().unwrap();
        let succ = successors(&labels, min);
        assert_eq!(succ[0], Some(1));
        assert_eq!(succ[1], None);
        assert_eq!(succ[2], Some(5));
        assert_eq!(succ[3], Some(4));
        let q = schaeffer_forward(&t, -1).unwrap();
        assert_eq!(q.face_count(), 8);
    }

    #[test]
    fn image_sizes_and_distance_identity_on_random_inputs() {
        for rep in 0..60u64 {
            let n = 1 + (rep as usize * 7) % 40;
            let (q, t, _eps) = sample_pointed_quadrangulation(n, child_seed(0xBEEF, rep)).unwrap();
            assert_eq!(q.face_count(), n);
            assert_eq!(q.map().edge_count(), 2 * n);
            assert_eq!(q.map().vertex_count(), n + 2);
            let d = q.map().bfs_distances(q.pointed_vertex()).unwrap();
            let min = t.min_label();
            for v in 0..t.tree.node_count() {
                assert_eq!(d[v] as i64, t.label(v) - min + 1, "vertex {v}");
            }
            // Label adjacency across map edges, with v* at min - 1.
            let lab = |v: usize| {
                if v == q.pointed_vertex() {
                    min - 1
                } else {
                    t.label(v)
                }
            };
            for h in 0..q.map().half_edge_count() as u32 {
                let a = lab(q.map().vertex_of(h) as usize);
                let b = lab(q.map().vertex_of(q.map().alpha(h)) as usize);
                assert_eq!((a - b).abs(), 1);
            }
        }
    }

    #[test]
    fn inverse_round_trips_exhaustively_to_three_edges() {
        for n in 1..=3 {
            for t in enumerate_labeled_trees(n).unwrap() {
                for eps in [1i8, -1] {
                    let q = schaeffer_forward(&t, eps).unwrap();
                    let (t2, eps2) = schaeffer_inverse(&q).unwrap();
                    assert_eq!(t2, t);
                    assert_eq!(eps2, eps);
                }
            }
        }
    }

    #[test]
    fn forward_after_inverse_reproduces_the_map() {
        for rep in 0..40u64 {
            let n = 1 + (rep as usize * 11) % 60;
            let (q, _, _) = sample_pointed_quadrangulation(n, child_seed(0xC0DE, rep)).unwrap();
            let (t, eps) = schaeffer_inverse(&q).unwrap();
            let q2 = schaeffer_forward(&t, eps).unwrap();
            assert_eq!(q2.canonical_code(), q.canonical_code());
        }
    }

    #[test]
    fn image_count_at_two_edges_is_thirty_six() {
        // 2 signs x 9 labelings x Catalan(2) = 36 distinct rooted pointed maps.
        let mut codes = Vec::new();
        for t in enumerate_labeled_trees(2).unwrap() {
            for eps in [1i8, -1] {
                codes.push(schaeffer_forward(&t, eps).unwrap().canonical_code());
            }
        }
        assert_eq!(codes.len(), 36);
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), 36);
    }

    #[test]
    fn corner_bound_holds_exhaustively_to_three_edges() {
        for n in 1..=3 {
            for t in enumerate_labeled_trees(n).unwrap() {
                let q = schaeffer_forward(&t, 1).unwrap();
                assert_eq!(check_corner_bound(&q, &t).unwrap(), None);
            }
        }
    }

    #[test]
    fn min_table_matches_scans() {
        let xs = [3i64, -1, 4, 1, -5, 9, 2, 6];
        let t = MinTable::build(&xs);
        for lo in 0..xs.len() {
            for hi in lo..xs.len() {
                assert_eq!(t.min(lo, hi), *xs[lo..=hi].iter().min().unwrap());
            }
        }
    }
}
