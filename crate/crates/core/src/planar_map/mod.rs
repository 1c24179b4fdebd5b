//! Rooted (pointed) planar maps as half-edge rotation systems, plus the
//! labeled-tree bijection for quadrangulations in [`schaeffer`].
//!
//! Half-edges are `0..2E`. `alpha` pairs the two halves of each edge and
//! `sigma` gives the next half-edge clockwise around its origin vertex; the
//! face permutation is `sigma ∘ alpha`. All maps built here are spherical:
//! the Euler relation `V - E + F = 2` is validated at construction.

mod schaeffer;

pub use schaeffer::{
    check_corner_bound, sample_pointed_quadrangulation, schaeffer_forward, schaeffer_inverse,
    CornerBoundViolation,
};

use crate::error::{BgError, Result};

/// An orientation-preserving embedding of a connected multigraph, encoded
/// combinatorially. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinatorialMap {
    alpha: Vec<u32>,
    sigma: Vec<u32>,
    vertex_of: Vec<u32>,
    root_half_edge: u32,
    vertex_count: usize,
}

impl CombinatorialMap {
    /// Validates the rotation system and returns the map. See [`diagnose`]
    /// for the individual invariants; all of them must hold.
    pub fn new(
        alpha: Vec<u32>,
        sigma: Vec<u32>,
        vertex_of: Vec<u32>,
        root_half_edge: u32,
    ) -> Result<Self> {
        let issues = diagnose(&alpha, &sigma, &vertex_of, root_half_edge);
        if let Some(first) = issues.first() {
            return Err(BgError::invariant(first.clone()));
        }
        let vertex_count = vertex_of.iter().map(|&v| v as usize + 1).max().unwrap_or(0);
        Ok(CombinatorialMap {
            alpha,
            sigma,
            vertex_of,
            root_half_edge,
            vertex_count,
        })
    }

    pub fn half_edge_count(&self) -> usize {
        self.alpha.len()
    }

    pub fn edge_count(&self) -> usize {
        self.alpha.len() / 2
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn root_half_edge(&self) -> u32 {
        self.root_half_edge
    }

    pub fn alpha(&self, h: u32) -> u32 {
        self.alpha[h as usize]
    }

    pub fn sigma(&self, h: u32) -> u32 {
        self.sigma[h as usize]
    }

    pub fn vertex_of(&self, h: u32) -> u32 {
        self.vertex_of[h as usize]
    }

    /// Face permutation `phi = sigma ∘ alpha`.
    pub fn phi(&self, h: u32) -> u32 {
        self.sigma[self.alpha[h as usize] as usize]
    }

    /// Orbits of the face permutation; each orbit lists the half-edges of one
    /// face, so the orbit length is the face degree.
    pub fn faces(&self) -> Vec<Vec<u32>> {
        let m = self.half_edge_count();
        let mut seen = vec![false; m];
        let mut out = Vec::new();
        for start in 0..m as u32 {
            if seen[start as usize] {
                continue;
            }
            let mut orbit = Vec::new();
            let mut h = start;
            while !seen[h as usize] {
                seen[h as usize] = true;
                orbit.push(h);
                h = self.phi(h);
            }
            out.push(orbit);
        }
        out
    }

    pub fn face_count(&self) -> usize {
        self.faces().len()
    }

    /// Half-edges grouped by origin vertex, each group in sigma-cycle order.
    pub fn half_edges_by_vertex(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.vertex_count];
        let mut seen = vec![false; self.half_edge_count()];
        for start in 0..self.half_edge_count() as u32 {
            if seen[start as usize] {
                continue;
            }
            let v = self.vertex_of(start) as usize;
            let mut h = start;
            while !seen[h as usize] {
                seen[h as usize] = true;
                out[v].push(h);
                h = self.sigma(h);
            }
        }
        out
    }

    /// Exact graph distances from `source` by breadth-first search.
    pub fn bfs_distances(&self, source: usize) -> Result<Vec<u32>> {
        if source >= self.vertex_count {
            return Err(BgError::invalid(format!(
                "unknown vertex id {source} (map has {} vertices)",
                self.vertex_count
            )));
        }
        let by_vertex = self.half_edges_by_vertex();
        let mut dist = vec![u32::MAX; self.vertex_count];
        let mut queue = std::collections::VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            for &h in &by_vertex[v] {
                let w = self.vertex_of(self.alpha(h)) as usize;
                if dist[w] == u32::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        debug_assert!(dist.iter().all(|&d| d != u32::MAX));
        Ok(dist)
    }

    /// Canonical relabeling of the half-edges reachable from the root, by a
    /// deterministic traversal of the group generated by sigma and alpha.
    /// Two rooted maps are isomorphic (root-preserving, orientation-preserving)
    /// exactly when their canonical codes agree.
    pub fn canonical_code(&self) -> Vec<u32> {
        let m = self.half_edge_count();
        let mut relabel = vec![u32::MAX; m];
        let mut order = Vec::with_capacity(m);
        let mut queue = std::collections::VecDeque::new();
        relabel[self.root_half_edge as usize] = 0;
        order.push(self.root_half_edge);
        queue.push_back(self.root_half_edge);
        let mut next = 1u32;
        while let Some(h) = queue.pop_front() {
            for g in [self.sigma(h), self.alpha(h)] {
                if relabel[g as usize] == u32::MAX {
                    relabel[g as usize] = next;
                    next += 1;
                    order.push(g);
                    queue.push_back(g);
                }
            }
        }
        let mut code = Vec::with_capacity(2 * m);
        for &h in &order {
            code.push(relabel[self.sigma(h) as usize]);
            code.push(relabel[self.alpha(h) as usize]);
        }
        code
    }
}

/// Checks every `CombinatorialMap` invariant, returning one named diagnostic
/// per violation (empty means valid).
pub fn validate_map(
    alpha: &[u32],
    sigma: &[u32],
    vertex_of: &[u32],
    root_half_edge: u32,
) -> Vec<String> {
    diagnose(alpha, sigma, vertex_of, root_half_edge)
}

fn diagnose(alpha: &[u32], sigma: &[u32], vertex_of: &[u32], root: u32) -> Vec<String> {
    let mut issues = Vec::new();
    let m = alpha.len();
    if m == 0 || m % 2 != 0 {
        issues.push(format!("half-edge count {m} is not a positive even number"));
        return issues;
    }
    if sigma.len() != m || vertex_of.len() != m {
        issues.push("alpha, sigma and vertex_of must have equal length".into());
        return issues;
    }
    if root as usize >= m {
        issues.push(format!("root half-edge {root} out of range"));
    }
    if alpha.iter().any(|&h| h as usize >= m) || sigma.iter().any(|&h| h as usize >= m) {
        issues.push("permutation image out of range".into());
        return issues;
    }
    // alpha: fixed-point-free involution.
    for h in 0..m as u32 {
        if alpha[h as usize] == h {
            issues.push(format!("alpha not fixed-point-free: alpha({h}) = {h}"));
            break;
        }
    }
    if (0..m as u32).any(|h| alpha[alpha[h as usize] as usize] != h) {
        issues.push("alpha is not an involution".into());
    }
    // sigma: permutation.
    let mut seen = vec![false; m];
    for &h in sigma {
        if seen[h as usize] {
            issues.push("sigma is not a permutation".into());
            break;
        }
        seen[h as usize] = true;
    }
    // vertex_of must be constant on sigma-orbits and distinct across them.
    let mut orbit_of = vec![usize::MAX; m];
    let mut orbits = 0usize;
    for start in 0..m {
        if orbit_of[start] != usize::MAX {
            continue;
        }
        let mut h = start;
        while orbit_of[h] == usize::MAX {
            orbit_of[h] = orbits;
            h = sigma[h] as usize;
        }
        orbits += 1;
    }
    let mut vertex_of_orbit = vec![u32::MAX; orbits];
    let mut consistent = true;
    for h in 0..m {
        let o = orbit_of[h];
        if vertex_of_orbit[o] == u32::MAX {
            vertex_of_orbit[o] = vertex_of[h];
        } else if vertex_of_orbit[o] != vertex_of[h] {
            consistent = false;
        }
    }
    let mut sorted = vertex_of_orbit.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if !consistent || sorted.len() != orbits {
        issues.push("vertex_of does not match the sigma-orbit structure".into());
    }
    // Transitivity of <alpha, sigma> (connectivity).
    let mut reach = vec![false; m];
    let mut stack = vec![0usize];
    reach[0] = true;
    let mut reached = 1usize;
    while let Some(h) = stack.pop() {
        for g in [alpha[h] as usize, sigma[h] as usize] {
            if !reach[g] {
                reach[g] = true;
                reached += 1;
                stack.push(g);
            }
        }
    }
    if reached != m {
        issues.push("not transitive: the map is disconnected".into());
    }
    // Euler relation (sphericity), only meaningful once everything else holds.
    if issues.is_empty() {
        let v = orbits as i64;
        let e = (m / 2) as i64;
        let mut fseen = vec![false; m];
        let mut f = 0i64;
        for start in 0..m {
            if fseen[start] {
                continue;
            }
            let mut h = start;
            while !fseen[h] {
                fseen[h] = true;
                h = sigma[alpha[h] as usize] as usize;
            }
            f += 1;
        }
        if v - e + f != 2 {
            issues.push(format!(
                "Euler relation violated: V - E + F = {} - {} + {} != 2",
                v, e, f
            ));
        }
    }
    issues
}

/// A rooted quadrangulation with a distinguished vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointedQuadrangulation {
    map: CombinatorialMap,
    pointed_vertex: usize,
}

impl PointedQuadrangulation {
    pub fn new(map: CombinatorialMap, pointed_vertex: usize) -> Result<Self> {
        if pointed_vertex >= map.vertex_count() {
            return Err(BgError::invalid(format!(
                "pointed vertex {pointed_vertex} out of range"
            )));
        }
        let faces = map.faces();
        if let Some(f) = faces.iter().find(|f| f.len() != 4) {
            return Err(BgError::invariant(format!(
                "face of degree {} in a quadrangulation",
                f.len()
            )));
        }
        let n = faces.len();
        if map.edge_count() != 2 * n || map.vertex_count() != n + 2 {
            return Err(BgError::invariant(format!(
                "quadrangulation counts violated: F={}, E={}, V={}",
                n,
                map.edge_count(),
                map.vertex_count()
            )));
        }
        Ok(PointedQuadrangulation { map, pointed_vertex })
    }

    pub fn map(&self) -> &CombinatorialMap {
        &self.map
    }

    pub fn pointed_vertex(&self) -> usize {
        self.pointed_vertex
    }

    /// Number of faces.
    pub fn face_count(&self) -> usize {
        self.map.edge_count() / 2
    }

    /// Canonical code including the pointed vertex, for isomorphism tests of
    /// rooted *pointed* maps.
    pub fn canonical_code(&self) -> Vec<u32> {
        let mut code = self.map.canonical_code();
        // Mark the pointed vertex by the smallest canonical label among its
        // half-edges.
        let m = self.map.half_edge_count();
        let mut relabel = vec![u32::MAX; m];
        let mut queue = std::collections::VecDeque::new();
        relabel[self.map.root_half_edge() as usize] = 0;
        queue.push_back(self.map.root_half_edge());
        let mut next = 1u32;
        let mut mark = u32::MAX;
        while let Some(h) = queue.pop_front() {
            if self.map.vertex_of(h) as usize == self.pointed_vertex {
                mark = mark.min(relabel[h as usize]);
            }
            for g in [self.map.sigma(h), self.map.alpha(h)] {
                if relabel[g as usize] == u32::MAX {
                    relabel[g as usize] = next;
                    next += 1;
                    queue.push_back(g);
                }
            }
        }
        code.push(mark);
        code
    }
}

/// Serializes a pointed quadrangulation in the five-line map format.
pub fn encode_map(q: &PointedQuadrangulation) -> String {
    let join = |xs: &[u32]| {
        xs.iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(",")
    };
    format!(
        "HALFEDGES:{}\nALPHA:{}\nSIGMA:{}\nROOT:{}\nPOINT:{}\n",
        q.map.half_edge_count(),
        join(&q.map.alpha),
        join(&q.map.sigma),
        q.map.root_half_edge(),
        q.pointed_vertex
    )
}

/// Parses the five-line map format. `vertex_of` is reconstructed from the
/// sigma orbits, numbering vertices by their smallest half-edge.
pub fn decode_map(text: &str) -> Result<PointedQuadrangulation> {
    let mut lines = text.lines();
    let mut expect = |prefix: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| BgError::Decode(format!("missing line {prefix}")))?;
        line.strip_prefix(prefix)
            .map(str::to_string)
            .ok_or_else(|| BgError::Decode(format!("expected line starting with {prefix}")))
    };
    let m: usize = expect("HALFEDGES:")?
        .parse()
        .map_err(|e| BgError::Decode(format!("bad half-edge count: {e}")))?;
    let parse_perm = |s: &str| -> Result<Vec<u32>> {
        let xs: Vec<u32> = if s.is_empty() {
            vec![]
        } else {
            s.split(',')
                .map(|t| {
                    t.parse::<u32>()
                        .map_err(|e| BgError::Decode(format!("bad id {t:?}: {e}")))
                })
                .collect::<Result<_>>()?
        };
        if xs.len() != m {
            return Err(BgError::Decode(format!(
                "permutation has {} entries, expected {m}",
                xs.len()
            )));
        }
        Ok(xs)
    };
    let alpha = parse_perm(&expect("ALPHA:")?)?;
    let sigma = parse_perm(&expect("SIGMA:")?)?;
    let root: u32 = expect("ROOT:")?
        .parse()
        .map_err(|e| BgError::Decode(format!("bad root: {e}")))?;
    let point: usize = expect("POINT:")?
        .parse()
        .map_err(|e| BgError::Decode(format!("bad pointed vertex: {e}")))?;

    if sigma.iter().any(|&h| h as usize >= m) {
        return Err(BgError::Decode("sigma image out of range".into()));
    }
    // Vertices = sigma orbits, numbered by smallest contained half-edge.
    let mut orbit_min = vec![u32::MAX; m];
    for start in 0..m {
        if orbit_min[start] != u32::MAX {
            continue;
        }
        let mut h = start;
        let mut min = u32::MAX;
        loop {
            min = min.min(h as u32);
            h = sigma[h] as usize;
            if h == start {
                break;
            }
        }
        let mut h = start;
        loop {
            orbit_min[h] = min;
            h = sigma[h] as usize;
            if h == start {
                break;
            }
        }
    }
    let mut mins: Vec<u32> = orbit_min.clone();
    mins.sort_unstable();
    mins.dedup();
    let vertex_of: Vec<u32> = orbit_min
        .iter()
        .map(|&mn| mins.binary_search(&mn).unwrap() as u32)
        .collect();
    let map = CombinatorialMap::new(alpha, sigma, vertex_of, root)?;
    PointedQuadrangulation::new(map, point)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Single quadrangle: a 4-cycle embedded in the sphere. Both faces have
    /// degree 4, so this is a pointed quadrangulation with n = 2 faces.
    fn four_cycle() -> PointedQuadrangulation {
        // Vertices 0-1-2-3 in a cycle; half-edges 2i, 2i+1 form edge i->i+1.
        let alpha = vec![1, 0, 3, 2, 5, 4, 7, 6];
        // Rotation at vertex i: outgoing half-edge, then the arriving one.
        let sigma = {
            let mut s = vec![0u32; 8];
            let rot: [&[u32]; 4] = [&[0, 7], &[2, 1], &[4, 3], &[6, 5]];
            for r in rot {
                for i in 0..r.len() {
                    s[r[i] as usize] = r[(i + 1) % r.len()];
                }
            }
            s
        };
        let vertex_of = vec![0, 1, 1, 2, 2, 3, 3, 0];
        let map = CombinatorialMap::new(alpha, sigma, vertex_of, 0).unwrap();
        PointedQuadrangulation::new(map, 0).unwrap()
    }

    #[test]
    fn four_cycle_is_a_valid_quadrangulation() {
        let q = four_cycle();
        assert_eq!(q.face_count(), 2);
        assert_eq!(q.map().vertex_count(), 4);
        assert!(q.map().faces().iter().all(|f| f.len() == 4));
    }

    #[test]
    fn bfs_on_the_four_cycle() {
        let q = four_cycle();
        let d = q.map().bfs_distances(0).unwrap();
        assert_eq!(d[0], 0);
        assert_eq!(d[2], 2); // opposite vertex
        assert_eq!(d[1], 1);
        assert_eq!(d[3], 1);
        assert!(q.map().bfs_distances(9).is_err());
    }

    #[test]
    fn diagnostics_name_violations() {
        // alpha with a fixed point.
        let issues = validate_map(&[0, 1], &[1, 0], &[0, 0], 0);
        assert!(issues.iter().any(|s| s.contains("fixed-point-free")));

        // Disconnected union of two 2-cycles.
        let alpha = vec![1, 0, 3, 2];
        let sigma = vec![0, 1, 2, 3];
        let vertex_of = vec![0, 1, 2, 3];
        let issues = validate_map(&alpha, &sigma, &vertex_of, 0);
        assert!(issues.iter().any(|s| s.contains("not transitive")));
    }
}
