//! Plane trees and labeled plane trees: uniform sampling, exhaustive
//! enumeration, contour traversal and the line-oriented codec.
//!
//! Vertex ids are assigned in contour-first-visit order (preorder), so two
//! structurally equal trees are representationally equal. Trees are immutable
//! after construction and every sampler takes an explicit seed.

use crate::error::{BgError, Result};
use crate::rng::{make_rng, Rng};
use rand::seq::SliceRandom;
use rand::Rng as _;

/// Largest edge count accepted by the exhaustive tree enumerator.
pub const MAX_ENUM_EDGES: usize = 10;
/// Largest edge count accepted by the exhaustive labeled-tree enumerator.
pub const MAX_ENUM_LABELED_EDGES: usize = 6;

/// A rooted ordered tree. The root is vertex 0 and ids follow the order of
/// first visit by the clockwise contour, so the representation is canonical.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaneTree {
    children: Vec<Vec<usize>>,
    parent: Vec<usize>,
}

impl PlaneTree {
    /// Builds a tree from per-vertex ordered child lists. Vertex 0 is the
    /// root, `parent[0]` is unused. Fails unless the lists describe a single
    /// tree whose preorder is `0, 1, 2, ...`.
    pub fn from_children(children: Vec<Vec<usize>>) -> Result<Self> {
        let n = children.len();
        if n == 0 {
            return Err(BgError::invalid("a tree needs at least one vertex"));
        }
        let mut parent = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![(0usize, 0usize)];
        seen[0] = true;
        order.push(0);
        while let Some(&(v, i)) = stack.last() {
            if i < children[v].len() {
                stack.last_mut().unwrap().1 += 1;
                let c = children[v][i];
                if c >= n || seen[c] {
                    return Err(BgError::invariant(format!(
                        "child list of {v} references {c}, which is invalid or already used"
                    )));
                }
                seen[c] = true;
                parent[c] = v;
                order.push(c);
                stack.push((c, 0));
            } else {
                stack.pop();
            }
        }
        if order.len() != n {
            return Err(BgError::invariant("tree is not connected"));
        }
        if order.iter().enumerate().any(|(i, &v)| i != v) {
            return Err(BgError::invariant(
                "vertex ids must follow contour-first-visit order",
            ));
        }
        Ok(PlaneTree { children, parent })
    }

    /// The one-vertex tree.
    pub fn trivial() -> Self {
        PlaneTree {
            children: vec![vec![]],
            parent: vec![usize::MAX],
        }
    }

    pub fn node_count(&self) -> usize {
        self.children.len()
    }

    pub fn edge_count(&self) -> usize {
        self.children.len() - 1
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Parent of `v`; the root has none.
    pub fn parent(&self, v: usize) -> Option<usize> {
        if v == 0 {
            None
        } else {
            Some(self.parent[v])
        }
    }

    /// The Dyck word of the clockwise contour: `1` on each descent to a
    /// child, `0` on each ascent.
    pub fn dyck_word(&self) -> String {
        let mut w = String::with_capacity(2 * self.edge_count());
        let mut next = vec![0usize; self.node_count()];
        let mut v = 0usize;
        loop {
            if next[v] < self.children[v].len() {
                let c = self.children[v][next[v]];
                next[v] += 1;
                w.push('1');
                v = c;
            } else if v == 0 {
                break;
            } else {
                w.push('0');
                v = self.parent[v];
            }
        }
        w
    }

    /// Rebuilds a tree from a balanced Dyck word.
    pub fn from_dyck_word(word: &str) -> Result<Self> {
        let mut children: Vec<Vec<usize>> = vec![vec![]];
        let mut stack = vec![0usize];
        let mut next_id = 1usize;
        for (i, ch) in word.chars().enumerate() {
            match ch {
                '1' => {
                    children.push(vec![]);
                    let &top = stack.last().unwrap();
                    children[top].push(next_id);
                    stack.push(next_id);
                    next_id += 1;
                }
                '0' => {
                    if stack.len() == 1 {
                        return Err(BgError::Decode(format!(
                            "unbalanced Dyck word: excess '0' at position {i}"
                        )));
                    }
                    stack.pop();
                }
                other => {
                    return Err(BgError::Decode(format!(
                        "Dyck word may contain only '0'/'1', found {other:?}"
                    )));
                }
            }
        }
        if stack.len() != 1 {
            return Err(BgError::Decode(
                "unbalanced Dyck word: unclosed '1'".into(),
            ));
        }
        PlaneTree::from_children(children)
    }
}

/// A plane tree with integer vertex labels: root label 0 and increments of at
/// most one along every edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPlaneTree {
    pub tree: PlaneTree,
    labels: Vec<i64>,
}

impl LabeledPlaneTree {
    /// Validates both labeling invariants on construction.
    pub fn new(tree: PlaneTree, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != tree.node_count() {
            return Err(BgError::invalid(format!(
                "{} labels for {} vertices",
                labels.len(),
                tree.node_count()
            )));
        }
        if labels[0] != 0 {
            return Err(BgError::invariant(format!(
                "root label must be 0, got {}",
                labels[0]
            )));
        }
        for v in 1..tree.node_count() {
            let p = tree.parent(v).unwrap();
            if (labels[v] - labels[p]).abs() > 1 {
                return Err(BgError::invariant(format!(
                    "labels of adjacent vertices {p} and {v} differ by more than 1"
                )));
            }
        }
        Ok(LabeledPlaneTree { tree, labels })
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> i64 {
        self.labels[v]
    }

    pub fn min_label(&self) -> i64 {
        *self.labels.iter().min().unwrap()
    }

    /// Edge increments `label(child) - label(parent)` in contour order, which
    /// for contour-first-visit ids is simply the order of child ids.
    pub fn increments(&self) -> Vec<i64> {
        (1..self.tree.node_count())
            .map(|v| self.labels[v] - self.labels[self.tree.parent(v).unwrap()])
            .collect()
    }

    /// Rebuilds labels from per-edge increments (indexed by child id - 1).
    pub fn from_increments(tree: PlaneTree, increments: &[i64]) -> Result<Self> {
        if increments.len() != tree.edge_count() {
            return Err(BgError::invalid(format!(
                "{} increments for {} edges",
                increments.len(),
                tree.edge_count()
            )));
        }
        let mut labels = vec![0i64; tree.node_count()];
        for v in 1..tree.node_count() {
            let inc = increments[v - 1];
            if inc.abs() > 1 {
                return Err(BgError::Decode(format!(
                    "label increment {inc} outside {{-1,0,1}}"
                )));
            }
            labels[v] = labels[tree.parent(v).unwrap()] + inc;
        }
        LabeledPlaneTree::new(tree, labels)
    }
}

/// One corner of a plane tree: an angular sector at `vertex`, identified by
/// the visit number `position` in the rotation around that vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Corner {
    pub vertex: usize,
    pub position: usize,
}

/// The cyclic clockwise corner sequence of a tree with at least one edge;
/// entry 0 is the root corner, the one "below" the root vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CornerSequence {
    pub corners: Vec<Corner>,
}

impl CornerSequence {
    pub fn len(&self) -> usize {
        self.corners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corners.is_empty()
    }
}

/// Lists the `2n` corners of the clockwise contour, starting at the root corner.
pub fn contour(tree: &PlaneTree) -> Result<CornerSequence> {
    if tree.edge_count() == 0 {
        return Err(BgError::invalid("a zero-edge tree has no corners"));
    }
    let mut corners = Vec::with_capacity(2 * tree.edge_count());
    let mut pos = vec![0usize; tree.node_count()];
    let mut next = vec![0usize; tree.node_count()];
    let mut v = 0usize;
    loop {
        if next[v] < tree.children(v).len() {
            let c = tree.children(v)[next[v]];
            next[v] += 1;
            corners.push(Corner {
                vertex: v,
                position: pos[v],
            });
            pos[v] += 1;
            v = c;
        } else if v == 0 {
            break;
        } else {
            corners.push(Corner {
                vertex: v,
                position: pos[v],
            });
            pos[v] += 1;
            v = tree.parent[v];
        }
    }
    debug_assert_eq!(corners.len(), 2 * tree.edge_count());
    Ok(CornerSequence { corners })
}

/// Samples a plane tree with `n` edges uniformly among the `Catalan(n)`
/// possibilities.
///
/// A uniformly shuffled sequence of `n` up-steps and `n+1` down-steps has,
/// by the cycle lemma, exactly one rotation whose proper prefix sums are
/// nonnegative; dropping its final down-step leaves a uniform Dyck word.
pub fn sample_plane_tree(n: usize, seed: u64) -> PlaneTree {
    if n == 0 {
        return PlaneTree::trivial();
    }
    let mut rng = make_rng(seed);
    let mut steps: Vec<i8> = Vec::with_capacity(2 * n + 1);
    steps.extend(std::iter::repeat(1i8).take(n));
    steps.extend(std::iter::repeat(-1i8).take(n + 1));
    steps.shuffle(&mut rng);

    // First attainment of the minimum prefix sum marks the rotation point.
    let mut sum: i64 = 0;
    let mut min = i64::MAX;
    let mut argmin = 0usize;
    for (i, &s) in steps.iter().enumerate() {
        sum += s as i64;
        if sum < min {
            min = sum;
            argmin = i;
        }
    }
    let rotated = steps[argmin + 1..].iter().chain(steps[..argmin].iter());
    let word: String = rotated.map(|&s| if s == 1 { '1' } else { '0' }).collect();
    debug_assert_eq!(word.len(), 2 * n);
    PlaneTree::from_dyck_word(&word).expect("cycle-lemma rotation is a Dyck word")
}

/// All plane trees with `n` edges, each exactly once, in lexicographic Dyck
/// order. Guarded to `n <= MAX_ENUM_EDGES`.
pub fn enumerate_plane_trees(n: usize) -> Result<Vec<PlaneTree>> {
    if n > MAX_ENUM_EDGES {
        return Err(BgError::SizeLimit {
            what: "edge count for tree enumeration",
            got: n,
            max: MAX_ENUM_EDGES,
        });
    }
    let mut out = Vec::new();
    let mut word = String::with_capacity(2 * n);
    gen_dyck(n, 0, 0, &mut word, &mut out)?;
    Ok(out)
}

fn gen_dyck(
    n: usize,
    opens: usize,
    closes: usize,
    word: &mut String,
    out: &mut Vec<PlaneTree>,
) -> Result<()> {
    if opens == n && closes == n {
        out.push(PlaneTree::from_dyck_word(word)?);
        return Ok(());
    }
    // '0' < '1' lexicographically.
    if closes < opens {
        word.push('0');
        gen_dyck(n, opens, closes + 1, word, out)?;
        word.pop();
    }
    if opens < n {
        word.push('1');
        gen_dyck(n, opens + 1, closes, word, out)?;
        word.pop();
    }
    Ok(())
}

/// Assigns labels to `tree` with independent uniform increments on
/// `{-1, 0, +1}` along each edge and root label 0.
pub fn sample_labels(tree: &PlaneTree, seed: u64) -> LabeledPlaneTree {
    let mut rng = make_rng(seed);
    sample_labels_with(tree, &mut rng)
}

/// Same as [`sample_labels`] but drawing from a caller-provided generator.
pub fn sample_labels_with(tree: &PlaneTree, rng: &mut Rng) -> LabeledPlaneTree {
    let n = tree.edge_count();
    let increments: Vec<i64> = (0..n).map(|_| rng.random_range(-1..=1)).collect();
    LabeledPlaneTree::from_increments(tree.clone(), &increments)
        .expect("uniform increments always satisfy the labeling invariants")
}

/// All `3^n` labelings of `tree` in base-3 counter order (increment order
/// `-1, 0, +1` per edge). Guarded to 12 edges.
pub fn enumerate_labelings(tree: &PlaneTree) -> Result<Vec<LabeledPlaneTree>> {
    let n = tree.edge_count();
    if n > 12 {
        return Err(BgError::SizeLimit {
            what: "edge count for labeling enumeration",
            got: n,
            max: 12,
        });
    }
    let total = 3usize.pow(n as u32);
    let mut out = Vec::with_capacity(total);
    let mut incs = vec![-1i64; n];
    for mut code in 0..total {
        for inc in incs.iter_mut() {
            *inc = (code % 3) as i64 - 1;
            code /= 3;
        }
        out.push(LabeledPlaneTree::from_increments(tree.clone(), &incs)?);
    }
    Ok(out)
}

/// All labeled plane trees with exactly `n >= 1` edges: every tree shape
/// paired with every labeling. Guarded to `n <= MAX_ENUM_LABELED_EDGES`.
pub fn enumerate_labeled_trees(n: usize) -> Result<Vec<LabeledPlaneTree>> {
    if n == 0 || n > MAX_ENUM_LABELED_EDGES {
        return Err(BgError::SizeLimit {
            what: "edge count for labeled enumeration",
            got: n,
            max: MAX_ENUM_LABELED_EDGES,
        });
    }
    let mut out = Vec::new();
    for tree in enumerate_plane_trees(n)? {
        out.extend(enumerate_labelings(&tree)?);
    }
    Ok(out)
}

/// Serializes a labeled tree as `DYCK:<word>;LABELS:<comma-separated increments>`.
pub fn encode_tree(t: &LabeledPlaneTree) -> String {
    let incs: Vec<String> = t.increments().iter().map(i64::to_string).collect();
    format!("DYCK:{};LABELS:{}", t.tree.dyck_word(), incs.join(","))
}

/// Parses the single-line tree format produced by [`encode_tree`].
pub fn decode_tree(line: &str) -> Result<LabeledPlaneTree> {
    let line = line.trim_end_matches('\n');
    let rest = line
        .strip_prefix("DYCK:")
        .ok_or_else(|| BgError::Decode("expected leading 'DYCK:'".into()))?;
    let (word, labels_part) = rest
        .split_once(';')
        .ok_or_else(|| BgError::Decode("expected ';' between word and labels".into()))?;
    let incs_str = labels_part
        .strip_prefix("LABELS:")
        .ok_or_else(|| BgError::Decode("expected 'LABELS:' section".into()))?;
    let tree = PlaneTree::from_dyck_word(word)?;
    let increments: Vec<i64> = if incs_str.is_empty() {
        vec![]
    } else {
        incs_str
            .split(',')
            .map(|s| {
                s.parse::<i64>()
                    .map_err(|e| BgError::Decode(format!("bad increment {s:?}: {e}")))
            })
            .collect::<Result<_>>()?
    };
    LabeledPlaneTree::from_increments(tree, &increments)
}

/// The 8-edge labeled tree used as a worked mid-size fixture: its corner
/// count, corner/successor pattern and image quadrangulation exercise every
/// branch of the bijection. Root has two corners; the second child subtree
/// carries the deeper structure.
pub fn sample_fixture_tree() -> LabeledPlaneTree {
    // Children, in contour-first-visit ids:
    //   0 -> [1, 2]; 2 -> [3, 7]; 3 -> [4, 6]; 4 -> [5]; 7 -> [8]
    let children = vec![
        vec![1, 2],
        vec![],
        vec![3, 7],
        vec![4, 6],
        vec![5],
        vec![],
        vec![],
        vec![8],
        vec![],
    ];
    let tree = PlaneTree::from_children(children).unwrap();
    let labels = vec![0, -1, 1, 0, -1, 0, 0, 1, 0];
    LabeledPlaneTree::new(tree, labels).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::child_seed;
    use crate::stats::chi2_uniform_test;
    use std::collections::HashMap;

    /// Independent Catalan-number oracle via the convolution recurrence.
    fn catalan(n: usize) -> u64 {
        let mut c = vec![0u64; n + 1];
        c[0] = 1;
        for m in 1..=n {
            for i in 0..m {
                c[m] += c[i] * c[m - 1 - i];
            }
        }
        c[n]
    }

    #[test]
    fn trivial_and_one_edge_samples() {
        let t = sample_plane_tree(0, 1);
        assert_eq!(t.node_count(), 1);
        for seed in 0..20 {
            let t = sample_plane_tree(1, seed);
            assert_eq!(t.edge_count(), 1);
            assert_eq!(t.children(0), &[1]);
        }
    }

    #[test]
    fn enumeration_counts_match_catalan_recurrence() {
        for n in 0..=7 {
            let trees = enumerate_plane_trees(n).unwrap();
            assert_eq!(trees.len() as u64, catalan(n), "n={n}");
            // Each exactly once.
            let mut words: Vec<String> = trees.iter().map(|t| t.dyck_word()).collect();
            words.sort();
            words.dedup();
            assert_eq!(words.len() as u64, catalan(n));
        }
        assert!(enumerate_plane_trees(11).is_err());
    }

    #[test]
    fn enumeration_is_deterministic() {
        let a: Vec<String> = enumerate_plane_trees(5)
            .unwrap()
            .iter()
            .map(|t| t.dyck_word())
            .collect();
        let b: Vec<String> = enumerate_plane_trees(5)
            .unwrap()
            .iter()
            .map(|t| t.dyck_word())
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn sampler_hits_all_five_shapes_uniformly_at_n3() {
        let shapes: Vec<String> = enumerate_plane_trees(3)
            .unwrap()
            .iter()
            .map(|t| t.dyck_word())
            .collect();
        assert_eq!(shapes.len(), 5);
        let index: HashMap<&str, usize> =
            shapes.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
        let mut counts = vec![0u64; 5];
        for i in 0..10_000u64 {
            let t = sample_plane_tree(3, child_seed(0xABCD, i));
            counts[index[t.dyck_word().as_str()]] += 1;
        }
        assert!(counts.iter().all(|&c| c > 0));
        let (_, p) = chi2_uniform_test(&counts);
        assert!(p > 0.01, "chi-square p = {p}, counts {counts:?}");
    }

    #[test]
    fn label_increments_are_uniform_on_one_edge() {
        let tree = sample_plane_tree(1, 3);
        let mut counts = [0u64; 3];
        let draws = 10_000u64;
        for i in 0..draws {
            let lt = sample_labels(&tree, child_seed(7, i));
            assert_eq!(lt.label(0), 0);
            counts[(lt.label(1) + 1) as usize] += 1;
        }
        for c in counts {
            let f = c as f64 / draws as f64;
            assert!((f - 1.0 / 3.0).abs() < 0.02, "frequency {f}");
        }
    }

    #[test]
    fn two_edge_path_has_nine_uniform_labelings() {
        let path = PlaneTree::from_children(vec![vec![1], vec![2], vec![]]).unwrap();
        assert_eq!(enumerate_labelings(&path).unwrap().len(), 9);
        let mut counts = vec![0u64; 9];
        for i in 0..10_000u64 {
            let lt = sample_labels(&path, child_seed(11, i));
            let code = (lt.increments()[0] + 1) * 3 + (lt.increments()[1] + 1);
            counts[code as usize] += 1;
        }
        let (_, p) = chi2_uniform_test(&counts);
        assert!(p > 0.001, "chi-square p = {p}");
    }

    #[test]
    fn contour_of_one_edge_and_star() {
        let one = sample_plane_tree(1, 0);
        let cs = contour(&one).unwrap();
        assert_eq!(
            cs.corners,
            vec![
                Corner { vertex: 0, position: 0 },
                Corner { vertex: 1, position: 0 }
            ]
        );

        // Star with three children: hand traversal gives
        // (0,0) (1,0) (0,1) (2,0) (0,2) (3,0).
        let star = PlaneTree::from_children(vec![vec![1, 2, 3], vec![], vec![], vec![]]).unwrap();
        let cs = contour(&star).unwrap();
        assert_eq!(cs.len(), 6);
        let root_corners = cs.corners.iter().filter(|c| c.vertex == 0).count();
        assert_eq!(root_corners, 3);
        assert_eq!(
            cs.corners
                .iter()
                .map(|c| (c.vertex, c.position))
                .collect::<Vec<_>>(),
            vec![(0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (3, 0)]
        );

        assert!(contour(&PlaneTree::trivial()).is_err());
    }

    #[test]
    fn fixture_tree_has_sixteen_corners() {
        let t = sample_fixture_tree();
        assert_eq!(t.tree.edge_count(), 8);
        let cs = contour(&t.tree).unwrap();
        assert_eq!(cs.len(), 16);
        // Root has two corners, vertex 3 has three, leaf 8 has one.
        let count = |v: usize| cs.corners.iter().filter(|c| c.vertex == v).count();
        assert_eq!(count(0), 2);
        assert_eq!(count(3), 3);
        assert_eq!(count(8), 1);
    }

    #[test]
    fn codec_round_trips_and_rejects_malformed_input() {
        // One edge, child label -1.
        let t = decode_tree("DYCK:10;LABELS:-1").unwrap();
        assert_eq!(t.label(1), -1);
        assert_eq!(encode_tree(&t), "DYCK:10;LABELS:-1");

        assert!(decode_tree("DYCK:110;LABELS:0,0").is_err());
        assert!(decode_tree("DYCK:10;LABELS:2").is_err());
        assert!(decode_tree("DYCK:01;LABELS:0").is_err());
        assert!(decode_tree("NOPE").is_err());

        // Zero-edge tree round-trips through the empty sections.
        let t0 = LabeledPlaneTree::new(PlaneTree::trivial(), vec![0]).unwrap();
        assert_eq!(decode_tree(&encode_tree(&t0)).unwrap(), t0);
    }

    #[test]
    fn codec_round_trips_exhaustively_to_six_edges() {
        for n in 1..=6 {
            for t in enumerate_labeled_trees(n).unwrap() {
                assert_eq!(decode_tree(&encode_tree(&t)).unwrap(), t);
            }
        }
    }

    #[test]
    fn construction_rejects_bad_labels() {
        let path = PlaneTree::from_children(vec![vec![1], vec![]]).unwrap();
        assert!(LabeledPlaneTree::new(path.clone(), vec![1, 0]).is_err());
        assert!(LabeledPlaneTree::new(path, vec![0, 2]).is_err());
    }
}
