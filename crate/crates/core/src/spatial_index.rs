//! A static k-d tree over 3D points with exact ball and k-nearest-neighbour
//! queries.
//!
//! Nodes split at the median along the axis of largest extent. The median is
//! taken over `(coordinate, original index)` so construction is a pure
//! function of the input order. All distance comparisons are made on squared
//! distances, identically in queries and pruning, which keeps results exact
//! at the radius boundary.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cloud::dist2;
use crate::error::{Error, Result};

pub const DEFAULT_LEAF_SIZE: usize = 16;

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug)]
pub struct SpatialIndex {
    /// Points in tree order.
    points: Vec<[f64; 3]>,
    /// Original index of each entry of `points`.
    ids: Vec<usize>,
    nodes: Vec<Node>,
    leaf_size: usize,
}

impl SpatialIndex {
    pub fn build(points: &[[f64; 3]], leaf_size: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::usage("cannot index an empty cloud"));
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Data {
                index: i,
                msg: "non-finite point".into(),
            });
        }
        let leaf_size = leaf_size.max(1);
        let mut entries: Vec<([f64; 3], usize)> = points.iter().copied().zip(0..).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / leaf_size + 1);
        build_node(&mut entries, 0, leaf_size, &mut nodes);
        let (points, ids) = entries.into_iter().unzip();
        Ok(SpatialIndex {
            points,
            ids,
            nodes,
            leaf_size,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Indices of every point with `‖p − center‖ ≤ radius`, ascending.
    pub fn ball_query(&self, center: &[f64; 3], radius: f64) -> Result<Vec<usize>> {
        check_radius(radius)?;
        let r2 = radius * radius;
        let mut out = Vec::new();
        self.visit_ball(0, center, r2, &mut |i| {
            out.push(i);
            true
        });
        out.sort_unstable();
        Ok(out)
    }

    /// Whether any point lies within `radius` of `center`.
    pub fn any_within(&self, center: &[f64; 3], radius: f64) -> Result<bool> {
        check_radius(radius)?;
        let mut found = false;
        self.visit_ball(0, center, radius * radius, &mut |_| {
            found = true;
            false
        });
        Ok(found)
    }

    /// The `k` nearest points as `(index, distance)`, nearest first, ties
    /// broken by lower index.
    pub fn knn_query(&self, center: &[f64; 3], k: usize) -> Result<Vec<(usize, f64)>> {
        if k == 0 || k > self.len() {
            return Err(Error::usage(format!(
                "k = {k} outside 1..={}",
                self.len()
            )));
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.visit_knn(0, center, k, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort_unstable();
        Ok(out.into_iter().map(|c| (c.id, c.d2.sqrt())).collect())
    }

    /// Returns false from `f` to stop early.
    fn visit_ball(&self, node: usize, c: &[f64; 3], r2: f64, f: &mut impl FnMut(usize) -> bool) -> bool {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for k in start..end {
                    if dist2(&self.points[k], c) <= r2 && !f(self.ids[k]) {
                        return false;
                    }
                }
                true
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = c[axis] - value;
                // Left holds coordinates <= value, right holds >= value.
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                if !self.visit_ball(near, c, r2, f) {
                    return false;
                }
                if diff * diff <= r2 {
                    return self.visit_ball(far, c, r2, f);
                }
                true
            }
        }
    }

    fn visit_knn(&self, node: usize, c: &[f64; 3], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for j in start..end {
                    let cand = Candidate {
                        d2: dist2(&self.points[j], c),
                        id: self.ids[j],
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = c[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.visit_knn(near, c, k, heap);
                if heap.len() < k || diff * diff <= heap.peek().unwrap().d2 {
                    self.visit_knn(far, c, k, heap);
                }
            }
        }
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius >= 0.0) {
        return Err(Error::usage(format!("radius must be non-negative, got {radius}")));
    }
    Ok(())
}

/// `entries` pairs each point with its original index.
fn build_node(entries: &mut [([f64; 3], usize)], offset: usize, leaf_size: usize, nodes: &mut Vec<Node>) -> usize {
    let me = nodes.len();
    if entries.len() <= leaf_size {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + entries.len(),
        });
        return me;
    }
    let axis = widest_axis(entries);
    let mid = entries.len() / 2;
    entries.select_nth_unstable_by(mid, |a, b| a.0[axis].total_cmp(&b.0[axis]).then(a.1.cmp(&b.1)));
    let value = entries[mid].0[axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (lo, hi) = entries.split_at_mut(mid);
    let left = build_node(lo, offset, leaf_size, nodes);
    let right = build_node(hi, offset + mid, leaf_size, nodes);
    nodes[me] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    me
}

fn widest_axis(entries: &[([f64; 3], usize)]) -> usize {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (p, _) in entries {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let ext = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    // First axis wins ties.
    (0..3).fold(0, |best, a| if ext[a] > ext[best] { a } else { best })
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    d2: f64,
    id: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.id.cmp(&other.id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_one_leaf() {
        let idx = SpatialIndex::build(&[[1.0, 2.0, 3.0]], 8).unwrap();
        assert_eq!(idx.leaf_count(), 1);
        assert_eq!(idx.ball_query(&[1.0, 2.0, 3.0], 0.0).unwrap(), vec![0]);
        assert_eq!(idx.knn_query(&[1.0, 2.0, 3.0], 1).unwrap(), vec![(0, 0.0)]);
    }

    #[test]
    fn empty_cloud_rejected() {
        assert!(matches!(SpatialIndex::build(&[], 8), Err(Error::Usage(_))));
    }

    #[test]
    fn duplicates_are_all_returned() {
        let pts = vec![[0.0; 3], [1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [5.0, 0.0, 0.0]];
        let idx = SpatialIndex::build(&pts, 1).unwrap();
        assert_eq!(idx.ball_query(&[1.0, 1.0, 1.0], 0.0).unwrap(), vec![1, 2]);
    }

    #[test]
    fn boundary_is_inclusive() {
        let pts = vec![[0.0; 3], [3.0, 4.0, 0.0], [3.0, 4.0, 0.1]];
        let idx = SpatialIndex::build(&pts, 1).unwrap();
        assert_eq!(idx.ball_query(&[0.0; 3], 5.0).unwrap(), vec![0, 1]);
    }

    #[test]
    fn large_radius_returns_everything() {
        let pts: Vec<_> = (0..50).map(|i| [i as f64, (i * 7 % 11) as f64, 0.5]).collect();
        let idx = SpatialIndex::build(&pts, 4).unwrap();
        assert_eq!(idx.ball_query(&[0.0; 3], 1e3).unwrap(), (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn knn_full_sort_and_bounds() {
        let pts: Vec<_> = (0..20).map(|i| [(i % 5) as f64, (i / 5) as f64, 0.0]).collect();
        let idx = SpatialIndex::build(&pts, 3).unwrap();
        let all = idx.knn_query(&[0.0; 3], 20).unwrap();
        assert_eq!(all.len(), 20);
        assert!(all.windows(2).all(|w| w[0].1 < w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)));
        assert!(idx.knn_query(&[0.0; 3], 0).is_err());
        assert!(idx.knn_query(&[0.0; 3], 21).is_err());
    }

    #[test]
    fn negative_radius_rejected() {
        let idx = SpatialIndex::build(&[[0.0; 3]], 1).unwrap();
        assert!(matches!(idx.ball_query(&[0.0; 3], -1.0), Err(Error::Usage(_))));
        assert!(idx.ball_query(&[0.0; 3], f64::NAN).is_err());
    }
}
