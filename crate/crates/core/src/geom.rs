//! Planar points, squared distances, and an exact nearest-neighbor tree.

use serde::de::{SeqAccess, Visitor};
use serde::ser::SerializeTuple;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;

/// A squared Euclidean distance (or a squared weight in the same units).
///
/// For lattice instances these are exact integers stored in f64, so `==`
/// and ordering are exact. `+inf` is allowed (unreachable weights); NaN is
/// rejected at construction.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SqDist(f64);

impl SqDist {
    pub const ZERO: SqDist = SqDist(0.0);
    pub const INFINITE: SqDist = SqDist(f64::INFINITY);

    pub fn new(v: f64) -> SqDist {
        debug_assert!(!v.is_nan(), "squared distance must not be NaN");
        // normalize -0.0 so that total ordering matches numeric ordering
        SqDist(if v == 0.0 { 0.0 } else { v })
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    /// The plain (non-squared) radius this value corresponds to.
    pub fn radius(self) -> f64 {
        self.0.sqrt()
    }
}

impl PartialEq for SqDist {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for SqDist {}
impl PartialOrd for SqDist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for SqDist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}
impl fmt::Display for SqDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point in the plane. Serialized as a `[x, y]` pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Point {
        Point { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut tup = s.serialize_tuple(2)?;
        tup.serialize_element(&self.x)?;
        tup.serialize_element(&self.y)?;
        tup.end()
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Point, D::Error> {
        struct PointVisitor;
        impl<'de> Visitor<'de> for PointVisitor {
            type Value = Point;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a [x, y] coordinate pair")
            }
            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<Point, A::Error> {
                let x = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(0, &self))?;
                let y = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(1, &self))?;
                Ok(Point { x, y })
            }
        }
        d.deserialize_tuple(2, PointVisitor)
    }
}

/// Exact squared Euclidean distance between two points.
pub fn sq_dist(a: Point, b: Point) -> SqDist {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    SqDist::new(dx * dx + dy * dy)
}

// ---------------------------------------------------------------------------
// Exact nearest-neighbor tree
// ---------------------------------------------------------------------------

/// A kd-tree over `(Point, id)` entries answering exact nearest-neighbor and
/// threshold queries. Ties on distance resolve to the lowest id, so queries
/// are fully deterministic; instrumented BFS runs rely on this when they
/// replay transcripts.
#[derive(Clone, Debug)]
pub struct KdTree {
    nodes: Vec<KdNode>,
    root: i32,
}

#[derive(Clone, Debug)]
struct KdNode {
    pt: Point,
    id: u32,
    axis: u8,
    left: i32,
    right: i32,
}

impl KdTree {
    /// Builds a tree over the given entries. Duplicate points are fine.
    pub fn build(items: &[(Point, u32)]) -> KdTree {
        let mut scratch: Vec<(Point, u32)> = items.to_vec();
        let mut nodes = Vec::with_capacity(items.len());
        let root = Self::build_rec(&mut scratch, &mut nodes);
        KdTree { nodes, root }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    fn build_rec(items: &mut [(Point, u32)], nodes: &mut Vec<KdNode>) -> i32 {
        if items.is_empty() {
            return -1;
        }
        // split on the axis with larger spread; ties go to x
        let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
        for (p, _) in items.iter() {
            min_x = min_x.min(p.x);
            max_x = max_x.max(p.x);
            min_y = min_y.min(p.y);
            max_y = max_y.max(p.y);
        }
        let axis: u8 = if (max_y - min_y) > (max_x - min_x) { 1 } else { 0 };
        let mid = items.len() / 2;
        let key = |e: &(Point, u32)| -> (f64, u32) {
            (if axis == 0 { e.0.x } else { e.0.y }, e.1)
        };
        items.select_nth_unstable_by(mid, |a, b| {
            let (ka, ia) = key(a);
            let (kb, ib) = key(b);
            ka.total_cmp(&kb).then(ia.cmp(&ib))
        });
        let (pt, id) = items[mid];
        let slot = nodes.len();
        nodes.push(KdNode {
            pt,
            id,
            axis,
            left: -1,
            right: -1,
        });
        let (lo, rest) = items.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = Self::build_rec(lo, nodes);
        let right = Self::build_rec(hi, nodes);
        nodes[slot].left = left;
        nodes[slot].right = right;
        slot as i32
    }

    /// Exact nearest neighbor of `q`: `(squared distance, id)`, lowest id on
    /// ties. `None` when the tree is empty.
    pub fn nearest(&self, q: Point) -> Option<(SqDist, u32)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (SqDist::INFINITE, u32::MAX);
        self.nearest_rec(self.root, q, &mut best);
        Some(best)
    }

    fn nearest_rec(&self, node: i32, q: Point, best: &mut (SqDist, u32)) {
        if node < 0 {
            return;
        }
        let n = &self.nodes[node as usize];
        let d = sq_dist(q, n.pt);
        if d < best.0 || (d == best.0 && n.id < best.1) {
            *best = (d, n.id);
        }
        let delta = if n.axis == 0 { q.x - n.pt.x } else { q.y - n.pt.y };
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.nearest_rec(near, q, best);
        // visit the far side on equality too, so id tie-breaking stays exact
        if SqDist::new(delta * delta) <= best.0 {
            self.nearest_rec(far, q, best);
        }
    }

    /// Is any entry within the threshold of `q`? Early-exits on the first hit.
    pub fn within(&self, q: Point, thresh: SqDist, strict: bool) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        self.within_rec(self.root, q, thresh, strict)
    }

    fn within_rec(&self, node: i32, q: Point, thresh: SqDist, strict: bool) -> bool {
        if node < 0 {
            return false;
        }
        let n = &self.nodes[node as usize];
        let d = sq_dist(q, n.pt);
        if (strict && d < thresh) || (!strict && d <= thresh) {
            return true;
        }
        let delta = if n.axis == 0 { q.x - n.pt.x } else { q.y - n.pt.y };
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        if self.within_rec(near, q, thresh, strict) {
            return true;
        }
        let gap = SqDist::new(delta * delta);
        let cross = if strict { gap < thresh } else { gap <= thresh };
        cross && self.within_rec(far, q, thresh, strict)
    }
}
