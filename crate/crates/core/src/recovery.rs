//! Recovering the exact `r*` from banded hop estimates: a weighted
//! nearest-neighbor structure answering `min_q max{delta^2(p,q), w_q}`, and
//! the band-restricted bottleneck dynamic program built on it.

use crate::contraction::EstimateVector;
use crate::error::{Error, Result};
use crate::geom::{sq_dist, KdTree, Point, SqDist};
use crate::model::{CandidateValue, Instance};

/// Weight-ordered recursive halves, each carrying an exact nearest-neighbor
/// tree over its lower-weight half. A query walks one root-to-leaf path and
/// probes one tree per level, so it visits at most `ceil(log2 n) + 1` levels.
pub struct WeightedNNIndex {
    entries: Vec<Entry>,      // sorted by (weight, id)
    weight_of: Vec<SqDist>,   // by original point index
    root: Node,
}

#[derive(Clone, Copy)]
struct Entry {
    point: Point,
    id: u32,
    weight: SqDist,
}

enum Node {
    Leaf {
        entry: usize,
    },
    Split {
        left_tree: KdTree, // over the lower-weight half
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Builds the index over points with nonnegative (possibly infinite) weights.
pub fn wnn_build(points: &[Point], weights: &[SqDist]) -> Result<WeightedNNIndex> {
    assert_eq!(points.len(), weights.len());
    if points.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let mut entries: Vec<Entry> = points
        .iter()
        .zip(weights)
        .enumerate()
        .map(|(i, (&point, &weight))| Entry { point, id: i as u32, weight })
        .collect();
    entries.sort_unstable_by_key(|e| (e.weight, e.id));
    let root = build_node(&entries, 0, entries.len());
    Ok(WeightedNNIndex {
        entries,
        weight_of: weights.to_vec(),
        root,
    })
}

fn build_node(entries: &[Entry], lo: usize, hi: usize) -> Node {
    if hi - lo == 1 {
        return Node::Leaf { entry: lo };
    }
    let mid = lo + (hi - lo).div_ceil(2);
    let items: Vec<(Point, u32)> = entries[lo..mid]
        .iter()
        .map(|e| (e.point, e.id))
        .collect();
    Node::Split {
        left_tree: KdTree::build(&items),
        left: Box::new(build_node(entries, lo, mid)),
        right: Box::new(build_node(entries, mid, hi)),
    }
}

/// Query result: the minimum of `max{delta^2(p, q), w_q}`, its witness, and
/// the number of recursion levels visited.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WnnAnswer {
    pub value: SqDist,
    pub witness: u32,
    pub levels_visited: u32,
}

/// Finds `q` minimizing `max{delta^2(p, q), w_q}`, ties broken towards the
/// lowest point index among the candidates the descent sees.
pub fn wnn_query(idx: &WeightedNNIndex, p: Point) -> WnnAnswer {
    let mut node = &idx.root;
    let mut levels = 1u32;
    let mut best: Option<(SqDist, u32)> = None;
    loop {
        match node {
            Node::Leaf { entry } => {
                let e = &idx.entries[*entry];
                let v = sq_dist(p, e.point).max(e.weight);
                merge(&mut best, (v, e.id));
                return WnnAnswer {
                    value: best.unwrap().0,
                    witness: best.unwrap().1,
                    levels_visited: levels,
                };
            }
            Node::Split { left_tree, left, right, .. } => {
                let (d, q_id) = left_tree.nearest(p).expect("left half is nonempty");
                let w = idx.weight_of[q_id as usize];
                levels += 1;
                if d <= w {
                    // every right-half weight is at least w, so the left
                    // half already holds a minimizer
                    merge(&mut best, (w, q_id));
                    node = left;
                } else {
                    // within the left half nothing beats the plain nearest
                    // neighbor distance
                    merge(&mut best, (d, q_id));
                    node = right;
                }
            }
        }
    }
}

fn merge(best: &mut Option<(SqDist, u32)>, cand: (SqDist, u32)) {
    match best {
        Some((v, id)) if (*v, *id) <= cand => {}
        _ => *best = Some(cand),
    }
}

// ---------------------------------------------------------------------------
// Band dynamic program
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Default)]
pub struct DpStats {
    /// Total band memberships processed; at most `(k + 1) * n`.
    pub entries: u64,
    pub max_levels_visited: u32,
}

/// Recovers `r*` from banded estimates. Builds bands
/// `P_i = {p : i - k <= d_tilde[p] <= i}`, seeds `D_0(s) = 0`, evaluates
/// `D_i(p) = min_q max{D_{i-1}(q), delta^2(p, q)}` over `q` in `P_{i-1}`
/// with the weighted nearest-neighbor index, and returns
/// `min_{i <= lambda} D_i(t)` with its bottleneck witness pair.
pub fn dp_recover(inst: &Instance, est: &EstimateVector) -> Result<(CandidateValue, DpStats)> {
    if inst.s == inst.t {
        return Ok((CandidateValue::zero(inst.s, inst.s), DpStats::default()));
    }
    let n = inst.n();
    let k = est.slack;
    let Some(dt_t) = est.d_tilde[inst.t] else {
        return Err(Error::RecoveryFailure(
            "t has no finite estimate; bands cannot reach it".into(),
        ));
    };
    if est.d_tilde[inst.s] != Some(0) {
        return Err(Error::RecoveryFailure(format!(
            "s must have estimate 0, got {:?}",
            est.d_tilde[inst.s]
        )));
    }
    let i_max = inst.lambda.min(dt_t.saturating_add(k));

    // bucket points by estimate so bands assemble in O(|band|)
    let mut buckets: Vec<Vec<u32>> = Vec::new();
    for (p, d) in est.d_tilde.iter().enumerate() {
        if let Some(d) = *d {
            let d = d as usize;
            if buckets.len() <= d {
                buckets.resize(d + 1, Vec::new());
            }
            buckets[d].push(p as u32);
        }
    }
    let band = |i: u32| -> Vec<u32> {
        let lo = i.saturating_sub(k) as usize;
        let hi = (i as usize).min(buckets.len().saturating_sub(1));
        let mut out = Vec::new();
        for d in lo..=hi {
            if d < buckets.len() {
                out.extend_from_slice(&buckets[d]);
            }
        }
        out
    };

    let mut stats = DpStats::default();
    // rolling level state: finite D values and witnesses per point
    let mut prev_val: Vec<Option<SqDist>> = vec![None; n];
    let mut prev_wit: Vec<(u32, u32)> = vec![(0, 0); n];
    let mut prev_members = band(0);
    stats.entries += prev_members.len() as u64;
    prev_val[inst.s] = Some(SqDist::ZERO);
    prev_wit[inst.s] = (inst.s as u32, inst.s as u32);

    let mut answer: Option<(SqDist, (u32, u32))> = None;
    let consider = |answer: &mut Option<(SqDist, (u32, u32))>, v: SqDist, w: (u32, u32)| {
        if answer.is_none_or(|(av, _)| v < av) {
            *answer = Some((v, w));
        }
    };

    for i in 1..=i_max {
        let prev_finite: Vec<u32> = prev_members
            .iter()
            .copied()
            .filter(|&p| prev_val[p as usize].is_some())
            .collect();
        if prev_finite.is_empty() {
            break;
        }
        let pts: Vec<Point> = prev_finite
            .iter()
            .map(|&p| inst.points[p as usize])
            .collect();
        let wts: Vec<SqDist> = prev_finite
            .iter()
            .map(|&p| prev_val[p as usize].unwrap())
            .collect();
        let idx = wnn_build(&pts, &wts)?;

        let members = band(i);
        stats.entries += members.len() as u64;
        let mut next_val: Vec<Option<SqDist>> = vec![None; n];
        let mut next_wit: Vec<(u32, u32)> = vec![(0, 0); n];
        for &p in &members {
            let ans = wnn_query(&idx, inst.points[p as usize]);
            stats.max_levels_visited = stats.max_levels_visited.max(ans.levels_visited);
            let q = prev_finite[ans.witness as usize];
            let d_pq = sq_dist(inst.points[p as usize], inst.points[q as usize]);
            // the bottleneck witness is the new edge when it attains the max,
            // otherwise it is inherited from the predecessor
            let wit = if d_pq >= prev_val[q as usize].unwrap() {
                (p, q)
            } else {
                prev_wit[q as usize]
            };
            next_val[p as usize] = Some(ans.value);
            next_wit[p as usize] = wit;
            if p as usize == inst.t {
                consider(&mut answer, ans.value, wit);
            }
        }
        prev_val = next_val;
        prev_wit = next_wit;
        prev_members = members;
    }

    match answer {
        Some((v, w)) => Ok((CandidateValue::new(v, w), stats)),
        None => Err(Error::RecoveryFailure(format!(
            "no finite bottleneck value reached t within lambda={} (i_max={})",
            inst.lambda, i_max
        ))),
    }
}
