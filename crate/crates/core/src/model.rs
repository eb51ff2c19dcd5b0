//! Problem instances, candidate values, intervals, seeded generators, and the
//! brute-force reference oracles every other module is tested against.

use crate::error::{Error, Result};
use crate::geom::{sq_dist, Point, SqDist};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::collections::VecDeque;

/// Generator coordinates stay within this bound so squared distances are
/// exact integers (at most 2^43, well inside f64's exact-integer range).
pub const COORD_BOUND: i64 = 1 << 20;

/// A reverse-shortest-path instance: points, source/target, hop budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub points: Vec<Point>,
    pub s: usize,
    pub t: usize,
    pub lambda: u32,
}

impl Instance {
    pub fn new(points: Vec<Point>, s: usize, t: usize, lambda: u32) -> Result<Instance> {
        let inst = Instance { points, s, t, lambda };
        inst.validate()?;
        Ok(inst)
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if n < 2 {
            return Err(Error::InvalidInstance(format!("need n >= 2, got {n}")));
        }
        if self.s >= n || self.t >= n {
            return Err(Error::InvalidInstance(format!(
                "s={} t={} out of range for n={n}",
                self.s, self.t
            )));
        }
        if self.lambda < 1 && self.s != self.t {
            return Err(Error::InvalidInstance(
                "lambda must be >= 1 unless s = t".into(),
            ));
        }
        if let Some(p) = self.points.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "non-finite coordinate {p:?}"
            )));
        }
        Ok(())
    }

    pub fn with_lambda(mut self, lambda: u32) -> Instance {
        self.lambda = lambda;
        self
    }

    pub fn sq_dist(&self, i: usize, j: usize) -> SqDist {
        sq_dist(self.points[i], self.points[j])
    }

    pub fn from_json(text: &str) -> Result<Instance> {
        let inst: Instance = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInstance(format!("bad JSON: {e}")))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serialization cannot fail")
    }
}

/// A squared pairwise distance together with the point pair realizing it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateValue {
    pub sq: SqDist,
    pub witness: (u32, u32),
}

impl CandidateValue {
    pub fn new(sq: SqDist, witness: (u32, u32)) -> CandidateValue {
        CandidateValue { sq, witness }
    }

    pub fn zero(i: usize, j: usize) -> CandidateValue {
        CandidateValue {
            sq: SqDist::ZERO,
            witness: (i as u32, j as u32),
        }
    }
}

/// One endpoint of an interval over the candidate-value universe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bound {
    BelowAll,
    Value(CandidateValue),
    AboveAll,
}

impl Bound {
    fn key(&self) -> (i8, SqDist) {
        match self {
            Bound::BelowAll => (-1, SqDist::ZERO),
            Bound::Value(c) => (0, c.sq),
            Bound::AboveAll => (1, SqDist::ZERO),
        }
    }

    /// Is this bound strictly below the value `v`?
    pub fn below(&self, v: SqDist) -> bool {
        self.key() < (0, v)
    }

    /// Is this bound at or above the value `v`?
    pub fn at_or_above(&self, v: SqDist) -> bool {
        self.key() >= (0, v)
    }

    pub fn value(&self) -> Option<CandidateValue> {
        match self {
            Bound::Value(c) => Some(*c),
            _ => None,
        }
    }
}

/// A half-open range `(lo, hi]` certified to contain `r*` whenever the
/// evidence flags are set: `decide(lo) = false` and `decide(hi) = true`
/// (sentinel endpoints carry no evidence).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: Bound,
    pub hi: Bound,
    pub lo_evidence: bool,
    pub hi_evidence: bool,
}

impl Interval {
    pub fn new(lo: Bound, hi: Bound, lo_evidence: bool, hi_evidence: bool) -> Interval {
        debug_assert!(lo.key() < hi.key(), "interval endpoints out of order");
        Interval { lo, hi, lo_evidence, hi_evidence }
    }

    /// The whole value universe, with no decision evidence.
    pub fn full() -> Interval {
        Interval {
            lo: Bound::BelowAll,
            hi: Bound::AboveAll,
            lo_evidence: false,
            hi_evidence: false,
        }
    }

    /// Does `v` lie in `(lo, hi]`?
    pub fn contains_sq(&self, v: SqDist) -> bool {
        self.lo.below(v) && self.hi.at_or_above(v)
    }

    /// Intersects two intervals that both contain `r*`; the tighter endpoint
    /// wins on each side and keeps its evidence flag.
    pub fn intersect(&self, other: &Interval) -> Interval {
        let (lo, lo_evidence) = if other.lo.key() > self.lo.key() {
            (other.lo, other.lo_evidence)
        } else {
            (self.lo, self.lo_evidence)
        };
        let (hi, hi_evidence) = if other.hi.key() < self.hi.key() {
            (other.hi, other.hi_evidence)
        } else {
            (self.hi, self.hi_evidence)
        };
        Interval::new(lo, hi, lo_evidence, hi_evidence)
    }
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Instance families used by tests and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GenKind {
    Uniform,
    Cluster,
    Grid,
    Line,
}

impl GenKind {
    pub const ALL: [GenKind; 4] = [
        GenKind::Uniform,
        GenKind::Cluster,
        GenKind::Grid,
        GenKind::Line,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GenKind::Uniform => "uniform",
            GenKind::Cluster => "cluster",
            GenKind::Grid => "grid",
            GenKind::Line => "line",
        }
    }
}

impl std::str::FromStr for GenKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<GenKind> {
        match s {
            "uniform" => Ok(GenKind::Uniform),
            "cluster" => Ok(GenKind::Cluster),
            "grid" => Ok(GenKind::Grid),
            "line" => Ok(GenKind::Line),
            other => Err(Error::InvalidInstance(format!(
                "unknown generator kind {other:?}"
            ))),
        }
    }
}

/// Deterministically generates an instance. Coordinates are integers with
/// |coord| <= 2^20; `s` and `t` are the extreme points along x; lambda
/// defaults to `max(1, ceil(sqrt(n)))`.
pub fn generate(kind: GenKind, n: usize, seed: u64) -> Result<Instance> {
    if n < 2 {
        return Err(Error::InvalidInstance(format!("need n >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(kind as u64 + 1);
    let b = COORD_BOUND;
    let points: Vec<Point> = match kind {
        GenKind::Uniform => (0..n)
            .map(|_| {
                let x = rng.random_range(-b..=b) as f64;
                let y = rng.random_range(-b..=b) as f64;
                Point::new(x, y)
            })
            .collect(),
        GenKind::Cluster => {
            // two dense clusters holding 90% of the points plus uniform
            // scatter: the clusters are tight enough to sit inside one grid
            // cell at the scale the fast pipeline works at, which makes them
            // heavy even at delta near n^(7/8), while the scatter provides
            // light cells
            let radius: i64 = 16;
            let centers = [
                (
                    rng.random_range(-(b - radius)..=(b - radius)),
                    rng.random_range(-(b - radius)..=(b - radius)),
                ),
                (
                    rng.random_range(-(b - radius)..=(b - radius)),
                    rng.random_range(-(b - radius)..=(b - radius)),
                ),
            ];
            let per_cluster = n * 45 / 100;
            (0..n)
                .map(|i| {
                    if i < 2 * per_cluster {
                        let (cx, cy) = centers[i / per_cluster];
                        let x = cx + rng.random_range(-radius..=radius);
                        let y = cy + rng.random_range(-radius..=radius);
                        Point::new(x as f64, y as f64)
                    } else {
                        Point::new(
                            rng.random_range(-b..=b) as f64,
                            rng.random_range(-b..=b) as f64,
                        )
                    }
                })
                .collect()
        }
        GenKind::Grid => {
            let m = (n as f64).sqrt().ceil() as usize;
            let sp = ((2 * b) as usize / m.max(1)).max(1) as i64;
            (0..n)
                .map(|i| {
                    let row = (i / m) as i64;
                    let col = (i % m) as i64;
                    Point::new((col * sp - b) as f64, (row * sp - b) as f64)
                })
                .collect()
        }
        GenKind::Line => (0..n).map(|i| Point::new(i as f64, 0.0)).collect(),
    };

    let mut s = 0usize;
    let mut t = 0usize;
    for (i, p) in points.iter().enumerate() {
        if p.x < points[s].x {
            s = i;
        }
        if p.x > points[t].x {
            t = i;
        }
    }
    if s == t {
        t = (s + 1) % n;
    }
    let lambda = ((n as f64).sqrt().ceil() as u32).max(1);
    Instance::new(points, s, t, lambda)
}

// ---------------------------------------------------------------------------
// Brute-force oracles
// ---------------------------------------------------------------------------

/// Exact BFS hop distances from `s` in the graph with edges `delta^2 <= sq_r`.
/// Plain O(n^2) adjacency scans; deliberately independent of the grid-based
/// decision procedure it is used to check.
pub fn bfs_exact(inst: &Instance, sq_r: SqDist) -> Vec<Option<u32>> {
    let n = inst.n();
    let mut levels: Vec<Option<u32>> = vec![None; n];
    levels[inst.s] = Some(0);
    let mut queue = VecDeque::from([inst.s]);
    while let Some(u) = queue.pop_front() {
        let lu = levels[u].unwrap();
        for v in 0..n {
            if levels[v].is_none() && inst.sq_dist(u, v) <= sq_r {
                levels[v] = Some(lu + 1);
                queue.push_back(v);
            }
        }
    }
    levels
}

/// All C(n,2) candidate values sorted by `(value, i, j)`.
pub fn sorted_candidates(inst: &Instance) -> Vec<CandidateValue> {
    let n = inst.n();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(CandidateValue::new(inst.sq_dist(i, j), (i as u32, j as u32)));
        }
    }
    out.sort_unstable_by_key(|c| (c.sq, c.witness));
    out
}

/// Ground truth: the minimum candidate `c` with `bfs_exact(inst, c)[t] <= lambda`,
/// found by sorting all pairwise distances and binary searching with the BFS
/// oracle. Returns `(0, (s,s))` when `s = t`.
pub fn rstar_exact(inst: &Instance) -> CandidateValue {
    if inst.s == inst.t {
        return CandidateValue::zero(inst.s, inst.s);
    }
    let cands = sorted_candidates(inst);
    let reaches = |c: &CandidateValue| -> bool {
        match bfs_exact(inst, c.sq)[inst.t] {
            Some(d) => d <= inst.lambda,
            None => false,
        }
    };
    // distinct values only; duplicates share the decision outcome
    let mut distinct: Vec<usize> = Vec::new();
    let mut last: Option<SqDist> = None;
    for (idx, c) in cands.iter().enumerate() {
        if last != Some(c.sq) {
            distinct.push(idx);
            last = Some(c.sq);
        }
    }
    debug_assert!(
        reaches(&cands[*distinct.last().unwrap()]),
        "t must be reachable in the complete graph with lambda >= 1"
    );
    let mut lo = 0usize; // exclusive count of known-false prefix
    let mut hi = distinct.len() - 1;
    if reaches(&cands[distinct[0]]) {
        return cands[distinct[0]];
    }
    // invariant: distinct[lo] false, distinct[hi] true
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if reaches(&cands[distinct[mid]]) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    cands[distinct[hi]]
}

/// Exact number of candidate values (unordered pairs, with multiplicity)
/// lying inside `(lo, hi]`.
pub fn count_candidates_in(inst: &Instance, iv: &Interval) -> u64 {
    let n = inst.n();
    let mut count = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            if iv.contains_sq(inst.sq_dist(i, j)) {
                count += 1;
            }
        }
    }
    count
}

/// Buckets points on a uniform grid of the given cell side; used by tests
/// that need an independent occupancy count.
pub fn bucket_counts(points: &[Point], side: f64) -> HashMap<(i64, i64), usize> {
    let mut map = HashMap::new();
    for p in points {
        let key = (
            (p.x / side).floor() as i64,
            (p.y / side).floor() as i64,
        );
        *map.entry(key).or_insert(0) += 1;
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line3() -> Instance {
        generate(GenKind::Line, 3, 0).unwrap()
    }

    #[test]
    fn line_generator_matches_definition() {
        let inst = line3();
        assert_eq!(
            inst.points,
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(2.0, 0.0)
            ]
        );
        assert_eq!((inst.s, inst.t), (0, 2));
    }

    #[test]
    fn generators_are_deterministic() {
        for kind in GenKind::ALL {
            let a = generate(kind, 50, 7).unwrap();
            let b = generate(kind, 50, 7).unwrap();
            assert_eq!(a, b, "kind {:?} not reproducible", kind);
        }
    }

    #[test]
    fn generator_rejects_tiny_n() {
        assert!(matches!(
            generate(GenKind::Uniform, 1, 0),
            Err(Error::InvalidInstance(_))
        ));
    }

    #[test]
    fn generator_coordinates_within_lattice_bound() {
        for kind in GenKind::ALL {
            let inst = generate(kind, 300, 11).unwrap();
            for p in &inst.points {
                assert!(p.x.abs() <= COORD_BOUND as f64);
                assert!(p.y.abs() <= COORD_BOUND as f64);
                assert_eq!(p.x, p.x.trunc());
                assert_eq!(p.y, p.y.trunc());
            }
        }
    }

    #[test]
    fn bfs_levels_on_unit_chain() {
        let inst = line3();
        assert_eq!(
            bfs_exact(&inst, SqDist::new(1.0)),
            vec![Some(0), Some(1), Some(2)]
        );
        assert_eq!(
            bfs_exact(&inst, SqDist::new(0.9)),
            vec![Some(0), None, None]
        );
    }

    #[test]
    fn rstar_on_line3() {
        let inst = line3().with_lambda(2);
        assert_eq!(rstar_exact(&inst).sq, SqDist::new(1.0));
        let inst = line3().with_lambda(1);
        let c = rstar_exact(&inst);
        assert_eq!(c.sq, SqDist::new(4.0));
        assert_eq!(c.witness, (0, 2));
    }

    #[test]
    fn rstar_degenerate_source_equals_target() {
        let mut inst = line3();
        inst.t = inst.s;
        inst.lambda = 0;
        let c = rstar_exact(&inst);
        assert_eq!(c.sq, SqDist::ZERO);
        assert_eq!(c.witness, (0, 0));
    }

    #[test]
    fn candidate_count_on_line3() {
        let inst = line3();
        let iv = Interval::new(
            Bound::Value(CandidateValue::new(SqDist::new(0.25), (0, 0))),
            Bound::Value(CandidateValue::new(SqDist::new(1.0), (0, 1))),
            false,
            false,
        );
        assert_eq!(count_candidates_in(&inst, &iv), 2);
        assert_eq!(
            count_candidates_in(&inst, &Interval::full()),
            3 // C(3,2)
        );
    }

    #[test]
    fn bfs_is_monotone_in_radius() {
        let inst = generate(GenKind::Uniform, 40, 3).unwrap();
        let cands = sorted_candidates(&inst);
        let small = bfs_exact(&inst, cands[cands.len() / 4].sq);
        let large = bfs_exact(&inst, cands[3 * cands.len() / 4].sq);
        for (a, b) in small.iter().zip(large.iter()) {
            match (a, b) {
                (Some(da), Some(db)) => assert!(db <= da),
                (Some(_), None) => panic!("reachability lost at larger radius"),
                _ => {}
            }
        }
    }

    #[test]
    fn rstar_is_threshold_candidate() {
        for seed in 0..10u64 {
            let inst = generate(GenKind::Uniform, 24, seed).unwrap().with_lambda(3);
            let c = rstar_exact(&inst);
            let cands = sorted_candidates(&inst);
            assert!(cands.iter().any(|x| x.sq == c.sq));
            assert!(matches!(bfs_exact(&inst, c.sq)[inst.t], Some(d) if d <= inst.lambda));
            // next-smaller distinct candidate fails
            if let Some(prev) = cands.iter().rev().find(|x| x.sq < c.sq) {
                let reach = bfs_exact(&inst, prev.sq)[inst.t];
                assert!(!matches!(reach, Some(d) if d <= inst.lambda));
            }
        }
    }

    #[test]
    fn instance_json_round_trip() {
        let inst = generate(GenKind::Uniform, 20, 5).unwrap();
        let text = inst.to_json();
        assert!(text.starts_with("{\"points\":[["));
        let back = Instance::from_json(&text).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn instance_json_schema_fields() {
        let inst = Instance::new(
            vec![Point::new(0.0, 0.0), Point::new(3.0, 4.0)],
            0,
            1,
            1,
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&inst.to_json()).unwrap();
        assert_eq!(v["points"][1][1], 4.0);
        assert_eq!(v["s"], 0);
        assert_eq!(v["t"], 1);
        assert_eq!(v["lambda"], 1);
    }
}
