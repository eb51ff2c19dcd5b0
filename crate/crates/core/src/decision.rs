//! The grid-based BFS decision procedure: "does G_r(P) contain an s-t path
//! with at most lambda edges?" with inclusive (`<= r`) and strict (`< r`)
//! edge rules, plus the counted decision-oracle pair built on it.
//!
//! Frontier expansion solves the cell-pair subproblem ("which blue points
//! have a red point within r?") by exact nearest-neighbor queries over the
//! red side. Neighbor enumeration uses a full Chebyshev block without
//! testing cell gaps against r; superset enumeration is harmless because
//! edges are always verified by explicit point-pair comparisons.

use crate::error::{Error, Result};
use crate::geom::{KdTree, Point, SqDist};
use crate::model::Instance;
use std::sync::atomic::{AtomicU64, Ordering};

/// Default relative slack by which grid sides are shrunk, keeping the cell
/// diameter at or below the radius under rounding. With lattice coordinates
/// this slack can never flip a comparison outcome.
pub const DEFAULT_GRID_SHRINK: f64 = 1.0 / (1u64 << 32) as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeRule {
    /// Edge iff squared distance <= threshold.
    Inclusive,
    /// Edge iff squared distance < threshold.
    Strict,
}

impl EdgeRule {
    fn strict(self) -> bool {
        matches!(self, EdgeRule::Strict)
    }
}

/// A uniform grid over the points: cell side `radius/sqrt(2) * (1 - shrink)`,
/// occupied buckets keyed by floor coordinates relative to the bounding-box
/// corner, and a fixed neighbor-offset block covering every cell that can
/// hold a point within `radius`.
#[derive(Clone, Debug)]
pub struct GridIndex {
    pub side: f64,
    /// The radius this grid was built to serve.
    pub radius: f64,
    /// Chebyshev reach of the neighbor block (2 for 5x5, 3 for 7x7).
    pub chebyshev: i64,
    pub neighbor_offsets: Vec<(i64, i64)>,
    origin: (f64, f64),
    cells: Vec<((i64, i64), Vec<u32>)>,
    point_cell: Vec<u32>,
}

impl GridIndex {
    /// Builds a grid at the given radius. `chebyshev` must be at least
    /// `ceil(radius / side)` for the neighbor block to cover the radius;
    /// callers pick 2 for side `r/sqrt(2)` and 3 for the dyadic side
    /// `r/(2*sqrt(2))` and below.
    pub fn build(
        points: &[Point],
        radius: f64,
        shrink: f64,
        chebyshev: i64,
    ) -> Result<GridIndex> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidRadius(format!("radius {radius} not positive")));
        }
        let side = radius / std::f64::consts::SQRT_2 * (1.0 - shrink);
        if !(side > 0.0) {
            return Err(Error::InvalidRadius(format!("side underflow at radius {radius}")));
        }
        let mut min_x = f64::INFINITY;
        let mut min_y = f64::INFINITY;
        let mut span = 0.0f64;
        for p in points {
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
        }
        let origin = if min_x.is_finite() { (min_x, min_y) } else { (0.0, 0.0) };
        for p in points {
            span = span.max(p.x - origin.0).max(p.y - origin.1);
        }
        if span / side >= 9.0e17 {
            return Err(Error::InvalidRadius(format!(
                "radius {radius} too small for coordinate span {span}"
            )));
        }
        debug_assert!(chebyshev as f64 >= radius / side);

        let mut keyed: Vec<((i64, i64), u32)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (Self::key_for(*p, origin, side), i as u32))
            .collect();
        keyed.sort_unstable();
        let mut cells: Vec<((i64, i64), Vec<u32>)> = Vec::new();
        for (key, idx) in keyed {
            match cells.last_mut() {
                Some((k, pts)) if *k == key => pts.push(idx),
                _ => cells.push((key, vec![idx])),
            }
        }
        let mut point_cell = vec![0u32; points.len()];
        for (ci, (_, pts)) in cells.iter().enumerate() {
            for &p in pts {
                point_cell[p as usize] = ci as u32;
            }
        }
        let mut neighbor_offsets = Vec::new();
        for dx in -chebyshev..=chebyshev {
            for dy in -chebyshev..=chebyshev {
                if (dx, dy) != (0, 0) {
                    neighbor_offsets.push((dx, dy));
                }
            }
        }
        Ok(GridIndex {
            side,
            radius,
            chebyshev,
            neighbor_offsets,
            origin,
            cells,
            point_cell,
        })
    }

    fn key_for(p: Point, origin: (f64, f64), side: f64) -> (i64, i64) {
        (
            ((p.x - origin.0) / side).floor() as i64,
            ((p.y - origin.1) / side).floor() as i64,
        )
    }

    pub fn key_of(&self, p: Point) -> (i64, i64) {
        Self::key_for(p, self.origin, self.side)
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_key(&self, ci: usize) -> (i64, i64) {
        self.cells[ci].0
    }

    pub fn cell_points(&self, ci: usize) -> &[u32] {
        &self.cells[ci].1
    }

    pub fn cell_index(&self, key: (i64, i64)) -> Option<usize> {
        self.cells.binary_search_by_key(&key, |(k, _)| *k).ok()
    }

    pub fn cell_of_point(&self, p: usize) -> usize {
        self.point_cell[p] as usize
    }

    /// Occupied neighbor cells of `ci`, in fixed offset order.
    pub fn neighbors_of(&self, ci: usize) -> impl Iterator<Item = usize> + '_ {
        let (kx, ky) = self.cells[ci].0;
        self.neighbor_offsets
            .iter()
            .filter_map(move |&(dx, dy)| self.cell_index((kx + dx, ky + dy)))
    }
}

/// Builds the decision grid for `radius`: side `radius/sqrt(2)` shrunk by the
/// given slack, 5x5 neighbor block.
pub fn build_grid(points: &[Point], radius: f64, shrink: f64) -> Result<GridIndex> {
    GridIndex::build(points, radius, shrink, 2)
}

// ---------------------------------------------------------------------------
// Decision BFS
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Default)]
pub struct BfsStats {
    pub max_cell_expansions: u32,
}

/// Runs the grid BFS and answers whether `d_r(s, t) <= lambda` under the edge
/// rule; also returns the BFS levels truncated at `lambda` (None beyond).
pub fn decide_bfs(inst: &Instance, sq_r: SqDist, rule: EdgeRule) -> (bool, Vec<Option<u32>>) {
    let (ok, levels, _) = bfs_run(inst, sq_r, rule, false);
    (ok, levels)
}

/// Like [`decide_bfs`] but exposes instrumentation counters.
pub fn decide_bfs_stats(
    inst: &Instance,
    sq_r: SqDist,
    rule: EdgeRule,
) -> (bool, Vec<Option<u32>>, BfsStats) {
    bfs_run(inst, sq_r, rule, false)
}

/// Boolean-only variant that stops as soon as `t` is reached.
pub fn decide_only(inst: &Instance, sq_r: SqDist, rule: EdgeRule) -> bool {
    bfs_run(inst, sq_r, rule, true).0
}

fn bfs_run(
    inst: &Instance,
    sq_r: SqDist,
    rule: EdgeRule,
    early_exit: bool,
) -> (bool, Vec<Option<u32>>, BfsStats) {
    debug_assert!(sq_r >= SqDist::ZERO);
    if sq_r == SqDist::ZERO {
        return bfs_zero_radius(inst, rule);
    }
    let grid = match build_grid(&inst.points, sq_r.radius(), DEFAULT_GRID_SHRINK) {
        Ok(g) => g,
        // degenerate radius relative to the coordinate span; exact fallback
        Err(_) => return bfs_direct(inst, sq_r, rule),
    };

    let n = inst.n();
    let pts = &inst.points;
    let strict = rule.strict();
    let mut levels: Vec<Option<u32>> = vec![None; n];
    levels[inst.s] = Some(0);
    let mut frontier: Vec<u32> = vec![inst.s as u32];
    let mut expansions: Vec<u8> = vec![0; grid.cell_count()];
    // unvisited points per cell; exhausted cells are skipped outright
    let mut remaining: Vec<u32> = (0..grid.cell_count())
        .map(|ci| grid.cell_points(ci).len() as u32)
        .collect();
    remaining[grid.cell_of_point(inst.s)] -= 1;
    let mut stats = BfsStats::default();
    let mut level = 0u32;

    while !frontier.is_empty() && level < inst.lambda {
        frontier.sort_unstable_by_key(|&p| (grid.cell_of_point(p as usize), p));
        let mut next: Vec<u32> = Vec::new();
        let mut g = 0usize;
        while g < frontier.len() {
            let ci = grid.cell_of_point(frontier[g] as usize);
            let mut h = g;
            while h < frontier.len() && grid.cell_of_point(frontier[h] as usize) == ci {
                h += 1;
            }
            let reds = &frontier[g..h];
            g = h;

            expansions[ci] = expansions[ci].saturating_add(1);
            stats.max_cell_expansions = stats.max_cell_expansions.max(expansions[ci] as u32);

            // points sharing the cell are within the cell diameter < r
            if remaining[ci] > 0 {
                for &q in grid.cell_points(ci) {
                    if levels[q as usize].is_none() {
                        levels[q as usize] = Some(level + 1);
                        next.push(q);
                        remaining[ci] -= 1;
                    }
                }
            }

            let items: Vec<(Point, u32)> =
                reds.iter().map(|&r| (pts[r as usize], r)).collect();
            let kd = KdTree::build(&items);
            let (kx, ky) = grid.cell_key(ci);
            for &(dx, dy) in &grid.neighbor_offsets {
                let Some(cj) = grid.cell_index((kx + dx, ky + dy)) else {
                    continue;
                };
                if remaining[cj] == 0 {
                    continue;
                }
                for &b in grid.cell_points(cj) {
                    if levels[b as usize].is_none()
                        && kd.within(pts[b as usize], sq_r, strict)
                    {
                        levels[b as usize] = Some(level + 1);
                        next.push(b);
                        remaining[cj] -= 1;
                    }
                }
            }
        }
        level += 1;
        frontier = next;
        if early_exit && levels[inst.t].is_some() {
            return (true, levels, stats);
        }
    }
    (levels[inst.t].is_some(), levels, stats)
}

/// Radius 0: inclusive keeps only coincident-pair edges, strict keeps none.
fn bfs_zero_radius(inst: &Instance, rule: EdgeRule) -> (bool, Vec<Option<u32>>, BfsStats) {
    let n = inst.n();
    let mut levels: Vec<Option<u32>> = vec![None; n];
    levels[inst.s] = Some(0);
    if rule == EdgeRule::Inclusive && inst.lambda >= 1 {
        let sp = inst.points[inst.s];
        for (i, p) in inst.points.iter().enumerate() {
            if i != inst.s && p.x == sp.x && p.y == sp.y {
                levels[i] = Some(1);
            }
        }
    }
    (levels[inst.t].is_some(), levels, BfsStats::default())
}

/// Exact O(n^2) fallback for radii the grid cannot index.
fn bfs_direct(inst: &Instance, sq_r: SqDist, rule: EdgeRule) -> (bool, Vec<Option<u32>>, BfsStats) {
    let n = inst.n();
    let strict = rule.strict();
    let mut levels: Vec<Option<u32>> = vec![None; n];
    levels[inst.s] = Some(0);
    let mut frontier = vec![inst.s];
    let mut level = 0u32;
    while !frontier.is_empty() && level < inst.lambda {
        let mut next = Vec::new();
        for &u in &frontier {
            for v in 0..n {
                if levels[v].is_none() {
                    let d = inst.sq_dist(u, v);
                    if (strict && d < sq_r) || (!strict && d <= sq_r) {
                        levels[v] = Some(level + 1);
                        next.push(v);
                    }
                }
            }
        }
        level += 1;
        frontier = next;
    }
    (levels[inst.t].is_some(), levels, BfsStats::default())
}

// ---------------------------------------------------------------------------
// Decision oracle pair
// ---------------------------------------------------------------------------

/// The monotone decision pair: `decide(c)` answers "r* <= c" and
/// `decide_strict(c)` answers "r* < c", with call counters. The two together
/// disambiguate equality: `decide(c) && !decide_strict(c)` iff `c = r*`.
///
/// Calls are pure; counters are atomic so concurrent probing is safe.
pub struct DecisionPair<'a> {
    backend: Backend<'a>,
    decide_count: AtomicU64,
    strict_count: AtomicU64,
}

enum Backend<'a> {
    Bfs(&'a Instance),
    Known { rstar_sq: SqDist },
}

impl<'a> DecisionPair<'a> {
    /// The real oracle: each call runs the grid BFS decision procedure.
    pub fn bfs(inst: &'a Instance) -> DecisionPair<'a> {
        DecisionPair {
            backend: Backend::Bfs(inst),
            decide_count: AtomicU64::new(0),
            strict_count: AtomicU64::new(0),
        }
    }

    /// A ground-truth oracle for tests, backed by a known `r*`.
    pub fn known(rstar_sq: SqDist) -> DecisionPair<'static> {
        DecisionPair {
            backend: Backend::Known { rstar_sq },
            decide_count: AtomicU64::new(0),
            strict_count: AtomicU64::new(0),
        }
    }

    /// Is `r* <= c`?
    pub fn decide(&self, c: SqDist) -> bool {
        self.decide_count.fetch_add(1, Ordering::Relaxed);
        match &self.backend {
            Backend::Bfs(inst) => decide_only(inst, c, EdgeRule::Inclusive),
            Backend::Known { rstar_sq } => *rstar_sq <= c,
        }
    }

    /// Is `r* < c`?
    pub fn decide_strict(&self, c: SqDist) -> bool {
        self.strict_count.fetch_add(1, Ordering::Relaxed);
        match &self.backend {
            Backend::Bfs(inst) => decide_only(inst, c, EdgeRule::Strict),
            Backend::Known { rstar_sq } => *rstar_sq < c,
        }
    }

    pub fn decide_calls(&self) -> u64 {
        self.decide_count.load(Ordering::Relaxed)
    }

    pub fn strict_calls(&self) -> u64 {
        self.strict_count.load(Ordering::Relaxed)
    }

    pub fn total_calls(&self) -> u64 {
        self.decide_calls() + self.strict_calls()
    }
}
