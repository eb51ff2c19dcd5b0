//! A pausable, forkable BFS over the grid whose only access to the unknown
//! threshold `r*` is through yes/no comparisons "is c <= r*?".
//!
//! The machine runs the same control flow as the decision BFS, but the grid
//! is fixed externally and every threshold test is emitted as a comparison
//! instead of being evaluated. Between comparisons the state is an ordinary
//! value, so a branch can be cloned cheaply and resumed with either answer —
//! exactly what the bifurcation engine needs.
//!
//! Two topologies share the machinery:
//!
//! * plain — vertices are the points; simulates the decision algorithm;
//! * contracted — each heavy cell collapses to one vertex; light-pair edges
//!   and light/heavy boundary edges go through comparisons, heavy/heavy
//!   edges are looked up in a pre-resolved special-distance table.

use crate::decision::GridIndex;
use crate::geom::{sq_dist, KdTree, Point, SqDist};
use crate::model::{CandidateValue, Instance};
use std::collections::HashMap;
use std::sync::Arc;

/// What an instrumented run reports when asked to continue.
#[derive(Clone, Debug, PartialEq)]
pub enum SimStatus {
    /// Paused on "is this value <= r*?"; resume with `advance(Some(answer))`.
    NeedCompare(CandidateValue),
    Done,
}

/// A computation the bifurcation engine can simulate: resumable, clonable,
/// and restricted to comparison-only access to the unknown threshold.
pub trait BifurcatingRun: Clone {
    fn advance(&mut self, answer: Option<bool>) -> SimStatus;
    /// Work units consumed so far (assignments, probes, comparisons).
    fn steps(&self) -> u64;
    /// Ordered (comparison value, answer) history of this branch.
    fn transcript(&self) -> &[(CandidateValue, bool)];
    /// Checks that a comparison the run emitted is legitimate for its
    /// family of critical values.
    fn validate_comparison(&self, c: &CandidateValue) -> std::result::Result<(), String>;
}

/// Answers "is c <= r*?" for direct (non-bifurcated) instrumented runs.
pub trait RstarResolver {
    fn le_rstar(&mut self, c: &CandidateValue) -> bool;
}

/// Ground-truth resolver backed by a known `r*`.
pub struct KnownRstar(pub SqDist);

impl RstarResolver for KnownRstar {
    fn le_rstar(&mut self, c: &CandidateValue) -> bool {
        c.sq <= self.0
    }
}

/// Resolver that asks the decision pair: `c <= r*` iff not `r* < c`.
pub struct DecisionResolver<'a>(pub &'a crate::decision::DecisionPair<'a>);

impl RstarResolver for DecisionResolver<'_> {
    fn le_rstar(&mut self, c: &CandidateValue) -> bool {
        !self.0.decide_strict(c.sq)
    }
}

// ---------------------------------------------------------------------------
// World: the immutable context a run executes in
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
enum Vert {
    Point(u32),
    HeavyCell(u32),
}

enum Topology {
    Plain,
    Contracted {
        heavy: Vec<bool>,
        verts: Vec<Vert>,
        vert_of_point: Vec<u32>,
        heavy_vert_of_cell: Vec<u32>, // u32::MAX when light
        heavy_kd: Vec<Option<Arc<KdTree>>>,
        /// Resolved "bichromatic closest pair <= r*" per ordered heavy
        /// neighbor cell pair.
        special_edge: HashMap<(u32, u32), bool>,
    },
}

/// Immutable context shared by all branches of one simulation.
pub struct BfsWorld<'a> {
    points: &'a [Point],
    grid: &'a GridIndex,
    s: usize,
    lambda_cap: Option<u32>,
    topo: Topology,
}

impl<'a> BfsWorld<'a> {
    /// The decision algorithm at the unknown threshold: plain BFS capped at
    /// `lambda` levels on a fixed grid.
    pub fn plain(inst: &'a Instance, grid: &'a GridIndex) -> BfsWorld<'a> {
        BfsWorld {
            points: &inst.points,
            grid,
            s: inst.s,
            lambda_cap: Some(inst.lambda),
            topo: Topology::Plain,
        }
    }

    /// The contracted graph: one vertex per heavy cell, no level cap (the
    /// run computes hop estimates for every vertex). `special_edge` must
    /// hold the resolved comparison for every ordered pair of neighboring
    /// heavy cells.
    pub fn contracted(
        inst: &'a Instance,
        grid: &'a GridIndex,
        heavy: Vec<bool>,
        special_edge: HashMap<(u32, u32), bool>,
    ) -> BfsWorld<'a> {
        assert_eq!(heavy.len(), grid.cell_count());
        let mut verts = Vec::new();
        let mut vert_of_point = vec![u32::MAX; inst.points.len()];
        let mut heavy_vert_of_cell = vec![u32::MAX; grid.cell_count()];
        let mut heavy_kd = vec![None; grid.cell_count()];
        for ci in 0..grid.cell_count() {
            if heavy[ci] {
                let v = verts.len() as u32;
                verts.push(Vert::HeavyCell(ci as u32));
                heavy_vert_of_cell[ci] = v;
                let items: Vec<(Point, u32)> = grid
                    .cell_points(ci)
                    .iter()
                    .map(|&p| (inst.points[p as usize], p))
                    .collect();
                heavy_kd[ci] = Some(Arc::new(KdTree::build(&items)));
                for &p in grid.cell_points(ci) {
                    vert_of_point[p as usize] = v;
                }
            } else {
                for &p in grid.cell_points(ci) {
                    let v = verts.len() as u32;
                    verts.push(Vert::Point(p));
                    vert_of_point[p as usize] = v;
                }
            }
        }
        BfsWorld {
            points: &inst.points,
            grid,
            s: inst.s,
            lambda_cap: None,
            topo: Topology::Contracted {
                heavy,
                verts,
                vert_of_point,
                heavy_vert_of_cell,
                heavy_kd,
                special_edge,
            },
        }
    }

    fn vert_count(&self) -> usize {
        match &self.topo {
            Topology::Plain => self.points.len(),
            Topology::Contracted { verts, .. } => verts.len(),
        }
    }

    fn vert_of_point(&self, p: usize) -> u32 {
        match &self.topo {
            Topology::Plain => p as u32,
            Topology::Contracted { vert_of_point, .. } => vert_of_point[p],
        }
    }

    fn cell_of_vert(&self, v: u32) -> usize {
        match &self.topo {
            Topology::Plain => self.grid.cell_of_point(v as usize),
            Topology::Contracted { verts, .. } => match verts[v as usize] {
                Vert::Point(p) => self.grid.cell_of_point(p as usize),
                Vert::HeavyCell(ci) => ci as usize,
            },
        }
    }

    fn cell_is_heavy(&self, ci: usize) -> bool {
        match &self.topo {
            Topology::Plain => false,
            Topology::Contracted { heavy, .. } => heavy[ci],
        }
    }
}

// ---------------------------------------------------------------------------
// The machine
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct Group {
    cell: usize,
    reds: Vec<u32>, // vertices of the frontier in this cell
}

#[derive(Clone, Debug)]
enum PendTarget {
    BluePoint(u32),
    HeavyVertex(u32),
}

#[derive(Clone, Debug)]
struct Pending {
    value: CandidateValue,
    target: PendTarget,
}

/// Resumable BFS state. Cloning a value forks the branch.
#[derive(Clone)]
pub struct InstrumentedBfs<'a> {
    world: &'a BfsWorld<'a>,
    levels: Vec<Option<u32>>,
    level: u32,
    groups: Vec<Group>,
    g_pos: usize,
    group_started: bool,
    red_kd: Option<Arc<KdTree>>,
    off_pos: usize,
    blue_cell: Option<usize>,
    blue_pos: usize,
    next: Vec<u32>,
    pending: Option<Pending>,
    transcript: Vec<(CandidateValue, bool)>,
    steps: u64,
    done: bool,
    expansions: Vec<u8>,
    pub max_cell_expansions: u32,
}

impl<'a> InstrumentedBfs<'a> {
    pub fn new(world: &'a BfsWorld<'a>) -> InstrumentedBfs<'a> {
        let mut levels = vec![None; world.vert_count()];
        let sv = world.vert_of_point(world.s);
        levels[sv as usize] = Some(0);
        let done = world.lambda_cap == Some(0);
        let groups = vec![Group {
            cell: world.cell_of_vert(sv),
            reds: vec![sv],
        }];
        InstrumentedBfs {
            world,
            levels,
            level: 0,
            groups,
            g_pos: 0,
            group_started: false,
            red_kd: None,
            off_pos: 0,
            blue_cell: None,
            blue_pos: 0,
            next: Vec::new(),
            pending: None,
            transcript: Vec::new(),
            steps: 0,
            done,
            expansions: vec![0; world.grid.cell_count()],
            max_cell_expansions: 0,
        }
    }

    /// Hop level per original point; points of a heavy cell inherit the
    /// contracted vertex's level.
    pub fn point_levels(&self) -> Vec<Option<u32>> {
        (0..self.world.points.len())
            .map(|p| self.levels[self.world.vert_of_point(p) as usize])
            .collect()
    }

    fn assign(&mut self, v: u32) {
        debug_assert!(self.levels[v as usize].is_none());
        self.levels[v as usize] = Some(self.level + 1);
        self.next.push(v);
        self.steps += 1;
    }

    fn build_groups(&self, frontier: &mut Vec<u32>) -> Vec<Group> {
        frontier.sort_unstable_by_key(|&v| (self.world.cell_of_vert(v), v));
        let mut groups: Vec<Group> = Vec::new();
        for &v in frontier.iter() {
            let cell = self.world.cell_of_vert(v);
            match groups.last_mut() {
                Some(g) if g.cell == cell => g.reds.push(v),
                _ => groups.push(Group { cell, reds: vec![v] }),
            }
        }
        groups
    }

    fn start_group(&mut self) {
        let cell = self.groups[self.g_pos].cell;
        self.expansions[cell] = self.expansions[cell].saturating_add(1);
        self.max_cell_expansions = self.max_cell_expansions.max(self.expansions[cell] as u32);

        // same-cell points join the next level without comparison: the cell
        // diameter is below the radius the grid serves
        if !self.world.cell_is_heavy(cell) {
            let pts: Vec<u32> = self.world.grid.cell_points(cell).to_vec();
            for q in pts {
                let v = self.world.vert_of_point(q as usize);
                if self.levels[v as usize].is_none() {
                    self.assign(v);
                }
            }
        }

        self.red_kd = Some(match &self.world.topo {
            Topology::Contracted { heavy, heavy_kd, .. } if heavy[cell] => {
                heavy_kd[cell].as_ref().expect("heavy cell has a tree").clone()
            }
            _ => {
                let items: Vec<(Point, u32)> = self.groups[self.g_pos]
                    .reds
                    .iter()
                    .map(|&v| {
                        let p = match &self.world.topo {
                            Topology::Plain => v,
                            Topology::Contracted { verts, .. } => match verts[v as usize] {
                                Vert::Point(p) => p,
                                Vert::HeavyCell(_) => unreachable!("light group holds points"),
                            },
                        };
                        (self.world.points[p as usize], p)
                    })
                    .collect();
                self.steps += items.len() as u64;
                Arc::new(KdTree::build(&items))
            }
        });
        self.group_started = true;
        self.off_pos = 0;
        self.blue_cell = None;
        self.blue_pos = 0;
    }

    /// Advances to the next comparison or to completion. The first call
    /// takes `None`; every resumption after `NeedCompare` takes the answer.
    pub fn advance(&mut self, answer: Option<bool>) -> SimStatus {
        if let Some(p) = self.pending.take() {
            let ans = answer.expect("paused comparison needs an answer");
            self.transcript.push((p.value, ans));
            match p.target {
                PendTarget::BluePoint(v) => {
                    if ans {
                        self.assign(v);
                    }
                    self.blue_pos += 1;
                }
                PendTarget::HeavyVertex(v) => {
                    if ans {
                        self.assign(v);
                    }
                    self.off_pos += 1;
                    self.blue_cell = None;
                    self.blue_pos = 0;
                }
            }
        } else {
            debug_assert!(answer.is_none(), "no comparison was pending");
        }

        loop {
            if self.done {
                return SimStatus::Done;
            }
            if self.g_pos >= self.groups.len() {
                // roll to the next BFS level
                self.level += 1;
                let capped = self.world.lambda_cap.is_some_and(|cap| self.level >= cap);
                if self.next.is_empty() || capped {
                    self.done = true;
                    return SimStatus::Done;
                }
                let mut frontier = std::mem::take(&mut self.next);
                self.groups = self.build_groups(&mut frontier);
                self.g_pos = 0;
                self.group_started = false;
                continue;
            }
            if !self.group_started {
                self.start_group();
            }
            let cell = self.groups[self.g_pos].cell;
            let offsets = &self.world.grid.neighbor_offsets;

            if self.off_pos >= offsets.len() {
                self.g_pos += 1;
                self.group_started = false;
                self.red_kd = None;
                continue;
            }

            // resolve the neighbor cell under the cursor
            let cj = match self.blue_cell {
                Some(cj) => cj,
                None => {
                    let (kx, ky) = self.world.grid.cell_key(cell);
                    let (dx, dy) = offsets[self.off_pos];
                    match self.world.grid.cell_index((kx + dx, ky + dy)) {
                        Some(cj) => cj,
                        None => {
                            self.off_pos += 1;
                            continue;
                        }
                    }
                }
            };

            if self.blue_cell.is_none() && self.world.cell_is_heavy(cj) {
                // neighbor is a contracted vertex
                let Topology::Contracted {
                    heavy,
                    heavy_vert_of_cell,
                    heavy_kd,
                    special_edge,
                    ..
                } = &self.world.topo
                else {
                    unreachable!("heavy cells only exist in contracted runs");
                };
                let hv = heavy_vert_of_cell[cj];
                if self.levels[hv as usize].is_some() {
                    self.off_pos += 1;
                    continue;
                }
                if heavy[cell] {
                    // heavy-heavy: pre-resolved special distance, no comparison
                    let edge = *special_edge
                        .get(&(cell as u32, cj as u32))
                        .expect("special distance resolved for every heavy neighbor pair");
                    self.steps += 1;
                    if edge {
                        self.assign(hv);
                    }
                    self.off_pos += 1;
                    continue;
                }
                // light frontier against a heavy cell: one comparison with
                // the bichromatic minimum, probing the heavy cell's tree
                let tree = heavy_kd[cj].as_ref().expect("heavy cell has a tree");
                let mut best: Option<(SqDist, u32, u32)> = None;
                for &rv in &self.groups[self.g_pos].reds {
                    let rp = match &self.world.topo {
                        Topology::Contracted { verts, .. } => match verts[rv as usize] {
                            Vert::Point(p) => p,
                            Vert::HeavyCell(_) => unreachable!(),
                        },
                        Topology::Plain => rv,
                    };
                    let (d, q) = tree
                        .nearest(self.world.points[rp as usize])
                        .expect("heavy cell is nonempty");
                    self.steps += 1;
                    if best.map_or(true, |(bd, _, _)| d < bd) {
                        best = Some((d, q, rp));
                    }
                }
                let (d, q, rp) = best.expect("frontier group is nonempty");
                let value = CandidateValue::new(d, (q, rp));
                self.pending = Some(Pending {
                    value,
                    target: PendTarget::HeavyVertex(hv),
                });
                return SimStatus::NeedCompare(value);
            }

            // per-point scan of a light (or plain-mode) neighbor cell
            self.blue_cell = Some(cj);
            let blues = self.world.grid.cell_points(cj);
            while self.blue_pos < blues.len() {
                let b = blues[self.blue_pos];
                let v = self.world.vert_of_point(b as usize);
                if self.levels[v as usize].is_some() {
                    self.blue_pos += 1;
                    continue;
                }
                let kd = self.red_kd.as_ref().expect("group started");
                let (d, red) = kd
                    .nearest(self.world.points[b as usize])
                    .expect("red set is nonempty");
                self.steps += 1;
                let value = CandidateValue::new(d, (b, red));
                self.pending = Some(Pending {
                    value,
                    target: PendTarget::BluePoint(v),
                });
                return SimStatus::NeedCompare(value);
            }
            self.blue_cell = None;
            self.blue_pos = 0;
            self.off_pos += 1;
        }
    }
}

impl BifurcatingRun for InstrumentedBfs<'_> {
    fn advance(&mut self, answer: Option<bool>) -> SimStatus {
        InstrumentedBfs::advance(self, answer)
    }

    fn steps(&self) -> u64 {
        self.steps
    }

    fn transcript(&self) -> &[(CandidateValue, bool)] {
        &self.transcript
    }

    fn validate_comparison(&self, c: &CandidateValue) -> std::result::Result<(), String> {
        let (i, j) = c.witness;
        let n = self.world.points.len();
        if i as usize >= n || j as usize >= n {
            return Err(format!("witness ({i}, {j}) out of range"));
        }
        let actual = sq_dist(self.world.points[i as usize], self.world.points[j as usize]);
        if actual != c.sq {
            return Err(format!(
                "value {} does not match witness distance {}",
                c.sq, actual
            ));
        }
        if let Topology::Contracted { heavy, .. } = &self.world.topo {
            let ci = self.world.grid.cell_of_point(i as usize);
            let cj = self.world.grid.cell_of_point(j as usize);
            if ci == cj {
                return Err("comparison within a single cell".into());
            }
            if heavy[ci] && heavy[cj] {
                return Err("comparison between two heavy cells".into());
            }
            let (ax, ay) = self.world.grid.cell_key(ci);
            let (bx, by) = self.world.grid.cell_key(cj);
            let cheb = (ax - bx).abs().max((ay - by).abs());
            if cheb > self.world.grid.chebyshev {
                return Err("witness cells are not neighbors".into());
            }
        }
        Ok(())
    }
}

/// Drives an instrumented run to completion with the given resolver,
/// validating every emitted comparison.
pub fn run_with_resolver<'a, R: RstarResolver>(
    mut run: InstrumentedBfs<'a>,
    resolver: &mut R,
) -> crate::error::Result<InstrumentedBfs<'a>> {
    let mut ans = None;
    loop {
        match run.advance(ans) {
            SimStatus::Done => return Ok(run),
            SimStatus::NeedCompare(c) => {
                run.validate_comparison(&c)
                    .map_err(crate::error::Error::ProtocolViolation)?;
                ans = Some(resolver.le_rstar(&c));
            }
        }
    }
}

/// The instrumented decision run at the unknown `r*`: same control flow as
/// the decision BFS, on an externally supplied grid, with every threshold
/// test delegated to the resolver. Returns the hop levels (capped at
/// `lambda`).
pub fn decide_bfs_instrumented<R: RstarResolver>(
    inst: &Instance,
    grid: &GridIndex,
    resolver: &mut R,
) -> crate::error::Result<Vec<Option<u32>>> {
    let world = BfsWorld::plain(inst, grid);
    let run = InstrumentedBfs::new(&world);
    Ok(run_with_resolver(run, resolver)?.point_levels())
}
