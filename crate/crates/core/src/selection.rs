//! Distance selection over point-set cross products, and exact selection
//! over a union of implicitly given collections.
//!
//! The default selection backend is brute force behind a pair budget; the
//! trait boundary lets a sub-quadratic oracle slot in later without touching
//! callers. Union selection narrows per-collection rank windows by probing
//! window medians and discarding by global rank, which costs
//! O(#collections * log^2) probes.

use crate::error::{Error, Result};
use crate::geom::{sq_dist, Point, SqDist};
use crate::model::{Bound, CandidateValue, Interval};
use std::sync::OnceLock;

/// Default cap on |A|*|B| for brute-force materialization.
pub const DEFAULT_SELECTION_BUDGET: usize = 100_000_000;

/// Probe counters for selection traffic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SelectionStats {
    pub select_probes: u64,
    pub rank_probes: u64,
}

impl SelectionStats {
    pub fn total(&self) -> u64 {
        self.select_probes + self.rank_probes
    }

    pub fn add(&mut self, other: &SelectionStats) {
        self.select_probes += other.select_probes;
        self.rank_probes += other.rank_probes;
    }
}

/// A multiset of candidate values supporting selection by rank and ranking
/// by value. `select` and `rank` must be mutually consistent:
/// `rank(select(k)) >= k` and `select(rank(v)) <= v` whenever defined.
pub trait SelectableCollection {
    fn len(&self) -> usize;
    /// The k-th smallest value, 1-indexed, duplicates counted.
    fn select(&self, k: usize) -> Result<CandidateValue>;
    /// Number of values `<= v`.
    fn rank(&self, v: SqDist) -> Result<usize>;
}

/// A fully materialized, sorted multiset.
#[derive(Clone, Debug)]
pub struct SortedValues {
    vals: Vec<CandidateValue>,
}

impl SortedValues {
    pub fn new(mut vals: Vec<CandidateValue>) -> SortedValues {
        // nonnegative floats order by their bit patterns; ties keep a
        // deterministic (input-dependent) order, and witnesses of equal
        // values are interchangeable
        vals.sort_unstable_by_key(|c| c.sq.get().to_bits());
        SortedValues { vals }
    }

    pub fn values(&self) -> &[CandidateValue] {
        &self.vals
    }
}

impl SelectableCollection for SortedValues {
    fn len(&self) -> usize {
        self.vals.len()
    }

    fn select(&self, k: usize) -> Result<CandidateValue> {
        if k == 0 || k > self.vals.len() {
            return Err(Error::RankOutOfRange { k, size: self.vals.len() });
        }
        Ok(self.vals[k - 1])
    }

    fn rank(&self, v: SqDist) -> Result<usize> {
        Ok(self.vals.partition_point(|c| c.sq <= v))
    }
}

/// The cross product `delta(A, B)` of two point lists, with witnesses carrying
/// the original point indices. Materializes lazily on first probe, guarded by
/// the pair budget.
pub struct CrossProduct {
    a: Vec<(Point, u32)>,
    b: Vec<(Point, u32)>,
    budget: usize,
    cache: OnceLock<SortedValues>,
}

impl CrossProduct {
    pub fn new(a: Vec<(Point, u32)>, b: Vec<(Point, u32)>, budget: usize) -> CrossProduct {
        CrossProduct { a, b, budget, cache: OnceLock::new() }
    }

    fn materialized(&self) -> Result<&SortedValues> {
        let required = self.a.len() * self.b.len();
        if required > self.budget {
            return Err(Error::BudgetExceeded { required, budget: self.budget });
        }
        Ok(self.cache.get_or_init(|| {
            let mut vals = Vec::with_capacity(required);
            for &(pa, ia) in &self.a {
                for &(pb, ib) in &self.b {
                    vals.push(CandidateValue::new(sq_dist(pa, pb), (ia, ib)));
                }
            }
            SortedValues::new(vals)
        }))
    }
}

impl SelectableCollection for CrossProduct {
    fn len(&self) -> usize {
        self.a.len() * self.b.len()
    }

    fn select(&self, k: usize) -> Result<CandidateValue> {
        if k == 0 || k > self.len() {
            return Err(Error::RankOutOfRange { k, size: self.len() });
        }
        self.materialized()?.select(k)
    }

    fn rank(&self, v: SqDist) -> Result<usize> {
        self.materialized()?.rank(v)
    }
}

/// The k-th smallest of `{delta^2(a, b) : a in A, b in B}`, duplicates counted
/// with multiplicity. Witnesses are positional indices into `a` and `b`.
pub fn select_bruteforce(a: &[Point], b: &[Point], k: usize, budget: usize) -> Result<CandidateValue> {
    let required = a.len() * b.len();
    if k == 0 || k > required {
        return Err(Error::RankOutOfRange { k, size: required });
    }
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let mut vals = Vec::with_capacity(required);
    for (ia, &pa) in a.iter().enumerate() {
        for (ib, &pb) in b.iter().enumerate() {
            vals.push(CandidateValue::new(sq_dist(pa, pb), (ia as u32, ib as u32)));
        }
    }
    vals.select_nth_unstable_by_key(k - 1, |c| c.sq.get().to_bits());
    Ok(vals[k - 1])
}

// ---------------------------------------------------------------------------
// Union selection
// ---------------------------------------------------------------------------

// Below this many surviving values the remainder is gathered and sorted
// directly instead of narrowing further.
const GATHER_THRESHOLD: usize = 256;

/// Exact k-th smallest of the disjoint union of the collections.
pub fn union_select(
    cols: &[&dyn SelectableCollection],
    k: usize,
    stats: &mut SelectionStats,
) -> Result<CandidateValue> {
    let total: usize = cols.iter().map(|c| c.len()).sum();
    if k == 0 || k > total {
        return Err(Error::RankOutOfRange { k, size: total });
    }
    if cols.len() == 1 {
        stats.select_probes += 1;
        return cols[0].select(k);
    }

    // Per-collection surviving rank windows (rlo, rhi]: ranks <= rlo hold
    // values <= vlo, ranks > rhi hold values > vhi. Invariant:
    // rank_global(vlo) < k <= rank_global(vhi).
    let mut rlo: Vec<usize> = vec![0; cols.len()];
    let mut rhi: Vec<usize> = cols.iter().map(|c| c.len()).collect();
    let mut below = 0usize; // rank_global(vlo)
    let mut vhi: Option<SqDist> = None;

    loop {
        let active: usize = rlo.iter().zip(&rhi).map(|(l, h)| h - l).sum();
        if active <= GATHER_THRESHOLD {
            let mut rest: Vec<CandidateValue> = Vec::with_capacity(active);
            for (i, col) in cols.iter().enumerate() {
                for r in (rlo[i] + 1)..=rhi[i] {
                    stats.select_probes += 1;
                    rest.push(col.select(r)?);
                }
            }
            rest.sort_unstable_by_key(|c| c.sq.get().to_bits());
            return Ok(rest[k - below - 1]);
        }

        // window medians, weighted by window size
        let mut medians: Vec<(SqDist, usize)> = Vec::new();
        for (i, col) in cols.iter().enumerate() {
            let w = rhi[i] - rlo[i];
            if w == 0 {
                continue;
            }
            stats.select_probes += 1;
            let m = col.select(rlo[i] + w.div_ceil(2))?;
            medians.push((m.sq, w));
        }
        medians.sort_unstable_by_key(|&(v, _)| v);
        let half: usize = medians.iter().map(|&(_, w)| w).sum::<usize>() / 2;
        let mut acc = 0usize;
        let mut pivot = medians[0].0;
        for &(v, w) in &medians {
            acc += w;
            pivot = v;
            if acc > half {
                break;
            }
        }
        // a pivot equal to vhi cannot shrink the window; fall back to the
        // smallest surviving value, which either differs or proves all
        // survivors are equal
        if Some(pivot) == vhi {
            let mut smallest: Option<SqDist> = None;
            for (i, col) in cols.iter().enumerate() {
                if rhi[i] > rlo[i] {
                    stats.select_probes += 1;
                    let v = col.select(rlo[i] + 1)?.sq;
                    smallest = Some(match smallest {
                        Some(s) if s <= v => s,
                        _ => v,
                    });
                }
            }
            let smallest = smallest.expect("active window is nonempty");
            if Some(smallest) == vhi {
                // every surviving value equals vhi
                for (i, col) in cols.iter().enumerate() {
                    if rhi[i] > rlo[i] {
                        stats.select_probes += 1;
                        return col.select(rlo[i] + 1);
                    }
                }
                unreachable!("nonempty active window");
            }
            pivot = smallest;
        }

        let mut ranks = Vec::with_capacity(cols.len());
        let mut global = 0usize;
        for col in cols {
            stats.rank_probes += 1;
            let r = col.rank(pivot)?;
            ranks.push(r);
            global += r;
        }
        if global >= k {
            vhi = Some(pivot);
            for i in 0..cols.len() {
                rhi[i] = rhi[i].min(ranks[i]);
            }
        } else {
            below = global;
            for i in 0..cols.len() {
                rlo[i] = rlo[i].max(ranks[i]);
            }
        }
    }
}

/// Locates `r*` relative to the union: returns `(lo, hi]` where `hi` is the
/// smallest union value with `decide(hi) = true` (AboveAll if none) and `lo`
/// the largest with `decide(lo) = false` (BelowAll if none). Costs
/// O(log total) decision calls, each preceded by union-selection probes.
pub fn union_successor(
    cols: &[&dyn SelectableCollection],
    decide: &mut dyn FnMut(SqDist) -> bool,
    stats: &mut SelectionStats,
) -> Result<Interval> {
    let total: usize = cols.iter().map(|c| c.len()).sum();
    if total == 0 {
        return Err(Error::RankOutOfRange { k: 1, size: 0 });
    }
    // ranks <= lo decide false, ranks >= hi decide true
    let mut lo = 0usize;
    let mut hi = total + 1;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let v = union_select(cols, mid, stats)?;
        if decide(v.sq) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lo_bound = if lo == 0 {
        (Bound::BelowAll, false)
    } else {
        (Bound::Value(union_select(cols, lo, stats)?), true)
    };
    let hi_bound = if hi > total {
        (Bound::AboveAll, false)
    } else {
        (Bound::Value(union_select(cols, hi, stats)?), true)
    };
    Ok(Interval::new(lo_bound.0, hi_bound.0, lo_bound.1, hi_bound.1))
}
