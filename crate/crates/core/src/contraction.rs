//! Heavy/light machinery: bracketing `r*` to a dyadic scale, classifying
//! cells by occupancy, bichromatic closest pairs between heavy neighbors,
//! and the contracted-graph BFS that yields banded hop estimates.

use crate::bifurcate::{bifurcate_simulate, default_batch, default_step_budget, BifStats};
use crate::decision::{DecisionPair, GridIndex};
use crate::error::{Error, Result};
use crate::geom::{KdTree, Point, SqDist};
use crate::machine::{BfsWorld, InstrumentedBfs};
use crate::model::{CandidateValue, Instance, Interval};
use std::collections::HashMap;

/// Heavy flags per occupied grid cell: heavy iff the cell holds at least
/// `delta` points. `h` is the heavy-cell count, at most `n / delta`.
#[derive(Clone, Debug)]
pub struct HeavyLightMap {
    pub delta: usize,
    pub heavy: Vec<bool>,
    pub h: usize,
}

/// Banded hop estimates: `d_rstar(s, p) - slack <= d_tilde[p] <= d_rstar(s, p)`
/// for every point, with unreachable kept as `None` on both sides.
#[derive(Clone, Debug)]
pub struct EstimateVector {
    pub d_tilde: Vec<Option<u32>>,
    pub slack: u32,
}

/// The exact bichromatic closest-pair distance between two neighboring heavy
/// cells.
#[derive(Clone, Copy, Debug)]
pub struct SpecialDistance {
    pub cells: (usize, usize),
    pub value: CandidateValue,
}

fn dyadic_sq(j: i32) -> SqDist {
    SqDist::new(2f64.powi(2 * j))
}

/// Pins the scale of `r*` by binary searching dyadic radii with the decision
/// oracle: returns the exponent `j*` with `2^(j*-1) < r* <= 2^j*` and a grid
/// of side `2^(j*-1)/sqrt(2)` with a 7x7 neighbor block. Requires `r* > 0`
/// (callers return 0 outright when `decide(0)` holds).
pub fn dyadic_bracket(inst: &Instance, decision: &DecisionPair) -> Result<(i32, GridIndex)> {
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for p in &inst.points {
        min_x = min_x.min(p.x);
        max_x = max_x.max(p.x);
        min_y = min_y.min(p.y);
        max_y = max_y.max(p.y);
    }
    let span = (max_x - min_x).max(max_y - min_y);
    // upper end: 2^j_hi at or above the diameter, so decide is true there
    // (the complete graph connects s and t in one hop)
    let reach = (max_x - min_x + (max_y - min_y)).max(f64::MIN_POSITIVE);
    let mut j_hi = (reach.log2().ceil() as i32).clamp(-500, 511);
    for _ in 0..4 {
        if decision.decide(dyadic_sq(j_hi)) {
            break;
        }
        j_hi += 2;
    }
    if !decision.decide(dyadic_sq(j_hi)) {
        return Err(Error::BracketFailure(format!(
            "decision stays false up to dyadic exponent {j_hi}"
        )));
    }
    // lower end: small enough that any positive r* sits above it, large
    // enough that the grid can still index the coordinate span
    let floor_guard = ((span / 8.0e17).max(f64::MIN_POSITIVE).log2().ceil() as i32 + 2).max(-537);
    let mut j_lo = floor_guard.min(j_hi - 1);
    if decision.decide(dyadic_sq(j_lo)) {
        return Err(Error::BracketFailure(format!(
            "r* at or below 2^{j_lo}, too small for the coordinate span"
        )));
    }
    while j_hi - j_lo > 1 {
        let mid = j_lo + (j_hi - j_lo) / 2;
        if decision.decide(dyadic_sq(mid)) {
            j_hi = mid;
        } else {
            j_lo = mid;
        }
    }
    let grid = GridIndex::build(&inst.points, 2f64.powi(j_hi - 1), 0.0, 3)?;
    Ok((j_hi, grid))
}

/// Flags each occupied cell heavy when it holds at least `delta` points.
pub fn classify_heavy(grid: &GridIndex, delta: usize) -> HeavyLightMap {
    let delta = delta.max(1);
    let heavy: Vec<bool> = (0..grid.cell_count())
        .map(|ci| grid.cell_points(ci).len() >= delta)
        .collect();
    let h = heavy.iter().filter(|&&b| b).count();
    HeavyLightMap { delta, heavy, h }
}

/// Exact bichromatic closest pairs for every unordered pair of neighboring
/// heavy cells, computed by querying one side's points against the other
/// side's tree.
pub fn special_distances(
    points: &[Point],
    grid: &GridIndex,
    hl: &HeavyLightMap,
) -> Vec<SpecialDistance> {
    let mut trees: Vec<Option<KdTree>> = vec![None; grid.cell_count()];
    let mut out = Vec::new();
    for a in 0..grid.cell_count() {
        if !hl.heavy[a] {
            continue;
        }
        for b in grid.neighbors_of(a) {
            if b <= a || !hl.heavy[b] {
                continue;
            }
            if trees[b].is_none() {
                // tree per heavy cell, reused across its neighbor pairs
                let items: Vec<(Point, u32)> = grid
                    .cell_points(b)
                    .iter()
                    .map(|&p| (points[p as usize], p))
                    .collect();
                trees[b] = Some(KdTree::build(&items));
            }
            let tree = trees[b].as_ref().unwrap();
            let mut best: Option<(SqDist, u32, u32)> = None;
            for &p in grid.cell_points(a) {
                let (d, q) = tree.nearest(points[p as usize]).unwrap();
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, p, q));
                }
            }
            let (d, p, q) = best.expect("heavy cells are nonempty");
            out.push(SpecialDistance {
                cells: (a, b),
                value: CandidateValue::new(d, (p, q)),
            });
        }
    }
    out
}

/// Resolves which special distances are at most `r*`, then runs the
/// contracted-graph BFS at the unknown `r*` under bifurcation and reads off
/// the hop estimates. The slack is `3h`: a cell spans at most three BFS
/// levels, so uncontracting a heavy cell costs at most three hops.
pub fn estimates_via_contraction(
    inst: &Instance,
    grid: &GridIndex,
    hl: &HeavyLightMap,
    specials: &[SpecialDistance],
    iv: &Interval,
    decision: &DecisionPair,
    l: usize,
) -> Result<(EstimateVector, BifStats)> {
    // sort the distinct special values and locate r* among them with the
    // strict oracle: value <= r* iff not (r* < value)
    let mut vals: Vec<SqDist> = specials.iter().map(|s| s.value.sq).collect();
    vals.sort_unstable();
    vals.dedup();
    // smallest special value strictly above r*, if any; everything below it
    // is an edge at r*
    let split: Option<SqDist> = {
        let mut lo = -1isize;
        let mut hi = vals.len() as isize;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if decision.decide_strict(vals[mid as usize]) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        vals.get(hi as usize).copied()
    };
    let edge_of = |v: SqDist| -> bool {
        match split {
            Some(sp) => v < sp,
            None => true,
        }
    };

    let mut special_edge: HashMap<(u32, u32), bool> = HashMap::new();
    for s in specials {
        let e = edge_of(s.value.sq);
        special_edge.insert((s.cells.0 as u32, s.cells.1 as u32), e);
        special_edge.insert((s.cells.1 as u32, s.cells.0 as u32), e);
    }

    let world = BfsWorld::contracted(inst, grid, hl.heavy.clone(), special_edge);
    let run = InstrumentedBfs::new(&world);
    let out = bifurcate_simulate(
        run,
        iv,
        decision,
        default_batch(l, inst.n()),
        default_step_budget(inst.n()),
    )?;
    let d_tilde = out.survivor.point_levels();
    Ok((
        EstimateVector {
            d_tilde,
            slack: 3 * hl.h as u32,
        },
        out.stats,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::sq_dist;
    use crate::model::{bfs_exact, generate, rstar_exact, GenKind};
    use crate::shrink::shrink_light;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn bracket_on_line3() {
        let inst = generate(GenKind::Line, 3, 0).unwrap().with_lambda(2);
        let decision = DecisionPair::bfs(&inst);
        let (j, grid) = dyadic_bracket(&inst, &decision).unwrap();
        assert_eq!(j, 0, "1/2 < r*=1 <= 1");
        assert!((grid.side - 0.5 / 2f64.sqrt()).abs() < 1e-15);
        let inst = generate(GenKind::Line, 3, 0).unwrap().with_lambda(1);
        let decision = DecisionPair::bfs(&inst);
        let (j, _) = dyadic_bracket(&inst, &decision).unwrap();
        assert_eq!(j, 1, "1 < r*=2 <= 2");
    }

    #[test]
    fn bracket_pins_rstar_scale_on_random_instances() {
        let mut rng = StdRng::seed_from_u64(14);
        for trial in 0..100 {
            let kind = GenKind::ALL[trial % 4];
            let n = rng.random_range(4..96);
            let inst = generate(kind, n, rng.random())
                .unwrap()
                .with_lambda(rng.random_range(1..=(n as u32)));
            let rstar = rstar_exact(&inst).sq.radius();
            if rstar == 0.0 {
                continue;
            }
            let decision = DecisionPair::bfs(&inst);
            let (j, grid) = dyadic_bracket(&inst, &decision).unwrap();
            assert!(
                2f64.powi(j - 1) < rstar && rstar <= 2f64.powi(j),
                "j={j} rstar={rstar}"
            );
            // cell diameter below r*, neighbor block covers r*
            assert!(grid.side * 2f64.sqrt() < rstar);
            assert!(grid.chebyshev as f64 * grid.side >= rstar);
        }
    }

    #[test]
    fn classify_degenerate_deltas() {
        let inst = generate(GenKind::Uniform, 100, 1).unwrap();
        let decision = DecisionPair::bfs(&inst);
        let (_, grid) = dyadic_bracket(&inst, &decision).unwrap();
        let all = classify_heavy(&grid, 1);
        assert_eq!(all.h, grid.cell_count(), "delta=1 makes every occupied cell heavy");
        let none = classify_heavy(&grid, inst.n() + 1);
        assert_eq!(none.h, 0);
    }

    #[test]
    fn classify_matches_bucket_recount() {
        let inst = generate(GenKind::Cluster, 2048, 9).unwrap();
        let decision = DecisionPair::bfs(&inst);
        let (_, grid) = dyadic_bracket(&inst, &decision).unwrap();
        let hl = classify_heavy(&grid, 64);
        let hand = (0..grid.cell_count())
            .filter(|&ci| grid.cell_points(ci).len() >= 64)
            .count();
        assert_eq!(hl.h, hand);
        assert!(hl.h <= inst.n() / 64, "h <= n / delta");
    }

    #[test]
    fn specials_empty_without_heavy_cells() {
        let inst = generate(GenKind::Uniform, 64, 3).unwrap();
        let decision = DecisionPair::bfs(&inst);
        let (_, grid) = dyadic_bracket(&inst, &decision).unwrap();
        let hl = classify_heavy(&grid, inst.n() + 1);
        assert!(special_distances(&inst.points, &grid, &hl).is_empty());
    }

    #[test]
    fn specials_match_brute_force_cross_scan() {
        let inst = generate(GenKind::Cluster, 1024, 5).unwrap().with_lambda(3);
        let decision = DecisionPair::bfs(&inst);
        let (_, grid) = dyadic_bracket(&inst, &decision).unwrap();
        // force several heavy cells
        let max_bucket = (0..grid.cell_count())
            .map(|ci| grid.cell_points(ci).len())
            .max()
            .unwrap();
        let hl = classify_heavy(&grid, (max_bucket / 2).max(2));
        let specials = special_distances(&inst.points, &grid, &hl);
        for s in &specials {
            let (a, b) = s.cells;
            assert!(hl.heavy[a] && hl.heavy[b]);
            let mut best = SqDist::INFINITE;
            for &p in grid.cell_points(a) {
                for &q in grid.cell_points(b) {
                    let d = sq_dist(inst.points[p as usize], inst.points[q as usize]);
                    if d < best {
                        best = d;
                    }
                }
            }
            assert_eq!(s.value.sq, best);
            let (i, j) = s.value.witness;
            assert_eq!(
                sq_dist(inst.points[i as usize], inst.points[j as usize]),
                s.value.sq
            );
        }
    }

    #[test]
    fn estimates_without_heavy_cells_are_exact() {
        let inst = generate(GenKind::Uniform, 128, 8).unwrap().with_lambda(4);
        let rstar = rstar_exact(&inst).sq;
        let decision = DecisionPair::bfs(&inst);
        let (_, grid) = dyadic_bracket(&inst, &decision).unwrap();
        let hl = classify_heavy(&grid, inst.n() + 1);
        let specials = special_distances(&inst.points, &grid, &hl);
        let iv = shrink_light(&inst, &grid, &hl, 4, &decision, 5).unwrap().interval;
        let (est, _) =
            estimates_via_contraction(&inst, &grid, &hl, &specials, &iv, &decision, 4).unwrap();
        assert_eq!(est.slack, 0);
        let exact = bfs_exact(&inst, rstar);
        assert_eq!(est.d_tilde, exact, "k=0 contraction is the identity");
    }

    #[test]
    fn estimate_band_holds_with_heavy_cells() {
        let mut rng = StdRng::seed_from_u64(33);
        for _ in 0..20 {
            let inst = generate(GenKind::Cluster, rng.random_range(256..1024), rng.random())
                .unwrap()
                .with_lambda(rng.random_range(2..8));
            let rstar = rstar_exact(&inst).sq;
            let decision = DecisionPair::bfs(&inst);
            let (_, grid) = dyadic_bracket(&inst, &decision).unwrap();
            let max_bucket = (0..grid.cell_count())
                .map(|ci| grid.cell_points(ci).len())
                .max()
                .unwrap();
            let hl = classify_heavy(&grid, max_bucket.max(2));
            let specials = special_distances(&inst.points, &grid, &hl);
            let iv = match shrink_light(&inst, &grid, &hl, 8, &decision, rng.random()) {
                Ok(o) => o.interval,
                Err(Error::NoLightPairs) => continue,
                Err(e) => panic!("{e}"),
            };
            let (est, _) =
                estimates_via_contraction(&inst, &grid, &hl, &specials, &iv, &decision, 8)
                    .unwrap();
            let exact = bfs_exact(&inst, rstar);
            for p in 0..inst.n() {
                match (exact[p], est.d_tilde[p]) {
                    (Some(d), Some(dt)) => {
                        assert!(dt <= d, "estimate above truth at {p}");
                        assert!(d <= dt + est.slack, "estimate below band at {p}");
                    }
                    (None, None) => {}
                    (a, b) => panic!("reachability mismatch at {p}: {a:?} vs {b:?}"),
                }
            }
        }
    }
}
