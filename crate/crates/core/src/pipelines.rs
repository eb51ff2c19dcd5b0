//! End-to-end solvers. All four return the same exact `r*`:
//!
//! * `brute` — the reference oracle;
//! * `distsel` — rank binary search over all pairwise distances with the
//!   selection oracle and the inclusive decision;
//! * `generic` — interval shrinking, then bifurcation of the decision BFS;
//! * `fast` — heavy/light variant: light-pair shrinking, contracted-graph
//!   estimates, band DP, with fallback to `generic` on any anomaly.

use crate::bifurcate::{bifurcate_simulate, default_batch, default_step_budget, BifStats};
use crate::contraction::{
    classify_heavy, dyadic_bracket, estimates_via_contraction, special_distances,
};
use crate::decision::DecisionPair;
use crate::error::{Error, Result};
use crate::geom::SqDist;
use crate::machine::{BfsWorld, InstrumentedBfs};
use crate::model::{rstar_exact, CandidateValue, Instance};
use crate::recovery::dp_recover;
use crate::selection::{SelectableCollection, SelectionStats, SortedValues, DEFAULT_SELECTION_BUDGET};
use crate::shrink::{shrink_improved, shrink_light};
use serde::Serialize;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Brute,
    DistselBinary,
    Generic,
    Fast,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Brute,
        Algorithm::DistselBinary,
        Algorithm::Generic,
        Algorithm::Fast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Brute => "brute",
            Algorithm::DistselBinary => "distsel",
            Algorithm::Generic => "generic",
            Algorithm::Fast => "fast",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Algorithm> {
        match s {
            "brute" => Ok(Algorithm::Brute),
            "distsel" => Ok(Algorithm::DistselBinary),
            "generic" => Ok(Algorithm::Generic),
            "fast" => Ok(Algorithm::Fast),
            other => Err(Error::InvalidInstance(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Tunables; `None` falls back to the exponent defaults.
#[derive(Clone, Copy, Debug)]
pub struct SolveParams {
    pub l: Option<usize>,
    pub delta: Option<usize>,
    pub batch: Option<usize>,
    pub seed: u64,
    pub selection_budget: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            l: None,
            delta: None,
            batch: None,
            seed: 0,
            selection_budget: DEFAULT_SELECTION_BUDGET,
        }
    }
}

pub fn default_generic_l(n: usize) -> usize {
    (n as f64).powf(2.0 / 7.0).ceil() as usize
}

pub fn default_fast_l(n: usize) -> usize {
    (n as f64).powf(0.25).ceil() as usize
}

pub fn default_fast_delta(n: usize) -> usize {
    (n as f64).powf(7.0 / 8.0).ceil() as usize
}

#[derive(Clone, Copy, Debug, Default, Serialize, PartialEq)]
pub struct Counters {
    pub decide: u64,
    pub decide_strict: u64,
    pub selection_probes: u64,
    pub forks: u64,
    pub resolutions: u64,
    pub simulated_steps: u64,
    pub max_live_branches: usize,
    pub wall_ms: f64,
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
pub struct ParamsUsed {
    pub l: Option<usize>,
    pub delta: Option<usize>,
    pub batch: Option<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub algo: &'static str,
    pub r_star_sq: f64,
    pub witness: (u32, u32),
    pub counters: Counters,
    pub params: ParamsUsed,
    pub fallback: bool,
    pub certified: bool,
    pub heavy_cells: Option<usize>,
    pub slack: Option<u32>,
}

impl SolveReport {
    pub fn r_star(&self) -> CandidateValue {
        CandidateValue::new(SqDist::new(self.r_star_sq), self.witness)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialization cannot fail")
    }

    pub const CSV_HEADER: &'static str = "algo,n,r_star_sq,witness_i,witness_j,decide,\
decide_strict,selection_probes,forks,resolutions,simulated_steps,wall_ms,fallback,certified";

    pub fn to_csv_row(&self, n: usize) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.3},{},{}",
            self.algo,
            n,
            self.r_star_sq,
            self.witness.0,
            self.witness.1,
            self.counters.decide,
            self.counters.decide_strict,
            self.counters.selection_probes,
            self.counters.forks,
            self.counters.resolutions,
            self.counters.simulated_steps,
            self.counters.wall_ms,
            self.fallback,
            self.certified
        )
    }
}

pub fn solve(inst: &Instance, algo: Algorithm, params: &SolveParams) -> Result<SolveReport> {
    inst.validate()?;
    match algo {
        Algorithm::Brute => solve_brute(inst, params),
        Algorithm::DistselBinary => solve_distsel_binary(inst, params),
        Algorithm::Generic => solve_generic(inst, params),
        Algorithm::Fast => solve_fast(inst, params),
    }
}

struct Ctx<'a> {
    decision: DecisionPair<'a>,
    selection: SelectionStats,
    bif: BifStats,
    start: Instant,
}

impl<'a> Ctx<'a> {
    fn new(inst: &'a Instance) -> Ctx<'a> {
        Ctx {
            decision: DecisionPair::bfs(inst),
            selection: SelectionStats::default(),
            bif: BifStats::default(),
            start: Instant::now(),
        }
    }

    fn finish(
        self,
        algo: Algorithm,
        r_star: CandidateValue,
        params: ParamsUsed,
        fallback: bool,
        heavy_cells: Option<usize>,
        slack: Option<u32>,
    ) -> SolveReport {
        // certificate: the reported value is precisely the threshold
        let certified = self.decision.decide(r_star.sq) && !self.decision.decide_strict(r_star.sq);
        SolveReport {
            algo: algo.name(),
            r_star_sq: r_star.sq.get(),
            witness: r_star.witness,
            counters: Counters {
                decide: self.decision.decide_calls(),
                decide_strict: self.decision.strict_calls(),
                selection_probes: self.selection.total(),
                forks: self.bif.forks,
                resolutions: self.bif.resolutions,
                simulated_steps: self.bif.total_steps,
                max_live_branches: self.bif.max_live_branches,
                wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
            },
            params,
            fallback,
            certified,
            heavy_cells,
            slack,
        }
    }
}

/// Any coincident pair; exists whenever `r* = 0` with `s != t`.
fn zero_witness(inst: &Instance) -> CandidateValue {
    let mut order: Vec<u32> = (0..inst.n() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        let pa = inst.points[a as usize];
        let pb = inst.points[b as usize];
        pa.x.total_cmp(&pb.x).then(pa.y.total_cmp(&pb.y)).then(a.cmp(&b))
    });
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        if inst.points[a as usize] == inst.points[b as usize] {
            return CandidateValue::new(SqDist::ZERO, (a.min(b), a.max(b)));
        }
    }
    unreachable!("r* = 0 implies a coincident pair");
}

fn solve_brute(inst: &Instance, params: &SolveParams) -> Result<SolveReport> {
    let ctx = Ctx::new(inst);
    let r_star = rstar_exact(inst);
    let used = ParamsUsed { l: None, delta: None, batch: None, seed: params.seed };
    Ok(ctx.finish(Algorithm::Brute, r_star, used, false, None, None))
}

/// Binary search over ranks `1..C(n,2)` with the selection oracle and the
/// inclusive decision. The selection backend is brute force behind the pair
/// budget; a sub-quadratic oracle can replace it without changing this
/// search.
fn solve_distsel_binary(inst: &Instance, params: &SolveParams) -> Result<SolveReport> {
    let mut ctx = Ctx::new(inst);
    let used = ParamsUsed { l: None, delta: None, batch: None, seed: params.seed };
    if inst.s == inst.t {
        return Ok(ctx.finish(
            Algorithm::DistselBinary,
            CandidateValue::zero(inst.s, inst.s),
            used,
            false,
            None,
            None,
        ));
    }
    let n = inst.n();
    let total = n * (n - 1) / 2;
    if total > params.selection_budget {
        return Err(Error::BudgetExceeded {
            required: total,
            budget: params.selection_budget,
        });
    }
    let all = SortedValues::new(crate::model::sorted_candidates(inst));
    // smallest rank whose value the decision accepts; r* is always a
    // candidate, so this lands exactly on it (the top rank is accepted
    // unprobed: the complete graph reaches t in one hop)
    let mut lo = 0usize;
    let mut hi = total;
    let mut hi_val = {
        ctx.selection.select_probes += 1;
        all.select(total)?
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        ctx.selection.select_probes += 1;
        let v = all.select(mid)?;
        if ctx.decision.decide(v.sq) {
            hi = mid;
            hi_val = v;
        } else {
            lo = mid;
        }
    }
    Ok(ctx.finish(Algorithm::DistselBinary, hi_val, used, false, None, None))
}

/// Shrink, bracket the grid scale, then bifurcate the decision BFS at the
/// unknown `r*`; the simulation always meets the comparison with value
/// exactly `r*` and certifies it through the strict oracle.
fn solve_generic(inst: &Instance, params: &SolveParams) -> Result<SolveReport> {
    let mut ctx = Ctx::new(inst);
    let n = inst.n();
    let l = params.l.unwrap_or_else(|| default_generic_l(n));
    let batch = params.batch.unwrap_or_else(|| default_batch(l, n));
    let used = ParamsUsed {
        l: Some(l),
        delta: None,
        batch: Some(batch),
        seed: params.seed,
    };
    if inst.s == inst.t {
        return Ok(ctx.finish(
            Algorithm::Generic,
            CandidateValue::zero(inst.s, inst.s),
            used,
            false,
            None,
            None,
        ));
    }
    let r_star = generic_core(inst, &mut ctx, l, batch, params.seed)?;
    Ok(ctx.finish(Algorithm::Generic, r_star, used, false, None, None))
}

fn generic_core(
    inst: &Instance,
    ctx: &mut Ctx,
    l: usize,
    batch: usize,
    seed: u64,
) -> Result<CandidateValue> {
    if ctx.decision.decide(SqDist::ZERO) {
        return Ok(zero_witness(inst));
    }
    let shr = shrink_improved(inst, l, &ctx.decision, seed)?;
    ctx.selection.add(&shr.selection);
    let (_, grid) = dyadic_bracket(inst, &ctx.decision)?;
    let world = BfsWorld::plain(inst, &grid);
    let out = bifurcate_simulate(
        InstrumentedBfs::new(&world),
        &shr.interval,
        &ctx.decision,
        batch,
        default_step_budget(inst.n()),
    )?;
    merge_bif(&mut ctx.bif, &out.stats);
    Ok(out
        .exact
        .expect("decision simulation always certifies r* exactly"))
}

fn merge_bif(acc: &mut BifStats, s: &BifStats) {
    acc.forks += s.forks;
    acc.resolutions += s.resolutions;
    acc.total_steps += s.total_steps;
    acc.max_live_branches = acc.max_live_branches.max(s.max_live_branches);
    acc.max_pending = acc.max_pending.max(s.max_pending);
}

/// Heavy/light pipeline; falls back to the generic solver when there are no
/// light pairs, the DP cannot reach `t`, or the certificate check fails.
fn solve_fast(inst: &Instance, params: &SolveParams) -> Result<SolveReport> {
    let mut ctx = Ctx::new(inst);
    let n = inst.n();
    let l = params.l.unwrap_or_else(|| default_fast_l(n));
    let delta = params.delta.unwrap_or_else(|| default_fast_delta(n));
    let batch = params.batch.unwrap_or_else(|| default_batch(l, n));
    let used = ParamsUsed {
        l: Some(l),
        delta: Some(delta),
        batch: Some(batch),
        seed: params.seed,
    };
    if inst.s == inst.t {
        return Ok(ctx.finish(
            Algorithm::Fast,
            CandidateValue::zero(inst.s, inst.s),
            used,
            false,
            None,
            None,
        ));
    }

    match fast_core(inst, &mut ctx, l, delta, params.seed) {
        Ok((r_star, h, slack)) => {
            Ok(ctx.finish(Algorithm::Fast, r_star, used, false, Some(h), Some(slack)))
        }
        Err(_) => {
            // counters keep accumulating across the fallback
            let r_star = generic_core(inst, &mut ctx, default_generic_l(n), batch, params.seed)?;
            Ok(ctx.finish(Algorithm::Fast, r_star, used, true, None, None))
        }
    }
}

fn fast_core(
    inst: &Instance,
    ctx: &mut Ctx,
    l: usize,
    delta: usize,
    seed: u64,
) -> Result<(CandidateValue, usize, u32)> {
    if ctx.decision.decide(SqDist::ZERO) {
        return Ok((zero_witness(inst), 0, 0));
    }
    let (_, grid) = dyadic_bracket(inst, &ctx.decision)?;
    let hl = classify_heavy(&grid, delta);
    let specials = special_distances(&inst.points, &grid, &hl);
    let shr = shrink_light(inst, &grid, &hl, l, &ctx.decision, seed)?;
    ctx.selection.add(&shr.selection);
    let (est, bif) =
        estimates_via_contraction(inst, &grid, &hl, &specials, &shr.interval, &ctx.decision, l)?;
    merge_bif(&mut ctx.bif, &bif);
    let (r_star, _) = dp_recover(inst, &est)?;
    if !(ctx.decision.decide(r_star.sq) && !ctx.decision.decide_strict(r_star.sq)) {
        return Err(Error::RecoveryFailure(format!(
            "DP value {} is not the decision threshold",
            r_star.sq
        )));
    }
    Ok((r_star, hl.h, est.slack))
}
