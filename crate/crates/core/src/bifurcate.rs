//! Simulates a comparison-driven computation at the unknown `r*`.
//!
//! Comparisons against values outside the certified interval are free; a
//! comparison strictly inside forks the branch into both outcomes. Once the
//! number of distinct pending values reaches the batch size (or the step
//! budget since the last resolution is spent), the pending values are sorted
//! and `r*`'s position among them is located with O(log batch) oracle calls,
//! which answers every pending comparison at once, narrows the interval and
//! kills every branch but one.
//!
//! If a resolution finds a value `c` with `decide(c)` true and
//! `decide_strict(c)` false, then `c` is exactly `r*` and every later
//! comparison resolves for free.

use crate::decision::DecisionPair;
use crate::error::{Error, Result};
use crate::geom::SqDist;
use crate::machine::{BifurcatingRun, SimStatus};
use crate::model::{Bound, CandidateValue, Interval};
use std::collections::BTreeMap;

/// Default batch size: `ceil(sqrt(L * log2 n))` pending values per resolution.
pub fn default_batch(l: usize, n: usize) -> usize {
    let log_n = (n.max(2) as f64).log2().ceil();
    ((l as f64 * log_n).sqrt().ceil() as usize).max(1)
}

/// Default cap on simulated steps between resolutions.
pub fn default_step_budget(n: usize) -> u64 {
    8 * n.max(1) as u64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BifStats {
    pub forks: u64,
    pub resolutions: u64,
    pub max_live_branches: usize,
    pub max_pending: usize,
    pub decide_calls: u64,
    pub decide_strict_calls: u64,
    pub total_steps: u64,
}

pub struct BifurcationOutcome<R> {
    /// The one branch whose transcript matches the computation at `r*`.
    pub survivor: R,
    pub interval: Interval,
    /// Set when some resolution certified `decide(c) && !decide_strict(c)`.
    pub exact: Option<CandidateValue>,
    pub stats: BifStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum HiState {
    Unknown,
    EqualsRstar,
    StrictlyAbove,
}

struct Branch<R> {
    run: R,
    resume_with: Option<bool>,
    assumed: Vec<(CandidateValue, bool)>,
    max_true: Option<SqDist>,
    min_false: Option<SqDist>,
    halted: bool,
}

impl<R: BifurcatingRun> Branch<R> {
    fn new(run: R) -> Branch<R> {
        Branch {
            run,
            resume_with: None,
            assumed: Vec::new(),
            max_true: None,
            min_false: None,
            halted: false,
        }
    }

    fn assume(&mut self, c: CandidateValue, answer: bool) {
        self.assumed.push((c, answer));
        if answer {
            debug_assert!(self.max_true.is_none_or(|m| m < c.sq));
            self.max_true = Some(c.sq);
        } else {
            debug_assert!(self.min_false.is_none_or(|m| m > c.sq));
            self.min_false = Some(c.sq);
        }
        self.resume_with = Some(answer);
    }
}

struct Engine<'d, R> {
    decision: &'d DecisionPair<'d>,
    batch: usize,
    step_budget: u64,
    lo: Bound,
    hi: Bound,
    lo_evidence: bool,
    hi_evidence: bool,
    hi_state: HiState,
    exact: Option<CandidateValue>,
    branches: Vec<Branch<R>>,
    pending: BTreeMap<SqDist, CandidateValue>,
    steps_since_resolution: u64,
    stats: BifStats,
}

enum DriveOutcome {
    Halted,
    Fork(CandidateValue),
}

impl<'d, R: BifurcatingRun> Engine<'d, R> {
    fn auto_answer(&self, branch: &Branch<R>, c: SqDist) -> Option<bool> {
        if let Some(ex) = &self.exact {
            return Some(c <= ex.sq);
        }
        if let Bound::Value(l) = self.lo {
            if c <= l.sq {
                return Some(true);
            }
        }
        if let Bound::Value(h) = self.hi {
            if c > h.sq {
                return Some(false);
            }
            if c == h.sq {
                match self.hi_state {
                    HiState::EqualsRstar => return Some(true),
                    HiState::StrictlyAbove => return Some(false),
                    HiState::Unknown => {}
                }
            }
        }
        if let Some(mt) = branch.max_true {
            if c <= mt {
                return Some(true);
            }
        }
        if let Some(mf) = branch.min_false {
            if c >= mf {
                return Some(false);
            }
        }
        None
    }

    fn drive(&mut self, bi: usize) -> Result<DriveOutcome> {
        let steps_before = self.branches[bi].run.steps();
        let mut feed = self.branches[bi].resume_with.take();
        let outcome = loop {
            match self.branches[bi].run.advance(feed) {
                SimStatus::Done => {
                    self.branches[bi].halted = true;
                    break DriveOutcome::Halted;
                }
                SimStatus::NeedCompare(c) => {
                    self.branches[bi]
                        .run
                        .validate_comparison(&c)
                        .map_err(Error::ProtocolViolation)?;
                    match self.auto_answer(&self.branches[bi], c.sq) {
                        Some(a) => feed = Some(a),
                        None => break DriveOutcome::Fork(c),
                    }
                }
            }
        };
        let delta = self.branches[bi].run.steps() - steps_before;
        self.steps_since_resolution += delta;
        self.stats.total_steps += delta;
        Ok(outcome)
    }

    fn fork(&mut self, bi: usize, c: CandidateValue) {
        self.pending.insert(c.sq, c);
        self.stats.forks += 1;
        self.stats.max_pending = self.stats.max_pending.max(self.pending.len());
        let mut child = Branch {
            run: self.branches[bi].run.clone(),
            resume_with: None,
            assumed: self.branches[bi].assumed.clone(),
            max_true: self.branches[bi].max_true,
            min_false: self.branches[bi].min_false,
            halted: false,
        };
        self.branches[bi].assume(c, true);
        child.assume(c, false);
        self.branches.push(child);
        self.stats.max_live_branches = self.stats.max_live_branches.max(self.branches.len());
    }

    /// Sorts the pending values, binary searches r*'s position with the
    /// decision pair, answers every pending comparison, narrows the interval
    /// and keeps the single consistent branch.
    fn resolve(&mut self) -> Result<()> {
        debug_assert!(!self.pending.is_empty());
        self.stats.resolutions += 1;
        let values: Vec<CandidateValue> = self.pending.values().copied().collect();
        let mut lo_i = -1isize; // decide false at and below
        let mut hi_i = values.len() as isize; // decide true at and above
        while hi_i - lo_i > 1 {
            let mid = lo_i + (hi_i - lo_i) / 2;
            if self.decision.decide(values[mid as usize].sq) {
                hi_i = mid;
            } else {
                lo_i = mid;
            }
        }

        let split: Option<SqDist>; // values < split are <= r*; at split: per hi_state
        if (hi_i as usize) < values.len() {
            let cstar = values[hi_i as usize];
            let strict = self.decision.decide_strict(cstar.sq);
            if !strict {
                self.exact = Some(cstar);
                self.hi_state = HiState::EqualsRstar;
            } else {
                self.hi_state = HiState::StrictlyAbove;
            }
            // cstar lies inside the old interval, so this always tightens hi
            self.hi = Bound::Value(cstar);
            self.hi_evidence = true;
            split = Some(cstar.sq);
        } else {
            split = None; // every pending value is below r*
        }
        if lo_i >= 0 {
            self.lo = Bound::Value(values[lo_i as usize]);
            self.lo_evidence = true;
        }

        let exact_here = self.hi_state == HiState::EqualsRstar;
        let answer = |v: SqDist| -> bool {
            match split {
                None => true,
                Some(sp) => {
                    if v < sp {
                        true
                    } else if v == sp {
                        exact_here
                    } else {
                        false
                    }
                }
            }
        };

        let pending = std::mem::take(&mut self.pending);
        self.branches.retain(|b| {
            b.assumed
                .iter()
                .all(|(c, a)| !pending.contains_key(&c.sq) || answer(c.sq) == *a)
        });
        if self.branches.len() != 1 {
            return Err(Error::ProtocolViolation(format!(
                "resolution left {} branches alive",
                self.branches.len()
            )));
        }
        self.steps_since_resolution = 0;
        Ok(())
    }
}

/// Simulates `run` at the unknown `r*` certified to lie in `iv`.
///
/// The surviving branch's transcript equals the transcript of the same
/// computation executed directly at `r*`. When any resolution pins `r*`
/// exactly, the certified value is returned as well.
pub fn bifurcate_simulate<R: BifurcatingRun>(
    run: R,
    iv: &Interval,
    decision: &DecisionPair,
    batch: usize,
    step_budget: u64,
) -> Result<BifurcationOutcome<R>> {
    let batch = batch.max(1);
    let mut eng = Engine {
        decision,
        batch,
        step_budget: step_budget.max(1),
        lo: iv.lo,
        hi: iv.hi,
        lo_evidence: iv.lo_evidence,
        hi_evidence: iv.hi_evidence,
        hi_state: HiState::Unknown,
        exact: None,
        branches: vec![Branch::new(run)],
        pending: BTreeMap::new(),
        steps_since_resolution: 0,
        stats: BifStats {
            max_live_branches: 1,
            ..BifStats::default()
        },
    };

    let decide_before = decision.decide_calls();
    let strict_before = decision.strict_calls();

    // the shrunken interval often already ends exactly at r*; one strict
    // probe settles it and then every comparison is free
    if let (Bound::Value(h), true) = (eng.hi, eng.hi_evidence) {
        if !decision.decide_strict(h.sq) {
            eng.exact = Some(h);
            eng.hi_state = HiState::EqualsRstar;
        } else {
            eng.hi_state = HiState::StrictlyAbove;
        }
    }

    loop {
        let Some(bi) = eng.branches.iter().position(|b| !b.halted) else {
            if eng.pending.is_empty() {
                break;
            }
            eng.resolve()?;
            continue;
        };
        match eng.drive(bi)? {
            DriveOutcome::Halted => {}
            DriveOutcome::Fork(c) => {
                eng.fork(bi, c);
                let fork_overflow = eng.pending.len() >= eng.batch;
                let budget_spent = eng.steps_since_resolution >= eng.step_budget;
                if fork_overflow || budget_spent {
                    eng.resolve()?;
                }
            }
        }
    }

    debug_assert_eq!(eng.branches.len(), 1);
    let survivor = eng.branches.pop().expect("one branch survives").run;
    eng.stats.decide_calls = decision.decide_calls() - decide_before;
    eng.stats.decide_strict_calls = decision.strict_calls() - strict_before;
    Ok(BifurcationOutcome {
        survivor,
        interval: Interval::new(eng.lo, eng.hi, eng.lo_evidence, eng.hi_evidence),
        exact: eng.exact,
        stats: eng.stats,
    })
}
