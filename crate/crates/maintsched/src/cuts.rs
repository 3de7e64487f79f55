//! Cut generation: given a shift whose jobs cannot be scheduled with the
//! available teams, produce job sets ("cuts") that the master problem must
//! break apart. Four strategies share one entry point:
//!
//! * `Naive` — the whole job set is the cut.
//! * `BasicHeuristic` — grow a random subset until it turns infeasible.
//! * `BinarySearchHeuristic` — maintain a feasible core `A` and an
//!   infeasible margin `B`, halving `B` with random splits.
//! * `MinCut` — exact cuts from the single-team flow relaxation; falls
//!   back to a heuristic when the relaxation cannot certify anything.
//!
//! Every emitted cut is a subset of the input and is itself infeasible for
//! the same team count, so adding it to the master can never exclude a
//! capacity-feasible assignment.
//!
//! Randomized strategies draw from a seeded ChaCha8 stream, so identical
//! (jobs, seed) inputs always yield identical cuts, on every platform.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::relaxation::{self, RappError};
use crate::scheduling::{self, ScheduleError};
use crate::shifts::Job;

pub use crate::relaxation::CutSet;

/// Which procedure turns an infeasible job set into cuts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutKind {
    Naive,
    BasicHeuristic,
    BinarySearchHeuristic,
    MinCut,
}

impl fmt::Display for CutKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CutKind::Naive => "naive",
            CutKind::BasicHeuristic => "basic-heuristic",
            CutKind::BinarySearchHeuristic => "binary-search-heuristic",
            CutKind::MinCut => "min-cut",
        };
        f.write_str(name)
    }
}

impl FromStr for CutKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(CutKind::Naive),
            "basic-heuristic" | "basic" => Ok(CutKind::BasicHeuristic),
            "binary-search-heuristic" | "binary-search" | "bsh" => {
                Ok(CutKind::BinarySearchHeuristic)
            }
            "min-cut" | "mincut" => Ok(CutKind::MinCut),
            other => Err(format!(
                "unknown cut strategy {other:?}; expected naive, basic-heuristic, \
                 binary-search-heuristic or min-cut"
            )),
        }
    }
}

/// What to do when `MinCut` is asked for cuts but the relaxation is
/// feasible (the conflict is purely about contiguity, which the flow model
/// cannot see).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FallbackKind {
    /// One binary-search-heuristic cut — the cheapest valid completion.
    BinarySearchOne,
    /// The whole job set.
    Naive,
}

/// A configured cut generator. `cuts_per_call` requests that many
/// independent heuristic draws (seeds `rng_seed`, `rng_seed+1`, …), which
/// are deduplicated; it is ignored by `Naive` and `MinCut`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutStrategy {
    pub kind: CutKind,
    pub cuts_per_call: u32,
    pub rng_seed: u64,
    pub fallback: FallbackKind,
}

impl CutStrategy {
    pub fn new(kind: CutKind, cuts_per_call: u32, rng_seed: u64) -> Self {
        assert!(cuts_per_call >= 1, "cuts_per_call must be positive");
        CutStrategy { kind, cuts_per_call, rng_seed, fallback: FallbackKind::BinarySearchOne }
    }

    pub fn naive() -> Self {
        Self::new(CutKind::Naive, 1, 0)
    }

    pub fn basic(cuts_per_call: u32, rng_seed: u64) -> Self {
        Self::new(CutKind::BasicHeuristic, cuts_per_call, rng_seed)
    }

    pub fn binary_search(cuts_per_call: u32, rng_seed: u64) -> Self {
        Self::new(CutKind::BinarySearchHeuristic, cuts_per_call, rng_seed)
    }

    pub fn min_cut() -> Self {
        Self::new(CutKind::MinCut, 1, 0)
    }

    pub fn with_seed(mut self, rng_seed: u64) -> Self {
        self.rng_seed = rng_seed;
        self
    }
}

impl fmt::Display for CutStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            CutKind::Naive | CutKind::MinCut => write!(f, "{}", self.kind),
            _ => write!(f, "{}(x{})", self.kind, self.cuts_per_call),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CutError {
    #[error("cut generation requires an infeasible job set")]
    NotInfeasible,
    #[error(transparent)]
    UnsupportedTeams(#[from] RappError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Feasibility oracle the heuristics consult. Implementations may count
/// calls or memoize; the driver uses [`ExactOracle`].
pub trait AppOracle {
    /// Team count the feasibility question refers to.
    fn teams(&self) -> u32;
    /// Can `jobs` be scheduled with `teams()` teams?
    fn check(&mut self, jobs: &[Job]) -> Result<bool, ScheduleError>;
}

/// The exact scheduler as an oracle, with a call counter.
#[derive(Debug)]
pub struct ExactOracle {
    teams: u32,
    pub calls: u64,
}

impl ExactOracle {
    pub fn new(teams: u32) -> Self {
        ExactOracle { teams, calls: 0 }
    }
}

impl AppOracle for ExactOracle {
    fn teams(&self) -> u32 {
        self.teams
    }

    fn check(&mut self, jobs: &[Job]) -> Result<bool, ScheduleError> {
        self.calls += 1;
        scheduling::is_feasible(jobs, self.teams)
    }
}

/// Outcome of the exact flow-based procedure on its own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MinCutOutcome {
    Cuts(Vec<CutSet>),
    /// The relaxation is feasible, so it cannot explain the infeasibility;
    /// the caller must use another procedure.
    FallbackRequired,
}

/// Generates cuts for an infeasible job set. Errors if the jobs are in
/// fact feasible (contract violation) or if `MinCut` is requested for a
/// team count the relaxation does not support.
pub fn generate(
    strategy: &CutStrategy,
    jobs: &[Job],
    oracle: &mut dyn AppOracle,
) -> Result<Vec<CutSet>, CutError> {
    if oracle.check(jobs)? {
        return Err(CutError::NotInfeasible);
    }
    match strategy.kind {
        CutKind::Naive => Ok(naive(jobs)),
        CutKind::BasicHeuristic => {
            multi(strategy, |seed, oracle| basic_heuristic(jobs, seed, oracle), oracle)
        }
        CutKind::BinarySearchHeuristic => {
            multi(strategy, |seed, oracle| binary_search_heuristic(jobs, seed, oracle), oracle)
        }
        CutKind::MinCut => match min_cut(jobs, oracle.teams())? {
            MinCutOutcome::Cuts(cuts) => Ok(cuts),
            MinCutOutcome::FallbackRequired => match strategy.fallback {
                FallbackKind::BinarySearchOne => {
                    Ok(vec![binary_search_heuristic(jobs, strategy.rng_seed, oracle)?])
                }
                FallbackKind::Naive => Ok(naive(jobs)),
            },
        },
    }
}

fn multi(
    strategy: &CutStrategy,
    mut one: impl FnMut(u64, &mut dyn AppOracle) -> Result<CutSet, CutError>,
    oracle: &mut dyn AppOracle,
) -> Result<Vec<CutSet>, CutError> {
    let mut cuts: Vec<CutSet> = Vec::new();
    for i in 0..strategy.cuts_per_call as u64 {
        let cut = one(strategy.rng_seed.wrapping_add(i), oracle)?;
        if !cuts.contains(&cut) {
            cuts.push(cut);
        }
    }
    Ok(cuts)
}

/// The whole job set as a single cut.
pub fn naive(jobs: &[Job]) -> Vec<CutSet> {
    vec![jobs.iter().map(|j| j.id).collect()]
}

/// Grows a subset by uniformly random draws from the remaining jobs until
/// it turns infeasible, then returns it. The result minus its final
/// addition is feasible by construction.
pub fn basic_heuristic(
    jobs: &[Job],
    seed: u64,
    oracle: &mut dyn AppOracle,
) -> Result<CutSet, CutError> {
    Ok(basic_heuristic_ordered(jobs, seed, oracle)?
        .into_iter()
        .map(|i| jobs[i].id)
        .collect())
}

/// As [`basic_heuristic`] but yielding indices in the order they were
/// drawn — the last element is the draw that flipped the set infeasible.
fn basic_heuristic_ordered(
    jobs: &[Job],
    seed: u64,
    oracle: &mut dyn AppOracle,
) -> Result<Vec<usize>, CutError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..jobs.len()).collect();
    let mut picked: Vec<usize> = Vec::new();
    let mut subset: Vec<Job> = Vec::new();
    loop {
        if !oracle.check(&subset)? {
            return Ok(picked);
        }
        debug_assert!(!pool.is_empty(), "caller guarantees the full set is infeasible");
        let k = rng.random_range(0..pool.len());
        let idx = pool.swap_remove(k);
        picked.push(idx);
        subset.push(jobs[idx].clone());
    }
}

/// Snapshot of the feasible core `A` and infeasible margin `B` at one loop
/// boundary of the binary-search heuristic, for invariant checking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitBoundary {
    pub core: Vec<usize>,
    pub margin: Vec<usize>,
}

/// Binary-search narrowing: keep a feasible core `A` and a margin `B` with
/// `A ∪ B` infeasible; each round moves `⌈|B|/2⌉` random jobs of `B` into a
/// half `B_L` and keeps either `B_L` (if `A ∪ B_L` is already infeasible)
/// or commits `B_L` to the core and keeps the rest. Stops at `|B| = 1` and
/// returns `A ∪ B`.
pub fn binary_search_heuristic(
    jobs: &[Job],
    seed: u64,
    oracle: &mut dyn AppOracle,
) -> Result<CutSet, CutError> {
    let (cut, _) = binary_search_heuristic_traced(jobs, seed, oracle)?;
    Ok(cut)
}

/// As [`binary_search_heuristic`], also returning the (core, margin)
/// snapshot at every loop boundary so tests can assert the loop invariants
/// (core feasible, core ∪ margin infeasible).
pub fn binary_search_heuristic_traced(
    jobs: &[Job],
    seed: u64,
    oracle: &mut dyn AppOracle,
) -> Result<(CutSet, Vec<SplitBoundary>), CutError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut core: Vec<usize> = Vec::new();
    let mut margin: Vec<usize> = (0..jobs.len()).collect();
    let mut trace = vec![SplitBoundary { core: core.clone(), margin: margin.clone() }];
    while margin.len() > 1 {
        let h = margin.len().div_ceil(2);
        let mut left: Vec<usize> = Vec::with_capacity(h);
        for _ in 0..h {
            let k = rng.random_range(0..margin.len());
            left.push(margin.swap_remove(k));
        }
        let right = std::mem::take(&mut margin);
        let candidate: Vec<Job> =
            core.iter().chain(left.iter()).map(|&i| jobs[i].clone()).collect();
        if !oracle.check(&candidate)? {
            margin = left;
        } else {
            core.extend(left);
            margin = right;
        }
        trace.push(SplitBoundary { core: core.clone(), margin: margin.clone() });
    }
    let cut: CutSet = core.iter().chain(margin.iter()).map(|&i| jobs[i].id).collect();
    Ok((cut, trace))
}

/// Exact cuts from the single-team flow relaxation. `FallbackRequired`
/// signals a feasible relaxation; team counts other than 1 are a typed
/// error the driver reacts to by switching strategies.
pub fn min_cut(jobs: &[Job], teams: u32) -> Result<MinCutOutcome, CutError> {
    let cert = relaxation::solve_rapp_for_teams(jobs, teams)?;
    if cert.feasible {
        Ok(MinCutOutcome::FallbackRequired)
    } else {
        Ok(MinCutOutcome::Cuts(cert.cuts))
    }
}
