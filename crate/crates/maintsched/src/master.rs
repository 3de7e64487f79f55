//! The location-choice master problem: assign every maintenance type of
//! every unit to maintenance opportunities so that consecutive activities
//! of a type are never more than its interval apart, each opportunity's
//! time budget is respected, at most `max_day_locations` locations open
//! during the day, and no accumulated cut is violated. The objective
//! minimizes night-time activities, with a small per-activity penalty `ε`
//! so gratuitous assignments never pay off.
//!
//! Solved exactly at two levels. Units couple only through cuts and the
//! day-location cap, so the outer search branches on *conflict
//! resolutions*: it keeps a set of banned assignments, solves every unit
//! independently and optimally under its bans (memoized per ban set),
//! and, whenever the combined solution violates a cut, branches over which
//! member of that cut to ban next — respectively, whenever it opens too
//! many day locations, over which of them to close. Its bound is the sum
//! of the per-unit optima plus, for every still-violated cut over
//! pairwise-disjoint units, the cheapest member's exact resolution cost
//! (one memoized re-solve); a solution that satisfies a cut without a ban
//! stays feasible for the ban, so these are true lower bounds. Equal-cost
//! resolutions prune against the incumbent within [`OBJ_TOL`], and both
//! branch orders are deterministic, so the returned optimum is always the
//! first one found in this fixed order.
//!
//! The inner per-unit solver is a depth-first branch-and-bound over the
//! unit's binary assignment variables in chronological order. Propagation
//! tracks per-type covering obligations (the initial one from the unit's
//! ageing state, then one per assignment whose interval ends inside the
//! horizon), remaining opportunity minutes and bans; the bound adds, for
//! every open obligation, the cost of the cheapest completion chain,
//! precomputed by dynamic programming over the successor windows. The
//! assign branch is explored first exactly when the assignment lies on
//! some open obligation's cheapest completion chain, so the first leaf is
//! already optimal whenever no ban bites.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::rc::Rc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{hours_to_minutes, Instance, LocationId, MoIndex, TypeId, UnitId};

/// One assignment: unit, opportunity, maintenance type.
pub type Assignment = (UnitId, MoIndex, TypeId);

/// Objective values closer than this are treated as equal, both when
/// pruning and when improving the incumbent. Far below any real objective
/// step (one activity is worth ε, one night a full unit), far above the
/// rounding noise of summing a few hundred ε terms.
pub const OBJ_TOL: f64 = 1e-9;

/// A no-good constraint: not all member assignments may hold at once
/// (at least one must be dropped).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CutConstraint {
    members: BTreeSet<Assignment>,
}

impl CutConstraint {
    /// Builds a cut from its member assignments; empty member sets are not
    /// a meaningful constraint and are rejected.
    pub fn new(members: impl IntoIterator<Item = Assignment>) -> Option<Self> {
        let members: BTreeSet<Assignment> = members.into_iter().collect();
        if members.is_empty() {
            None
        } else {
            Some(CutConstraint { members })
        }
    }

    pub fn members(&self) -> &BTreeSet<Assignment> {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// A cut is satisfied iff at least one member is unassigned.
    pub fn satisfied_by(&self, assignments: &BTreeSet<Assignment>) -> bool {
        self.members.iter().any(|m| !assignments.contains(m))
    }
}

/// An optimal (or incumbent) master solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterSolution {
    pub assignments: BTreeSet<Assignment>,
    pub day_locations: BTreeSet<LocationId>,
    pub night_locations: BTreeSet<LocationId>,
    /// Assignments at opportunities classified as night.
    pub night_count: u32,
    pub total_count: u32,
    /// `night_count + ε · total_count`.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MasterOutcome {
    Optimal(MasterSolution),
    /// No assignment satisfies all constraints under the given cuts.
    Infeasible,
    TimeBudgetExceeded { incumbent: Option<MasterSolution>, lower_bound: f64 },
}

#[derive(Debug, Error)]
pub enum MasterError {
    #[error("instance is invalid: {0:?}")]
    InvalidInstance(Vec<crate::instance::Violation>),
    #[error("cut references unknown assignment (unit {0:?}, mo {1:?}, type {2:?})")]
    UnknownCutMember(UnitId, MoIndex, TypeId),
}

/// A violated master constraint, as reported by [`check_solution`].
#[derive(Debug, Clone, PartialEq)]
pub enum MasterViolation {
    DayLocationCapExceeded { open: usize, max: u32 },
    MoCapacityExceeded { unit: UnitId, mo: MoIndex, used_min: i64, window_min: i64 },
    LocationNotOpen { unit: UnitId, mo: MoIndex, location: LocationId, day: bool },
    InitialCoverMissing { unit: UnitId, ty: TypeId },
    SuccessorMissing { unit: UnitId, mo: MoIndex, ty: TypeId },
    CutViolated { index: usize },
    CountsInconsistent { night_count: u32, total_count: u32 },
    ObjectiveMismatch { reported: f64, reconstructed: f64 },
}

impl fmt::Display for MasterViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MasterViolation::DayLocationCapExceeded { open, max } => {
                write!(f, "{open} day locations open, cap is {max}")
            }
            MasterViolation::MoCapacityExceeded { unit, mo, used_min, window_min } => write!(
                f,
                "unit {unit:?} mo {mo:?}: {used_min} min assigned into a {window_min} min window"
            ),
            MasterViolation::LocationNotOpen { unit, mo, location, day } => write!(
                f,
                "unit {unit:?} mo {mo:?} uses {} location {location:?} which is not open",
                if *day { "day" } else { "night" }
            ),
            MasterViolation::InitialCoverMissing { unit, ty } => {
                write!(f, "unit {unit:?} type {ty:?}: no activity inside the initial interval")
            }
            MasterViolation::SuccessorMissing { unit, mo, ty } => write!(
                f,
                "unit {unit:?} mo {mo:?} type {ty:?}: no successor within the interval"
            ),
            MasterViolation::CutViolated { index } => write!(f, "cut #{index} fully assigned"),
            MasterViolation::CountsInconsistent { night_count, total_count } => write!(
                f,
                "night/total counts ({night_count}/{total_count}) do not match the assignments"
            ),
            MasterViolation::ObjectiveMismatch { reported, reconstructed } => {
                write!(f, "objective {reported} does not reconstruct to {reconstructed}")
            }
        }
    }
}

/// Re-evaluates every master constraint directly from the instance data,
/// sharing no machinery with the solver. Empty result = clean.
pub fn check_solution(
    inst: &Instance,
    cuts: &[CutConstraint],
    sol: &MasterSolution,
) -> Vec<MasterViolation> {
    let mut out = Vec::new();
    if sol.day_locations.len() > inst.max_day_locations as usize {
        out.push(MasterViolation::DayLocationCapExceeded {
            open: sol.day_locations.len(),
            max: inst.max_day_locations,
        });
    }
    for (ui, unit) in inst.units.iter().enumerate() {
        for (ji, mo) in unit.mos.iter().enumerate() {
            let mut used = 0i64;
            for (ki, ty) in inst.types.iter().enumerate() {
                if sol.assignments.contains(&(UnitId(ui), MoIndex(ji), TypeId(ki))) {
                    used += ty.duration_min as i64;
                }
            }
            let window = hours_to_minutes(mo.end_hr) - hours_to_minutes(mo.start_hr);
            if used > window {
                out.push(MasterViolation::MoCapacityExceeded {
                    unit: UnitId(ui),
                    mo: MoIndex(ji),
                    used_min: used,
                    window_min: window,
                });
            }
            if used > 0 {
                let day = inst.is_daytime(mo.end_hr);
                let open = if day {
                    sol.day_locations.contains(&mo.location)
                } else {
                    sol.night_locations.contains(&mo.location)
                };
                if !open {
                    out.push(MasterViolation::LocationNotOpen {
                        unit: UnitId(ui),
                        mo: MoIndex(ji),
                        location: mo.location,
                        day,
                    });
                }
            }
        }
    }
    for (ui, unit) in inst.units.iter().enumerate() {
        for (ki, ty) in inst.types.iter().enumerate() {
            let bound = ty.interval_hr + unit.initial_age_hr[ki];
            let covered = unit.mos.iter().enumerate().any(|(p, m)| {
                m.start_hr <= bound
                    && sol.assignments.contains(&(UnitId(ui), MoIndex(p), TypeId(ki)))
            });
            if !covered {
                out.push(MasterViolation::InitialCoverMissing { unit: UnitId(ui), ty: TypeId(ki) });
            }
            for (ji, mo) in unit.mos.iter().enumerate() {
                if !sol.assignments.contains(&(UnitId(ui), MoIndex(ji), TypeId(ki))) {
                    continue;
                }
                if mo.end_hr + ty.interval_hr > inst.horizon_hr {
                    continue;
                }
                let has_successor = unit.mos.iter().enumerate().any(|(p, m)| {
                    mo.end_hr < m.start_hr
                        && m.start_hr <= mo.end_hr + ty.interval_hr
                        && sol.assignments.contains(&(UnitId(ui), MoIndex(p), TypeId(ki)))
                });
                if !has_successor {
                    out.push(MasterViolation::SuccessorMissing {
                        unit: UnitId(ui),
                        mo: MoIndex(ji),
                        ty: TypeId(ki),
                    });
                }
            }
        }
    }
    for (ci, cut) in cuts.iter().enumerate() {
        if !cut.satisfied_by(&sol.assignments) {
            out.push(MasterViolation::CutViolated { index: ci });
        }
    }
    let mut night = 0u32;
    for &(u, j, _) in &sol.assignments {
        if !inst.is_daytime(inst.mo(u, j).end_hr) {
            night += 1;
        }
    }
    if night != sol.night_count || sol.assignments.len() != sol.total_count as usize {
        out.push(MasterViolation::CountsInconsistent {
            night_count: sol.night_count,
            total_count: sol.total_count,
        });
    }
    let reconstructed = sol.night_count as f64 + inst.epsilon * sol.total_count as f64;
    if (sol.objective - reconstructed).abs() > 1e-9 {
        out.push(MasterViolation::ObjectiveMismatch {
            reported: sol.objective,
            reconstructed,
        });
    }
    out
}

/// Solves the master exactly. `time_budget = None` runs to optimality.
pub fn solve(
    inst: &Instance,
    cuts: &[CutConstraint],
    time_budget: Option<Duration>,
) -> Result<MasterOutcome, MasterError> {
    let violations = inst.validate();
    if !violations.is_empty() {
        return Err(MasterError::InvalidInstance(violations));
    }
    for cut in cuts {
        for &(u, j, k) in cut.members() {
            if u.0 >= inst.units.len()
                || j.0 >= inst.units[u.0].mos.len()
                || k.0 >= inst.types.len()
            {
                return Err(MasterError::UnknownCutMember(u, j, k));
            }
        }
    }
    Ok(Coordinator::new(inst, cuts).run(time_budget))
}

/// A valid lower bound on the optimal objective under `cuts`; equals the
/// optimum whenever the exact search completes (it always does here — no
/// budget is imposed). Infeasible instances report `+∞`.
pub fn lower_bound(inst: &Instance, cuts: &[CutConstraint]) -> Result<f64, MasterError> {
    Ok(match solve(inst, cuts, None)? {
        MasterOutcome::Optimal(sol) => sol.objective,
        MasterOutcome::Infeasible => f64::INFINITY,
        MasterOutcome::TimeBudgetExceeded { lower_bound, .. } => lower_bound,
    })
}

/// One unit's optimal solution under a set of banned assignments.
struct UnitSol {
    /// `night + ε · total` over this unit's assignments alone; unit
    /// objectives sum to the combined objective.
    cost: f64,
    /// Sorted, with the unit's global id restored.
    assignments: Vec<Assignment>,
}

/// The outer search over conflict resolutions: per-unit optima under a
/// growing ban set, branching on members of violated cuts and on closing
/// excess day locations. See the module docs for the bounding argument.
struct Coordinator<'a> {
    inst: &'a Instance,
    cuts: &'a [CutConstraint],
    /// Single-unit copies of the instance, one per unit.
    subs: Vec<Instance>,
    /// (unit, sorted bans touching it) → its optimum, `None` = infeasible.
    memo: BTreeMap<(usize, Vec<Assignment>), Option<Rc<UnitSol>>>,
    deadline: Option<Instant>,
    aborted: bool,
    best: Option<MasterSolution>,
    best_cost: f64,
}

impl<'a> Coordinator<'a> {
    fn new(inst: &'a Instance, cuts: &'a [CutConstraint]) -> Self {
        let subs = inst
            .units
            .iter()
            .map(|u| Instance { units: vec![u.clone()], ..inst.clone() })
            .collect();
        Coordinator {
            inst,
            cuts,
            subs,
            memo: BTreeMap::new(),
            deadline: None,
            aborted: false,
            best: None,
            best_cost: f64::INFINITY,
        }
    }

    fn run(&mut self, time_budget: Option<Duration>) -> MasterOutcome {
        self.deadline = time_budget.map(|b| Instant::now() + b);
        let n = self.inst.units.len();
        let mut bans: Vec<BTreeSet<Assignment>> = vec![BTreeSet::new(); n];
        let mut sols: Vec<Rc<UnitSol>> = Vec::with_capacity(n);
        for u in 0..n {
            match self.unit_solve(u, &bans[u]) {
                _ if self.aborted => {
                    let partial: f64 = sols.iter().map(|s| s.cost).sum();
                    return MasterOutcome::TimeBudgetExceeded {
                        incumbent: None,
                        lower_bound: partial,
                    };
                }
                Some(s) => sols.push(s),
                None => return MasterOutcome::Infeasible,
            }
        }
        let root_bound: f64 = sols.iter().map(|s| s.cost).sum();
        self.explore(&mut bans, &mut sols);
        match (self.aborted, self.best.take()) {
            (false, Some(sol)) => MasterOutcome::Optimal(sol),
            (false, None) => MasterOutcome::Infeasible,
            (true, incumbent) => {
                MasterOutcome::TimeBudgetExceeded { incumbent, lower_bound: root_bound }
            }
        }
    }

    fn out_of_time(&mut self) -> bool {
        if !self.aborted {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.aborted = true;
                }
            }
        }
        self.aborted
    }

    /// This unit's optimum under exactly these bans, memoized across the
    /// whole search. `None` means no feasible chain remains; a `None` with
    /// `aborted` set means the budget ran out mid-solve.
    fn unit_solve(&mut self, u: usize, bans: &BTreeSet<Assignment>) -> Option<Rc<UnitSol>> {
        let key = (u, bans.iter().copied().collect::<Vec<_>>());
        if let Some(hit) = self.memo.get(&key) {
            return hit.clone();
        }
        let remaining = match self.deadline {
            Some(d) => {
                let now = Instant::now();
                if now >= d {
                    self.aborted = true;
                    return None;
                }
                Some(d - now)
            }
            None => None,
        };
        let local: Vec<CutConstraint> = bans
            .iter()
            .map(|&(_, j, k)| {
                CutConstraint::new([(UnitId(0), j, k)]).expect("singleton cut is never empty")
            })
            .collect();
        let mut search = SearchState::build(&self.subs[u], &local)
            .expect("per-unit sub-instance and bans are well-formed");
        let entry = match search.run(remaining) {
            MasterOutcome::Optimal(sol) => Some(Rc::new(UnitSol {
                cost: sol.objective,
                assignments: sol
                    .assignments
                    .iter()
                    .map(|&(_, j, k)| (UnitId(u), j, k))
                    .collect(),
            })),
            MasterOutcome::Infeasible => None,
            MasterOutcome::TimeBudgetExceeded { .. } => {
                self.aborted = true;
                return None;
            }
        };
        self.memo.insert(key, entry.clone());
        entry
    }

    /// Exact cost of resolving one violated-cut member: how much its unit's
    /// optimum grows when the member is banned on top of the current bans;
    /// +∞ if the unit has no solution without it. Any completion that ends
    /// up not assigning the member is feasible for the extended ban set, so
    /// this is a true lower bound on what that completion pays in the
    /// member's unit.
    fn resolution_delta(
        &mut self,
        t: Assignment,
        bans: &mut [BTreeSet<Assignment>],
        sols: &[Rc<UnitSol>],
    ) -> f64 {
        let u = t.0 .0;
        bans[u].insert(t);
        let solved = self.unit_solve(u, &bans[u]);
        bans[u].remove(&t);
        match solved {
            Some(s) => (s.cost - sols[u].cost).max(0.0),
            None => f64::INFINITY,
        }
    }

    fn explore(&mut self, bans: &mut Vec<BTreeSet<Assignment>>, sols: &mut Vec<Rc<UnitSol>>) {
        if self.out_of_time() {
            return;
        }
        let cost: f64 = sols.iter().map(|s| s.cost).sum();
        if cost >= self.best_cost - OBJ_TOL {
            return;
        }
        let combined: BTreeSet<Assignment> =
            sols.iter().flat_map(|s| s.assignments.iter().copied()).collect();
        let violated: Vec<usize> =
            (0..self.cuts.len()).filter(|&c| !self.cuts[c].satisfied_by(&combined)).collect();
        let mut day_locs: BTreeSet<LocationId> = BTreeSet::new();
        for &(u, j, _) in &combined {
            let m = self.inst.mo(u, j);
            if self.inst.is_daytime(m.end_hr) {
                day_locs.insert(m.location);
            }
        }
        let cap_ok = day_locs.len() <= self.inst.max_day_locations as usize;
        if violated.is_empty() && cap_ok {
            self.capture(combined, cost);
            return;
        }

        // Every violated cut must still drop a member, costing at least its
        // cheapest resolution; over cuts whose member units are pairwise
        // disjoint the detours land in different units and add up.
        let mut lookahead: BTreeMap<Assignment, f64> = BTreeMap::new();
        let mut penalty = 0.0;
        let mut used: Vec<usize> = Vec::new();
        for &c in &violated {
            let members = self.cuts[c].members();
            let mut units: Vec<usize> = members.iter().map(|m| m.0 .0).collect();
            units.dedup();
            if units.iter().any(|w| used.contains(w)) {
                continue;
            }
            let mut cheapest = f64::INFINITY;
            for &t in members {
                let d = self.resolution_delta(t, bans, sols);
                if self.aborted {
                    return;
                }
                lookahead.insert(t, d);
                if d < cheapest {
                    cheapest = d;
                }
            }
            penalty += cheapest;
            used.extend(units);
        }
        if cost + penalty >= self.best_cost - OBJ_TOL {
            return;
        }

        if let Some(&c) = violated.first() {
            // Resolve the first violated cut: one child per member, banned;
            // cheapest resolutions first so the dive tracks the optimum.
            let mut options: Vec<(f64, Assignment)> = Vec::new();
            for &t in self.cuts[c].members() {
                let d = match lookahead.get(&t) {
                    Some(&d) => d,
                    None => self.resolution_delta(t, bans, sols),
                };
                if self.aborted {
                    return;
                }
                if d.is_finite() {
                    options.push((d, t));
                }
            }
            options.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for (_, t) in options {
                let u = t.0 .0;
                bans[u].insert(t);
                let solved = self.unit_solve(u, &bans[u]);
                if self.aborted {
                    bans[u].remove(&t);
                    return;
                }
                if let Some(s) = solved {
                    let old = std::mem::replace(&mut sols[u], s);
                    self.explore(bans, sols);
                    sols[u] = old;
                }
                bans[u].remove(&t);
                if self.aborted {
                    return;
                }
            }
        } else {
            // Too many day locations open: any feasible completion leaves at
            // least one of them unused by day, so closing each in turn keeps
            // every solution reachable.
            for &l in &day_locs {
                let mut added: Vec<Assignment> = Vec::new();
                for (ui, unit) in self.inst.units.iter().enumerate() {
                    for (ji, mo) in unit.mos.iter().enumerate() {
                        if mo.location == l && self.inst.is_daytime(mo.end_hr) {
                            for ki in 0..self.inst.types.len() {
                                let t = (UnitId(ui), MoIndex(ji), TypeId(ki));
                                if bans[ui].insert(t) {
                                    added.push(t);
                                }
                            }
                        }
                    }
                }
                let affected: BTreeSet<usize> = added.iter().map(|a| a.0 .0).collect();
                let mut replaced: Vec<(usize, Rc<UnitSol>)> = Vec::new();
                let mut feasible = true;
                for &u in &affected {
                    match self.unit_solve(u, &bans[u]) {
                        _ if self.aborted => {
                            feasible = false;
                            break;
                        }
                        Some(s) => replaced.push((u, std::mem::replace(&mut sols[u], s))),
                        None => {
                            feasible = false;
                            break;
                        }
                    }
                }
                if feasible && !self.aborted {
                    self.explore(bans, sols);
                }
                for (u, s) in replaced.into_iter().rev() {
                    sols[u] = s;
                }
                for t in added {
                    bans[t.0 .0].remove(&t);
                }
                if self.aborted {
                    return;
                }
            }
        }
    }

    fn capture(&mut self, assignments: BTreeSet<Assignment>, cost: f64) {
        let mut day_locations = BTreeSet::new();
        let mut night_locations = BTreeSet::new();
        let mut night_count = 0u32;
        for &(u, j, _) in &assignments {
            let m = self.inst.mo(u, j);
            if self.inst.is_daytime(m.end_hr) {
                day_locations.insert(m.location);
            } else {
                night_locations.insert(m.location);
                night_count += 1;
            }
        }
        let total_count = assignments.len() as u32;
        let objective = night_count as f64 + self.inst.epsilon * total_count as f64;
        self.best_cost = cost;
        self.best = Some(MasterSolution {
            assignments,
            day_locations,
            night_locations,
            night_count,
            total_count,
            objective,
        });
    }
}

/// Chronological view of one opportunity inside the solver.
#[derive(Clone, Copy)]
struct Pos {
    mo: MoIndex,
    location: LocationId,
    start_hr: f64,
    end_hr: f64,
    window_min: i64,
    day: bool,
    /// ε for day, 1 + ε for night.
    assign_cost: f64,
}

/// Backward DP over one unit's chronological positions for one type:
/// `dp[p]` is the cheapest valid continuation after an activity at `p`
/// (positions are start-ascending and successors start strictly later, so
/// a reverse sweep settles everything), `start` the cheapest full chain
/// from the unit's initial ageing state. `banned` (sorted) excludes
/// positions from hosting the type. Chains only run through windows the
/// type fits on its own; capacity shared with other types, multi-member
/// cuts and the location cap are ignored, so both costs are admissible
/// lower bounds.
fn chain_dp(
    pos: &[Pos],
    interval_hr: f64,
    duration_min: i64,
    initial_age_hr: f64,
    horizon_hr: f64,
    banned: &[usize],
) -> (Vec<f64>, f64) {
    let usable =
        |q: usize| duration_min <= pos[q].window_min && banned.binary_search(&q).is_err();
    let mut dp = vec![0.0f64; pos.len()];
    for p in (0..pos.len()).rev() {
        if pos[p].end_hr + interval_hr > horizon_hr {
            dp[p] = 0.0;
            continue;
        }
        let mut best = f64::INFINITY;
        for q in 0..pos.len() {
            if usable(q)
                && pos[p].end_hr < pos[q].start_hr
                && pos[q].start_hr <= pos[p].end_hr + interval_hr
            {
                let cand = pos[q].assign_cost + dp[q];
                if cand < best {
                    best = cand;
                }
            }
        }
        dp[p] = best;
    }
    let deadline = interval_hr + initial_age_hr;
    let mut start = f64::INFINITY;
    for (q, pq) in pos.iter().enumerate() {
        if usable(q) && pq.start_hr <= deadline {
            let cand = pq.assign_cost + dp[q];
            if cand < start {
                start = cand;
            }
        }
    }
    (dp, start)
}

/// Where an open covering obligation is anchored.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Anchor {
    /// The initial obligation from the unit's ageing state: satisfied by
    /// any activity starting no later than `deadline_hr`.
    Start,
    /// An assignment at this chronological position: satisfied by an
    /// activity starting strictly after its end and no later than
    /// `deadline_hr`.
    Pos(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Obligation {
    anchor: Anchor,
    /// Latest admissible start of the satisfying activity.
    deadline_hr: f64,
}

struct CutState {
    size: u32,
    assigned: u32,
}

struct SearchState<'a> {
    inst: &'a Instance,
    /// Per unit, opportunities in chronological order.
    positions: Vec<Vec<Pos>>,
    /// Cheapest completion cost per (unit, type) given the last activity
    /// sits at a chronological position; +∞ where no valid chain exists.
    dp_pos: Vec<Vec<Vec<f64>>>,
    /// Cheapest cost to start and complete the (unit, type) chain.
    dp_start: Vec<Vec<f64>>,
    /// Σ over units ≥ u of Σ_k dp_start — the untouched-units bound.
    future_bound: Vec<f64>,
    cut_index: BTreeMap<Assignment, Vec<usize>>,
    cut_states: Vec<CutState>,
    // --- mutable search state ---
    obligations: Vec<Vec<Vec<Obligation>>>,
    remaining_min: Vec<Vec<i64>>,
    day_loc_uses: Vec<u32>,
    open_day_locations: u32,
    current: Vec<(UnitId, MoIndex, TypeId)>,
    cost: f64,
    best: Option<MasterSolution>,
    best_cost: f64,
    // --- budget bookkeeping ---
    deadline: Option<Instant>,
    node_counter: u32,
    aborted: bool,
}

impl<'a> SearchState<'a> {
    fn build(inst: &'a Instance, cuts: &[CutConstraint]) -> Result<Self, MasterError> {
        let n_types = inst.types.len();
        let positions: Vec<Vec<Pos>> = inst
            .units
            .iter()
            .map(|u| {
                let mut order: Vec<usize> = (0..u.mos.len()).collect();
                order.sort_by(|&a, &b| {
                    u.mos[a]
                        .start_hr
                        .total_cmp(&u.mos[b].start_hr)
                        .then(u.mos[a].end_hr.total_cmp(&u.mos[b].end_hr))
                        .then(a.cmp(&b))
                });
                order
                    .into_iter()
                    .map(|j| {
                        let m = &u.mos[j];
                        let day = inst.is_daytime(m.end_hr);
                        Pos {
                            mo: MoIndex(j),
                            location: m.location,
                            start_hr: m.start_hr,
                            end_hr: m.end_hr,
                            window_min: hours_to_minutes(m.end_hr)
                                - hours_to_minutes(m.start_hr),
                            day,
                            assign_cost: if day { inst.epsilon } else { 1.0 + inst.epsilon },
                        }
                    })
                    .collect()
            })
            .collect();

        let mut cut_index: BTreeMap<Assignment, Vec<usize>> = BTreeMap::new();
        let mut cut_states = Vec::with_capacity(cuts.len());
        for (ci, cut) in cuts.iter().enumerate() {
            for &(u, j, k) in cut.members() {
                if u.0 >= inst.units.len()
                    || j.0 >= inst.units[u.0].mos.len()
                    || k.0 >= n_types
                {
                    return Err(MasterError::UnknownCutMember(u, j, k));
                }
                cut_index.entry((u, j, k)).or_default().push(ci);
            }
            cut_states.push(CutState { size: cut.len() as u32, assigned: 0 });
        }

        // Chronological position of each opportunity index, per unit.
        let pos_of_mo: Vec<Vec<usize>> = positions
            .iter()
            .map(|ps| {
                let mut map = vec![0usize; ps.len()];
                for (pidx, p) in ps.iter().enumerate() {
                    map[p.mo.0] = pidx;
                }
                map
            })
            .collect();
        // A single-member cut forbids its assignment outright, so its
        // position drops out of the (unit, type) chains; the DP then bounds
        // and guides exactly under such bans.
        let mut banned_pos: Vec<Vec<Vec<usize>>> =
            (0..inst.units.len()).map(|_| vec![Vec::new(); n_types]).collect();
        for cut in cuts.iter().filter(|c| c.len() == 1) {
            let &(u, j, k) = cut.members().first().expect("singleton cut has a member");
            banned_pos[u.0][k.0].push(pos_of_mo[u.0][j.0]);
        }
        for unit_bans in &mut banned_pos {
            for bans in unit_bans {
                bans.sort_unstable();
                bans.dedup();
            }
        }

        let mut dp_pos: Vec<Vec<Vec<f64>>> = Vec::with_capacity(inst.units.len());
        let mut dp_start: Vec<Vec<f64>> = Vec::with_capacity(inst.units.len());
        for (ui, unit) in inst.units.iter().enumerate() {
            let mut unit_dp_pos = Vec::with_capacity(n_types);
            let mut unit_dp_start = Vec::with_capacity(n_types);
            for (ki, ty) in inst.types.iter().enumerate() {
                let (dp, start) = chain_dp(
                    &positions[ui],
                    ty.interval_hr,
                    ty.duration_min as i64,
                    unit.initial_age_hr[ki],
                    inst.horizon_hr,
                    &banned_pos[ui][ki],
                );
                unit_dp_pos.push(dp);
                unit_dp_start.push(start);
            }
            dp_pos.push(unit_dp_pos);
            dp_start.push(unit_dp_start);
        }
        let mut future_bound = vec![0.0f64; inst.units.len() + 1];
        for u in (0..inst.units.len()).rev() {
            future_bound[u] = future_bound[u + 1] + dp_start[u].iter().sum::<f64>();
        }

        let remaining_min =
            positions.iter().map(|ps| ps.iter().map(|p| p.window_min).collect()).collect();
        let obligations =
            (0..inst.units.len()).map(|_| vec![Vec::new(); n_types]).collect();
        Ok(SearchState {
            inst,
            positions,
            dp_pos,
            dp_start,
            future_bound,
            cut_index,
            cut_states,
            obligations,
            remaining_min,
            day_loc_uses: vec![0; inst.locations.len()],
            open_day_locations: 0,
            current: Vec::new(),
            cost: 0.0,
            best: None,
            best_cost: f64::INFINITY,
            deadline: None,
            node_counter: 0,
            aborted: false,
        })
    }

    fn run(&mut self, time_budget: Option<Duration>) -> MasterOutcome {
        let root_bound = self.future_bound[0];
        if root_bound.is_infinite() {
            return MasterOutcome::Infeasible;
        }
        self.deadline = time_budget.map(|b| Instant::now() + b);
        if let Some(d) = self.deadline {
            if Instant::now() >= d {
                return MasterOutcome::TimeBudgetExceeded {
                    incumbent: None,
                    lower_bound: root_bound,
                };
            }
        }
        self.enter_unit(0);
        match (self.aborted, self.best.take()) {
            (false, Some(sol)) => MasterOutcome::Optimal(sol),
            (false, None) => MasterOutcome::Infeasible,
            (true, incumbent) => {
                MasterOutcome::TimeBudgetExceeded { incumbent, lower_bound: root_bound }
            }
        }
    }

    fn out_of_time(&mut self) -> bool {
        if self.aborted {
            return true;
        }
        if let Some(d) = self.deadline {
            self.node_counter = self.node_counter.wrapping_add(1);
            if self.node_counter % 4096 == 0 && Instant::now() >= d {
                self.aborted = true;
            }
        }
        self.aborted
    }

    /// Per-type bound for the unit being decided: each open obligation
    /// needs at least its cheapest completion; with several open at once
    /// any one of them is still a valid lower bound, so take the max.
    fn unit_obligation_bound(&self, u: usize) -> f64 {
        let mut total = 0.0;
        for k in 0..self.inst.types.len() {
            let mut worst: f64 = 0.0;
            for ob in &self.obligations[u][k] {
                let dp = match ob.anchor {
                    Anchor::Start => self.dp_start[u][k],
                    Anchor::Pos(p) => self.dp_pos[u][k][p],
                };
                if dp > worst {
                    worst = dp;
                }
            }
            total += worst;
        }
        total
    }

    fn enter_unit(&mut self, u: usize) {
        if u == self.inst.units.len() {
            self.capture_leaf();
            return;
        }
        // Open the initial covering obligation for every type; the deadline
        // bounds the start of the first activity of that type.
        for (k, ty) in self.inst.types.iter().enumerate() {
            self.obligations[u][k].push(Obligation {
                anchor: Anchor::Start,
                deadline_hr: ty.interval_hr + self.inst.units[u].initial_age_hr[k],
            });
        }
        self.at_position(u, 0);
        for k in 0..self.inst.types.len() {
            let idx = self.obligations[u][k]
                .iter()
                .position(|ob| ob.anchor == Anchor::Start)
                .expect("initial obligation must survive until unit unwind");
            self.obligations[u][k].swap_remove(idx);
            debug_assert!(
                self.obligations[u][k].is_empty(),
                "obligation state must unwind symmetrically"
            );
        }
    }

    fn at_position(&mut self, u: usize, p: usize) {
        if self.out_of_time() {
            return;
        }
        if p == self.positions[u].len() {
            // Every obligation must have been met inside the unit.
            if self.obligations[u].iter().all(|obs| obs.is_empty()) {
                self.enter_unit(u + 1);
            }
            return;
        }
        // An obligation whose deadline lies before this start can no longer
        // be met — all remaining positions start here or later.
        let start = self.positions[u][p].start_hr;
        for obs in &self.obligations[u] {
            if obs.iter().any(|ob| ob.deadline_hr < start) {
                return;
            }
        }
        self.decide(u, p, 0);
    }

    /// True when assigning type `k` at position `p` continues some open
    /// obligation's cheapest completion chain. Guides branch order only;
    /// correctness never depends on it.
    fn on_cheapest_path(&self, u: usize, p: usize, k: usize) -> bool {
        let pos = &self.positions[u][p];
        if (self.inst.types[k].duration_min as i64) > pos.window_min {
            return false;
        }
        let via = pos.assign_cost + self.dp_pos[u][k][p];
        self.obligations[u][k].iter().any(|ob| {
            let (reachable, completion) = match ob.anchor {
                Anchor::Start => (pos.start_hr <= ob.deadline_hr, self.dp_start[u][k]),
                Anchor::Pos(q) => (
                    self.positions[u][q].end_hr < pos.start_hr
                        && pos.start_hr <= ob.deadline_hr,
                    self.dp_pos[u][k][q],
                ),
            };
            reachable && via <= completion + OBJ_TOL
        })
    }

    fn decide(&mut self, u: usize, p: usize, k: usize) {
        if self.out_of_time() {
            return;
        }
        if k == self.inst.types.len() {
            self.at_position(u, p + 1);
            return;
        }
        let bound = self.cost + self.unit_obligation_bound(u) + self.future_bound[u + 1];
        if bound >= self.best_cost - OBJ_TOL {
            return;
        }
        if self.on_cheapest_path(u, p, k) {
            self.try_assign(u, p, k);
            self.decide(u, p, k + 1);
        } else {
            self.decide(u, p, k + 1);
            self.try_assign(u, p, k);
        }
    }

    fn try_assign(&mut self, u: usize, p: usize, k: usize) {
        if self.aborted {
            return;
        }
        let duration = self.inst.types[k].duration_min as i64;
        if duration > self.remaining_min[u][p] {
            return;
        }
        let Pos { mo, location, start_hr, end_hr, day, assign_cost, .. } = self.positions[u][p];
        let loc = location.0;
        if day
            && self.day_loc_uses[loc] == 0
            && self.open_day_locations >= self.inst.max_day_locations
        {
            return;
        }
        let triple = (UnitId(u), mo, TypeId(k));
        if let Some(cut_ids) = self.cut_index.get(&triple) {
            if cut_ids.iter().any(|&c| self.cut_states[c].assigned + 1 == self.cut_states[c].size)
            {
                return;
            }
            let ids: Vec<usize> = cut_ids.clone();
            for c in ids {
                self.cut_states[c].assigned += 1;
            }
        }
        self.remaining_min[u][p] -= duration;
        if day {
            if self.day_loc_uses[loc] == 0 {
                self.open_day_locations += 1;
            }
            self.day_loc_uses[loc] += 1;
        }
        // Close every obligation this activity satisfies, then open the
        // follow-up obligation if the interval ends inside the horizon.
        let interval = self.inst.types[k].interval_hr;
        let mut closed: Vec<Obligation> = Vec::new();
        self.obligations[u][k].retain(|ob| {
            let satisfied = match ob.anchor {
                Anchor::Start => start_hr <= ob.deadline_hr,
                Anchor::Pos(q) => {
                    let anchor_end = self.positions[u][q].end_hr;
                    anchor_end < start_hr && start_hr <= ob.deadline_hr
                }
            };
            if satisfied {
                closed.push(*ob);
            }
            !satisfied
        });
        let opened = end_hr + interval <= self.inst.horizon_hr;
        if opened {
            self.obligations[u][k]
                .push(Obligation { anchor: Anchor::Pos(p), deadline_hr: end_hr + interval });
        }
        self.cost += assign_cost;
        self.current.push(triple);

        self.decide(u, p, k + 1);

        self.current.pop();
        self.cost -= assign_cost;
        if opened {
            // Deeper frames may have closed and reinserted other entries, so
            // the vector's order is not LIFO; remove by identity instead.
            let idx = self.obligations[u][k]
                .iter()
                .position(|ob| ob.anchor == Anchor::Pos(p))
                .expect("own obligation must still be open when unwinding");
            self.obligations[u][k].swap_remove(idx);
        }
        self.obligations[u][k].extend(closed);
        if day {
            self.day_loc_uses[loc] -= 1;
            if self.day_loc_uses[loc] == 0 {
                self.open_day_locations -= 1;
            }
        }
        self.remaining_min[u][p] += duration;
        if let Some(cut_ids) = self.cut_index.get(&triple) {
            let ids: Vec<usize> = cut_ids.clone();
            for c in ids {
                self.cut_states[c].assigned -= 1;
            }
        }
    }

    fn capture_leaf(&mut self) {
        if self.cost >= self.best_cost - OBJ_TOL {
            return;
        }
        let assignments: BTreeSet<Assignment> = self.current.iter().copied().collect();
        let mut day_locations = BTreeSet::new();
        let mut night_locations = BTreeSet::new();
        let mut night_count = 0u32;
        for &(uid, mo, _) in &assignments {
            let m = self.inst.mo(uid, mo);
            if self.inst.is_daytime(m.end_hr) {
                day_locations.insert(m.location);
            } else {
                night_locations.insert(m.location);
                night_count += 1;
            }
        }
        let total_count = assignments.len() as u32;
        let objective = night_count as f64 + self.inst.epsilon * total_count as f64;
        self.best_cost = self.cost;
        self.best = Some(MasterSolution {
            assignments,
            day_locations,
            night_locations,
            night_count,
            total_count,
            objective,
        });
    }
}
