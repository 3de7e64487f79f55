//! The iterative decomposition driver. Each iteration solves the master
//! under the accumulated cuts, re-derives the per-shift jobs, checks every
//! in-scope shift against the team capacity, and turns each violated shift
//! into fresh cuts. It stops as soon as an iteration adds no cut — the
//! master solution then satisfies every shift — or when the time limit is
//! reached at the top of the loop (an iteration in flight always
//! completes).
//!
//! By default only daytime shifts are capacity-checked: night capacity is
//! treated as unconstrained, which also guarantees the master stays
//! feasible under any cut accumulation as long as the all-night assignment
//! exists. Scope is configurable.
//!
//! Per-shift feasibility checks and cut generation are independent across
//! shifts and run through the order-preserving parallel map, so results —
//! including the random draws, which are seeded per (iteration, shift) —
//! do not depend on the build's thread count.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cuts::{self, CutError, CutKind, CutStrategy, ExactOracle};
use crate::instance::Instance;
use crate::master::{self, CutConstraint, MasterError, MasterOutcome, MasterSolution};
use crate::par;
use crate::scheduling::{self, ScheduleError, SchedulingOutcome, ShiftSchedule};
use crate::shifts::{build_jobs, Job, JobBuildError, ShiftKey, ShiftWindow};

/// Which shifts are capacity-constrained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShiftScope {
    /// Every daytime shift (the default posture).
    AllDayShifts,
    /// Day and night shifts alike.
    AllShifts,
    /// Exactly these shifts.
    Shifts(BTreeSet<ShiftKey>),
}

impl ShiftScope {
    pub fn contains(&self, key: &ShiftKey) -> bool {
        match self {
            ShiftScope::AllDayShifts => key.window == ShiftWindow::Day,
            ShiftScope::AllShifts => true,
            ShiftScope::Shifts(set) => set.contains(key),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Optimal,
    TimeLimit,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Optimal => "OPTIMAL",
            RunStatus::TimeLimit => "TIME_LIMIT",
        })
    }
}

/// Telemetry for one iteration of the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration counter.
    pub iteration: u32,
    pub master_objective: f64,
    pub night_count: u32,
    pub total_count: u32,
    /// In-scope shifts whose jobs exceed the team capacity.
    pub violated_shifts: u32,
    /// New (deduplicated) cuts this iteration contributed.
    pub cuts_added: u32,
    /// Total cuts accumulated after this iteration.
    pub cumulative_cuts: u32,
    pub master_secs: f64,
    pub capacity_check_secs: f64,
    pub cut_generation_secs: f64,
    pub other_secs: f64,
}

/// Final state of a run: last master solution, exact per-shift schedules
/// for it, and the full iteration history.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub status: RunStatus,
    pub final_solution: MasterSolution,
    pub schedules: BTreeMap<ShiftKey, ShiftSchedule>,
    pub history: Vec<IterationRecord>,
    pub cuts: Vec<CutConstraint>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Master(#[from] MasterError),
    #[error("master became infeasible under {} cuts at iteration {iteration}", cuts.len())]
    MasterInfeasible { iteration: u32, cuts: Vec<CutConstraint> },
    #[error(transparent)]
    Jobs(#[from] JobBuildError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Cuts(#[from] CutError),
    #[error("time limit must be positive")]
    ZeroTimeLimit,
    #[error("time limit expired before the first master solve completed")]
    TimeLimitTooTight,
}

/// Seed for one shift's cut generation: decorrelates iterations and shifts
/// while staying reproducible from the strategy's base seed.
fn shift_seed(base: u64, iteration: u32, shift_index: usize) -> u64 {
    base.wrapping_add((iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((shift_index as u64).wrapping_mul(0x1_0000_0001_B3))
}

/// Runs the full loop. See [`run_with_observer`] for incremental telemetry.
pub fn run(
    inst: &Instance,
    scope: &ShiftScope,
    strategy: &CutStrategy,
    time_limit: Duration,
) -> Result<RunResult, RunError> {
    run_with_observer(inst, scope, strategy, time_limit, |_| {})
}

/// As [`run`], invoking `observer` with each iteration's record the moment
/// the iteration finishes, so interrupted callers retain partial history.
pub fn run_with_observer(
    inst: &Instance,
    scope: &ShiftScope,
    strategy: &CutStrategy,
    time_limit: Duration,
    mut observer: impl FnMut(&IterationRecord),
) -> Result<RunResult, RunError> {
    if time_limit.is_zero() {
        return Err(RunError::ZeroTimeLimit);
    }
    let started = Instant::now();
    let teams = inst.teams_per_shift;
    let mut cuts: Vec<CutConstraint> = Vec::new();
    let mut known_cuts: BTreeSet<CutConstraint> = BTreeSet::new();
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut last: Option<(MasterSolution, BTreeMap<ShiftKey, Vec<Job>>)> = None;
    let mut status = RunStatus::TimeLimit;
    let mut iteration = 0u32;

    while started.elapsed() < time_limit {
        iteration += 1;
        let iter_started = Instant::now();

        let master_started = Instant::now();
        let budget = time_limit.saturating_sub(started.elapsed());
        let solution = match master::solve(inst, &cuts, Some(budget))? {
            MasterOutcome::Optimal(sol) => sol,
            MasterOutcome::Infeasible => {
                return Err(RunError::MasterInfeasible { iteration, cuts })
            }
            // Exactness over partial results: an interrupted master solve
            // contributes nothing, the run ends on the previous iteration.
            MasterOutcome::TimeBudgetExceeded { .. } => break,
        };
        let master_secs = master_started.elapsed().as_secs_f64();

        if let Some(prev) = history.last() {
            assert!(
                solution.objective >= prev.master_objective - 1e-9,
                "master objective regressed: {} after {}",
                solution.objective,
                prev.master_objective
            );
        }
        let clean = master::check_solution(inst, &cuts, &solution);
        assert!(clean.is_empty(), "master solution violates its own constraints: {clean:?}");

        let check_started = Instant::now();
        let jobs_by_shift = build_jobs(inst, &solution.assignments)?;
        let scoped: Vec<(ShiftKey, Vec<Job>)> = jobs_by_shift
            .iter()
            .filter(|(key, _)| scope.contains(key))
            .map(|(key, jobs)| (*key, jobs.clone()))
            .collect();
        let feasible: Vec<Result<bool, ScheduleError>> =
            par::map_items(&scoped, |(_, jobs)| scheduling::is_feasible(jobs, teams));
        let mut violated: Vec<(ShiftKey, Vec<Job>)> = Vec::new();
        for ((key, jobs), ok) in scoped.into_iter().zip(feasible) {
            if !ok? {
                violated.push((key, jobs));
            }
        }
        let capacity_check_secs = check_started.elapsed().as_secs_f64();

        let cut_started = Instant::now();
        let indexed: Vec<(usize, &Vec<Job>)> =
            violated.iter().enumerate().map(|(i, (_, jobs))| (i, jobs)).collect();
        let generated: Vec<Result<Vec<cuts::CutSet>, CutError>> =
            par::map_items(&indexed, |&(index, jobs)| {
                let seeded = strategy.with_seed(shift_seed(
                    strategy.rng_seed,
                    iteration,
                    index,
                ));
                let mut oracle = ExactOracle::new(teams);
                match cuts::generate(&seeded, jobs, &mut oracle) {
                    Err(CutError::UnsupportedTeams(_)) => {
                        // The flow relaxation only models one team; degrade
                        // to the heuristic with the same budget and seed.
                        let mut heuristic = seeded;
                        heuristic.kind = CutKind::BinarySearchHeuristic;
                        cuts::generate(&heuristic, jobs, &mut oracle)
                    }
                    other => other,
                }
            });
        let mut cuts_added = 0u32;
        for ((_, jobs), result) in violated.iter().zip(generated) {
            let job_types: BTreeMap<_, _> =
                jobs.iter().map(|j| (j.id, &j.types)).collect();
            for cut_set in result? {
                let members = cut_set.iter().flat_map(|id| {
                    job_types[id].iter().map(move |&ty| (id.unit, id.mo, ty))
                });
                let cut = CutConstraint::new(members)
                    .expect("cut generation never emits empty cuts");
                if known_cuts.insert(cut.clone()) {
                    cuts.push(cut);
                    cuts_added += 1;
                }
            }
        }
        let cut_generation_secs = cut_started.elapsed().as_secs_f64();

        let iter_secs = iter_started.elapsed().as_secs_f64();
        let record = IterationRecord {
            iteration,
            master_objective: solution.objective,
            night_count: solution.night_count,
            total_count: solution.total_count,
            violated_shifts: violated.len() as u32,
            cuts_added,
            cumulative_cuts: cuts.len() as u32,
            master_secs,
            capacity_check_secs,
            cut_generation_secs,
            other_secs: (iter_secs - master_secs - capacity_check_secs - cut_generation_secs)
                .max(0.0),
        };
        observer(&record);
        history.push(record);
        last = Some((solution, jobs_by_shift));

        if cuts_added == 0 {
            debug_assert!(violated.is_empty(), "no cuts can only mean no violations");
            status = RunStatus::Optimal;
            break;
        }
    }

    let Some((final_solution, jobs_by_shift)) = last else {
        return Err(RunError::TimeLimitTooTight);
    };
    let mut schedules = BTreeMap::new();
    for (key, jobs) in &jobs_by_shift {
        let cap = jobs.len().max(1) as u32;
        match scheduling::min_teams(jobs, cap)? {
            SchedulingOutcome::Feasible(schedule) => {
                schedules.insert(*key, schedule);
            }
            SchedulingOutcome::Infeasible => {
                unreachable!("one team per job always schedules")
            }
        }
    }
    Ok(RunResult { status, final_solution, schedules, history, cuts })
}

/// Number of in-scope shifts of `solution` whose jobs cannot be handled by
/// the instance's team capacity.
pub fn count_violations(
    solution: &MasterSolution,
    inst: &Instance,
    scope: &ShiftScope,
) -> Result<u32, RunError> {
    let jobs_by_shift = build_jobs(inst, &solution.assignments)?;
    let mut violations = 0;
    for (key, jobs) in &jobs_by_shift {
        if scope.contains(key) && !scheduling::is_feasible(jobs, inst.teams_per_shift)? {
            violations += 1;
        }
    }
    Ok(violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{
        LocationId, MaintenanceOpportunity, MaintenanceType, Unit,
    };

    /// Two units whose only day opportunities collide at one location with
    /// minimum-length windows, plus night backbones, so iteration 0 is
    /// violated and the optimum moves one unit into the night.
    fn conflicted_instance() -> Instance {
        let mo = |l: usize, s: f64, e: f64| MaintenanceOpportunity {
            location: LocationId(l),
            start_hr: s,
            end_hr: e,
        };
        Instance {
            horizon_hr: 48.0,
            locations: vec!["west".into(), "east".into()],
            types: vec![MaintenanceType { id: 1, duration_min: 30, interval_hr: 48.0 }],
            units: vec![
                Unit {
                    name: "u0".into(),
                    mos: vec![mo(0, 9.0, 9.5), mo(0, 21.0, 23.0)],
                    initial_age_hr: vec![0.0],
                },
                Unit {
                    name: "u1".into(),
                    mos: vec![mo(0, 9.0, 9.5), mo(1, 21.0, 23.0)],
                    initial_age_hr: vec![0.0],
                },
            ],
            day_start_hr: 7.0,
            night_start_hr: 19.0,
            max_day_locations: 5,
            teams_per_shift: 1,
            epsilon: 0.001,
        }
    }

    /// Like [`conflicted_instance`] but with non-overlapping day windows,
    /// so the first master solution is already capacity-feasible.
    fn peaceful_instance() -> Instance {
        let mut inst = conflicted_instance();
        inst.units[1].mos[0].start_hr = 10.0;
        inst.units[1].mos[0].end_hr = 10.5;
        inst
    }

    #[test]
    fn already_feasible_solution_terminates_in_one_iteration() {
        let inst = peaceful_instance();
        let result = run(
            &inst,
            &ShiftScope::AllDayShifts,
            &CutStrategy::naive(),
            Duration::from_secs(60),
        )
        .unwrap();
        assert_eq!(result.status, RunStatus::Optimal);
        assert_eq!(result.history.len(), 1);
        assert_eq!(result.history[0].violated_shifts, 0);
        assert_eq!(result.history[0].cuts_added, 0);
        assert_eq!(result.final_solution.night_count, 0);
        assert!(result.cuts.is_empty());
    }

    #[test]
    fn conflict_is_resolved_and_objective_is_monotone() {
        let inst = conflicted_instance();
        for strategy in [
            CutStrategy::naive(),
            CutStrategy::basic(2, 11),
            CutStrategy::binary_search(2, 11),
            CutStrategy::min_cut(),
        ] {
            let result =
                run(&inst, &ShiftScope::AllDayShifts, &strategy, Duration::from_secs(60))
                    .unwrap();
            assert_eq!(result.status, RunStatus::Optimal, "strategy {strategy}");
            let first = result.history.first().unwrap();
            let last = result.history.last().unwrap();
            assert_eq!(first.violated_shifts, 1, "strategy {strategy}");
            assert_eq!(last.violated_shifts, 0);
            assert!(first.master_objective <= last.master_objective);
            // One unit keeps the day slot, the other moves to its night MO.
            assert_eq!(result.final_solution.night_count, 1, "strategy {strategy}");
            assert_eq!(
                count_violations(&result.final_solution, &inst, &ShiftScope::AllDayShifts)
                    .unwrap(),
                0
            );
        }
    }

    #[test]
    fn night_shifts_are_out_of_scope_by_default() {
        // Both units forced into the same night shift with colliding
        // minimal windows: a violation only if nights are in scope.
        let mo = |l: usize, s: f64, e: f64| MaintenanceOpportunity {
            location: LocationId(l),
            start_hr: s,
            end_hr: e,
        };
        let mut inst = conflicted_instance();
        inst.units[0].mos = vec![mo(0, 21.0, 21.5)];
        inst.units[1].mos = vec![mo(0, 21.0, 21.5)];
        let day_result = run(
            &inst,
            &ShiftScope::AllDayShifts,
            &CutStrategy::naive(),
            Duration::from_secs(60),
        )
        .unwrap();
        assert_eq!(day_result.status, RunStatus::Optimal);
        assert_eq!(day_result.history.len(), 1);
        // The same run with nights in scope cannot ever satisfy the shift:
        // both jobs are pinned to the identical half-hour window, so the
        // master goes infeasible once both single-MO options are cut off.
        let err = run(
            &inst,
            &ShiftScope::AllShifts,
            &CutStrategy::naive(),
            Duration::from_secs(60),
        )
        .unwrap_err();
        assert!(matches!(err, RunError::MasterInfeasible { .. }));
    }

    #[test]
    fn observer_streams_records_incrementally() {
        let inst = conflicted_instance();
        let mut seen: Vec<u32> = Vec::new();
        let result = run_with_observer(
            &inst,
            &ShiftScope::AllDayShifts,
            &CutStrategy::min_cut(),
            Duration::from_secs(60),
            |rec| seen.push(rec.iteration),
        )
        .unwrap();
        assert_eq!(seen.len(), result.history.len());
        assert_eq!(seen, (1..=seen.len() as u32).collect::<Vec<_>>());
    }

    #[test]
    fn schedules_cover_every_shift_of_the_final_solution() {
        let inst = conflicted_instance();
        let result = run(
            &inst,
            &ShiftScope::AllDayShifts,
            &CutStrategy::min_cut(),
            Duration::from_secs(60),
        )
        .unwrap();
        let jobs_by_shift = build_jobs(&inst, &result.final_solution.assignments).unwrap();
        assert_eq!(
            result.schedules.keys().collect::<Vec<_>>(),
            jobs_by_shift.keys().collect::<Vec<_>>()
        );
        for (key, schedule) in &result.schedules {
            assert_eq!(
                schedule.teams.iter().map(|t| t.len()).sum::<usize>(),
                jobs_by_shift[key].len(),
                "every job of shift {key:?} is scheduled exactly once"
            );
        }
    }

    #[test]
    fn zero_time_limit_is_rejected() {
        let inst = peaceful_instance();
        let err = run(
            &inst,
            &ShiftScope::AllDayShifts,
            &CutStrategy::naive(),
            Duration::ZERO,
        )
        .unwrap_err();
        assert!(matches!(err, RunError::ZeroTimeLimit));
    }

    #[test]
    fn seed_derivation_separates_iterations_and_shifts() {
        let a = shift_seed(42, 1, 0);
        let b = shift_seed(42, 1, 1);
        let c = shift_seed(42, 2, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(b, c);
        assert_eq!(shift_seed(42, 1, 0), a);
    }
}
