//! Exact per-shift team scheduling: given the jobs of one maintenance shift,
//! find the minimum number of teams that can execute all of them.
//!
//! Each job occupies one team contiguously for `duration_min` minutes inside
//! `[release_min, deadline_min]`; teams are identical and a team works one
//! job at a time. Infeasibility (no schedule with the allowed number of
//! teams) is an ordinary outcome, not an error — the Benders driver turns it
//! into cuts.
//!
//! The search is chronological backtracking: grow the schedule one job at a
//! time, always placing the next job on the earliest-available team and
//! branching over which job that is, in earliest-deadline order. Any
//! feasible schedule can be replayed in start-time order onto
//! earliest-available teams without violating deadlines, so restricting
//! placements this way loses no solutions. Dead states (a pending job that
//! can no longer meet its deadline anywhere) are pruned, and failed
//! (remaining-set, team-availability) states are memoized.
//!
//! Everything here is integer minutes; the types make fractional input
//! unrepresentable.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;
use crate::shifts::{Job, JobId};

/// One placed job in a shift schedule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledJob {
    pub job: Job,
    pub start_min: i64,
    pub end_min: i64,
}

/// A complete schedule for one shift: per team, jobs in execution order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftSchedule {
    pub teams_used: u32,
    pub teams: Vec<Vec<ScheduledJob>>,
}

/// Result of the minimum-team search. `Infeasible` means even the maximum
/// allowed number of teams cannot execute the jobs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchedulingOutcome {
    Feasible(ShiftSchedule),
    Infeasible,
}

impl SchedulingOutcome {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, SchedulingOutcome::Infeasible)
    }

    pub fn teams_used(&self) -> Option<u32> {
        match self {
            SchedulingOutcome::Feasible(s) => Some(s.teams_used),
            SchedulingOutcome::Infeasible => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("job {id} is malformed: window [{release_min},{deadline_min}] vs duration {duration_min}")]
    MalformedJob { id: JobId, release_min: i64, deadline_min: i64, duration_min: i64 },
    #[error("shift has {0} jobs; at most 64 are supported")]
    TooManyJobs(usize),
    #[error("max_teams must be at least 1")]
    NoTeams,
}

/// Upper bound on useful teams per shift: no more are ever needed than
/// `ceil(shift_minutes / shortest_duration)`, and never more than one per
/// job. Returns 0 for an empty job set.
pub fn moment_bound(jobs: &[Job], inst: &Instance) -> u32 {
    if jobs.is_empty() {
        return 0;
    }
    let shift_min = ((inst.night_start_hr - inst.day_start_hr) * 60.0).round() as i64;
    let min_dur = inst.types.iter().map(|t| t.duration_min as i64).min().unwrap_or(1).max(1);
    let by_moments = (shift_min + min_dur - 1) / min_dur;
    (by_moments.max(1) as u32).min(jobs.len() as u32)
}

/// Feasibility only: can `teams` identical teams execute all jobs? Cheaper
/// than [`min_teams`] because no canonical schedule is built; this is the
/// oracle the cut heuristics hammer.
pub fn is_feasible(jobs: &[Job], teams: u32) -> Result<bool, ScheduleError> {
    if teams == 0 {
        return Ok(jobs.is_empty());
    }
    let lite = validate(jobs)?;
    let mut search = Search::new(&lite, teams as usize);
    Ok(search.feasible(full_mask(lite.len())))
}

/// Minimum teams needed, trying 1, 2, … up to `max_teams`. On success the
/// returned schedule is canonical: among all optimal schedules it is the
/// lexicographically smallest by (team, start, job id), so identical inputs
/// always render identically.
pub fn min_teams(jobs: &[Job], max_teams: u32) -> Result<SchedulingOutcome, ScheduleError> {
    if max_teams == 0 {
        return Err(ScheduleError::NoTeams);
    }
    if jobs.is_empty() {
        return Ok(SchedulingOutcome::Feasible(ShiftSchedule { teams_used: 0, teams: vec![] }));
    }
    let lite = validate(jobs)?;
    for n in 1..=max_teams as usize {
        let mut search = Search::new(&lite, n);
        if search.feasible(full_mask(lite.len())) {
            let teams = canonical(&lite, n, jobs);
            return Ok(SchedulingOutcome::Feasible(ShiftSchedule {
                teams_used: n as u32,
                teams,
            }));
        }
    }
    Ok(SchedulingOutcome::Infeasible)
}

#[derive(Debug, Clone, Copy)]
struct Lite {
    r: i64,
    t: i64,
    v: i64,
}

/// Sentinel availability for a team that has not worked yet: earlier than
/// any release, far from overflow.
const FRESH: i64 = i64::MIN / 4;

fn validate(jobs: &[Job]) -> Result<Vec<Lite>, ScheduleError> {
    if jobs.len() > 64 {
        return Err(ScheduleError::TooManyJobs(jobs.len()));
    }
    jobs.iter()
        .map(|j| {
            if j.duration_min < 1 || j.deadline_min - j.release_min < j.duration_min {
                Err(ScheduleError::MalformedJob {
                    id: j.id,
                    release_min: j.release_min,
                    deadline_min: j.deadline_min,
                    duration_min: j.duration_min,
                })
            } else {
                Ok(Lite { r: j.release_min, t: j.deadline_min, v: j.duration_min })
            }
        })
        .collect()
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

struct Search<'a> {
    jobs: &'a [Lite],
    /// Indices in earliest-deadline order, the branching order.
    edf: Vec<usize>,
    avail: Vec<i64>,
    failed: HashSet<(u64, Vec<i64>)>,
}

impl<'a> Search<'a> {
    fn new(jobs: &'a [Lite], teams: usize) -> Self {
        let mut edf: Vec<usize> = (0..jobs.len()).collect();
        edf.sort_by_key(|&i| (jobs[i].t, jobs[i].r, i));
        Search { jobs, edf, avail: vec![FRESH; teams], failed: HashSet::new() }
    }

    fn with_avail(jobs: &'a [Lite], avail: Vec<i64>) -> Self {
        let mut edf: Vec<usize> = (0..jobs.len()).collect();
        edf.sort_by_key(|&i| (jobs[i].t, jobs[i].r, i));
        Search { jobs, edf, avail, failed: HashSet::new() }
    }

    /// Is there a completion for `remaining` from the current availabilities?
    fn feasible(&mut self, remaining: u64) -> bool {
        if remaining == 0 {
            return true;
        }
        let team = min_team(&self.avail);
        let base = self.avail[team];
        // A job that cannot meet its deadline even on the earliest-available
        // team is dead in every descendant state: availabilities only grow.
        let mut m = remaining;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            let j = self.jobs[i];
            if base.max(j.r) + j.v > j.t {
                return false;
            }
        }
        let key = (remaining, sorted_avail(&self.avail));
        if self.failed.contains(&key) {
            return false;
        }
        for idx in 0..self.edf.len() {
            let i = self.edf[idx];
            if remaining & (1 << i) == 0 {
                continue;
            }
            let j = self.jobs[i];
            let start = base.max(j.r);
            debug_assert!(start + j.v <= j.t);
            self.avail[team] = start + j.v;
            let sub = self.feasible(remaining & !(1 << i));
            self.avail[team] = base;
            if sub {
                return true;
            }
        }
        self.failed.insert(key);
        false
    }
}

fn min_team(avail: &[i64]) -> usize {
    let mut best = 0;
    for (i, &a) in avail.iter().enumerate() {
        if a < avail[best] {
            best = i;
        }
    }
    best
}

fn sorted_avail(avail: &[i64]) -> Vec<i64> {
    let mut v = avail.to_vec();
    v.sort_unstable();
    v
}

/// Builds the lexicographically smallest optimal schedule, team-major:
/// team 1 greedily takes the feasible job with the earliest (start, id)
/// whose placement still leaves the rest completable, until no extension
/// survives; then team 2, and so on. Completability of each tentative
/// placement is verified with the exact search, so the greedy never paints
/// itself into a corner.
fn canonical(lite: &[Lite], n: usize, jobs: &[Job]) -> Vec<Vec<ScheduledJob>> {
    let mut remaining = full_mask(lite.len());
    let mut teams: Vec<Vec<ScheduledJob>> = Vec::with_capacity(n);
    for team in 0..n {
        let fresh_left = n - team - 1;
        let mut seq: Vec<ScheduledJob> = Vec::new();
        let mut avail = FRESH;
        'extend: loop {
            if remaining == 0 {
                break;
            }
            let mut cands: Vec<(i64, usize)> = Vec::new();
            let mut m = remaining;
            while m != 0 {
                let i = m.trailing_zeros() as usize;
                m &= m - 1;
                let j = lite[i];
                let start = avail.max(j.r);
                if start + j.v <= j.t {
                    cands.push((start, i));
                }
            }
            cands.sort_unstable();
            for (start, i) in cands {
                let mut check_avail = vec![FRESH; fresh_left + 1];
                check_avail[0] = start + lite[i].v;
                let rest = remaining & !(1 << i);
                let mut s = Search::with_avail(lite, check_avail);
                if s.feasible(rest) {
                    seq.push(ScheduledJob {
                        job: jobs[i].clone(),
                        start_min: start,
                        end_min: start + lite[i].v,
                    });
                    avail = start + lite[i].v;
                    remaining = rest;
                    continue 'extend;
                }
            }
            break;
        }
        teams.push(seq);
    }
    debug_assert_eq!(remaining, 0, "minimal team count guarantees completion");
    teams
}

/// All jobs of a schedule flattened into execution order across teams.
pub fn in_execution_order(schedule: &ShiftSchedule) -> Vec<&ScheduledJob> {
    let mut v: Vec<&ScheduledJob> = schedule.teams.iter().flatten().collect();
    v.sort_by_key(|s| (s.start_min, s.job.id));
    v
}
