//! Independent reference implementations ("oracles") the integration and
//! acceptance suites compare the real solvers against. Everything here
//! favors obviousness over speed and shares no machinery with the library:
//! team scheduling is settled by brute force over permutations, the flow
//! relaxation by a from-scratch augmenting-path max flow plus a preemptive
//! EDF simulation, and the master by enumerating per-unit assignment
//! lattices.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use maintsched::instance::{hours_to_minutes, MaintenanceOpportunity, MaintenanceType};
use maintsched::master::{Assignment, CutConstraint};
use maintsched::shifts::{build_jobs, Job, JobId, ShiftKey, ShiftWindow};
use maintsched::{Instance, LocationId, MoIndex, TypeId, Unit, UnitId};
use rand::Rng;

/// Path to a file in the workspace-level `fixtures/` directory.
pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// A throwaway shift key for jobs constructed directly in tests.
pub fn test_shift() -> ShiftKey {
    ShiftKey { location: LocationId(0), window: ShiftWindow::Day, reference_day: 0 }
}

/// Job constructor for oracle tests; id = (unit index, mo 0).
pub fn job(unit: usize, release: i64, deadline: i64, duration: i64) -> Job {
    job_at(unit, 0, release, deadline, duration)
}

pub fn job_at(unit: usize, mo: usize, release: i64, deadline: i64, duration: i64) -> Job {
    Job::new(
        JobId { unit: UnitId(unit), mo: MoIndex(mo) },
        BTreeSet::from([TypeId(0)]),
        release,
        deadline,
        duration,
        test_shift(),
    )
    .expect("test job must satisfy the window invariant")
}

// ---------------------------------------------------------------------------
// Team-scheduling oracle: permutations × greedy earliest-start placement.
//
// If any schedule with k teams exists, take one and order its jobs by start
// time. Processing them in that order and always placing on the team that
// can start the job earliest keeps the sorted vector of team-availability
// times pointwise no later than in the reference schedule, so every job
// still meets release and deadline. Hence scanning all n! orders with the
// greedy placement is a complete feasibility test.
// ---------------------------------------------------------------------------

fn greedy_order_fits(jobs: &[Job], order: &[usize], teams: usize) -> bool {
    let mut avail = vec![i64::MIN / 2; teams];
    for &i in order {
        let j = &jobs[i];
        let (mut best_team, mut best_start) = (usize::MAX, i64::MAX);
        for (t, &a) in avail.iter().enumerate() {
            let start = a.max(j.release_min);
            if start < best_start {
                best_team = t;
                best_start = start;
            }
        }
        if best_start + j.duration_min > j.deadline_min {
            return false;
        }
        avail[best_team] = best_start + j.duration_min;
    }
    true
}

fn any_permutation(n: usize, mut check: impl FnMut(&[usize]) -> bool) -> bool {
    // Heap's algorithm, iterative.
    let mut idx: Vec<usize> = (0..n).collect();
    if check(&idx) {
        return true;
    }
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                idx.swap(0, i);
            } else {
                idx.swap(c[i], i);
            }
            if check(&idx) {
                return true;
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    false
}

/// Exhaustively decides whether `jobs` fit on `teams` teams.
pub fn oracle_feasible(jobs: &[Job], teams: u32) -> bool {
    assert!(jobs.len() <= 8, "permutation oracle is for tiny job sets");
    if jobs.is_empty() {
        return true;
    }
    any_permutation(jobs.len(), |order| greedy_order_fits(jobs, order, teams as usize))
}

/// Minimum feasible team count up to `max_teams`, or `None` (infeasible).
pub fn oracle_min_teams(jobs: &[Job], max_teams: u32) -> Option<u32> {
    if jobs.is_empty() {
        return Some(0);
    }
    (1..=max_teams).find(|&k| oracle_feasible(jobs, k))
}

// ---------------------------------------------------------------------------
// Relaxation oracles: an independent augmenting-path max flow over the
// minute-slot network, and a preemptive earliest-deadline-first sweep.
// ---------------------------------------------------------------------------

/// Max flow of the slot network (slot x usable iff r ≤ x and x+1 ≤ t),
/// computed by plain DFS augmentation on an adjacency-matrix residual.
pub fn oracle_slot_max_flow(jobs: &[Job]) -> i64 {
    let slots: Vec<i64> = jobs
        .iter()
        .flat_map(|j| j.release_min..j.deadline_min)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = jobs.len();
    let v = 2 + n + slots.len();
    let (source, sink) = (0, 1);
    let mut cap = vec![vec![0i64; v]; v];
    for (i, j) in jobs.iter().enumerate() {
        cap[source][2 + i] = j.duration_min;
        for (s, &minute) in slots.iter().enumerate() {
            if j.release_min <= minute && minute + 1 <= j.deadline_min {
                cap[2 + i][2 + n + s] = 1;
            }
        }
    }
    for s in 0..slots.len() {
        cap[2 + n + s][sink] = 1;
    }

    fn augment(cap: &mut [Vec<i64>], seen: &mut [bool], u: usize, sink: usize, pushed: i64) -> i64 {
        if u == sink {
            return pushed;
        }
        seen[u] = true;
        for w in 0..cap.len() {
            if !seen[w] && cap[u][w] > 0 {
                let got = augment(cap, seen, w, sink, pushed.min(cap[u][w]));
                if got > 0 {
                    cap[u][w] -= got;
                    cap[w][u] += got;
                    return got;
                }
            }
        }
        0
    }

    let mut flow = 0;
    loop {
        let mut seen = vec![false; v];
        let got = augment(&mut cap, &mut seen, source, sink, i64::MAX);
        if got == 0 {
            return flow;
        }
        flow += got;
    }
}

/// Single-machine preemptive feasibility by minute-stepping EDF, which is
/// exact for release/deadline feasibility on one machine.
pub fn oracle_preemptive_feasible(jobs: &[Job]) -> bool {
    if jobs.is_empty() {
        return true;
    }
    let lo = jobs.iter().map(|j| j.release_min).min().unwrap();
    let hi = jobs.iter().map(|j| j.deadline_min).max().unwrap();
    let mut remaining: Vec<i64> = jobs.iter().map(|j| j.duration_min).collect();
    for minute in lo..hi {
        let pick = jobs
            .iter()
            .enumerate()
            .filter(|(i, j)| {
                remaining[*i] > 0 && j.release_min <= minute && minute < j.deadline_min
            })
            .min_by_key(|(i, j)| (j.deadline_min, *i))
            .map(|(i, _)| i);
        if let Some(i) = pick {
            remaining[i] -= 1;
        }
    }
    remaining.iter().all(|&r| r == 0)
}

// ---------------------------------------------------------------------------
// Master oracle: exhaustive enumeration of per-unit assignment lattices,
// combined with branch-and-bound only in the sound direction (a partial
// objective already ≥ the incumbent can never improve).
// ---------------------------------------------------------------------------

/// One unit's feasible assignment pattern.
struct UnitPattern {
    triples: Vec<Assignment>,
    night: u32,
    total: u32,
    day_locs: BTreeSet<LocationId>,
}

/// All assignment patterns of one unit satisfying capacity and both chain
/// rules (initial cover + successors inside the horizon).
fn unit_patterns(inst: &Instance, u: usize) -> Vec<UnitPattern> {
    let unit = &inst.units[u];
    let n_mos = unit.mos.len();
    let n_types = inst.types.len();
    let cells = n_mos * n_types;
    assert!(cells <= 20, "brute-force master oracle is for tiny instances");
    let mut out = Vec::new();
    'masks: for mask in 0u32..(1 << cells) {
        let picked = |mo: usize, ty: usize| mask & (1 << (mo * n_types + ty)) != 0;
        for (ji, mo) in unit.mos.iter().enumerate() {
            let used: i64 = (0..n_types)
                .filter(|&k| picked(ji, k))
                .map(|k| inst.types[k].duration_min as i64)
                .sum();
            if used > hours_to_minutes(mo.end_hr) - hours_to_minutes(mo.start_hr) {
                continue 'masks;
            }
        }
        for (k, ty) in inst.types.iter().enumerate() {
            let assigned: Vec<&MaintenanceOpportunity> = unit
                .mos
                .iter()
                .enumerate()
                .filter(|(ji, _)| picked(*ji, k))
                .map(|(_, m)| m)
                .collect();
            let bound = ty.interval_hr + unit.initial_age_hr[k];
            if !assigned.iter().any(|m| m.start_hr <= bound) {
                continue 'masks;
            }
            for m in &assigned {
                if m.end_hr + ty.interval_hr > inst.horizon_hr {
                    continue;
                }
                let ok = assigned
                    .iter()
                    .any(|p| m.end_hr < p.start_hr && p.start_hr <= m.end_hr + ty.interval_hr);
                if !ok {
                    continue 'masks;
                }
            }
        }
        let mut pattern = UnitPattern {
            triples: Vec::new(),
            night: 0,
            total: 0,
            day_locs: BTreeSet::new(),
        };
        for (ji, mo) in unit.mos.iter().enumerate() {
            for k in 0..n_types {
                if picked(ji, k) {
                    pattern.triples.push((UnitId(u), MoIndex(ji), TypeId(k)));
                    pattern.total += 1;
                    if inst.is_daytime(mo.end_hr) {
                        pattern.day_locs.insert(mo.location);
                    } else {
                        pattern.night += 1;
                    }
                }
            }
        }
        out.push(pattern);
    }
    out
}

struct MasterEnum<'a> {
    inst: &'a Instance,
    cuts: &'a [CutConstraint],
    patterns: Vec<Vec<UnitPattern>>,
    best: Option<(u32, u32)>,
    best_obj: f64,
    /// Extra per-leaf veto (used to layer the capacity subproblem on top).
    accept: Box<dyn FnMut(&BTreeSet<Assignment>) -> bool + 'a>,
}

impl<'a> MasterEnum<'a> {
    fn descend(
        &mut self,
        u: usize,
        night: u32,
        total: u32,
        day_locs: &BTreeSet<LocationId>,
        chosen: &mut Vec<usize>,
    ) {
        let obj = night as f64 + self.inst.epsilon * total as f64;
        if obj >= self.best_obj {
            return;
        }
        if u == self.patterns.len() {
            let assignments: BTreeSet<Assignment> = chosen
                .iter()
                .enumerate()
                .flat_map(|(w, &p)| self.patterns[w][p].triples.iter().copied())
                .collect();
            for cut in self.cuts {
                if cut.members().iter().all(|m| assignments.contains(m)) {
                    return;
                }
            }
            if !(self.accept)(&assignments) {
                return;
            }
            self.best = Some((night, total));
            self.best_obj = obj;
            return;
        }
        for p in 0..self.patterns[u].len() {
            let pat = &self.patterns[u][p];
            let mut locs = day_locs.clone();
            locs.extend(pat.day_locs.iter().copied());
            if locs.len() > self.inst.max_day_locations as usize {
                continue;
            }
            let (n2, t2) = (night + pat.night, total + pat.total);
            chosen.push(p);
            self.descend(u + 1, n2, t2, &locs, chosen);
            chosen.pop();
        }
    }
}

/// Optimal (night_count, total_count) over every assignment satisfying the
/// master constraints and `cuts`, or `None` when nothing does.
pub fn oracle_master_optimum(inst: &Instance, cuts: &[CutConstraint]) -> Option<(u32, u32)> {
    oracle_constrained_optimum(inst, cuts, |_| true)
}

/// As [`oracle_master_optimum`] with an extra acceptance predicate on the
/// full assignment set, evaluated at every enumeration leaf.
pub fn oracle_constrained_optimum(
    inst: &Instance,
    cuts: &[CutConstraint],
    accept: impl FnMut(&BTreeSet<Assignment>) -> bool,
) -> Option<(u32, u32)> {
    let patterns: Vec<Vec<UnitPattern>> =
        (0..inst.units.len()).map(|u| unit_patterns(inst, u)).collect();
    let mut en = MasterEnum {
        inst,
        cuts,
        patterns,
        best: None,
        best_obj: f64::INFINITY,
        accept: Box::new(accept),
    };
    en.descend(0, 0, 0, &BTreeSet::new(), &mut Vec::new());
    en.best
}

/// Optimum of the full problem: master constraints plus, for every daytime
/// shift, schedulability within `teams` teams (per the permutation oracle).
pub fn oracle_capacity_feasible_optimum(inst: &Instance, teams: u32) -> Option<(u32, u32)> {
    oracle_constrained_optimum(inst, &[], |assignments| {
        let shifts = build_jobs(inst, assignments).expect("enumerated assignments are in range");
        shifts.iter().all(|(key, jobs)| {
            key.window != ShiftWindow::Day || oracle_min_teams(jobs, teams).is_some()
        })
    })
}

// ---------------------------------------------------------------------------
// Randomized inputs.
// ---------------------------------------------------------------------------

/// Fixed two-type instance frame for jobs built directly in tests (the team
/// bound reads shift geometry and type durations off an instance).
pub fn reference_instance() -> Instance {
    Instance {
        horizon_hr: 48.0,
        locations: vec!["east".into(), "west".into()],
        types: vec![
            MaintenanceType { id: 1, duration_min: 30, interval_hr: 24.0 },
            MaintenanceType { id: 2, duration_min: 60, interval_hr: 48.0 },
        ],
        units: Vec::new(),
        day_start_hr: 7.0,
        night_start_hr: 19.0,
        max_day_locations: 2,
        teams_per_shift: 1,
        epsilon: 0.001,
    }
}

/// Random cuts over the full (unit, mo, type) universe of `inst`.
pub fn random_cuts(rng: &mut impl Rng, inst: &Instance, max_cuts: usize) -> Vec<CutConstraint> {
    let universe: Vec<Assignment> = inst
        .units
        .iter()
        .enumerate()
        .flat_map(|(u, unit)| {
            let n_types = inst.types.len();
            (0..unit.mos.len()).flat_map(move |j| {
                (0..n_types).map(move |k| (UnitId(u), MoIndex(j), TypeId(k)))
            })
        })
        .collect();
    let n_cuts = rng.random_range(0..=max_cuts);
    (0..n_cuts)
        .filter_map(|_| {
            let size = rng.random_range(1..=3.min(universe.len()));
            let members: BTreeSet<Assignment> = (0..size)
                .map(|_| universe[rng.random_range(0..universe.len())])
                .collect();
            CutConstraint::new(members)
        })
        .collect()
}

/// Random job set: `n ≤ max_jobs`, integer windows of length ≤ `max_window`
/// inside `[0, horizon)`, durations ≤ `max_duration`.
pub fn random_jobs(
    rng: &mut impl Rng,
    max_jobs: usize,
    horizon: i64,
    max_window: i64,
    max_duration: i64,
) -> Vec<Job> {
    let n = rng.random_range(1..=max_jobs);
    (0..n)
        .map(|i| {
            let duration = rng.random_range(1..=max_duration);
            let window = rng.random_range(duration..=max_window.max(duration));
            let release = rng.random_range(0..=(horizon - window).max(0));
            job(i, release, release + window, duration)
        })
        .collect()
}

/// Random job set that the permutation oracle certifies infeasible for
/// `teams` teams. Tight windows make rejections rare.
pub fn random_infeasible_jobs(rng: &mut impl Rng, teams: u32) -> Vec<Job> {
    loop {
        let jobs = random_jobs(rng, 6, 90, 25, 20);
        if jobs.len() >= 2 && oracle_min_teams(&jobs, teams).is_none() {
            return jobs;
        }
    }
}

/// Random instance small enough for [`oracle_master_optimum`]: ≤ 4 units,
/// ≤ 3 MOs each, 2 types, 2 locations.
pub fn random_tiny_instance(rng: &mut impl Rng) -> Instance {
    let n_units = rng.random_range(1..=4);
    let units: Vec<Unit> = (0..n_units)
        .map(|u| {
            let n_mos = rng.random_range(1..=3);
            let mut mos: Vec<MaintenanceOpportunity> = (0..n_mos)
                .map(|_| {
                    let start = rng.random_range(0..44) as f64;
                    let len = rng.random_range(1..=4) as f64;
                    MaintenanceOpportunity {
                        location: LocationId(rng.random_range(0..2)),
                        start_hr: start,
                        end_hr: (start + len).min(48.0),
                    }
                })
                .collect();
            mos.sort_by(|a, b| a.start_hr.total_cmp(&b.start_hr));
            Unit { name: format!("u{u}"), mos, initial_age_hr: vec![0.0; 2] }
        })
        .collect();
    Instance {
        horizon_hr: 48.0,
        locations: vec!["east".into(), "west".into()],
        types: vec![
            MaintenanceType { id: 1, duration_min: 30, interval_hr: 24.0 },
            MaintenanceType { id: 2, duration_min: 60, interval_hr: 48.0 },
        ],
        units,
        day_start_hr: 7.0,
        night_start_hr: 19.0,
        max_day_locations: rng.random_range(1..=2),
        teams_per_shift: 1,
        epsilon: 0.001,
    }
}
