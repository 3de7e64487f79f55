//! Turns a master solution (type-to-MO assignments) into per-shift job sets
//! for the team-scheduling subproblem.
//!
//! Every calendar day has one daytime shift (`day_start`..`night_start`) and
//! one nighttime shift (`night_start`..`day_start` of the next day) per
//! location. An MO belongs to the shift in which it *ends*; a nighttime MO
//! that ends after midnight therefore belongs to the night shift that began
//! the evening before (its *reference day*).
//!
//! One MO with at least one assigned activity becomes one [`Job`]: duration
//! is the sum of the assigned type durations, and the release/deadline
//! window is the MO window clamped to the shift boundaries. Clamping never
//! shrinks the window below the job duration: when the clamped window would
//! be too tight the boundary moves back just enough to fit the job (the MO
//! itself is always long enough, by the master's capacity constraint).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{hours_to_minutes, Instance, MoIndex, TypeId, UnitId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ShiftWindow {
    Day,
    Night,
}

/// Identity of one maintenance shift: location, day/night window and the
/// 0-based reference day. A nighttime MO ending before the first evening of
/// the horizon gets reference day -1; that is legal and reported as such.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ShiftKey {
    pub location: crate::instance::LocationId,
    pub window: ShiftWindow,
    pub reference_day: i32,
}

impl ShiftKey {
    /// Shift start in minutes from horizon zero.
    pub fn start_min(&self, inst: &Instance) -> i64 {
        let day = self.reference_day as f64 * 24.0;
        match self.window {
            ShiftWindow::Day => hours_to_minutes(day + inst.day_start_hr),
            ShiftWindow::Night => hours_to_minutes(day + inst.night_start_hr),
        }
    }

    /// Shift end in minutes from horizon zero.
    pub fn end_min(&self, inst: &Instance) -> i64 {
        let day = self.reference_day as f64 * 24.0;
        match self.window {
            ShiftWindow::Day => hours_to_minutes(day + inst.night_start_hr),
            ShiftWindow::Night => hours_to_minutes(day + 24.0 + inst.day_start_hr),
        }
    }

    pub fn label(&self, inst: &Instance) -> String {
        format!(
            "{}:{}:{}",
            inst.locations[self.location.0],
            match self.window {
                ShiftWindow::Day => "day",
                ShiftWindow::Night => "night",
            },
            self.reference_day
        )
    }
}

/// Job identity inside a shift: the MO it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JobId {
    pub unit: UnitId,
    pub mo: MoIndex,
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}/m{}", self.unit.0, self.mo.0)
    }
}

/// One maintenance job: all activities assigned to one MO, to be executed
/// back to back by a single team within `[release_min, deadline_min]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Job {
    pub id: JobId,
    pub types: BTreeSet<TypeId>,
    pub release_min: i64,
    pub deadline_min: i64,
    pub duration_min: i64,
    pub shift: ShiftKey,
}

impl Job {
    /// Validating constructor; the window must fit the duration.
    pub fn new(
        id: JobId,
        types: BTreeSet<TypeId>,
        release_min: i64,
        deadline_min: i64,
        duration_min: i64,
        shift: ShiftKey,
    ) -> Result<Self, JobBuildError> {
        if types.is_empty() {
            return Err(JobBuildError::NoTypes { id });
        }
        if duration_min < 1 || deadline_min - release_min < duration_min {
            return Err(JobBuildError::WindowTooSmall {
                id,
                release_min,
                deadline_min,
                duration_min,
            });
        }
        Ok(Job { id, types, release_min, deadline_min, duration_min, shift })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum JobBuildError {
    #[error("job {id} has no assigned types")]
    NoTypes { id: JobId },
    #[error("job {id} window [{release_min},{deadline_min}] cannot fit duration {duration_min}")]
    WindowTooSmall { id: JobId, release_min: i64, deadline_min: i64, duration_min: i64 },
    #[error("assignment references unknown unit {0:?}")]
    UnknownUnit(UnitId),
    #[error("assignment references unknown MO {mo:?} of unit {unit:?}")]
    UnknownMo { unit: UnitId, mo: MoIndex },
    #[error("assignment references unknown type {0:?}")]
    UnknownType(TypeId),
    #[error("assigned duration {duration_min} exceeds MO window of job {id}")]
    DurationExceedsMo { id: JobId, duration_min: i64 },
}

/// Maps an MO to the shift it belongs to.
///
/// Daytime MOs go to the day shift of the day they end in. Nighttime MOs
/// ending after midnight (before the night window starts again) belong to
/// the previous day's night shift; ones ending in the evening belong to the
/// current day's.
pub fn assign_shift(inst: &Instance, unit: UnitId, mo: MoIndex) -> ShiftKey {
    let m = inst.mo(unit, mo);
    let end_day = (m.end_hr / 24.0).floor() as i32;
    let tod = m.end_hr.rem_euclid(24.0);
    if inst.is_daytime(m.end_hr) {
        ShiftKey { location: m.location, window: ShiftWindow::Day, reference_day: end_day }
    } else if tod < inst.night_start_hr {
        ShiftKey { location: m.location, window: ShiftWindow::Night, reference_day: end_day - 1 }
    } else {
        ShiftKey { location: m.location, window: ShiftWindow::Night, reference_day: end_day }
    }
}

/// Builds the per-shift job sets induced by a set of master assignments.
/// Shifts without any job are absent from the result; jobs within a shift
/// are sorted by id.
pub fn build_jobs(
    inst: &Instance,
    assignments: &BTreeSet<(UnitId, MoIndex, TypeId)>,
) -> Result<BTreeMap<ShiftKey, Vec<Job>>, JobBuildError> {
    let mut per_mo: BTreeMap<JobId, BTreeSet<TypeId>> = BTreeMap::new();
    for &(unit, mo, ty) in assignments {
        if unit.0 >= inst.units.len() {
            return Err(JobBuildError::UnknownUnit(unit));
        }
        if mo.0 >= inst.units[unit.0].mos.len() {
            return Err(JobBuildError::UnknownMo { unit, mo });
        }
        if ty.0 >= inst.types.len() {
            return Err(JobBuildError::UnknownType(ty));
        }
        per_mo.entry(JobId { unit, mo }).or_default().insert(ty);
    }

    let mut out: BTreeMap<ShiftKey, Vec<Job>> = BTreeMap::new();
    for (id, types) in per_mo {
        let m = inst.mo(id.unit, id.mo);
        let duration: i64 = types.iter().map(|t| inst.types[t.0].duration_min as i64).sum();
        let mo_len = hours_to_minutes(m.end_hr) - hours_to_minutes(m.start_hr);
        if duration > mo_len {
            return Err(JobBuildError::DurationExceedsMo { id, duration_min: duration });
        }
        let shift = assign_shift(inst, id.unit, id.mo);
        let s = hours_to_minutes(m.start_hr);
        let e = hours_to_minutes(m.end_hr);
        let (release, deadline) = match shift.window {
            ShiftWindow::Day => (s, e),
            ShiftWindow::Night => {
                let shift_start = shift.start_min(inst);
                let shift_end = shift.end_min(inst);
                let deadline0 = e.min(shift_end);
                let release = if s >= shift_start {
                    s
                } else if deadline0 - shift_start < duration {
                    deadline0 - duration
                } else {
                    shift_start
                };
                let deadline = if e <= shift_end {
                    e
                } else if shift_end - release < duration {
                    release + duration
                } else {
                    shift_end
                };
                (release, deadline)
            }
        };
        let job = Job::new(id, types, release, deadline, duration, shift)?;
        out.entry(shift).or_default().push(job);
    }
    for jobs in out.values_mut() {
        jobs.sort();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{LocationId, MaintenanceOpportunity, MaintenanceType, Unit};

    fn inst_with_mos(mos: Vec<MaintenanceOpportunity>) -> Instance {
        Instance {
            horizon_hr: 96.0,
            locations: vec!["zl".into(), "dv".into()],
            types: vec![
                MaintenanceType { id: 1, duration_min: 30, interval_hr: 24.0 },
                MaintenanceType { id: 2, duration_min: 60, interval_hr: 48.0 },
            ],
            units: vec![Unit { name: "u0".into(), mos, initial_age_hr: vec![0.0, 0.0] }],
            day_start_hr: 7.0,
            night_start_hr: 19.0,
            max_day_locations: 5,
            teams_per_shift: 1,
            epsilon: 0.001,
        }
    }

    fn mo(loc: usize, s: f64, e: f64) -> MaintenanceOpportunity {
        MaintenanceOpportunity { location: LocationId(loc), start_hr: s, end_hr: e }
    }

    fn shift_of(inst: &Instance) -> ShiftKey {
        assign_shift(inst, UnitId(0), MoIndex(0))
    }

    #[test]
    fn evening_mo_is_current_day_night_shift() {
        let inst = inst_with_mos(vec![mo(0, 21.0, 23.5)]);
        let key = shift_of(&inst);
        assert_eq!(key.window, ShiftWindow::Night);
        assert_eq!(key.reference_day, 0);
    }

    #[test]
    fn after_midnight_mo_belongs_to_previous_night() {
        // Ends 03:00 of day 2 -> night shift with reference day 1.
        let inst = inst_with_mos(vec![mo(0, 49.0, 51.0)]);
        let key = shift_of(&inst);
        assert_eq!(key.window, ShiftWindow::Night);
        assert_eq!(key.reference_day, 1);
    }

    #[test]
    fn daytime_mo_keyed_by_end_day() {
        // Ends 31.0 = 07:00 of day 1, boundary inclusive -> day shift, day 1.
        let inst = inst_with_mos(vec![mo(1, 29.0, 31.0)]);
        let key = shift_of(&inst);
        assert_eq!(key.window, ShiftWindow::Day);
        assert_eq!(key.reference_day, 1);
        assert_eq!(key.location, LocationId(1));
    }

    #[test]
    fn reference_day_minus_one_is_allowed() {
        let inst = inst_with_mos(vec![mo(0, 1.0, 3.0)]);
        let key = shift_of(&inst);
        assert_eq!(key.window, ShiftWindow::Night);
        assert_eq!(key.reference_day, -1);
    }

    #[test]
    fn shift_bounds() {
        let inst = inst_with_mos(vec![mo(0, 9.0, 10.0)]);
        let day = ShiftKey { location: LocationId(0), window: ShiftWindow::Day, reference_day: 2 };
        assert_eq!(day.start_min(&inst), (2 * 24 + 7) * 60);
        assert_eq!(day.end_min(&inst), (2 * 24 + 19) * 60);
        let night =
            ShiftKey { location: LocationId(0), window: ShiftWindow::Night, reference_day: 2 };
        assert_eq!(night.start_min(&inst), (2 * 24 + 19) * 60);
        assert_eq!(night.end_min(&inst), (3 * 24 + 7) * 60);
    }

    fn single_job(inst: &Instance, types: &[usize]) -> Job {
        let assignments: BTreeSet<_> =
            types.iter().map(|&k| (UnitId(0), MoIndex(0), TypeId(k))).collect();
        let shifts = build_jobs(inst, &assignments).unwrap();
        assert_eq!(shifts.len(), 1);
        shifts.into_values().next().unwrap().remove(0)
    }

    #[test]
    fn day_job_window_is_the_mo_window() {
        let inst = inst_with_mos(vec![mo(0, 9.0, 10.0)]);
        let job = single_job(&inst, &[0]);
        assert_eq!(job.release_min, 9 * 60);
        assert_eq!(job.deadline_min, 10 * 60);
        assert_eq!(job.duration_min, 30);
    }

    #[test]
    fn night_job_release_clamps_to_shift_start() {
        // MO 17:00-23:00, both types assigned (90 min): release 19:00.
        let inst = inst_with_mos(vec![mo(0, 17.0, 23.0)]);
        let job = single_job(&inst, &[0, 1]);
        assert_eq!(job.release_min, 19 * 60);
        assert_eq!(job.deadline_min, 23 * 60);
        assert_eq!(job.duration_min, 90);
    }

    #[test]
    fn tight_night_clamp_backs_off_for_duration() {
        // MO 18:00-19:20, type A (30 min): only 20 min after 19:00, so the
        // release backs off to 18:50.
        let inst = inst_with_mos(vec![mo(0, 18.0, 19.0 + 20.0 / 60.0)]);
        let job = single_job(&inst, &[0]);
        assert_eq!(job.release_min, 18 * 60 + 50);
        assert_eq!(job.deadline_min, 19 * 60 + 20);
    }

    #[test]
    fn night_job_past_midnight_keeps_mo_window() {
        // MO 22:00 day 0 - 02:00 day 1 ends inside the night shift, so no
        // deadline clamping applies.
        let inst = inst_with_mos(vec![mo(0, 22.0, 26.0)]);
        let job = single_job(&inst, &[1]);
        assert_eq!(job.release_min, 22 * 60);
        assert_eq!(job.deadline_min, 26 * 60);
        assert_eq!(job.shift.reference_day, 0);
    }

    #[test]
    fn one_job_per_mo_with_type_union() {
        let inst = inst_with_mos(vec![mo(0, 9.0, 12.0), mo(0, 21.0, 23.0)]);
        let assignments: BTreeSet<_> = [
            (UnitId(0), MoIndex(0), TypeId(0)),
            (UnitId(0), MoIndex(0), TypeId(1)),
            (UnitId(0), MoIndex(1), TypeId(0)),
        ]
        .into_iter()
        .collect();
        let shifts = build_jobs(&inst, &assignments).unwrap();
        assert_eq!(shifts.len(), 2);
        let day_jobs = shifts
            .iter()
            .find(|(k, _)| k.window == ShiftWindow::Day)
            .map(|(_, v)| v)
            .unwrap();
        assert_eq!(day_jobs.len(), 1);
        assert_eq!(day_jobs[0].duration_min, 90);
        assert_eq!(day_jobs[0].types.len(), 2);
    }

    #[test]
    fn empty_assignment_set_builds_no_shifts() {
        let inst = inst_with_mos(vec![mo(0, 9.0, 12.0)]);
        let shifts = build_jobs(&inst, &BTreeSet::new()).unwrap();
        assert!(shifts.is_empty());
    }

    #[test]
    fn job_window_always_fits_duration() {
        // Sweep night MOs across the clamp boundary; capacity-feasible
        // inputs must always produce a valid job window.
        for s10 in 170..=195 {
            let s = s10 as f64 / 10.0;
            for len10 in [5, 10, 20, 30, 60] {
                let e = s + len10 as f64 / 10.0;
                let inst = inst_with_mos(vec![mo(0, s, e)]);
                if inst.is_daytime(e) {
                    continue;
                }
                let duration = 30i64;
                if hours_to_minutes(e) - hours_to_minutes(s) < duration {
                    continue;
                }
                let job = single_job(&inst, &[0]);
                assert!(
                    job.deadline_min - job.release_min >= job.duration_min,
                    "window must fit at s={s} e={e}"
                );
            }
        }
    }
}
