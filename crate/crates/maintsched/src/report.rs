//! Run artifacts: the per-iteration convergence log, per-shift schedules as
//! plain-text Gantt charts and as structured JSON, and the run summary.
//! Every format carries a `format_version` field (currently 1 throughout).
//!
//! Convergence log: UTF-8 CSV, LF line endings, one header row, then one
//! row per iteration in this fixed column order:
//!
//! ```text
//! format_version,iteration,master_objective,night_count,total_count,
//! violated_shifts,cuts_added,cumulative_cuts,master_secs,
//! capacity_check_secs,cut_generation_secs,other_secs
//! ```
//!
//! Times are seconds with millisecond resolution. [`ConvergenceLog`]
//! flushes after every row, so a log truncated by a crash still parses up
//! to its last complete row.
//!
//! Gantt charts are one line per job plus `#`-prefixed metadata lines; a
//! reader can recover the job count as the number of unprefixed lines.
//! The time axis maps one character to [`GANTT_MINUTES_PER_CHAR`] minutes;
//! `.` marks the job's allowed window and a team digit marks the scheduled
//! interval, which always lies inside the window.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::lbbd::{IterationRecord, RunResult, RunStatus};
use crate::scheduling::ShiftSchedule;
use crate::shifts::{ShiftKey, ShiftWindow};

pub const CONVERGENCE_FORMAT_VERSION: u32 = 1;
pub const SCHEDULES_FORMAT_VERSION: u32 = 1;
pub const SUMMARY_FORMAT_VERSION: u32 = 1;
/// Gantt horizontal scale: minutes represented by one character.
pub const GANTT_MINUTES_PER_CHAR: i64 = 15;

pub const CONVERGENCE_HEADER: &str = "format_version,iteration,master_objective,\
night_count,total_count,violated_shifts,cuts_added,cumulative_cuts,\
master_secs,capacity_check_secs,cut_generation_secs,other_secs";

pub fn convergence_row(r: &IterationRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{:.3},{:.3},{:.3},{:.3}",
        CONVERGENCE_FORMAT_VERSION,
        r.iteration,
        r.master_objective,
        r.night_count,
        r.total_count,
        r.violated_shifts,
        r.cuts_added,
        r.cumulative_cuts,
        r.master_secs,
        r.capacity_check_secs,
        r.cut_generation_secs,
        r.other_secs,
    )
}

/// Incremental CSV writer for the convergence log.
pub struct ConvergenceLog {
    out: BufWriter<File>,
}

impl ConvergenceLog {
    pub fn create(path: &Path) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(CONVERGENCE_HEADER.as_bytes())?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(ConvergenceLog { out })
    }

    pub fn append(&mut self, record: &IterationRecord) -> io::Result<()> {
        self.out.write_all(convergence_row(record).as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

/// Parses a convergence log back into records; tolerates a trailing
/// partial line (abnormal termination).
pub fn parse_convergence_log(text: &str) -> Result<Vec<IterationRecord>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CONVERGENCE_HEADER => {}
        Some(other) => return Err(format!("unexpected header {other:?}")),
        None => return Err("empty log".into()),
    }
    let mut out = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            break; // truncated trailing write
        }
        let parsed: Option<IterationRecord> = (|| {
            let version: u32 = fields[0].parse().ok()?;
            if version != CONVERGENCE_FORMAT_VERSION {
                return None;
            }
            Some(IterationRecord {
                iteration: fields[1].parse().ok()?,
                master_objective: fields[2].parse().ok()?,
                night_count: fields[3].parse().ok()?,
                total_count: fields[4].parse().ok()?,
                violated_shifts: fields[5].parse().ok()?,
                cuts_added: fields[6].parse().ok()?,
                cumulative_cuts: fields[7].parse().ok()?,
                master_secs: fields[8].parse().ok()?,
                capacity_check_secs: fields[9].parse().ok()?,
                cut_generation_secs: fields[10].parse().ok()?,
                other_secs: fields[11].parse().ok()?,
            })
        })();
        match parsed {
            Some(r) => out.push(r),
            None => break,
        }
    }
    Ok(out)
}

fn fmt_clock(total_min: i64) -> String {
    let day = total_min.div_euclid(1440);
    let in_day = total_min.rem_euclid(1440);
    format!("d{} {:02}:{:02}", day, in_day / 60, in_day % 60)
}

/// Renders one shift's schedule as a text Gantt chart. One unprefixed line
/// per job (ordered by team, then start time); metadata lines start with
/// `#`. Columns map linearly to time at [`GANTT_MINUTES_PER_CHAR`].
pub fn render_gantt(inst: &Instance, key: &ShiftKey, schedule: &ShiftSchedule) -> String {
    let shift_start = key.start_min(inst);
    let shift_end = key.end_min(inst);
    let columns = ((shift_end - shift_start) as usize).div_ceil(GANTT_MINUTES_PER_CHAR as usize);
    let col = |t: i64| -> usize {
        ((t - shift_start).clamp(0, shift_end - shift_start) / GANTT_MINUTES_PER_CHAR) as usize
    };

    let mut rows: Vec<(usize, &crate::scheduling::ScheduledJob)> = Vec::new();
    for (team, jobs) in schedule.teams.iter().enumerate() {
        for sj in jobs {
            rows.push((team, sj));
        }
    }
    rows.sort_by_key(|(team, sj)| (*team, sj.start_min, sj.job.id));

    let label_width = rows.iter().map(|(_, sj)| sj.job.id.to_string().len()).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# shift {} ({}) {} .. {}, {} team(s)",
        key.label(inst),
        match key.window {
            ShiftWindow::Day => "day",
            ShiftWindow::Night => "night",
        },
        fmt_clock(shift_start),
        fmt_clock(shift_end),
        schedule.teams_used,
    );
    let _ = writeln!(
        out,
        "# scale: 1 char = {GANTT_MINUTES_PER_CHAR} min; '.' allowed window, digit = team"
    );
    for (team, sj) in rows {
        let mut axis = vec![b' '; columns];
        let (w0, w1) = (col(sj.job.release_min), col(sj.job.deadline_min - 1));
        for c in &mut axis[w0..=w1] {
            *c = b'.';
        }
        let digit = (team + 1) % 10;
        let (s0, s1) = (col(sj.start_min), col(sj.end_min - 1));
        for c in &mut axis[s0..=s1] {
            *c = b'0' + digit as u8;
        }
        let _ = writeln!(
            out,
            "{:<label_width$} |{}| {} - {} (team {})",
            sj.job.id.to_string(),
            String::from_utf8(axis).expect("axis is ASCII"),
            fmt_clock(sj.start_min),
            fmt_clock(sj.end_min),
            team + 1,
        );
    }
    out
}

/// Serializable snapshot of all final schedules.
#[derive(Debug, Serialize, Deserialize)]
pub struct SchedulesFile {
    pub format_version: u32,
    pub shifts: Vec<ShiftScheduleRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ShiftScheduleRecord {
    pub location: String,
    pub window: ShiftWindow,
    pub reference_day: i32,
    pub teams_used: u32,
    pub jobs: Vec<ScheduledJobRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScheduledJobRecord {
    pub job: String,
    pub team: u32,
    pub start_min: i64,
    pub end_min: i64,
    pub release_min: i64,
    pub deadline_min: i64,
    pub duration_min: i64,
}

pub fn schedules_file(
    inst: &Instance,
    schedules: &BTreeMap<ShiftKey, ShiftSchedule>,
) -> SchedulesFile {
    let shifts = schedules
        .iter()
        .map(|(key, schedule)| {
            let mut jobs = Vec::new();
            for (team, team_jobs) in schedule.teams.iter().enumerate() {
                for sj in team_jobs {
                    jobs.push(ScheduledJobRecord {
                        job: sj.job.id.to_string(),
                        team: team as u32 + 1,
                        start_min: sj.start_min,
                        end_min: sj.end_min,
                        release_min: sj.job.release_min,
                        deadline_min: sj.job.deadline_min,
                        duration_min: sj.job.duration_min,
                    });
                }
            }
            ShiftScheduleRecord {
                location: inst.locations[key.location.0].clone(),
                window: key.window,
                reference_day: key.reference_day,
                teams_used: schedule.teams_used,
                jobs,
            }
        })
        .collect();
    SchedulesFile { format_version: SCHEDULES_FORMAT_VERSION, shifts }
}

/// End-of-run summary, serialized as TOML.
#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub format_version: u32,
    pub status: String,
    pub strategy: String,
    pub shift_scope: String,
    pub night_count: u32,
    pub total_count: u32,
    pub objective: f64,
    pub iterations: u32,
    pub total_cuts: u32,
    pub initial_violations: u32,
    pub final_violations: u32,
    pub elapsed_secs: f64,
    pub phase_secs: PhaseSecs,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PhaseSecs {
    pub master: f64,
    pub capacity_check: f64,
    pub cut_generation: f64,
    pub other: f64,
}

pub fn summarize(
    result: &RunResult,
    strategy: &str,
    shift_scope: &str,
    elapsed_secs: f64,
) -> Summary {
    let first = result.history.first();
    let last = result.history.last();
    Summary {
        format_version: SUMMARY_FORMAT_VERSION,
        status: match result.status {
            RunStatus::Optimal => "OPTIMAL".into(),
            RunStatus::TimeLimit => "TIME_LIMIT".into(),
        },
        strategy: strategy.to_string(),
        shift_scope: shift_scope.to_string(),
        night_count: result.final_solution.night_count,
        total_count: result.final_solution.total_count,
        objective: result.final_solution.objective,
        iterations: result.history.len() as u32,
        total_cuts: result.cuts.len() as u32,
        initial_violations: first.map_or(0, |r| r.violated_shifts),
        final_violations: last.map_or(0, |r| r.violated_shifts),
        elapsed_secs,
        phase_secs: PhaseSecs {
            master: result.history.iter().map(|r| r.master_secs).sum(),
            capacity_check: result.history.iter().map(|r| r.capacity_check_secs).sum(),
            cut_generation: result.history.iter().map(|r| r.cut_generation_secs).sum(),
            other: result.history.iter().map(|r| r.other_secs).sum(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{LocationId, MoIndex, TypeId, UnitId};
    use crate::scheduling::ScheduledJob;
    use crate::shifts::{Job, JobId};
    use std::collections::BTreeSet;

    fn record(iteration: u32) -> IterationRecord {
        IterationRecord {
            iteration,
            master_objective: 1.013,
            night_count: 1,
            total_count: 13,
            violated_shifts: 2,
            cuts_added: 1,
            cumulative_cuts: iteration,
            master_secs: 0.25,
            capacity_check_secs: 0.125,
            cut_generation_secs: 0.062,
            other_secs: 0.001,
        }
    }

    #[test]
    fn log_round_trips_and_survives_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("convergence.csv");
        {
            let mut log = ConvergenceLog::create(&path).unwrap();
            log.append(&record(1)).unwrap();
            log.append(&record(2)).unwrap();
        }
        let mut text = std::fs::read_to_string(&path).unwrap();
        let parsed = parse_convergence_log(&text).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0], record(1));
        assert!(!text.contains('\r'));

        text.push_str("1,3,0.5,"); // simulated crash mid-row
        let parsed = parse_convergence_log(&text).unwrap();
        assert_eq!(parsed.len(), 2);
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(parse_convergence_log("nope\n1,2,3\n").is_err());
    }

    fn day_shift_fixture() -> (Instance, ShiftKey, ShiftSchedule) {
        let inst = Instance {
            horizon_hr: 24.0,
            locations: vec!["west".into()],
            types: vec![crate::instance::MaintenanceType {
                id: 1,
                duration_min: 30,
                interval_hr: 48.0,
            }],
            units: vec![],
            day_start_hr: 7.0,
            night_start_hr: 19.0,
            max_day_locations: 5,
            teams_per_shift: 1,
            epsilon: 0.001,
        };
        let key = ShiftKey {
            location: LocationId(0),
            window: ShiftWindow::Day,
            reference_day: 0,
        };
        let job = |unit: usize, release: i64, deadline: i64| Job {
            id: JobId { unit: UnitId(unit), mo: MoIndex(0) },
            types: BTreeSet::from([TypeId(0)]),
            release_min: release,
            deadline_min: deadline,
            duration_min: 30,
            shift: key,
        };
        let schedule = ShiftSchedule {
            teams_used: 2,
            teams: vec![
                vec![ScheduledJob { job: job(0, 540, 600), start_min: 540, end_min: 570 }],
                vec![ScheduledJob { job: job(1, 540, 570), start_min: 540, end_min: 570 }],
            ],
        };
        (inst, key, schedule)
    }

    #[test]
    fn gantt_line_count_equals_job_count() {
        let (inst, key, schedule) = day_shift_fixture();
        let text = render_gantt(&inst, &key, &schedule);
        let job_lines: Vec<&str> =
            text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(job_lines.len(), 2);
        assert!(text.lines().any(|l| l.starts_with('#')));
    }

    #[test]
    fn gantt_schedule_marks_stay_inside_window_marks() {
        let (inst, key, schedule) = day_shift_fixture();
        let text = render_gantt(&inst, &key, &schedule);
        for line in text.lines().filter(|l| !l.starts_with('#')) {
            let axis = line.split('|').nth(1).unwrap();
            let window: Vec<usize> = axis
                .char_indices()
                .filter(|(_, c)| *c != ' ')
                .map(|(i, _)| i)
                .collect();
            let scheduled: Vec<usize> = axis
                .char_indices()
                .filter(|(_, c)| c.is_ascii_digit())
                .map(|(i, _)| i)
                .collect();
            assert!(!scheduled.is_empty());
            assert!(scheduled.iter().all(|i| window.contains(i)));
        }
        // 30 minutes at 15 min/char = 2 scheduled characters for team 1.
        let first = text.lines().find(|l| !l.starts_with('#')).unwrap();
        let axis = first.split('|').nth(1).unwrap();
        assert_eq!(axis.chars().filter(|c| *c == '1').count(), 2);
    }

    #[test]
    fn schedules_json_round_trips() {
        let (inst, key, schedule) = day_shift_fixture();
        let mut map = BTreeMap::new();
        map.insert(key, schedule);
        let file = schedules_file(&inst, &map);
        let json = serde_json::to_string_pretty(&file).unwrap();
        let back: SchedulesFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.format_version, SCHEDULES_FORMAT_VERSION);
        assert_eq!(back.shifts.len(), 1);
        assert_eq!(back.shifts[0].jobs.len(), 2);
        assert_eq!(back.shifts[0].teams_used, 2);
        assert_eq!(back.shifts[0].location, "west");
    }

    #[test]
    fn summary_serializes_as_versioned_toml() {
        let summary = Summary {
            format_version: SUMMARY_FORMAT_VERSION,
            status: "OPTIMAL".into(),
            strategy: "min-cut".into(),
            shift_scope: "all-day-shifts".into(),
            night_count: 1,
            total_count: 13,
            objective: 1.013,
            iterations: 2,
            total_cuts: 1,
            initial_violations: 1,
            final_violations: 0,
            elapsed_secs: 0.5,
            phase_secs: PhaseSecs {
                master: 0.3,
                capacity_check: 0.1,
                cut_generation: 0.05,
                other: 0.05,
            },
        };
        let text = toml::to_string(&summary).unwrap();
        assert!(text.contains("format_version = 1"));
        assert!(text.contains("status = \"OPTIMAL\""));
        assert!(text.contains("[phase_secs]"));
        let back: Summary = toml::from_str(&text).unwrap();
        assert_eq!(back.iterations, 2);
    }
}
