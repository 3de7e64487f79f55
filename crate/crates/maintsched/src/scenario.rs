//! End-to-end scenario execution: obtain an instance (file or generator),
//! run the decomposition over the configured shift scope, and write the
//! artifact set — convergence CSV (incrementally), per-shift Gantt charts,
//! structured schedules, and a summary — into an output directory.
//!
//! Two scenario shapes exist: `SingleShift` imposes the capacity
//! constraint on one chosen shift, `AllDayShifts` on every daytime shift.
//! Nighttime capacity is never constrained here; use the library driver
//! directly for custom scopes.

use std::collections::BTreeSet;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::cuts::CutStrategy;
use crate::generator::{generate_instance, GenerationError, GeneratorSpec};
use crate::instance::{FormatError, Instance, LocationId};
use crate::lbbd::{self, RunError, RunResult, ShiftScope};
use crate::report::{self, ConvergenceLog, Summary};
use crate::shifts::{ShiftKey, ShiftWindow};

#[derive(Debug, Clone)]
pub enum InstanceSource {
    File(PathBuf),
    Generated(GeneratorSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioScope {
    SingleShift(ShiftKey),
    AllDayShifts,
}

impl fmt::Display for ScenarioScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioScope::SingleShift(key) => write!(
                f,
                "single-shift({}:{}:{})",
                key.location.0,
                match key.window {
                    ShiftWindow::Day => "day",
                    ShiftWindow::Night => "night",
                },
                key.reference_day
            ),
            ScenarioScope::AllDayShifts => f.write_str("all-day-shifts"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub source: InstanceSource,
    pub scope: ScenarioScope,
    pub strategy: CutStrategy,
    pub time_limit: Duration,
    pub output_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("shift {0} does not exist in this instance")]
    UnknownShift(String),
    #[error("cannot parse shift {given:?}: {reason}")]
    BadShiftSyntax { given: String, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io { path: path.display().to_string(), source }
}

/// Artifact locations of a completed run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactPaths {
    pub instance: Option<PathBuf>,
    pub convergence_csv: PathBuf,
    pub schedules_json: PathBuf,
    pub gantt_txt: PathBuf,
    pub summary_toml: PathBuf,
}

#[derive(Debug)]
pub struct ScenarioReport {
    pub result: RunResult,
    pub summary: Summary,
    pub paths: ArtifactPaths,
}

/// Parses `location:window:day` (e.g. `zl:day:3`) against an instance's
/// location names.
pub fn parse_shift_key(inst: &Instance, text: &str) -> Result<ShiftKey, ScenarioError> {
    let bad = |reason: &str| ScenarioError::BadShiftSyntax {
        given: text.to_string(),
        reason: reason.to_string(),
    };
    let parts: Vec<&str> = text.split(':').collect();
    let [location, window, day] = parts.as_slice() else {
        return Err(bad("expected location:window:day"));
    };
    let location = inst
        .locations
        .iter()
        .position(|l| l == location)
        .ok_or_else(|| bad("unknown location name"))?;
    let window = match *window {
        "day" => ShiftWindow::Day,
        "night" => ShiftWindow::Night,
        _ => return Err(bad("window must be 'day' or 'night'")),
    };
    let reference_day: i32 =
        day.parse().map_err(|_| bad("reference day must be an integer"))?;
    Ok(ShiftKey { location: LocationId(location), window, reference_day })
}

/// Does the key denote a shift of this instance's horizon?
pub fn shift_exists(inst: &Instance, key: &ShiftKey) -> bool {
    let days = inst.horizon_days() as i32;
    let day_range = match key.window {
        ShiftWindow::Day => 0..days,
        ShiftWindow::Night => -1..days,
    };
    key.location.0 < inst.locations.len() && day_range.contains(&key.reference_day)
}

/// Parses a duration with unit suffixes: `30s`, `90m`, `2h`, `1h30m`,
/// `0.5h`. Concatenated segments add up.
pub fn parse_duration(text: &str) -> Result<Duration, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty duration".into());
    }
    let mut total = 0.0f64;
    let mut number = String::new();
    let mut any_segment = false;
    for c in text.chars() {
        match c {
            '0'..='9' | '.' => number.push(c),
            's' | 'm' | 'h' => {
                let value: f64 = number
                    .parse()
                    .map_err(|_| format!("bad number {number:?} in duration {text:?}"))?;
                total += match c {
                    's' => value,
                    'm' => value * 60.0,
                    _ => value * 3600.0,
                };
                number.clear();
                any_segment = true;
            }
            _ => return Err(format!("unexpected {c:?} in duration {text:?}")),
        }
    }
    if !number.is_empty() {
        return Err(format!("duration {text:?} is missing a unit suffix (s, m or h)"));
    }
    if !any_segment {
        return Err(format!("duration {text:?} has no value"));
    }
    if total <= 0.0 {
        return Err(format!("duration {text:?} must be positive"));
    }
    Ok(Duration::from_secs_f64(total))
}

/// Loads or generates the configured instance.
pub fn obtain_instance(source: &InstanceSource) -> Result<Instance, ScenarioError> {
    match source {
        InstanceSource::File(path) => Ok(Instance::load(path)?),
        InstanceSource::Generated(spec) => Ok(generate_instance(spec)?),
    }
}

/// Runs one scenario end to end and writes all artifacts.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport, ScenarioError> {
    let inst = obtain_instance(&cfg.source)?;
    let scope = match cfg.scope {
        ScenarioScope::SingleShift(key) => {
            if !shift_exists(&inst, &key) {
                return Err(ScenarioError::UnknownShift(format!(
                    "{}:{}:{}",
                    key.location.0,
                    match key.window {
                        ShiftWindow::Day => "day",
                        ShiftWindow::Night => "night",
                    },
                    key.reference_day
                )));
            }
            ShiftScope::Shifts(BTreeSet::from([key]))
        }
        ScenarioScope::AllDayShifts => ShiftScope::AllDayShifts,
    };

    std::fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    let instance_path = match &cfg.source {
        // Persist generated instances so the run can be replayed from disk.
        InstanceSource::Generated(_) => {
            let path = cfg.output_dir.join("instance.toml");
            inst.save(&path)?;
            Some(path)
        }
        InstanceSource::File(_) => None,
    };

    let csv_path = cfg.output_dir.join("convergence.csv");
    let mut log = ConvergenceLog::create(&csv_path).map_err(io_err(&csv_path))?;
    let mut log_error: Option<io::Error> = None;

    let started = Instant::now();
    let result = lbbd::run_with_observer(&inst, &scope, &cfg.strategy, cfg.time_limit, |rec| {
        if log_error.is_none() {
            if let Err(e) = log.append(rec) {
                log_error = Some(e);
            }
        }
    })?;
    let elapsed_secs = started.elapsed().as_secs_f64();
    if let Some(source) = log_error {
        return Err(ScenarioError::Io { path: csv_path.display().to_string(), source });
    }

    let gantt_path = cfg.output_dir.join("gantt.txt");
    let mut gantt = String::new();
    for (key, schedule) in &result.schedules {
        gantt.push_str(&report::render_gantt(&inst, key, schedule));
        gantt.push('\n');
    }
    std::fs::write(&gantt_path, gantt).map_err(io_err(&gantt_path))?;

    let schedules_path = cfg.output_dir.join("schedules.json");
    let schedules = report::schedules_file(&inst, &result.schedules);
    let json = serde_json::to_string_pretty(&schedules).expect("schedule snapshot serializes");
    std::fs::write(&schedules_path, json).map_err(io_err(&schedules_path))?;

    let summary_path = cfg.output_dir.join("summary.toml");
    let summary = report::summarize(
        &result,
        &cfg.strategy.to_string(),
        &cfg.scope.to_string(),
        elapsed_secs,
    );
    let text = toml::to_string(&summary).expect("summary serializes");
    std::fs::write(&summary_path, text).map_err(io_err(&summary_path))?;

    Ok(ScenarioReport {
        result,
        summary,
        paths: ArtifactPaths {
            instance: instance_path,
            convergence_csv: csv_path,
            schedules_json: schedules_path,
            gantt_txt: gantt_path,
            summary_toml: summary_path,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lbbd::RunStatus;
    use crate::report::parse_convergence_log;

    #[test]
    fn durations_parse_with_suffixes() {
        assert_eq!(parse_duration("30s").unwrap(), Duration::from_secs(30));
        assert_eq!(parse_duration("90m").unwrap(), Duration::from_secs(5400));
        assert_eq!(parse_duration("2h").unwrap(), Duration::from_secs(7200));
        assert_eq!(parse_duration("1h30m").unwrap(), Duration::from_secs(5400));
        assert_eq!(parse_duration("0.5h").unwrap(), Duration::from_secs(1800));
        assert!(parse_duration("10").is_err());
        assert!(parse_duration("h").is_err());
        assert!(parse_duration("0s").is_err());
        assert!(parse_duration("5d").is_err());
        assert!(parse_duration("").is_err());
    }

    #[test]
    fn shift_keys_parse_against_location_names() {
        let inst = generate_instance(&GeneratorSpec::toy3()).unwrap();
        let key = parse_shift_key(&inst, "loc1:day:1").unwrap();
        assert_eq!(key.location, LocationId(1));
        assert_eq!(key.window, ShiftWindow::Day);
        assert_eq!(key.reference_day, 1);
        assert!(shift_exists(&inst, &key));

        assert!(parse_shift_key(&inst, "nowhere:day:0").is_err());
        assert!(parse_shift_key(&inst, "loc0:noon:0").is_err());
        assert!(parse_shift_key(&inst, "loc0:day").is_err());

        let night_before = parse_shift_key(&inst, "loc0:night:-1").unwrap();
        assert!(shift_exists(&inst, &night_before));
        let beyond = parse_shift_key(&inst, "loc0:day:9").unwrap();
        assert!(!shift_exists(&inst, &beyond));
    }

    #[test]
    fn scenario_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ScenarioConfig {
            source: InstanceSource::Generated(GeneratorSpec::toy3()),
            scope: ScenarioScope::AllDayShifts,
            strategy: CutStrategy::min_cut(),
            time_limit: Duration::from_secs(120),
            output_dir: dir.path().join("run"),
        };
        let report = run_scenario(&cfg).unwrap();
        assert_eq!(report.result.status, RunStatus::Optimal);
        assert_eq!(report.summary.status, "OPTIMAL");
        assert!(report.summary.iterations >= 1);

        let csv = std::fs::read_to_string(&report.paths.convergence_csv).unwrap();
        let rows = parse_convergence_log(&csv).unwrap();
        assert_eq!(rows.len(), report.result.history.len());

        let regenerated =
            Instance::load(report.paths.instance.as_ref().unwrap()).unwrap();
        assert_eq!(regenerated, generate_instance(&GeneratorSpec::toy3()).unwrap());

        assert!(report.paths.gantt_txt.exists());
        assert!(report.paths.schedules_json.exists());
        let summary_text = std::fs::read_to_string(&report.paths.summary_toml).unwrap();
        assert!(summary_text.contains("format_version = 1"));
    }

    #[test]
    fn single_shift_scenario_on_a_quiet_shift_ends_immediately() {
        let dir = tempfile::tempdir().unwrap();
        let inst = generate_instance(&GeneratorSpec::toy3()).unwrap();
        // The night before day 0 exists as a shift but can never hold a
        // job (all MOs start at 07:00 or later), so it is trivially quiet.
        let key = parse_shift_key(&inst, "loc0:night:-1").unwrap();
        let path = dir.path().join("toy3.toml");
        inst.save(&path).unwrap();
        let cfg = ScenarioConfig {
            source: InstanceSource::File(path),
            scope: ScenarioScope::SingleShift(key),
            strategy: CutStrategy::naive(),
            time_limit: Duration::from_secs(120),
            output_dir: dir.path().join("run"),
        };
        let report = run_scenario(&cfg).unwrap();
        assert_eq!(report.result.status, RunStatus::Optimal);
        assert_eq!(report.result.history.len(), 1);
        assert_eq!(report.summary.final_violations, 0);
        assert!(report.paths.instance.is_none());
    }

    #[test]
    fn unknown_single_shift_target_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ScenarioConfig {
            source: InstanceSource::Generated(GeneratorSpec::toy3()),
            scope: ScenarioScope::SingleShift(ShiftKey {
                location: LocationId(9),
                window: ShiftWindow::Day,
                reference_day: 0,
            }),
            strategy: CutStrategy::naive(),
            time_limit: Duration::from_secs(10),
            output_dir: dir.path().to_path_buf(),
        };
        assert!(matches!(run_scenario(&cfg).unwrap_err(), ScenarioError::UnknownShift(_)));
    }
}
