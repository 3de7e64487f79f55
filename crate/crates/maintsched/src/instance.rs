//! Data model for scheduling instances: units, maintenance opportunities,
//! activity types and planning policy, plus the structured-text file format.
//!
//! Conventions used throughout the crate:
//!
//! * absolute times on the planning horizon are **hours** as `f64`, with
//!   `0.0` = midnight starting day 0 (days are 0-based);
//! * activity durations and everything inside a single shift are **integer
//!   minutes** (conversion rounds to the nearest minute);
//! * an MO index is the 0-based position in the unit's list, which must be
//!   sorted by start time.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a unit in [`Instance::units`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnitId(pub usize);

/// Index of a location in [`Instance::locations`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LocationId(pub usize);

/// Index of an activity type in [`Instance::types`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TypeId(pub usize);

/// 0-based position of an MO in its unit's start-sorted list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MoIndex(pub usize);

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for MoIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A maintenance activity type: fixed duration, maximum interval between
/// consecutive executions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaintenanceType {
    /// Small display id (as used in instance files), not the internal index.
    pub id: u32,
    /// Activity duration in minutes, at least 1.
    pub duration_min: u32,
    /// Maximum allowed gap: a successor must start within `interval_hr`
    /// hours of the predecessor MO's end.
    pub interval_hr: f64,
}

/// A maintenance opportunity: a standstill window of one unit at a location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaintenanceOpportunity {
    pub location: LocationId,
    pub start_hr: f64,
    pub end_hr: f64,
}

/// One unit (train set) with its start-sorted MO list and per-type initial
/// ages. `initial_age_hr[k]` is how long ago type `k` last ran before the
/// horizon began; 0 means as good as new.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub name: String,
    pub mos: Vec<MaintenanceOpportunity>,
    pub initial_age_hr: Vec<f64>,
}

/// A complete scheduling instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    /// Planning horizon length in hours from midnight of day 0.
    pub horizon_hr: f64,
    pub locations: Vec<String>,
    pub types: Vec<MaintenanceType>,
    pub units: Vec<Unit>,
    /// Daytime window start, hours past midnight (default 7.0).
    pub day_start_hr: f64,
    /// Nighttime window start, hours past midnight (default 19.0).
    pub night_start_hr: f64,
    /// Maximum number of locations that may be opened for daytime work.
    pub max_day_locations: u32,
    /// Maintenance teams available per shift.
    pub teams_per_shift: u32,
    /// Per-activity penalty in the objective.
    pub epsilon: f64,
}

pub const DEFAULT_DAY_START_HR: f64 = 7.0;
pub const DEFAULT_NIGHT_START_HR: f64 = 19.0;
pub const DEFAULT_MAX_DAY_LOCATIONS: u32 = 5;
pub const DEFAULT_TEAMS_PER_SHIFT: u32 = 1;
pub const DEFAULT_EPSILON: f64 = 0.001;

/// Rounds an hour value to the nearest whole minute.
pub fn hours_to_minutes(hr: f64) -> i64 {
    (hr * 60.0).round() as i64
}

impl Instance {
    /// Number of (possibly partial) calendar days covered by the horizon.
    pub fn horizon_days(&self) -> i64 {
        (self.horizon_hr / 24.0).ceil() as i64
    }

    pub fn mo(&self, unit: UnitId, mo: MoIndex) -> &MaintenanceOpportunity {
        &self.units[unit.0].mos[mo.0]
    }

    /// Whether an MO ending at `end_hr` counts as daytime: its end, taken
    /// modulo 24 h, falls in `[day_start, night_start)`. The lower boundary
    /// is inclusive, the upper exclusive, and the rule is periodic, so an MO
    /// ending at 31.0 h (7:00 on day 1) is daytime.
    pub fn is_daytime(&self, end_hr: f64) -> bool {
        let tod = end_hr.rem_euclid(24.0);
        self.day_start_hr <= tod && tod < self.night_start_hr
    }

    /// MOs of `unit` in which the next type-`after_ty` activity may run after
    /// an execution in MO `after` (`None` = before any execution, measured
    /// from the initial age).
    ///
    /// For a predecessor MO `j` the window is
    /// `{ p : end(j) < start(p) <= end(j) + interval }`; with no predecessor
    /// it is `{ p : start(p) <= interval + initial_age }`.
    pub fn successor_window(
        &self,
        unit: UnitId,
        after: Option<MoIndex>,
        ty: TypeId,
    ) -> Vec<MoIndex> {
        let u = &self.units[unit.0];
        let o = self.types[ty.0].interval_hr;
        match after {
            Some(j) => {
                let e = u.mos[j.0].end_hr;
                u.mos
                    .iter()
                    .enumerate()
                    .filter(|(_, m)| e < m.start_hr && m.start_hr <= e + o)
                    .map(|(p, _)| MoIndex(p))
                    .collect()
            }
            None => {
                let bound = o + u.initial_age_hr[ty.0];
                u.mos
                    .iter()
                    .enumerate()
                    .filter(|(_, m)| m.start_hr <= bound)
                    .map(|(p, _)| MoIndex(p))
                    .collect()
            }
        }
    }

    /// Structural validation. Returns all violations found (empty = valid).
    /// Overlapping MOs of one unit are *not* a violation; real standstill
    /// data contains them and downstream code handles them.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.horizon_hr > 0.0) {
            out.push(Violation::NonPositiveHorizon(self.horizon_hr));
        }
        if self.locations.is_empty() {
            out.push(Violation::NoLocations);
        }
        if self.types.is_empty() {
            out.push(Violation::NoTypes);
        }
        if !(0.0 <= self.day_start_hr
            && self.day_start_hr < self.night_start_hr
            && self.night_start_hr <= 24.0)
        {
            out.push(Violation::BadDayNightBounds {
                day_start_hr: self.day_start_hr,
                night_start_hr: self.night_start_hr,
            });
        }
        if !(self.epsilon > 0.0) {
            out.push(Violation::NonPositiveEpsilon(self.epsilon));
        }
        for (k, ty) in self.types.iter().enumerate() {
            if ty.duration_min < 1 {
                out.push(Violation::ZeroDuration { ty: TypeId(k) });
            }
            if !(ty.interval_hr > 0.0) {
                out.push(Violation::NonPositiveInterval { ty: TypeId(k) });
            }
        }
        for (i, u) in self.units.iter().enumerate() {
            if u.initial_age_hr.len() != self.types.len() {
                out.push(Violation::AgeArityMismatch {
                    unit: UnitId(i),
                    got: u.initial_age_hr.len(),
                    want: self.types.len(),
                });
            }
            if u.initial_age_hr.iter().any(|&a| a < 0.0) {
                out.push(Violation::NegativeAge { unit: UnitId(i) });
            }
            let mut prev_start = f64::NEG_INFINITY;
            for (j, m) in u.mos.iter().enumerate() {
                if m.location.0 >= self.locations.len() {
                    out.push(Violation::UnknownLocation {
                        unit: UnitId(i),
                        mo: MoIndex(j),
                    });
                }
                if !(m.start_hr < m.end_hr) {
                    out.push(Violation::EmptyWindow {
                        unit: UnitId(i),
                        mo: MoIndex(j),
                    });
                }
                if m.start_hr < 0.0 || m.end_hr > self.horizon_hr {
                    out.push(Violation::OutsideHorizon {
                        unit: UnitId(i),
                        mo: MoIndex(j),
                    });
                }
                if m.start_hr < prev_start {
                    out.push(Violation::MosNotSorted { unit: UnitId(i), mo: MoIndex(j) });
                }
                prev_start = m.start_hr;
            }
        }
        out
    }
}

/// A structural defect reported by [`Instance::validate`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("horizon must be positive, got {0}")]
    NonPositiveHorizon(f64),
    #[error("instance has no locations")]
    NoLocations,
    #[error("instance has no activity types")]
    NoTypes,
    #[error("day/night window bounds invalid: day {day_start_hr}, night {night_start_hr}")]
    BadDayNightBounds { day_start_hr: f64, night_start_hr: f64 },
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("type {ty:?} has zero duration")]
    ZeroDuration { ty: TypeId },
    #[error("type {ty:?} has non-positive interval")]
    NonPositiveInterval { ty: TypeId },
    #[error("unit {unit:?} has {got} initial ages for {want} types")]
    AgeArityMismatch { unit: UnitId, got: usize, want: usize },
    #[error("unit {unit:?} has a negative initial age")]
    NegativeAge { unit: UnitId },
    #[error("unit {unit:?} MO {mo:?} references an unknown location")]
    UnknownLocation { unit: UnitId, mo: MoIndex },
    #[error("unit {unit:?} MO {mo:?} has an empty window")]
    EmptyWindow { unit: UnitId, mo: MoIndex },
    #[error("unit {unit:?} MO {mo:?} lies outside the horizon")]
    OutsideHorizon { unit: UnitId, mo: MoIndex },
    #[error("unit {unit:?} MOs not sorted by start at index {mo:?}")]
    MosNotSorted { unit: UnitId, mo: MoIndex },
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("unsupported format_version {0} (this build reads version 1)")]
    UnsupportedVersion(u32),
    #[error("unknown location {name:?} in unit {unit:?}")]
    UnknownLocationName { unit: String, name: String },
    #[error("duplicate location name {0:?}")]
    DuplicateLocation(String),
    #[error("duplicate type id {0}")]
    DuplicateTypeId(u32),
    #[error("instance is structurally invalid: {0}")]
    Invalid(Violation),
}

// --- structured-text file format (TOML, format_version = 1) ---------------
//
// Field names are part of the on-disk contract; unknown fields are rejected.
// See README "Instance file format" for the worked example.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    format_version: u32,
    instance: InstanceHeader,
    #[serde(rename = "type")]
    types: Vec<TypeRecord>,
    #[serde(rename = "unit")]
    units: Vec<UnitRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceHeader {
    horizon_hr: f64,
    locations: Vec<String>,
    #[serde(default = "default_day_start")]
    day_start_hr: f64,
    #[serde(default = "default_night_start")]
    night_start_hr: f64,
    #[serde(default = "default_max_day_locations")]
    max_day_locations: u32,
    #[serde(default = "default_teams_per_shift")]
    teams_per_shift: u32,
    #[serde(default = "default_epsilon")]
    epsilon: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TypeRecord {
    id: u32,
    duration_min: u32,
    interval_hr: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitRecord {
    name: String,
    /// One entry per `[[type]]`, in file order.
    #[serde(default)]
    initial_age_hr: Vec<f64>,
    #[serde(default, rename = "mo")]
    mos: Vec<MoRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MoRecord {
    location: String,
    start_hr: f64,
    end_hr: f64,
}

fn default_day_start() -> f64 {
    DEFAULT_DAY_START_HR
}
fn default_night_start() -> f64 {
    DEFAULT_NIGHT_START_HR
}
fn default_max_day_locations() -> u32 {
    DEFAULT_MAX_DAY_LOCATIONS
}
fn default_teams_per_shift() -> u32 {
    DEFAULT_TEAMS_PER_SHIFT
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl Instance {
    pub fn from_toml_str(text: &str) -> Result<Self, FormatError> {
        let file: InstanceFile = toml::from_str(text)?;
        if file.format_version != 1 {
            return Err(FormatError::UnsupportedVersion(file.format_version));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &file.instance.locations {
            if !seen.insert(l.clone()) {
                return Err(FormatError::DuplicateLocation(l.clone()));
            }
        }
        let mut ids = std::collections::HashSet::new();
        for t in &file.types {
            if !ids.insert(t.id) {
                return Err(FormatError::DuplicateTypeId(t.id));
            }
        }
        let loc_index = |name: &str| file.instance.locations.iter().position(|l| l == name);
        let mut units = Vec::with_capacity(file.units.len());
        for u in &file.units {
            let mut mos = Vec::with_capacity(u.mos.len());
            for m in &u.mos {
                let loc = loc_index(&m.location).ok_or_else(|| FormatError::UnknownLocationName {
                    unit: u.name.clone(),
                    name: m.location.clone(),
                })?;
                mos.push(MaintenanceOpportunity {
                    location: LocationId(loc),
                    start_hr: m.start_hr,
                    end_hr: m.end_hr,
                });
            }
            let ages = if u.initial_age_hr.is_empty() {
                vec![0.0; file.types.len()]
            } else {
                u.initial_age_hr.clone()
            };
            units.push(Unit { name: u.name.clone(), mos, initial_age_hr: ages });
        }
        let inst = Instance {
            horizon_hr: file.instance.horizon_hr,
            locations: file.instance.locations,
            types: file
                .types
                .iter()
                .map(|t| MaintenanceType {
                    id: t.id,
                    duration_min: t.duration_min,
                    interval_hr: t.interval_hr,
                })
                .collect(),
            units,
            day_start_hr: file.instance.day_start_hr,
            night_start_hr: file.instance.night_start_hr,
            max_day_locations: file.instance.max_day_locations,
            teams_per_shift: file.instance.teams_per_shift,
            epsilon: file.instance.epsilon,
        };
        if let Some(v) = inst.validate().into_iter().next() {
            return Err(FormatError::Invalid(v));
        }
        Ok(inst)
    }

    pub fn to_toml_string(&self) -> Result<String, FormatError> {
        let file = InstanceFile {
            format_version: 1,
            instance: InstanceHeader {
                horizon_hr: self.horizon_hr,
                locations: self.locations.clone(),
                day_start_hr: self.day_start_hr,
                night_start_hr: self.night_start_hr,
                max_day_locations: self.max_day_locations,
                teams_per_shift: self.teams_per_shift,
                epsilon: self.epsilon,
            },
            types: self
                .types
                .iter()
                .map(|t| TypeRecord {
                    id: t.id,
                    duration_min: t.duration_min,
                    interval_hr: t.interval_hr,
                })
                .collect(),
            units: self
                .units
                .iter()
                .map(|u| UnitRecord {
                    name: u.name.clone(),
                    initial_age_hr: u.initial_age_hr.clone(),
                    mos: u
                        .mos
                        .iter()
                        .map(|m| MoRecord {
                            location: self.locations[m.location.0].clone(),
                            start_hr: m.start_hr,
                            end_hr: m.end_hr,
                        })
                        .collect(),
                })
                .collect(),
        };
        Ok(toml::to_string(&file)?)
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        let text = self.to_toml_string()?;
        std::fs::write(path, text).map_err(|source| FormatError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
