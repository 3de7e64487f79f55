//! Synthetic instance generator.
//!
//! Real circulation data is not redistributable, so benchmarks run on
//! generated instances with a similar shape: every unit gets a nightly
//! standstill and a staggered daytime standstill per day, plus occasional
//! extra daytime windows. Capacity conflicts are engineered explicitly: a
//! chosen fraction of (location, day) daytime shifts receives a pair of
//! units whose only daytime opportunity that day is the same
//! minimum-length window, which any optimal assignment must double-book.
//!
//! The engineered window sits in a reserved end-of-day sliver that no
//! anchor or extra window reaches (anchors and extras end by the sliver's
//! start), so a flow relaxation of the conflicted shift isolates exactly
//! the engineered pair. On a conflict day the location's other resident
//! units also get an alternate-location copy of their anchor window, so a
//! whole-shift cut can always be satisfied by re-routing a bystander at
//! zero cost — coarse cuts provably need more iterations than sharp ones.
//!
//! Structural guarantees:
//!
//! * the nightly backbone (21:00–23:00 at the unit's home location, every
//!   day) keeps the all-night assignment feasible, so the master problem
//!   stays feasible under any accumulation of daytime cuts;
//! * generation is a pure function of [`GeneratorSpec`] (one seeded
//!   stream, fixed draw order), so equal specs produce byte-identical
//!   instance files.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::instance::{
    Instance, LocationId, MaintenanceOpportunity, MaintenanceType, Unit,
    DEFAULT_DAY_START_HR, DEFAULT_EPSILON, DEFAULT_MAX_DAY_LOCATIONS,
    DEFAULT_NIGHT_START_HR, DEFAULT_TEAMS_PER_SHIFT,
};

/// Nightly backbone window, hours past each midnight.
pub const BACKBONE_START_HR: f64 = 21.0;
pub const BACKBONE_END_HR: f64 = 23.0;
/// Gap from one backbone window's end to the next day's start; types with
/// a shorter interval cannot ride the backbone.
pub const BACKBONE_GAP_HR: f64 = 24.0 - (BACKBONE_END_HR - BACKBONE_START_HR);
/// Length of each unit's regular daytime window.
const ANCHOR_WINDOW_HR: f64 = 5.0;
/// End of engineered conflict windows, hours past midnight. The window is
/// `[end - min_duration, end]`; everything else ends by the window's start.
const CONFLICT_END_HR: f64 = 18.75;

/// Start of the engineered conflict window for the given shortest type
/// duration, in minutes past midnight.
fn conflict_start_min(min_duration: u32) -> i64 {
    (CONFLICT_END_HR * 60.0) as i64 - min_duration as i64
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub units: u32,
    pub locations: u32,
    pub days: u32,
    /// One (duration_min, interval_hr) pair per maintenance type.
    pub types: Vec<(u32, f64)>,
    /// Probability of one extra daytime MO per unit and day.
    pub extra_mo_rate: f64,
    /// Uniform range for extra-MO window lengths, hours.
    pub extra_window_hr: (f64, f64),
    /// Target fraction of (location, day) daytime shifts engineered to
    /// need at least two teams.
    pub conflict_pressure: f64,
    pub seed: u64,
}

/// The 30-minute/24-hour and 60-minute/48-hour standard checks.
pub fn default_types() -> Vec<(u32, f64)> {
    vec![(30, 24.0), (60, 48.0)]
}

impl GeneratorSpec {
    /// Small two-day fixture with exactly one engineered conflict.
    pub fn toy3() -> Self {
        GeneratorSpec {
            units: 3,
            locations: 2,
            days: 2,
            types: default_types(),
            extra_mo_rate: 0.3,
            extra_window_hr: (1.0, 3.0),
            conflict_pressure: 0.25,
            seed: 7,
        }
    }

    /// Week-long benchmark shape: 24 units, 4 locations, enough engineered
    /// pressure for at least 15 conflicted daytime shifts.
    pub fn ns_like() -> Self {
        GeneratorSpec {
            units: 24,
            locations: 4,
            days: 7,
            types: default_types(),
            extra_mo_rate: 0.3,
            extra_window_hr: (1.0, 3.0),
            conflict_pressure: 0.6,
            seed: 20,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenerationError {
    #[error("{0} must be positive")]
    ZeroCount(&'static str),
    #[error("spec has no maintenance types")]
    NoTypes,
    #[error("type #{index} has zero duration")]
    ZeroDuration { index: usize },
    #[error(
        "type #{index} interval {interval_hr} h is below the {required} h backbone gap, \
         so an all-night assignment cannot exist"
    )]
    IntervalTooShort { index: usize, interval_hr: f64, required: f64 },
    #[error(
        "total type duration {total_min} min exceeds the {capacity_min} min backbone window"
    )]
    BackboneOverloaded { total_min: u32, capacity_min: u32 },
    #[error("conflict pressure {0} is outside [0, 1]")]
    PressureOutOfRange(f64),
    #[error("extra MO rate {0} is outside [0, 1]")]
    RateOutOfRange(f64),
    #[error("extra window range [{lo}, {hi}] h must satisfy 0 < lo <= hi <= 12")]
    BadWindowRange { lo: f64, hi: f64 },
    #[error("engineered conflicts need at least 2 units, spec has {0}")]
    TooFewUnits(u32),
    #[error("only {placed} of {target} conflicts are placeable (units/locations too few)")]
    ConflictsUnplaceable { target: usize, placed: usize },
}

fn validate_spec(spec: &GeneratorSpec) -> Result<(), GenerationError> {
    if spec.units == 0 {
        return Err(GenerationError::ZeroCount("units"));
    }
    if spec.locations == 0 {
        return Err(GenerationError::ZeroCount("locations"));
    }
    if spec.days == 0 {
        return Err(GenerationError::ZeroCount("days"));
    }
    if spec.types.is_empty() {
        return Err(GenerationError::NoTypes);
    }
    let mut total_min = 0u32;
    for (index, &(duration_min, interval_hr)) in spec.types.iter().enumerate() {
        if duration_min == 0 {
            return Err(GenerationError::ZeroDuration { index });
        }
        if interval_hr < BACKBONE_GAP_HR {
            return Err(GenerationError::IntervalTooShort {
                index,
                interval_hr,
                required: BACKBONE_GAP_HR,
            });
        }
        total_min += duration_min;
    }
    let capacity_min = ((BACKBONE_END_HR - BACKBONE_START_HR) * 60.0) as u32;
    if total_min > capacity_min {
        return Err(GenerationError::BackboneOverloaded { total_min, capacity_min });
    }
    if !(0.0..=1.0).contains(&spec.conflict_pressure) {
        return Err(GenerationError::PressureOutOfRange(spec.conflict_pressure));
    }
    if !(0.0..=1.0).contains(&spec.extra_mo_rate) {
        return Err(GenerationError::RateOutOfRange(spec.extra_mo_rate));
    }
    let (lo, hi) = spec.extra_window_hr;
    if !(lo > 0.0 && lo <= hi && hi <= 12.0) {
        return Err(GenerationError::BadWindowRange { lo, hi });
    }
    // Extras must fit between 07:00 and the conflict sliver.
    let min_duration = spec.types.iter().map(|&(d, _)| d).min().expect("non-empty");
    let available = conflict_start_min(min_duration) - (DEFAULT_DAY_START_HR * 60.0) as i64;
    if (lo * 60.0) as i64 > available {
        return Err(GenerationError::BadWindowRange { lo, hi });
    }
    if spec.conflict_pressure > 0.0 && spec.units < 2 {
        return Err(GenerationError::TooFewUnits(spec.units));
    }
    Ok(())
}

/// Generates an instance from a [`GeneratorSpec`]. Deterministic: the
/// same spec (seed included) always yields the same instance.
pub fn generate_instance(spec: &GeneratorSpec) -> Result<Instance, GenerationError> {
    validate_spec(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let units = spec.units as usize;
    let locations = spec.locations as usize;
    let days = spec.days as usize;
    let min_duration =
        spec.types.iter().map(|&(d, _)| d).min().expect("types checked non-empty");

    // Draw order is part of the format contract: home locations, anchor
    // staggers, conflict slots, per-day conflict pairs, then extras.
    let home_loc: Vec<usize> =
        (0..units).map(|_| rng.random_range(0..locations)).collect();
    // Anchor start offset past 07:00 in minutes; the window must end by the
    // start of the conflict sliver (and hence well before 19:00).
    let conflict_start = conflict_start_min(min_duration);
    let anchor_min = (DEFAULT_DAY_START_HR * 60.0) as i64;
    let anchor_len = (ANCHOR_WINDOW_HR * 60.0) as i64;
    let max_stagger = conflict_start - anchor_min - anchor_len;
    let stagger_min: Vec<i64> =
        (0..units).map(|_| rng.random_range(0..=max_stagger)).collect();

    let mut slots: Vec<(usize, usize)> = (0..days)
        .flat_map(|d| (0..locations).map(move |l| (d, l)))
        .collect();
    let target = (spec.conflict_pressure * slots.len() as f64).round() as usize;
    slots.shuffle(&mut rng);
    let per_day_cap = locations.min(units / 2);
    let mut day_counts = vec![0usize; days];
    let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(target);
    for (d, l) in slots {
        if chosen.len() == target {
            break;
        }
        if day_counts[d] < per_day_cap {
            day_counts[d] += 1;
            chosen.push((d, l));
        }
    }
    if chosen.len() < target {
        return Err(GenerationError::ConflictsUnplaceable { target, placed: chosen.len() });
    }
    chosen.sort_unstable();

    // (unit, day) -> engineered conflict location.
    let mut conflict_at: Vec<Vec<Option<usize>>> = vec![vec![None; days]; units];
    {
        let mut i = 0;
        for d in 0..days {
            let todays: Vec<usize> = chosen
                .iter()
                .skip(i)
                .take_while(|&&(cd, _)| cd == d)
                .map(|&(_, l)| l)
                .collect();
            i += todays.len();
            if todays.is_empty() {
                continue;
            }
            let mut pool: Vec<usize> = (0..units).collect();
            pool.shuffle(&mut rng);
            for l in todays {
                for _ in 0..2 {
                    let u = pool.pop().expect("per-day cap keeps the pool non-empty");
                    conflict_at[u][d] = Some(l);
                }
            }
        }
    }

    // Extra decorative MOs; none on a unit's conflict day (the engineered
    // window stays that unit's only daytime option there) and none past the
    // conflict sliver's start (the sliver is reserved for conflicts).
    let (lo_min, hi_min) =
        ((spec.extra_window_hr.0 * 60.0) as i64, (spec.extra_window_hr.1 * 60.0) as i64);
    let mut extras: Vec<Vec<Vec<(usize, i64, i64)>>> = vec![vec![Vec::new(); days]; units];
    for u in 0..units {
        for d in 0..days {
            let roll: f64 = rng.random();
            if roll >= spec.extra_mo_rate || conflict_at[u][d].is_some() {
                continue;
            }
            let loc = rng.random_range(0..locations);
            let len = rng.random_range(lo_min..=hi_min.min(conflict_start - anchor_min));
            let start = rng.random_range(anchor_min..=conflict_start - len);
            extras[u][d].push((loc, start, len));
        }
    }

    // On a conflict day, the location's other residents get an
    // alternate-location copy of their anchor window. Deterministic: no
    // draws involved.
    let mut reroute_at: Vec<Vec<Option<usize>>> = vec![vec![None; days]; units];
    if locations >= 2 {
        for &(d, l) in &chosen {
            for u in 0..units {
                if home_loc[u] == l && conflict_at[u][d].is_none() {
                    reroute_at[u][d] = Some((l + 1) % locations);
                }
            }
        }
    }

    let mut unit_records = Vec::with_capacity(units);
    for u in 0..units {
        let mut mos: Vec<MaintenanceOpportunity> = Vec::new();
        for d in 0..days {
            let base = (d * 1440) as i64;
            let (loc, start, len) = match conflict_at[u][d] {
                Some(l) => (l, base + conflict_start, min_duration as i64),
                None => (home_loc[u], base + anchor_min + stagger_min[u], anchor_len),
            };
            mos.push(window(loc, start, len));
            if let Some(alt) = reroute_at[u][d] {
                mos.push(window(alt, base + anchor_min + stagger_min[u], anchor_len));
            }
            for &(eloc, estart, elen) in &extras[u][d] {
                mos.push(window(eloc, base + estart, elen));
            }
            mos.push(window(home_loc[u], base + 1260, 120));
        }
        mos.sort_by(|a, b| {
            a.start_hr.total_cmp(&b.start_hr).then(a.end_hr.total_cmp(&b.end_hr))
        });
        unit_records.push(Unit {
            name: format!("u{u}"),
            mos,
            initial_age_hr: vec![0.0; spec.types.len()],
        });
    }

    let inst = Instance {
        horizon_hr: (days * 24) as f64,
        locations: (0..locations).map(|l| format!("loc{l}")).collect(),
        types: spec
            .types
            .iter()
            .enumerate()
            .map(|(k, &(duration_min, interval_hr))| MaintenanceType {
                id: k as u32 + 1,
                duration_min,
                interval_hr,
            })
            .collect(),
        units: unit_records,
        day_start_hr: DEFAULT_DAY_START_HR,
        night_start_hr: DEFAULT_NIGHT_START_HR,
        max_day_locations: DEFAULT_MAX_DAY_LOCATIONS,
        teams_per_shift: DEFAULT_TEAMS_PER_SHIFT,
        epsilon: DEFAULT_EPSILON,
    };
    assert!(inst.validate().is_empty(), "generator produced an invalid instance");
    Ok(inst)
}

fn window(loc: usize, start_min: i64, len_min: i64) -> MaintenanceOpportunity {
    MaintenanceOpportunity {
        location: LocationId(loc),
        start_hr: start_min as f64 / 60.0,
        end_hr: (start_min + len_min) as f64 / 60.0,
    }
}
