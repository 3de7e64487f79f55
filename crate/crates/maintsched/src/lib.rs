//! Exact solver for joint maintenance scheduling and location choice on a
//! rolling-stock fleet.
//!
//! Units (train sets) expose *maintenance opportunities* (MOs): time windows
//! at a physical location during which maintenance activities may be
//! performed. Each activity type has a fixed duration and a maximum interval
//! between consecutive executions. The planner must
//!
//! 1. pick which activity types run in which MOs so that every unit's
//!    interval rules hold over the horizon (the *master problem*, solved
//!    exactly by branch and bound in [`master`]),
//! 2. open a limited number of daytime maintenance locations ([`master`]),
//! 3. and make sure the jobs that land in any one maintenance shift can
//!    actually be executed by the available teams without overlap (the
//!    per-shift *scheduling subproblem* in [`scheduling`]).
//!
//! The two levels are tied together with logic-based Benders decomposition
//! ([`lbbd`]): whenever a shift's jobs cannot be scheduled with the allowed
//! number of teams, a *cut* is generated ([`cuts`], [`relaxation`]) that
//! forbids that combination of assignments, and the master is re-solved.
//! Iterating converges to a capacity-feasible optimum.
//!
//! The objective prefers daytime work: it minimizes the number of nighttime
//! activities, with a small epsilon penalty per activity to avoid gratuitous
//! assignments.
//!
//! Supporting modules: [`instance`] holds the data model, [`shifts`] turns a
//! master solution into per-shift job sets, [`generator`] produces synthetic
//! instances, [`report`] renders convergence logs / Gantt charts / summaries,
//! and [`scenario`] wires everything into the flows used by the CLI.
//!
//! With the default `parallel` feature the per-shift feasibility checks and
//! cut generation inside an LBBD iteration run on rayon; results are merged
//! in shift-key order, so parallel and sequential runs are bit-identical.

pub mod cuts;
pub mod generator;
pub mod instance;
pub mod lbbd;
pub mod master;
pub mod par;
pub mod relaxation;
pub mod report;
pub mod scenario;
pub mod scheduling;
pub mod shifts;

pub use instance::{Instance, LocationId, MaintenanceType, MoIndex, TypeId, Unit, UnitId};
pub use shifts::{Job, JobId, ShiftKey, ShiftWindow};
