//! Co-planning of cable upgrades and battery storage for radial
//! distribution feeders under high EV penetration.

pub mod grid;

pub use grid::{
    BranchSpec, BusId, BusKind, BusSpec, CableCatalog, CableType, CaseParams, GridError,
    NetworkCase,
};
pub mod conic;
pub mod ev;
pub mod models;
pub mod pipeline;
pub mod solver;
