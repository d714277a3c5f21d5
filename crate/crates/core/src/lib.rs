//! Taxi dispatch simulation with typed requests and a compensation-based
//! reassignment mediator.
//!
//! The crate is organised bottom-up: [`geometry`] and [`model`] hold the
//! world, [`taxonomy`] the taxi characteristics, [`economics`] prices and
//! the mediator's ledger, [`matching`] the assignment solver, [`strategies`]
//! the dispatch policies, [`sim`] the engine and [`metrics`] the reported
//! figures.

pub mod economics;
pub mod geometry;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod sim;
pub mod strategies;
pub mod taxonomy;

pub use economics::{Compensation, LedgerMode, MediatorLedger, PricingMode, PricingScheme};
pub use geometry::{distance, Point, Trip};
pub use matching::{brute_force_assignment, solve_assignment, Assignment, CostMatrix};
pub use metrics::{aggregate, ReportRow, RunMeta, RunStats, TripRecord};
pub use model::{CustomerId, CustomerRequest, CustomerState, Taxi, TaxiId, TaxiState, World};
pub use sim::{run, RunOutput, SimConfig, Simulation};
pub use strategies::{AssignmentDecision, AssignmentStrategy, ReassignPolicy, Settlement, StrategyKind};
pub use taxonomy::{CharSet, Taxonomy};
