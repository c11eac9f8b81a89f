//! Timetable construction by iterative forward search, open to user edits
//! while it runs.
//!
//! [`model`] holds problems and schedules, [`search`] the solver kernel,
//! [`session`] the edit-and-repair loop, [`io`] the JSON documents.

pub mod bench;
pub mod fixtures;
pub mod generator;
pub mod io;
pub mod model;
pub mod search;
pub mod session;

pub use model::{ActivityIdx, Location, Problem, ResourceIdx, Schedule};
pub use search::{HeuristicWeights, SolverState};
pub use session::{Edit, Session};
