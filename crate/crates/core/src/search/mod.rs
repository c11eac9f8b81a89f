//! The iteration kernel: select an unscheduled activity, select a location
//! for it, place it and evict whatever it collides with.
//!
//! The schedule held by a [`SolverState`] is sound before and after every
//! call in this module.

mod heuristics;
mod state;
mod tabu;
mod weights;

pub use heuristics::{ActivityStats, LocationChoice, LocationStats, ScoredLocation};
pub use state::{ActivityHistory, BestKey, BestSnapshot, SearchError, SolverState};
pub use tabu::{TabuList, TabuStatus};
pub use weights::{
    ActivityStrategy, ActivityWeights, HeuristicWeights, LocationRule, LocationWeights,
    WeightsError,
};

use crate::io::LocationDoc;
use crate::model::feasibility::{classify, fits, ConflictClass};
use crate::model::{conflicts, ActivityIdx, Location};
use serde::Serialize;
use std::sync::atomic::{AtomicBool, Ordering};

/// What one iteration did.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport {
    pub iteration: u64,
    pub activity: String,
    pub activity_score: Option<f64>,
    /// Admissible locations before tabu filtering.
    pub candidates: usize,
    pub location: Option<LocationDoc>,
    pub stats: Option<LocationStats>,
    pub score: Option<f64>,
    pub evicted: Vec<String>,
    pub unscheduled: usize,
    /// No location survived filtering; the activity stays unscheduled.
    pub skipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Complete,
    IterationCap,
    Interrupted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SolveOutcome {
    pub iterations: u64,
    pub reason: StopReason,
}

impl SolverState {
    /// Puts `a` at `loc`, evicting every conflicting activity. Returns the
    /// evicted set in ascending order.
    pub fn place(
        &mut self,
        a: ActivityIdx,
        loc: Location,
    ) -> Result<Vec<ActivityIdx>, SearchError> {
        if !self.is_unscheduled(a) {
            return Err(SearchError::NotUnscheduled(a));
        }
        if !self.problem.selections(a).contains(&loc.selection)
            || !fits(&self.problem, a, loc.start, &loc.selection)
            || classify(&self.problem, &self.schedule, a, loc.start, &loc.selection)
                == ConflictClass::Blocked
        {
            return Err(SearchError::NotACandidate(a));
        }
        let evicted: Vec<ActivityIdx> = conflicts(&self.problem, &self.schedule, a, &loc)
            .into_iter()
            .collect();
        for c in &evicted {
            self.remove_from_schedule(*c, Some(a), true);
        }
        self.schedule.assign(&self.problem, a, loc.clone());
        self.mark_scheduled(a);
        self.tabu.push(a, loc);
        Ok(evicted)
    }

    /// One full select-activity, select-location, place step.
    pub fn iterate(&mut self) -> Result<IterationReport, SearchError> {
        if self.unscheduled.is_empty() {
            return Err(SearchError::NothingToSchedule);
        }
        self.iteration += 1;
        let (a, activity_score) = self.select_activity()?;
        let id = self.problem.activity(a).id.clone();
        let choice = match self.select_location(a) {
            Ok(choice) => choice,
            Err(SearchError::NoLocation(_)) => {
                let candidates =
                    crate::model::enumerate_locations(&self.problem, &self.schedule, a).len();
                return Ok(IterationReport {
                    iteration: self.iteration,
                    activity: id,
                    activity_score,
                    candidates,
                    location: None,
                    stats: None,
                    score: None,
                    evicted: Vec::new(),
                    unscheduled: self.unscheduled.len(),
                    skipped: true,
                });
            }
            Err(e) => return Err(e),
        };
        let location = LocationDoc::from_location(&self.problem, &choice.location);
        let evicted = self.place(a, choice.location)?;
        self.update_best();
        debug_assert!(
            crate::model::check_schedule(&self.problem, &self.schedule).is_empty(),
            "unsound schedule after iteration {}",
            self.iteration
        );
        Ok(IterationReport {
            iteration: self.iteration,
            activity: id,
            activity_score,
            candidates: choice.candidates,
            location: Some(location),
            stats: Some(choice.stats),
            score: Some(choice.score),
            evicted: evicted
                .iter()
                .map(|c| self.problem.activity(*c).id.clone())
                .collect(),
            unscheduled: self.unscheduled.len(),
            skipped: false,
        })
    }

    /// Whether the loop should run another iteration.
    pub fn can_continue(&self) -> bool {
        !self.unscheduled.is_empty() && self.iteration < self.weights.max_iterations
    }

    /// Iterates until everything is scheduled, the iteration cap is hit, or
    /// `stop` is raised.
    pub fn solve(&mut self, stop: &AtomicBool) -> SolveOutcome {
        self.solve_with(stop, |_, _| {})
    }

    /// [`SolverState::solve`] with a callback after each iteration.
    pub fn solve_with(
        &mut self,
        stop: &AtomicBool,
        mut on_iteration: impl FnMut(&IterationReport, &SolverState),
    ) -> SolveOutcome {
        let start = self.iteration;
        let reason = loop {
            if self.unscheduled.is_empty() {
                break StopReason::Complete;
            }
            if self.iteration >= self.weights.max_iterations {
                break StopReason::IterationCap;
            }
            if stop.load(Ordering::Relaxed) {
                break StopReason::Interrupted;
            }
            match self.iterate() {
                Ok(report) => on_iteration(&report, self),
                Err(SearchError::NothingToSchedule) => break StopReason::Complete,
                Err(e) => unreachable!("iteration contract broken: {e}"),
            }
        };
        SolveOutcome {
            iterations: self.iteration - start,
            reason,
        }
    }
}
