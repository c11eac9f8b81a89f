use super::tabu::TabuList;
use super::weights::{HeuristicWeights, WeightsError};
use crate::model::{check_schedule, ActivityIdx, Location, Problem, Schedule, Violation};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::cmp::Reverse;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error("initial schedule is unsound: {0:?}")]
    Unsound(Vec<Violation>),
    #[error("schedule was built for a different problem")]
    ScheduleMismatch,
    #[error("no unscheduled activity left")]
    NothingToSchedule,
    #[error("activity {0} is not unscheduled")]
    NotUnscheduled(ActivityIdx),
    #[error("no admissible location for activity {0}")]
    NoLocation(ActivityIdx),
    #[error("location is not a candidate for activity {0}")]
    NotACandidate(ActivityIdx),
}

/// Per-activity memory kept across evictions.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ActivityHistory {
    /// Where the activity sat before it was last removed.
    #[serde(skip)]
    pub last_location: Option<Location>,
    /// Activity whose placement last evicted this one.
    #[serde(skip)]
    pub last_evictor: Option<ActivityIdx>,
    /// Lifetime number of removals from the schedule.
    pub n_removed: u64,
}

/// Lexicographic quality: more scheduled activities first, then fewer soft
/// violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct BestKey {
    pub scheduled: usize,
    pub soft: Reverse<usize>,
}

#[derive(Debug, Clone)]
pub struct BestSnapshot {
    pub schedule: Schedule,
    pub key: BestKey,
    pub iteration: u64,
}

/// Everything the iteration kernel works on. Confined to one thread at a
/// time; observers get copies.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub(crate) problem: Problem,
    pub(crate) schedule: Schedule,
    /// Sorted ascending so seeded draws replay identically.
    pub(crate) unscheduled: Vec<ActivityIdx>,
    pub(crate) tabu: TabuList,
    pub(crate) weights: HeuristicWeights,
    pub(crate) history: Vec<ActivityHistory>,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) iteration: u64,
    pub(crate) best: BestSnapshot,
}

impl SolverState {
    /// Fresh state with an empty schedule.
    pub fn new(
        problem: Problem,
        weights: HeuristicWeights,
        seed: u64,
    ) -> Result<Self, SearchError> {
        let schedule = Schedule::new(&problem);
        Self::with_schedule(problem, schedule, weights, seed)
    }

    /// State continuing from a given sound schedule.
    pub fn with_schedule(
        problem: Problem,
        schedule: Schedule,
        weights: HeuristicWeights,
        seed: u64,
    ) -> Result<Self, SearchError> {
        weights.validate()?;
        if schedule.activity_count() != problem.activity_count() {
            return Err(SearchError::ScheduleMismatch);
        }
        let violations = check_schedule(&problem, &schedule);
        if !violations.is_empty() {
            return Err(SearchError::Unsound(violations));
        }
        let unscheduled = problem
            .activity_indices()
            .filter(|a| !schedule.is_assigned(*a))
            .collect();
        let best = BestSnapshot {
            key: best_key(&problem, &schedule),
            schedule: schedule.clone(),
            iteration: 0,
        };
        Ok(Self {
            history: vec![ActivityHistory::default(); problem.activity_count()],
            tabu: TabuList::new(weights.tabu_length),
            rng: ChaCha8Rng::seed_from_u64(seed),
            problem,
            schedule,
            unscheduled,
            weights,
            iteration: 0,
            best,
        })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn unscheduled(&self) -> &[ActivityIdx] {
        &self.unscheduled
    }

    pub fn is_unscheduled(&self, a: ActivityIdx) -> bool {
        self.unscheduled.binary_search(&a).is_ok()
    }

    pub fn tabu(&self) -> &TabuList {
        &self.tabu
    }

    pub fn weights(&self) -> &HeuristicWeights {
        &self.weights
    }

    pub fn history(&self, a: ActivityIdx) -> &ActivityHistory {
        &self.history[a.0]
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn best(&self) -> &BestSnapshot {
        &self.best
    }

    pub fn is_complete(&self) -> bool {
        self.unscheduled.is_empty()
    }

    /// Percentage of activities scheduled in the current schedule.
    pub fn scheduled_percent(&self) -> f64 {
        percent(
            self.schedule.scheduled_count(),
            self.problem.activity_count(),
        )
    }

    pub fn best_scheduled_percent(&self) -> f64 {
        percent(self.best.key.scheduled, self.problem.activity_count())
    }

    /// Test and tooling hook: overwrite the removal memory of an activity.
    pub fn set_history(&mut self, a: ActivityIdx, history: ActivityHistory) {
        self.history[a.0] = history;
    }

    pub(crate) fn mark_unscheduled(&mut self, a: ActivityIdx) {
        if let Err(pos) = self.unscheduled.binary_search(&a) {
            self.unscheduled.insert(pos, a);
        }
    }

    pub(crate) fn mark_scheduled(&mut self, a: ActivityIdx) {
        if let Ok(pos) = self.unscheduled.binary_search(&a) {
            self.unscheduled.remove(pos);
        }
    }

    /// Takes `a` out of the schedule, remembering where it was.
    pub(crate) fn remove_from_schedule(
        &mut self,
        a: ActivityIdx,
        evictor: Option<ActivityIdx>,
        count: bool,
    ) -> Option<Location> {
        let former = self.schedule.unassign(&self.problem, a)?;
        let h = &mut self.history[a.0];
        h.last_location = Some(former.clone());
        if evictor.is_some() {
            h.last_evictor = evictor;
        }
        if count {
            h.n_removed += 1;
        }
        self.mark_unscheduled(a);
        Some(former)
    }

    /// Refreshes the best snapshot when the current schedule beats it.
    pub(crate) fn update_best(&mut self) {
        if self.schedule.scheduled_count() < self.best.key.scheduled {
            return;
        }
        let key = best_key(&self.problem, &self.schedule);
        if key > self.best.key {
            self.best = BestSnapshot {
                schedule: self.schedule.clone(),
                key,
                iteration: self.iteration,
            };
        }
    }

    /// Restarts best tracking from the current schedule, used after the
    /// problem itself changed.
    pub(crate) fn reset_best(&mut self) {
        self.best = BestSnapshot {
            key: best_key(&self.problem, &self.schedule),
            schedule: self.schedule.clone(),
            iteration: self.iteration,
        };
    }
}

pub(crate) fn best_key(problem: &Problem, schedule: &Schedule) -> BestKey {
    BestKey {
        scheduled: schedule.scheduled_count(),
        soft: Reverse(schedule.soft_total(problem)),
    }
}

fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        100.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}
