//! User edits on a running solver state, and the repair that restores
//! soundness afterwards.
//!
//! An edit is applied atomically: either it succeeds and the schedule is
//! sound again, or it is rejected / rolled back and the state is left exactly
//! as it was before (RNG included).

use crate::io::{
    describe_violation, ActivityDoc, AssignmentDoc, DependencyDoc, DocError, LocationDoc,
};
use crate::model::feasibility::fits;
use crate::model::{
    check_schedule, conflicts, shift_after_removal, ActivityIdx, Location, Problem, Schedule,
    SlotMark, Violation,
};
use crate::search::{ActivityHistory, HeuristicWeights, IterationReport, SearchError, SolverState};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use thiserror::Error;

/// A user change to the problem or the schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Edit {
    PlaceAndFix {
        activity: String,
        location: LocationDoc,
    },
    Unfix {
        activity: String,
    },
    Detach {
        activity: String,
    },
    SetDuration {
        activity: String,
        duration: usize,
    },
    AddDependency {
        dependency: DependencyDoc,
    },
    RemoveDependency {
        dependency: DependencyDoc,
    },
    SetSlotMark {
        entity: String,
        slot: usize,
        mark: SlotMark,
    },
    AddActivity {
        activity: ActivityDoc,
    },
    RemoveActivity {
        activity: String,
    },
    SetWeights {
        weights: HeuristicWeights,
    },
}

impl Edit {
    pub fn kind(&self) -> &'static str {
        match self {
            Edit::PlaceAndFix { .. } => "place_and_fix",
            Edit::Unfix { .. } => "unfix",
            Edit::Detach { .. } => "detach",
            Edit::SetDuration { .. } => "set_duration",
            Edit::AddDependency { .. } => "add_dependency",
            Edit::RemoveDependency { .. } => "remove_dependency",
            Edit::SetSlotMark { .. } => "set_slot_mark",
            Edit::AddActivity { .. } => "add_activity",
            Edit::RemoveActivity { .. } => "remove_activity",
            Edit::SetWeights { .. } => "set_weights",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum EditError {
    #[error("unknown id `{0}`")]
    UnknownId(String),
    #[error("rejected: {0}")]
    Rejected(String),
    #[error("rolled back: only fixed activities could resolve {}", .0.join("; "))]
    RolledBack(Vec<String>),
}

impl From<DocError> for EditError {
    fn from(e: DocError) -> Self {
        match e {
            DocError::UnknownId { id, .. } => EditError::UnknownId(id),
            other => EditError::Rejected(other.to_string()),
        }
    }
}

/// What an accepted edit did to the schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepairReport {
    pub edit: String,
    /// Activities pushed out directly by the edit (a manual placement).
    pub displaced: Vec<String>,
    /// Activities detached by repair, in detachment order.
    pub detached: Vec<String>,
    pub scheduled: usize,
    pub unscheduled: usize,
}

/// Detaches non-fixed activities until `schedule` is sound. Victims are the
/// activities in the most violations, then those with fewer dependencies,
/// then a seeded random pick. Returns the detached activities with their
/// former locations, or the violations that only fixed activities could
/// resolve.
pub fn repair_schedule(
    problem: &Problem,
    schedule: &mut Schedule,
    rng: &mut impl Rng,
) -> Result<Vec<(ActivityIdx, Location)>, Vec<Violation>> {
    let mut detached = Vec::new();
    loop {
        let violations = check_schedule(problem, schedule);
        if violations.is_empty() {
            schedule.reindex(problem);
            return Ok(detached);
        }
        let movable = |a: &ActivityIdx| schedule.is_assigned(*a) && !schedule.is_fixed(*a);
        let stuck: Vec<Violation> = violations
            .iter()
            .filter(|v| !v.activities().iter().any(movable))
            .cloned()
            .collect();
        if !stuck.is_empty() {
            return Err(stuck);
        }
        let mut counts: BTreeMap<ActivityIdx, usize> = BTreeMap::new();
        for v in &violations {
            let mut involved = v.activities();
            involved.dedup();
            for a in involved.into_iter().filter(movable) {
                *counts.entry(a).or_default() += 1;
            }
        }
        let most = counts
            .values()
            .copied()
            .max()
            .expect("some movable activity");
        let fewest_deps = counts
            .iter()
            .filter(|(_, n)| **n == most)
            .map(|(a, _)| problem.dependencies_of(*a).len())
            .min()
            .expect("non-empty");
        let tied: Vec<ActivityIdx> = counts
            .iter()
            .filter(|(a, n)| **n == most && problem.dependencies_of(**a).len() == fewest_deps)
            .map(|(a, _)| *a)
            .collect();
        let victim = if tied.len() == 1 {
            tied[0]
        } else {
            tied[rng.gen_range(0..tied.len())]
        };
        let former = schedule
            .unassign(problem, victim)
            .expect("victim is assigned");
        detached.push((victim, former));
    }
}

/// Point-in-time copy of a session, safe to hand to observers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotView {
    pub iteration: u64,
    pub scheduled: usize,
    pub total: usize,
    pub soft_total: usize,
    pub best: BestView,
    pub assignments: Vec<AssignmentDoc>,
    pub unscheduled: Vec<UnscheduledView>,
    pub removals: Vec<RemovalView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestView {
    pub scheduled: usize,
    pub soft_total: usize,
    pub iteration: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnscheduledView {
    pub id: String,
    /// Activity value under the current weights (lower is harder).
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemovalView {
    pub id: String,
    pub n_removed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    #[default]
    Latest,
    Best,
}

fn assignment_docs(problem: &Problem, schedule: &Schedule) -> Vec<AssignmentDoc> {
    schedule
        .assigned()
        .map(|(a, loc)| {
            let l = LocationDoc::from_location(problem, loc);
            AssignmentDoc {
                activity: problem.activity(a).id.clone(),
                start: l.start,
                resources: l.resources,
                fixed: schedule.is_fixed(a),
            }
        })
        .collect()
}

impl SolverState {
    /// Restores soundness after a problem or schedule change by detaching
    /// violating activities. On failure nothing is rolled back here; callers
    /// go through [`SolverState::apply_edit`].
    pub fn repair(&mut self) -> Result<Vec<ActivityIdx>, Vec<Violation>> {
        let detached = repair_schedule(&self.problem, &mut self.schedule, &mut self.rng)?;
        for (a, former) in &detached {
            let h = &mut self.history[a.0];
            h.n_removed += 1;
            h.last_location = Some(former.clone());
            self.mark_unscheduled(*a);
        }
        Ok(detached.into_iter().map(|(a, _)| a).collect())
    }

    fn resolve_activity(&self, id: &str) -> Result<ActivityIdx, EditError> {
        self.problem
            .activity_by_id(id)
            .ok_or_else(|| EditError::UnknownId(id.to_string()))
    }

    /// Applies one edit, then repairs. Rejected or rolled-back edits leave
    /// the state untouched.
    pub fn apply_edit(&mut self, edit: Edit) -> Result<RepairReport, EditError> {
        let backup = self.clone();
        let kind = edit.kind();
        let displaced = match self.apply_raw(edit) {
            Ok(d) => d,
            Err(e) => {
                *self = backup;
                return Err(e);
            }
        };
        match self.repair() {
            Ok(detached) => {
                self.reset_best();
                let name = |a: &ActivityIdx| self.problem.activity(*a).id.clone();
                Ok(RepairReport {
                    edit: kind.to_string(),
                    displaced: displaced.iter().map(name).collect(),
                    detached: detached.iter().map(name).collect(),
                    scheduled: self.schedule.scheduled_count(),
                    unscheduled: self.unscheduled.len(),
                })
            }
            Err(stuck) => {
                let described = stuck
                    .iter()
                    .map(|v| describe_violation(&self.problem, v))
                    .collect();
                *self = backup;
                Err(EditError::RolledBack(described))
            }
        }
    }

    /// Mutates problem/schedule for `edit`; returns activities displaced
    /// directly (identified by their post-edit indices).
    fn apply_raw(&mut self, edit: Edit) -> Result<Vec<ActivityIdx>, EditError> {
        match edit {
            Edit::PlaceAndFix { activity, location } => {
                let a = self.resolve_activity(&activity)?;
                let loc = location.resolve(&self.problem, a, "location")?;
                if !fits(&self.problem, a, loc.start, &loc.selection) {
                    return Err(EditError::Rejected(format!(
                        "activity `{activity}` cannot start at slot {}: hard-forbidden or outside the grid",
                        loc.start
                    )));
                }
                if self.schedule.is_assigned(a) {
                    self.remove_from_schedule(a, None, false);
                }
                let hits: Vec<ActivityIdx> = conflicts(&self.problem, &self.schedule, a, &loc)
                    .into_iter()
                    .collect();
                if let Some(f) = hits.iter().find(|c| self.schedule.is_fixed(**c)) {
                    return Err(EditError::Rejected(format!(
                        "location conflicts with fixed activity `{}`",
                        self.problem.activity(*f).id
                    )));
                }
                for c in &hits {
                    self.remove_from_schedule(*c, Some(a), true);
                }
                self.schedule.assign(&self.problem, a, loc);
                self.schedule.set_fixed(a, true);
                self.mark_scheduled(a);
                Ok(hits)
            }
            Edit::Unfix { activity } => {
                let a = self.resolve_activity(&activity)?;
                self.schedule.set_fixed(a, false);
                Ok(Vec::new())
            }
            Edit::Detach { activity } => {
                let a = self.resolve_activity(&activity)?;
                self.remove_from_schedule(a, None, false);
                Ok(Vec::new())
            }
            Edit::SetDuration { activity, duration } => {
                let a = self.resolve_activity(&activity)?;
                self.problem
                    .set_duration(a, duration)
                    .map_err(|e| EditError::Rejected(e.to_string()))?;
                Ok(Vec::new())
            }
            Edit::AddDependency { dependency } => {
                let d = dependency.resolve(&self.problem, "dependency")?;
                self.problem
                    .add_dependency(d)
                    .map_err(|e| EditError::Rejected(e.to_string()))?;
                Ok(Vec::new())
            }
            Edit::RemoveDependency { dependency } => {
                let d = dependency.resolve(&self.problem, "dependency")?;
                if self.problem.remove_dependency(&d) == 0 {
                    return Err(EditError::Rejected("no such dependency".into()));
                }
                Ok(Vec::new())
            }
            Edit::SetSlotMark { entity, slot, mark } => {
                let e = self
                    .problem
                    .lookup(&entity)
                    .ok_or_else(|| EditError::UnknownId(entity.clone()))?;
                self.problem
                    .set_slot_mark(e, slot, mark)
                    .map_err(|e| EditError::Rejected(e.to_string()))?;
                Ok(Vec::new())
            }
            Edit::AddActivity { activity } => {
                let problem = &self.problem;
                let act = activity.to_activity("activity", problem.total_slots(), |id| {
                    problem.resource_by_id(id)
                })?;
                let a = self
                    .problem
                    .add_activity(act)
                    .map_err(|e| EditError::Rejected(e.to_string()))?;
                self.schedule.push_activity();
                self.history.push(ActivityHistory::default());
                self.mark_unscheduled(a);
                Ok(Vec::new())
            }
            Edit::RemoveActivity { activity } => {
                let a = self.resolve_activity(&activity)?;
                self.remove_activity(a);
                Ok(Vec::new())
            }
            Edit::SetWeights { weights } => {
                weights
                    .validate()
                    .map_err(|e| EditError::Rejected(e.to_string()))?;
                self.tabu.set_capacity(weights.tabu_length);
                self.weights = weights;
                Ok(Vec::new())
            }
        }
    }

    fn remove_activity(&mut self, a: ActivityIdx) {
        self.schedule.remove_activity(a);
        self.problem.remove_activity(a);
        self.schedule.reindex(&self.problem);
        self.history.remove(a.0);
        for h in &mut self.history {
            h.last_evictor = match h.last_evictor {
                Some(x) if x == a => None,
                Some(x) => Some(shift_after_removal(x, a)),
                None => None,
            };
        }
        self.tabu.remove_activity(a);
        self.unscheduled = self
            .unscheduled
            .iter()
            .filter(|x| **x != a)
            .map(|x| shift_after_removal(*x, a))
            .collect();
    }

    /// Consistent copy of the latest (or best) schedule plus bookkeeping.
    pub fn snapshot(&self, kind: ViewKind) -> SnapshotView {
        let schedule = match kind {
            ViewKind::Latest => &self.schedule,
            ViewKind::Best => &self.best.schedule,
        };
        let problem = &self.problem;
        SnapshotView {
            iteration: self.iteration,
            scheduled: schedule.scheduled_count(),
            total: problem.activity_count(),
            soft_total: schedule.soft_total(problem),
            best: BestView {
                scheduled: self.best.key.scheduled,
                soft_total: self.best.key.soft.0,
                iteration: self.best.iteration,
            },
            assignments: assignment_docs(problem, schedule),
            unscheduled: self
                .unscheduled
                .iter()
                .map(|a| UnscheduledView {
                    id: problem.activity(*a).id.clone(),
                    score: self.activity_score(*a).map(|(v, _)| v).unwrap_or(0.0),
                })
                .collect(),
            removals: problem
                .activity_indices()
                .filter(|a| self.history[a.0].n_removed > 0)
                .map(|a| RemovalView {
                    id: problem.activity(a).id.clone(),
                    n_removed: self.history[a.0].n_removed,
                })
                .collect(),
        }
    }
}

/// Something that happened at an iteration boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum SessionEvent {
    Iteration(IterationReport),
    Edit(Result<RepairReport, EditError>),
}

/// A solver state plus a queue of edits applied between iterations.
#[derive(Debug, Clone)]
pub struct Session {
    state: SolverState,
    pending: VecDeque<Edit>,
}

impl Session {
    pub fn new(
        problem: Problem,
        weights: HeuristicWeights,
        seed: u64,
    ) -> Result<Self, SearchError> {
        Ok(Self::from_state(SolverState::new(problem, weights, seed)?))
    }

    pub fn from_state(state: SolverState) -> Self {
        Self {
            state,
            pending: VecDeque::new(),
        }
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn into_state(self) -> SolverState {
        self.state
    }

    /// Queues an edit for the next iteration boundary.
    pub fn enqueue(&mut self, edit: Edit) {
        self.pending.push_back(edit);
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Applies every queued edit, in arrival order.
    pub fn drain_edits(&mut self, mut on_event: impl FnMut(SessionEvent, &SolverState)) {
        while let Some(edit) = self.pending.pop_front() {
            let result = self.state.apply_edit(edit);
            on_event(SessionEvent::Edit(result), &self.state);
        }
    }

    /// Applies one edit immediately (the session must be between iterations).
    pub fn apply(&mut self, edit: Edit) -> Result<RepairReport, EditError> {
        self.state.apply_edit(edit)
    }

    /// Runs at most `limit` iterations (unbounded when `None`), draining the
    /// edit queue before each one. Stops early on completion, the iteration
    /// cap, or `stop`. Returns the number of iterations run.
    pub fn run(
        &mut self,
        limit: Option<u64>,
        stop: &AtomicBool,
        mut on_event: impl FnMut(SessionEvent, &SolverState),
    ) -> u64 {
        let mut done = 0;
        loop {
            self.drain_edits(&mut on_event);
            if limit.is_some_and(|n| done >= n)
                || stop.load(Ordering::Relaxed)
                || !self.state.can_continue()
            {
                return done;
            }
            match self.state.iterate() {
                Ok(report) => {
                    done += 1;
                    on_event(SessionEvent::Iteration(report), &self.state);
                }
                Err(_) => return done,
            }
        }
    }

    pub fn snapshot(&self, kind: ViewKind) -> SnapshotView {
        self.state.snapshot(kind)
    }
}

#[cfg(test)]
mod tests;
