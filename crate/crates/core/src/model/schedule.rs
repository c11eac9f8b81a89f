use super::{shift_after_removal, ActivityIdx, Location, Problem, ResourceIdx, SlotMark};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// A partial assignment of activities to locations, plus the set of
/// user-fixed activities.
///
/// The occupancy index (resource × slot → activity) is kept in step with
/// `assign`/`unassign`. It is exact only while the schedule is sound; after a
/// problem edit call [`Schedule::reindex`] once soundness is restored.
#[derive(Debug, Clone)]
pub struct Schedule {
    assignment: Vec<Option<Location>>,
    fixed: Vec<bool>,
    occupancy: Vec<Option<ActivityIdx>>,
    total_slots: usize,
    scheduled: usize,
}

impl PartialEq for Schedule {
    fn eq(&self, other: &Self) -> bool {
        self.assignment == other.assignment && self.fixed == other.fixed
    }
}

impl Schedule {
    pub fn new(problem: &Problem) -> Self {
        let total_slots = problem.total_slots();
        Self {
            assignment: vec![None; problem.activity_count()],
            fixed: vec![false; problem.activity_count()],
            occupancy: vec![None; problem.resources().len() * total_slots],
            total_slots,
            scheduled: 0,
        }
    }

    pub fn location(&self, a: ActivityIdx) -> Option<&Location> {
        self.assignment.get(a.0).and_then(Option::as_ref)
    }

    pub fn is_assigned(&self, a: ActivityIdx) -> bool {
        self.location(a).is_some()
    }

    pub fn is_fixed(&self, a: ActivityIdx) -> bool {
        self.fixed.get(a.0).copied().unwrap_or(false)
    }

    pub fn scheduled_count(&self) -> usize {
        self.scheduled
    }

    pub fn activity_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn assigned(&self) -> impl Iterator<Item = (ActivityIdx, &Location)> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.as_ref().map(|l| (ActivityIdx(i), l)))
    }

    pub fn fixed_activities(&self) -> impl Iterator<Item = ActivityIdx> + '_ {
        self.fixed
            .iter()
            .enumerate()
            .filter(|(_, f)| **f)
            .map(|(i, _)| ActivityIdx(i))
    }

    /// Activity occupying `resource` at `slot`, if any.
    pub fn occupant(&self, resource: ResourceIdx, slot: usize) -> Option<ActivityIdx> {
        if slot >= self.total_slots {
            return None;
        }
        self.occupancy
            .get(resource.0 * self.total_slots + slot)
            .copied()
            .flatten()
    }

    /// Assigns `a` to `loc`, replacing its previous location. Does not check
    /// for conflicts.
    pub fn assign(&mut self, problem: &Problem, a: ActivityIdx, loc: Location) {
        self.unassign(problem, a);
        self.mark(problem, a, &loc, Some(a));
        self.assignment[a.0] = Some(loc);
        self.scheduled += 1;
    }

    /// Removes `a` from the schedule (clearing its fixed flag) and returns
    /// its former location.
    pub fn unassign(&mut self, problem: &Problem, a: ActivityIdx) -> Option<Location> {
        let loc = self.assignment[a.0].take()?;
        self.fixed[a.0] = false;
        self.scheduled -= 1;
        let duration = problem.activity(a).duration;
        for r in &loc.selection {
            for t in loc.start..(loc.start + duration).min(self.total_slots) {
                let cell = &mut self.occupancy[r.0 * self.total_slots + t];
                if *cell == Some(a) {
                    *cell = None;
                }
            }
        }
        Some(loc)
    }

    fn mark(
        &mut self,
        problem: &Problem,
        a: ActivityIdx,
        loc: &Location,
        value: Option<ActivityIdx>,
    ) {
        let duration = problem.activity(a).duration;
        for r in &loc.selection {
            for t in loc.start..(loc.start + duration).min(self.total_slots) {
                self.occupancy[r.0 * self.total_slots + t] = value;
            }
        }
    }

    /// Sets the fixed flag. Only assigned activities can be fixed.
    pub fn set_fixed(&mut self, a: ActivityIdx, fixed: bool) {
        self.fixed[a.0] = fixed && self.assignment[a.0].is_some();
    }

    /// Rebuilds the occupancy index from the assignment.
    pub fn reindex(&mut self, problem: &Problem) {
        self.total_slots = problem.total_slots();
        self.occupancy = vec![None; problem.resources().len() * self.total_slots];
        let assigned: Vec<_> = self.assigned().map(|(a, l)| (a, l.clone())).collect();
        for (a, loc) in assigned {
            self.mark(problem, a, &loc, Some(a));
        }
    }

    pub(crate) fn push_activity(&mut self) {
        self.assignment.push(None);
        self.fixed.push(false);
    }

    /// Drops the entry of a removed activity; call [`Schedule::reindex`]
    /// afterwards with the updated problem.
    pub(crate) fn remove_activity(&mut self, a: ActivityIdx) {
        if self.assignment.remove(a.0).is_some() {
            self.scheduled -= 1;
        }
        self.fixed.remove(a.0);
        for cell in self.occupancy.iter_mut() {
            *cell = match *cell {
                Some(x) if x == a => None,
                Some(x) => Some(shift_after_removal(x, a)),
                None => None,
            };
        }
    }

    /// Sum of soft violations over every scheduled activity.
    pub fn soft_total(&self, problem: &Problem) -> usize {
        self.assigned()
            .map(|(a, l)| super::soft_violations(problem, a, l))
            .sum()
    }
}

/// One broken soundness condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// The selection is not a valid choice over the activity's groups.
    InvalidSelection {
        activity: ActivityIdx,
    },
    /// The location runs past the end of the grid.
    OutOfGrid {
        activity: ActivityIdx,
    },
    /// Covered slots hard-forbidden for the activity or a selected resource.
    HardForbidden {
        activity: ActivityIdx,
        slots: Vec<usize>,
    },
    /// Two activities hold the same resource at the same slots.
    ResourceOverlap {
        resource: ResourceIdx,
        activities: (ActivityIdx, ActivityIdx),
        slots: Vec<usize>,
    },
    DependencyViolated {
        dependency: usize,
        first: ActivityIdx,
        second: ActivityIdx,
    },
    FixedUnassigned {
        activity: ActivityIdx,
    },
}

impl Violation {
    pub fn activities(&self) -> Vec<ActivityIdx> {
        match self {
            Violation::InvalidSelection { activity }
            | Violation::OutOfGrid { activity }
            | Violation::HardForbidden { activity, .. }
            | Violation::FixedUnassigned { activity } => vec![*activity],
            Violation::ResourceOverlap {
                activities: (a, b), ..
            } => vec![*a, *b],
            Violation::DependencyViolated { first, second, .. } => vec![*first, *second],
        }
    }
}

/// Audits a schedule against every hard condition. Returns an empty list iff
/// the schedule is sound. Works from the raw assignment, not from the
/// occupancy index.
pub fn check_schedule(problem: &Problem, schedule: &Schedule) -> Vec<Violation> {
    let mut out = Vec::new();
    let total = problem.total_slots();
    // (resource, slot) -> activities holding it
    let mut holders: BTreeMap<(ResourceIdx, usize), Vec<ActivityIdx>> = BTreeMap::new();

    for (i, slot) in schedule.assignment.iter().enumerate() {
        let a = ActivityIdx(i);
        let Some(loc) = slot else {
            if schedule.fixed[i] {
                out.push(Violation::FixedUnassigned { activity: a });
            }
            continue;
        };
        if i >= problem.activity_count() {
            out.push(Violation::InvalidSelection { activity: a });
            continue;
        }
        let act = problem.activity(a);
        if !problem.is_valid_selection(a, &loc.selection) {
            out.push(Violation::InvalidSelection { activity: a });
            continue;
        }
        let end = loc.start + act.duration;
        if end > total {
            out.push(Violation::OutOfGrid { activity: a });
        }
        let covered = loc.start..end.min(total);
        let forbidden: Vec<usize> = covered
            .clone()
            .filter(|&t| {
                act.prefs.get(t) == SlotMark::HardForbidden
                    || loc
                        .selection
                        .iter()
                        .any(|r| problem.resource(*r).prefs.get(t) == SlotMark::HardForbidden)
            })
            .collect();
        if !forbidden.is_empty() {
            out.push(Violation::HardForbidden {
                activity: a,
                slots: forbidden,
            });
        }
        for r in &loc.selection {
            for t in covered.clone() {
                holders.entry((*r, t)).or_default().push(a);
            }
        }
    }

    let mut overlaps: BTreeMap<(ResourceIdx, ActivityIdx, ActivityIdx), BTreeSet<usize>> =
        BTreeMap::new();
    for ((r, t), acts) in &holders {
        for (k, a) in acts.iter().enumerate() {
            for b in &acts[k + 1..] {
                let (x, y) = if a < b { (*a, *b) } else { (*b, *a) };
                overlaps.entry((*r, x, y)).or_default().insert(*t);
            }
        }
    }
    for ((resource, x, y), slots) in overlaps {
        out.push(Violation::ResourceOverlap {
            resource,
            activities: (x, y),
            slots: slots.into_iter().collect(),
        });
    }

    for (k, d) in problem.dependencies().iter().enumerate() {
        let (Some(l1), Some(l2)) = (schedule.location(d.first), schedule.location(d.second)) else {
            continue;
        };
        let dur1 = problem.activity(d.first).duration;
        if !d.kind.holds(l1.start, dur1, l2.start) {
            out.push(Violation::DependencyViolated {
                dependency: k,
                first: d.first,
                second: d.second,
            });
        }
    }
    out
}
