use super::schedule::Schedule;
use super::{
    Activity, ActivityIdx, GroupMode, Location, ModelError, Problem, ResourceIdx, SlotMark,
};
use std::collections::BTreeSet;

/// Every valid resource choice for an activity: all conjunctive members plus
/// one member of each disjunctive group. Groups and members keep their
/// declaration order.
pub fn resource_selections(activity: &Activity) -> Vec<Vec<ResourceIdx>> {
    let mut partial: Vec<Vec<ResourceIdx>> = vec![Vec::new()];
    for group in &activity.groups {
        match group.mode {
            GroupMode::Conjunctive => {
                for sel in &mut partial {
                    sel.extend_from_slice(&group.members);
                }
            }
            GroupMode::Disjunctive => {
                partial = partial
                    .iter()
                    .flat_map(|sel| {
                        group.members.iter().map(move |m| {
                            let mut next = sel.clone();
                            next.push(*m);
                            next
                        })
                    })
                    .collect();
            }
        }
    }
    partial
}

/// True iff the location lies inside the grid and no covered slot is
/// hard-forbidden for the activity or any selected resource.
pub fn hard_feasible(
    problem: &Problem,
    activity: ActivityIdx,
    loc: &Location,
) -> Result<bool, ModelError> {
    if activity.0 >= problem.activity_count() {
        return Err(ModelError::ActivityOutOfRange(activity.0));
    }
    if let Some(bad) = loc
        .selection
        .iter()
        .find(|r| r.0 >= problem.resources().len())
    {
        return Err(ModelError::ResourceOutOfRange(bad.0));
    }
    Ok(fits(problem, activity, loc.start, &loc.selection))
}

pub(crate) fn fits(
    problem: &Problem,
    a: ActivityIdx,
    start: usize,
    selection: &[ResourceIdx],
) -> bool {
    let act = problem.activity(a);
    let end = start + act.duration;
    if end > problem.total_slots() {
        return false;
    }
    (start..end).all(|t| {
        act.prefs.get(t) != SlotMark::HardForbidden
            && selection
                .iter()
                .all(|r| problem.resource(*r).prefs.get(t) != SlotMark::HardForbidden)
    })
}

/// Visits every scheduled activity that conflicts with placing `a` at
/// (`start`, `selection`). The same activity may be visited more than once.
/// The visitor returns `false` to stop early.
pub(crate) fn visit_conflicts(
    problem: &Problem,
    schedule: &Schedule,
    a: ActivityIdx,
    start: usize,
    selection: &[ResourceIdx],
    mut visit: impl FnMut(ActivityIdx) -> bool,
) {
    let duration = problem.activity(a).duration;
    for r in selection {
        for t in start..start + duration {
            if let Some(b) = schedule.occupant(*r, t) {
                if b != a && !visit(b) {
                    return;
                }
            }
        }
    }
    for &k in problem.dependencies_of(a) {
        let dep = problem.dependencies()[k];
        let (partner, ok) = if dep.first == a {
            let Some(loc_b) = schedule.location(dep.second) else {
                continue;
            };
            (dep.second, dep.kind.holds(start, duration, loc_b.start))
        } else {
            let Some(loc_b) = schedule.location(dep.first) else {
                continue;
            };
            let dur_b = problem.activity(dep.first).duration;
            (dep.first, dep.kind.holds(loc_b.start, dur_b, start))
        };
        if !ok && partner != a && !visit(partner) {
            return;
        }
    }
}

/// Scheduled activities that would have to leave if `a` were placed at `loc`:
/// resource overlaps plus dependency partners whose relation would break.
/// `a`'s own assignment, if any, is ignored.
pub fn conflicts(
    problem: &Problem,
    schedule: &Schedule,
    a: ActivityIdx,
    loc: &Location,
) -> BTreeSet<ActivityIdx> {
    let mut out = BTreeSet::new();
    visit_conflicts(problem, schedule, a, loc.start, &loc.selection, |b| {
        out.insert(b);
        true
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConflictClass {
    Free,
    Evictable,
    /// At least one conflicting activity is fixed.
    Blocked,
}

pub(crate) fn classify(
    problem: &Problem,
    schedule: &Schedule,
    a: ActivityIdx,
    start: usize,
    selection: &[ResourceIdx],
) -> ConflictClass {
    let mut class = ConflictClass::Free;
    visit_conflicts(problem, schedule, a, start, selection, |b| {
        if schedule.is_fixed(b) {
            class = ConflictClass::Blocked;
            false
        } else {
            class = ConflictClass::Evictable;
            true
        }
    });
    class
}

/// Whether placing `a` at (`start`, `selection`) collides with nothing.
pub(crate) fn conflict_free(
    problem: &Problem,
    schedule: &Schedule,
    a: ActivityIdx,
    start: usize,
    selection: &[ResourceIdx],
) -> bool {
    let mut free = true;
    visit_conflicts(problem, schedule, a, start, selection, |_| {
        free = false;
        false
    });
    free
}

/// Hard-feasible locations whose conflict set holds no fixed activity,
/// ordered by start then by selection order.
pub fn enumerate_locations(
    problem: &Problem,
    schedule: &Schedule,
    a: ActivityIdx,
) -> Vec<Location> {
    let mut out = Vec::new();
    for_each_candidate(problem, schedule, a, |start, sel, _| {
        out.push(Location::new(start, sel.to_vec()));
    });
    out
}

pub(crate) fn for_each_candidate(
    problem: &Problem,
    schedule: &Schedule,
    a: ActivityIdx,
    mut f: impl FnMut(usize, &[ResourceIdx], ConflictClass),
) {
    let sels = problem.selections(a);
    for &(start, k) in problem.fitting(a) {
        let class = classify(problem, schedule, a, start, &sels[k]);
        if class != ConflictClass::Blocked {
            f(start, &sels[k], class);
        }
    }
}

pub fn soft_violations(problem: &Problem, a: ActivityIdx, loc: &Location) -> usize {
    let act = problem.activity(a);
    let end = (loc.start + act.duration).min(problem.total_slots());
    (loc.start..end)
        .map(|t| {
            let own = usize::from(act.prefs.get(t) == SlotMark::SoftDiscouraged);
            own + loc
                .selection
                .iter()
                .filter(|r| problem.resource(**r).prefs.get(t) == SlotMark::SoftDiscouraged)
                .count()
        })
        .sum()
}
