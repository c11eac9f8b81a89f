//! The timetabling domain: time grid, resources, activities, dependencies
//! and time preferences.
//!
//! A [`Problem`] is validated at construction and keeps a few derived tables
//! (id lookup, per-activity dependency lists, resource selections) that are
//! refreshed whenever an edit mutates it.

pub(crate) mod feasibility;
mod schedule;

pub use feasibility::{
    conflicts, enumerate_locations, hard_feasible, resource_selections, soft_violations,
    ConflictClass,
};
pub use schedule::{check_schedule, Schedule, Violation};

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error(
        "time grid must have at least one day and one slot per day (got {days}x{slots_per_day})"
    )]
    EmptyGrid { days: usize, slots_per_day: usize },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("unknown id `{0}`")]
    UnknownId(String),
    #[error("{entity}: preference has {got} marks, grid has {expected} slots")]
    PreferenceLength {
        entity: String,
        got: usize,
        expected: usize,
    },
    #[error("activity `{activity}`: {reason}")]
    InvalidActivity { activity: String, reason: String },
    #[error("dependency between `{0}` and itself")]
    SelfDependency(String),
    #[error("resource index {0} out of range")]
    ResourceOutOfRange(usize),
    #[error("activity index {0} out of range")]
    ActivityOutOfRange(usize),
    #[error("slot {slot} outside grid of {total} slots")]
    SlotOutOfRange { slot: usize, total: usize },
}

/// Index of a resource inside its [`Problem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResourceIdx(pub usize);

/// Index of an activity inside its [`Problem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActivityIdx(pub usize);

impl fmt::Display for ResourceIdx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r#{}", self.0)
    }
}

impl fmt::Display for ActivityIdx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeGrid {
    days: usize,
    slots_per_day: usize,
}

impl TimeGrid {
    pub fn new(days: usize, slots_per_day: usize) -> Result<Self, ModelError> {
        if days == 0 || slots_per_day == 0 {
            return Err(ModelError::EmptyGrid {
                days,
                slots_per_day,
            });
        }
        Ok(Self {
            days,
            slots_per_day,
        })
    }

    pub fn days(&self) -> usize {
        self.days
    }

    pub fn slots_per_day(&self) -> usize {
        self.slots_per_day
    }

    pub fn total_slots(&self) -> usize {
        self.days * self.slots_per_day
    }

    /// Day and slot-within-day of a global slot index.
    pub fn day_and_offset(&self, slot: usize) -> (usize, usize) {
        (slot / self.slots_per_day, slot % self.slots_per_day)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotMark {
    #[default]
    Neutral,
    SoftDiscouraged,
    HardForbidden,
}

/// One mark per slot of the grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TimePreference {
    marks: Vec<SlotMark>,
}

impl TimePreference {
    pub fn neutral(total_slots: usize) -> Self {
        Self {
            marks: vec![SlotMark::Neutral; total_slots],
        }
    }

    pub fn from_marks(marks: Vec<SlotMark>) -> Self {
        Self { marks }
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn get(&self, slot: usize) -> SlotMark {
        self.marks[slot]
    }

    pub fn set(&mut self, slot: usize, mark: SlotMark) {
        self.marks[slot] = mark;
    }

    pub fn marks(&self) -> &[SlotMark] {
        &self.marks
    }

    pub fn slots_with(&self, mark: SlotMark) -> impl Iterator<Item = usize> + '_ {
        self.marks
            .iter()
            .enumerate()
            .filter(move |(_, m)| **m == mark)
            .map(|(t, _)| t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resource {
    pub id: String,
    pub name: String,
    pub kind: String,
    pub prefs: TimePreference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupMode {
    /// The activity needs every member.
    Conjunctive,
    /// The activity needs exactly one member.
    Disjunctive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceGroup {
    pub mode: GroupMode,
    pub members: Vec<ResourceIdx>,
}

/// A user penalty attached to a location. When `selection` is `None` the
/// penalty applies to every location starting at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationPenalty {
    pub start: usize,
    pub selection: Option<Vec<ResourceIdx>>,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Activity {
    pub id: String,
    pub name: String,
    pub duration: usize,
    pub prefs: TimePreference,
    pub groups: Vec<ResourceGroup>,
    pub user_prefs: Vec<LocationPenalty>,
}

impl Activity {
    /// Declared user penalty of a location; exact (start, selection) entries
    /// win over start-only entries, missing entries mean zero.
    pub fn user_penalty(&self, loc: &Location) -> f64 {
        let mut fallback = None;
        for p in &self.user_prefs {
            if p.start != loc.start {
                continue;
            }
            match &p.selection {
                Some(sel) if same_set(sel, &loc.selection) => return p.penalty,
                Some(_) => {}
                None => fallback = fallback.or(Some(p.penalty)),
            }
        }
        fallback.unwrap_or(0.0)
    }
}

fn same_set(a: &[ResourceIdx], b: &[ResourceIdx]) -> bool {
    a.len() == b.len() && a.iter().all(|r| b.contains(r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependencyKind {
    /// end(first) <= start(second)
    Before,
    /// end(first) == start(second)
    Meets,
    /// start(first) == start(second)
    Concurrent,
}

impl DependencyKind {
    /// Whether the relation holds for the given starts and durations.
    pub fn holds(self, first_start: usize, first_dur: usize, second_start: usize) -> bool {
        match self {
            DependencyKind::Before => first_start + first_dur <= second_start,
            DependencyKind::Meets => first_start + first_dur == second_start,
            DependencyKind::Concurrent => first_start == second_start,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dependency {
    pub kind: DependencyKind,
    pub first: ActivityIdx,
    pub second: ActivityIdx,
}

/// A concrete placement: start slot plus the chosen resources, listed in
/// group declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Location {
    pub start: usize,
    pub selection: Vec<ResourceIdx>,
}

impl Location {
    pub fn new(start: usize, selection: Vec<ResourceIdx>) -> Self {
        Self { start, selection }
    }

    /// `|Δstart| + |selection △ other.selection|`.
    pub fn distance(&self, other: &Location) -> f64 {
        let dstart = self.start.abs_diff(other.start);
        let only_self = self
            .selection
            .iter()
            .filter(|r| !other.selection.contains(r))
            .count();
        let only_other = other
            .selection
            .iter()
            .filter(|r| !self.selection.contains(r))
            .count();
        (dstart + only_self + only_other) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityRef {
    Resource(ResourceIdx),
    Activity(ActivityIdx),
}

#[derive(Debug, Clone)]
pub struct Problem {
    grid: TimeGrid,
    resources: Vec<Resource>,
    activities: Vec<Activity>,
    dependencies: Vec<Dependency>,
    ids: HashMap<String, EntityRef>,
    deps_of: Vec<Vec<usize>>,
    selections: Vec<Vec<Vec<ResourceIdx>>>,
    /// Hard-feasible (start, selection index) pairs per activity.
    fitting: Vec<Vec<(usize, usize)>>,
}

impl PartialEq for Problem {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.resources == other.resources
            && self.activities == other.activities
            && self.dependencies == other.dependencies
    }
}

impl Problem {
    pub fn new(
        grid: TimeGrid,
        resources: Vec<Resource>,
        activities: Vec<Activity>,
        dependencies: Vec<Dependency>,
    ) -> Result<Self, ModelError> {
        let mut problem = Self {
            grid,
            resources,
            activities,
            dependencies,
            ids: HashMap::new(),
            deps_of: Vec::new(),
            selections: Vec::new(),
            fitting: Vec::new(),
        };
        problem.validate()?;
        problem.rebuild();
        Ok(problem)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let total = self.grid.total_slots();
        let mut seen = HashMap::new();
        for r in &self.resources {
            if seen.insert(r.id.as_str(), ()).is_some() {
                return Err(ModelError::DuplicateId(r.id.clone()));
            }
            check_prefs(&r.id, &r.prefs, total)?;
        }
        for a in &self.activities {
            if seen.insert(a.id.as_str(), ()).is_some() {
                return Err(ModelError::DuplicateId(a.id.clone()));
            }
            self.validate_activity(a)?;
        }
        for d in &self.dependencies {
            self.validate_dependency(d)?;
        }
        Ok(())
    }

    pub(crate) fn validate_activity(&self, a: &Activity) -> Result<(), ModelError> {
        let total = self.grid.total_slots();
        let invalid = |reason: String| ModelError::InvalidActivity {
            activity: a.id.clone(),
            reason,
        };
        if a.duration == 0 || a.duration > total {
            return Err(invalid(format!(
                "duration {} outside 1..={total}",
                a.duration
            )));
        }
        check_prefs(&a.id, &a.prefs, total)?;
        if a.groups.is_empty() {
            return Err(invalid("no resource groups".into()));
        }
        let mut used = Vec::new();
        for g in &a.groups {
            if g.members.is_empty() {
                return Err(invalid("empty resource group".into()));
            }
            for m in &g.members {
                if m.0 >= self.resources.len() {
                    return Err(ModelError::ResourceOutOfRange(m.0));
                }
                if used.contains(m) {
                    return Err(invalid(format!(
                        "resource `{}` listed more than once",
                        self.resources[m.0].id
                    )));
                }
                used.push(*m);
            }
        }
        for p in &a.user_prefs {
            if !(p.penalty.is_finite() && p.penalty >= 0.0) {
                return Err(invalid(format!("user penalty {} is negative", p.penalty)));
            }
            if p.start >= total {
                return Err(ModelError::SlotOutOfRange {
                    slot: p.start,
                    total,
                });
            }
            if let Some(sel) = &p.selection {
                if let Some(bad) = sel.iter().find(|r| r.0 >= self.resources.len()) {
                    return Err(ModelError::ResourceOutOfRange(bad.0));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn validate_dependency(&self, d: &Dependency) -> Result<(), ModelError> {
        for a in [d.first, d.second] {
            if a.0 >= self.activities.len() {
                return Err(ModelError::ActivityOutOfRange(a.0));
            }
        }
        if d.first == d.second {
            return Err(ModelError::SelfDependency(
                self.activities[d.first.0].id.clone(),
            ));
        }
        Ok(())
    }

    fn rebuild(&mut self) {
        self.ids.clear();
        for (i, r) in self.resources.iter().enumerate() {
            self.ids
                .insert(r.id.clone(), EntityRef::Resource(ResourceIdx(i)));
        }
        for (i, a) in self.activities.iter().enumerate() {
            self.ids
                .insert(a.id.clone(), EntityRef::Activity(ActivityIdx(i)));
        }
        self.deps_of = vec![Vec::new(); self.activities.len()];
        for (k, d) in self.dependencies.iter().enumerate() {
            self.deps_of[d.first.0].push(k);
            self.deps_of[d.second.0].push(k);
        }
        self.selections = self.activities.iter().map(resource_selections).collect();
        self.refresh_fitting();
    }

    fn fitting_of(&self, a: ActivityIdx) -> Vec<(usize, usize)> {
        let duration = self.activities[a.0].duration;
        let mut out = Vec::new();
        for start in 0..=self.total_slots().saturating_sub(duration) {
            for (k, sel) in self.selections[a.0].iter().enumerate() {
                if feasibility::fits(self, a, start, sel) {
                    out.push((start, k));
                }
            }
        }
        out
    }

    fn refresh_fitting(&mut self) {
        self.fitting = self
            .activity_indices()
            .map(|a| self.fitting_of(a))
            .collect();
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn total_slots(&self) -> usize {
        self.grid.total_slots()
    }

    pub fn resources(&self) -> &[Resource] {
        &self.resources
    }

    pub fn activities(&self) -> &[Activity] {
        &self.activities
    }

    pub fn dependencies(&self) -> &[Dependency] {
        &self.dependencies
    }

    pub fn resource(&self, r: ResourceIdx) -> &Resource {
        &self.resources[r.0]
    }

    pub fn activity(&self, a: ActivityIdx) -> &Activity {
        &self.activities[a.0]
    }

    pub fn activity_count(&self) -> usize {
        self.activities.len()
    }

    pub fn activity_indices(&self) -> impl Iterator<Item = ActivityIdx> {
        (0..self.activities.len()).map(ActivityIdx)
    }

    pub fn lookup(&self, id: &str) -> Option<EntityRef> {
        self.ids.get(id).copied()
    }

    pub fn activity_by_id(&self, id: &str) -> Option<ActivityIdx> {
        match self.lookup(id)? {
            EntityRef::Activity(a) => Some(a),
            EntityRef::Resource(_) => None,
        }
    }

    pub fn resource_by_id(&self, id: &str) -> Option<ResourceIdx> {
        match self.lookup(id)? {
            EntityRef::Resource(r) => Some(r),
            EntityRef::Activity(_) => None,
        }
    }

    /// Indices into [`Problem::dependencies`] mentioning `a`.
    pub fn dependencies_of(&self, a: ActivityIdx) -> &[usize] {
        &self.deps_of[a.0]
    }

    /// Cached [`resource_selections`] of an activity.
    pub fn selections(&self, a: ActivityIdx) -> &[Vec<ResourceIdx>] {
        &self.selections[a.0]
    }

    /// Hard-feasible locations of `a` as (start, index into
    /// [`Problem::selections`]), by start then selection.
    pub(crate) fn fitting(&self, a: ActivityIdx) -> &[(usize, usize)] {
        &self.fitting[a.0]
    }

    /// Whether `selection` is a valid choice function over the activity's groups.
    pub fn is_valid_selection(&self, a: ActivityIdx, selection: &[ResourceIdx]) -> bool {
        self.selections[a.0].iter().any(|s| same_set(s, selection))
    }

    /// Canonicalizes a selection given in any order into group declaration
    /// order, if it is valid.
    pub fn canonical_selection(
        &self,
        a: ActivityIdx,
        selection: &[ResourceIdx],
    ) -> Option<Vec<ResourceIdx>> {
        self.selections[a.0]
            .iter()
            .find(|s| same_set(s, selection))
            .cloned()
    }

    pub(crate) fn set_duration(
        &mut self,
        a: ActivityIdx,
        duration: usize,
    ) -> Result<(), ModelError> {
        let mut updated = self.activities[a.0].clone();
        updated.duration = duration;
        self.validate_activity(&updated)?;
        self.activities[a.0] = updated;
        self.fitting[a.0] = self.fitting_of(a);
        Ok(())
    }

    pub(crate) fn add_dependency(&mut self, d: Dependency) -> Result<(), ModelError> {
        self.validate_dependency(&d)?;
        self.dependencies.push(d);
        self.rebuild();
        Ok(())
    }

    /// Removes every dependency equal to `d`; returns how many were removed.
    pub(crate) fn remove_dependency(&mut self, d: &Dependency) -> usize {
        let before = self.dependencies.len();
        self.dependencies.retain(|x| x != d);
        let removed = before - self.dependencies.len();
        if removed > 0 {
            self.rebuild();
        }
        removed
    }

    pub(crate) fn set_slot_mark(
        &mut self,
        entity: EntityRef,
        slot: usize,
        mark: SlotMark,
    ) -> Result<(), ModelError> {
        let total = self.total_slots();
        if slot >= total {
            return Err(ModelError::SlotOutOfRange { slot, total });
        }
        match entity {
            EntityRef::Resource(r) => {
                self.resources[r.0].prefs.set(slot, mark);
                self.refresh_fitting();
            }
            EntityRef::Activity(a) => {
                self.activities[a.0].prefs.set(slot, mark);
                self.fitting[a.0] = self.fitting_of(a);
            }
        }
        Ok(())
    }

    pub(crate) fn add_activity(&mut self, activity: Activity) -> Result<ActivityIdx, ModelError> {
        if self.ids.contains_key(&activity.id) {
            return Err(ModelError::DuplicateId(activity.id));
        }
        self.validate_activity(&activity)?;
        self.activities.push(activity);
        self.rebuild();
        Ok(ActivityIdx(self.activities.len() - 1))
    }

    /// Removes an activity and every dependency mentioning it. Indices above
    /// `a` shift down by one.
    pub(crate) fn remove_activity(&mut self, a: ActivityIdx) {
        self.activities.remove(a.0);
        self.dependencies.retain(|d| d.first != a && d.second != a);
        for d in &mut self.dependencies {
            d.first = shift_after_removal(d.first, a);
            d.second = shift_after_removal(d.second, a);
        }
        self.rebuild();
    }
}

pub(crate) fn shift_after_removal(x: ActivityIdx, removed: ActivityIdx) -> ActivityIdx {
    if x.0 > removed.0 {
        ActivityIdx(x.0 - 1)
    } else {
        x
    }
}

fn check_prefs(entity: &str, prefs: &TimePreference, total: usize) -> Result<(), ModelError> {
    if prefs.len() != total {
        return Err(ModelError::PreferenceLength {
            entity: entity.to_string(),
            got: prefs.len(),
            expected: total,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn res(id: &str, total: usize) -> Resource {
        Resource {
            id: id.into(),
            name: id.into(),
            kind: "teacher".into(),
            prefs: TimePreference::neutral(total),
        }
    }

    fn act(id: &str, duration: usize, total: usize, members: &[usize]) -> Activity {
        Activity {
            id: id.into(),
            name: id.into(),
            duration,
            prefs: TimePreference::neutral(total),
            groups: vec![ResourceGroup {
                mode: GroupMode::Conjunctive,
                members: members.iter().map(|&m| ResourceIdx(m)).collect(),
            }],
            user_prefs: Vec::new(),
        }
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(TimeGrid::new(0, 5).is_err());
        assert!(TimeGrid::new(2, 0).is_err());
        assert_eq!(TimeGrid::new(5, 10).unwrap().total_slots(), 50);
    }

    #[test]
    fn ids_unique_across_resources_and_activities() {
        let grid = TimeGrid::new(1, 4).unwrap();
        let err =
            Problem::new(grid, vec![res("x", 4)], vec![act("x", 1, 4, &[0])], vec![]).unwrap_err();
        assert_eq!(err, ModelError::DuplicateId("x".into()));
    }

    #[test]
    fn activity_invariants() {
        let grid = TimeGrid::new(1, 4).unwrap();
        let r = vec![res("t1", 4)];
        assert!(Problem::new(grid, r.clone(), vec![act("a", 5, 4, &[0])], vec![]).is_err());
        assert!(Problem::new(grid, r.clone(), vec![act("a", 0, 4, &[0])], vec![]).is_err());
        assert!(Problem::new(grid, r.clone(), vec![act("a", 1, 4, &[3])], vec![]).is_err());
        let mut no_groups = act("a", 1, 4, &[0]);
        no_groups.groups.clear();
        assert!(Problem::new(grid, r.clone(), vec![no_groups], vec![]).is_err());
        let mut neg = act("a", 1, 4, &[0]);
        neg.user_prefs.push(LocationPenalty {
            start: 0,
            selection: None,
            penalty: -1.0,
        });
        assert!(Problem::new(grid, r, vec![neg], vec![]).is_err());
    }

    #[test]
    fn self_dependency_rejected() {
        let grid = TimeGrid::new(1, 4).unwrap();
        let dep = Dependency {
            kind: DependencyKind::Before,
            first: ActivityIdx(0),
            second: ActivityIdx(0),
        };
        let err = Problem::new(
            grid,
            vec![res("t", 4)],
            vec![act("a", 1, 4, &[0])],
            vec![dep],
        )
        .unwrap_err();
        assert_eq!(err, ModelError::SelfDependency("a".into()));
    }

    #[test]
    fn dependency_semantics() {
        assert!(DependencyKind::Before.holds(0, 2, 2));
        assert!(DependencyKind::Before.holds(0, 2, 5));
        assert!(!DependencyKind::Before.holds(1, 2, 2));
        assert!(DependencyKind::Meets.holds(1, 2, 3));
        assert!(!DependencyKind::Meets.holds(1, 2, 4));
        assert!(DependencyKind::Concurrent.holds(3, 1, 3));
        assert!(!DependencyKind::Concurrent.holds(3, 1, 4));
    }

    #[test]
    fn user_penalty_lookup_prefers_exact_selection() {
        let mut a = act("a", 1, 4, &[0]);
        a.user_prefs = vec![
            LocationPenalty {
                start: 1,
                selection: None,
                penalty: 2.0,
            },
            LocationPenalty {
                start: 1,
                selection: Some(vec![ResourceIdx(0)]),
                penalty: 5.0,
            },
        ];
        assert_eq!(a.user_penalty(&Location::new(1, vec![ResourceIdx(0)])), 5.0);
        assert_eq!(a.user_penalty(&Location::new(1, vec![ResourceIdx(1)])), 2.0);
        assert_eq!(a.user_penalty(&Location::new(0, vec![ResourceIdx(0)])), 0.0);
    }

    #[test]
    fn location_distance() {
        let a = Location::new(3, vec![ResourceIdx(0), ResourceIdx(1)]);
        let b = Location::new(5, vec![ResourceIdx(0), ResourceIdx(2)]);
        assert_eq!(a.distance(&b), 4.0);
        assert_eq!(a.distance(&a), 0.0);
    }

    #[test]
    fn remove_activity_remaps_dependencies() {
        let grid = TimeGrid::new(1, 4).unwrap();
        let acts = vec![
            act("a", 1, 4, &[0]),
            act("b", 1, 4, &[0]),
            act("c", 1, 4, &[0]),
        ];
        let deps = vec![
            Dependency {
                kind: DependencyKind::Before,
                first: ActivityIdx(0),
                second: ActivityIdx(1),
            },
            Dependency {
                kind: DependencyKind::Meets,
                first: ActivityIdx(0),
                second: ActivityIdx(2),
            },
        ];
        let mut p = Problem::new(grid, vec![res("t", 4)], acts, deps).unwrap();
        p.remove_activity(ActivityIdx(1));
        assert_eq!(p.activity_count(), 2);
        assert_eq!(p.dependencies().len(), 1);
        assert_eq!(p.dependencies()[0].second, ActivityIdx(1));
        assert_eq!(p.activity_by_id("c"), Some(ActivityIdx(1)));
        assert_eq!(p.activity_by_id("b"), None);
    }
}
