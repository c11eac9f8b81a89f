//! Textual problem and schedule documents.
//!
//! Both document kinds are JSON with a `format` tag and a `version`. The
//! serializer always emits the canonical form (pretty-printed, two-space
//! indent, marks sorted, empty optional lists omitted, trailing newline), so
//! `save(load(save(x))) == save(x)` byte for byte. See `docs/format.md`.

use crate::model::{
    check_schedule, Activity, ActivityIdx, Dependency, DependencyKind, GroupMode, Location,
    LocationPenalty, ModelError, Problem, Resource, ResourceGroup, ResourceIdx, Schedule, SlotMark,
    TimeGrid, TimePreference, Violation,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use thiserror::Error;

pub const PROBLEM_FORMAT: &str = "timetable-problem";
pub const SCHEDULE_FORMAT: &str = "timetable-schedule";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DocError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{path}: unknown id `{id}`")]
    UnknownId { path: String, id: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("schedule was saved for problem {expected}, not {actual}")]
    HashMismatch { expected: String, actual: String },
    #[error("schedule is unsound ({} violation(s)): {}", .0.len(), .0.join("; "))]
    Unsound(Vec<String>),
    #[error("repair impossible: violations involve only fixed activities: {}", .0.join("; "))]
    Unrepairable(Vec<String>),
}

impl From<serde_json::Error> for DocError {
    fn from(e: serde_json::Error) -> Self {
        DocError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> DocError {
    DocError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    pub days: usize,
    pub slots_per_day: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceDoc {
    pub id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub soft: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hard: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDoc {
    pub mode: GroupMode,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyDoc {
    pub start: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resources: Option<Vec<String>>,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityDoc {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub duration: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub soft: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hard: Vec<usize>,
    pub groups: Vec<GroupDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub user_prefs: Vec<PenaltyDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependencyDoc {
    pub kind: DependencyKind,
    pub first: String,
    pub second: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub format: String,
    pub version: u32,
    pub grid: GridDoc,
    pub resources: Vec<ResourceDoc>,
    pub activities: Vec<ActivityDoc>,
    #[serde(default)]
    pub dependencies: Vec<DependencyDoc>,
}

/// A location written with resource ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationDoc {
    pub start: usize,
    pub resources: Vec<String>,
}

impl LocationDoc {
    pub fn from_location(problem: &Problem, loc: &Location) -> Self {
        Self {
            start: loc.start,
            resources: loc
                .selection
                .iter()
                .map(|r| problem.resource(*r).id.clone())
                .collect(),
        }
    }

    /// Resolves ids and canonicalizes the selection order for activity `a`.
    pub fn resolve(
        &self,
        problem: &Problem,
        a: ActivityIdx,
        path: &str,
    ) -> Result<Location, DocError> {
        let mut sel = Vec::with_capacity(self.resources.len());
        for (i, id) in self.resources.iter().enumerate() {
            let r = problem
                .resource_by_id(id)
                .ok_or_else(|| DocError::UnknownId {
                    path: format!("{path}.resources[{i}]"),
                    id: id.clone(),
                })?;
            sel.push(r);
        }
        let sel = problem.canonical_selection(a, &sel).ok_or_else(|| {
            invalid(
                format!("{path}.resources"),
                format!(
                    "not a valid resource choice for activity `{}`",
                    problem.activity(a).id
                ),
            )
        })?;
        Ok(Location::new(self.start, sel))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentDoc {
    pub activity: String,
    pub start: usize,
    pub resources: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fixed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleDocument {
    pub format: String,
    pub version: u32,
    pub problem_hash: String,
    pub assignments: Vec<AssignmentDoc>,
}

fn marks_to_lists(prefs: &TimePreference) -> (Vec<usize>, Vec<usize>) {
    (
        prefs.slots_with(SlotMark::SoftDiscouraged).collect(),
        prefs.slots_with(SlotMark::HardForbidden).collect(),
    )
}

fn lists_to_marks(
    path: &str,
    soft: &[usize],
    hard: &[usize],
    total: usize,
) -> Result<TimePreference, DocError> {
    let mut prefs = TimePreference::neutral(total);
    for (list, mark, name) in [
        (soft, SlotMark::SoftDiscouraged, "soft"),
        (hard, SlotMark::HardForbidden, "hard"),
    ] {
        for (i, &slot) in list.iter().enumerate() {
            if slot >= total {
                return Err(invalid(
                    format!("{path}.{name}[{i}]"),
                    format!("slot {slot} outside grid of {total} slots"),
                ));
            }
            if prefs.get(slot) != SlotMark::Neutral {
                return Err(invalid(
                    format!("{path}.{name}[{i}]"),
                    format!("slot {slot} marked twice"),
                ));
            }
            prefs.set(slot, mark);
        }
    }
    Ok(prefs)
}

impl ActivityDoc {
    pub fn from_activity(problem: &Problem, a: &Activity) -> Self {
        let rid = |r: &ResourceIdx| problem.resource(*r).id.clone();
        let (soft, hard) = marks_to_lists(&a.prefs);
        Self {
            id: a.id.clone(),
            name: a.name.clone(),
            duration: a.duration,
            soft,
            hard,
            groups: a
                .groups
                .iter()
                .map(|g| GroupDoc {
                    mode: g.mode,
                    members: g.members.iter().map(rid).collect(),
                })
                .collect(),
            user_prefs: a
                .user_prefs
                .iter()
                .map(|p| PenaltyDoc {
                    start: p.start,
                    resources: p.selection.as_ref().map(|s| s.iter().map(rid).collect()),
                    penalty: p.penalty,
                })
                .collect(),
        }
    }

    /// Resolves resource ids against `resources` (id lookup) for a grid of
    /// `total` slots.
    pub fn to_activity(
        &self,
        path: &str,
        total: usize,
        resource_by_id: impl Fn(&str) -> Option<ResourceIdx>,
    ) -> Result<Activity, DocError> {
        let resolve = |p: String, id: &String| {
            resource_by_id(id).ok_or_else(|| DocError::UnknownId {
                path: p,
                id: id.clone(),
            })
        };
        let mut groups = Vec::with_capacity(self.groups.len());
        for (gi, g) in self.groups.iter().enumerate() {
            let members = g
                .members
                .iter()
                .enumerate()
                .map(|(mi, id)| resolve(format!("{path}.groups[{gi}].members[{mi}]"), id))
                .collect::<Result<Vec<_>, _>>()?;
            groups.push(ResourceGroup {
                mode: g.mode,
                members,
            });
        }
        let mut user_prefs = Vec::with_capacity(self.user_prefs.len());
        for (pi, p) in self.user_prefs.iter().enumerate() {
            let selection = match &p.resources {
                None => None,
                Some(ids) => Some(
                    ids.iter()
                        .enumerate()
                        .map(|(k, id)| {
                            resolve(format!("{path}.user_prefs[{pi}].resources[{k}]"), id)
                        })
                        .collect::<Result<Vec<_>, _>>()?,
                ),
            };
            user_prefs.push(LocationPenalty {
                start: p.start,
                selection,
                penalty: p.penalty,
            });
        }
        Ok(Activity {
            id: self.id.clone(),
            name: self.name.clone(),
            duration: self.duration,
            prefs: lists_to_marks(path, &self.soft, &self.hard, total)?,
            groups,
            user_prefs,
        })
    }
}

impl DependencyDoc {
    pub fn from_dependency(problem: &Problem, d: &Dependency) -> Self {
        Self {
            kind: d.kind,
            first: problem.activity(d.first).id.clone(),
            second: problem.activity(d.second).id.clone(),
        }
    }

    pub fn resolve(&self, problem: &Problem, path: &str) -> Result<Dependency, DocError> {
        let find = |field: &str, id: &String| {
            problem
                .activity_by_id(id)
                .ok_or_else(|| DocError::UnknownId {
                    path: format!("{path}.{field}"),
                    id: id.clone(),
                })
        };
        Ok(Dependency {
            kind: self.kind,
            first: find("first", &self.first)?,
            second: find("second", &self.second)?,
        })
    }
}

impl ProblemDocument {
    pub fn from_problem(problem: &Problem) -> Self {
        let grid = problem.grid();
        Self {
            format: PROBLEM_FORMAT.into(),
            version: VERSION,
            grid: GridDoc {
                days: grid.days(),
                slots_per_day: grid.slots_per_day(),
            },
            resources: problem
                .resources()
                .iter()
                .map(|r| {
                    let (soft, hard) = marks_to_lists(&r.prefs);
                    ResourceDoc {
                        id: r.id.clone(),
                        name: r.name.clone(),
                        kind: r.kind.clone(),
                        soft,
                        hard,
                    }
                })
                .collect(),
            activities: problem
                .activities()
                .iter()
                .map(|a| ActivityDoc::from_activity(problem, a))
                .collect(),
            dependencies: problem
                .dependencies()
                .iter()
                .map(|d| DependencyDoc::from_dependency(problem, d))
                .collect(),
        }
    }

    pub fn to_problem(&self) -> Result<Problem, DocError> {
        check_header(&self.format, PROBLEM_FORMAT, self.version)?;
        let grid = TimeGrid::new(self.grid.days, self.grid.slots_per_day)?;
        let total = grid.total_slots();
        let mut seen = BTreeSet::new();
        let mut resources = Vec::with_capacity(self.resources.len());
        for (i, r) in self.resources.iter().enumerate() {
            let path = format!("resources[{i}]");
            if !seen.insert(r.id.as_str()) {
                return Err(invalid(
                    format!("{path}.id"),
                    format!("duplicate id `{}`", r.id),
                ));
            }
            resources.push(Resource {
                id: r.id.clone(),
                name: r.name.clone(),
                kind: r.kind.clone(),
                prefs: lists_to_marks(&path, &r.soft, &r.hard, total)?,
            });
        }
        let resource_by_id = |id: &str| resources.iter().position(|r| r.id == id).map(ResourceIdx);
        let mut activities = Vec::with_capacity(self.activities.len());
        for (i, a) in self.activities.iter().enumerate() {
            let path = format!("activities[{i}]");
            if !seen.insert(a.id.as_str()) {
                return Err(invalid(
                    format!("{path}.id"),
                    format!("duplicate id `{}`", a.id),
                ));
            }
            activities.push(a.to_activity(&path, total, resource_by_id)?);
        }
        let activity_by_id = |id: &str| {
            self.activities
                .iter()
                .position(|a| a.id == id)
                .map(ActivityIdx)
        };
        let mut dependencies = Vec::with_capacity(self.dependencies.len());
        for (i, d) in self.dependencies.iter().enumerate() {
            let find = |field: &str, id: &String| {
                activity_by_id(id).ok_or_else(|| DocError::UnknownId {
                    path: format!("dependencies[{i}].{field}"),
                    id: id.clone(),
                })
            };
            dependencies.push(Dependency {
                kind: d.kind,
                first: find("first", &d.first)?,
                second: find("second", &d.second)?,
            });
        }
        // Per-activity diagnostics name the offending element.
        for (i, a) in activities.iter().enumerate() {
            let probe = Problem::new(grid, resources.clone(), vec![a.clone()], vec![]);
            if let Err(e) = probe {
                return Err(invalid(format!("activities[{i}]"), e.to_string()));
            }
        }
        for (i, d) in dependencies.iter().enumerate() {
            if d.first == d.second {
                return Err(invalid(
                    format!("dependencies[{i}]"),
                    format!(
                        "dependency between `{}` and itself",
                        self.dependencies[i].first
                    ),
                ));
            }
        }
        Ok(Problem::new(grid, resources, activities, dependencies)?)
    }
}

fn check_header(format: &str, expected: &str, version: u32) -> Result<(), DocError> {
    if format != expected {
        return Err(invalid(
            "format",
            format!("expected `{expected}`, found `{format}`"),
        ));
    }
    if version != VERSION {
        return Err(invalid("version", format!("unsupported version {version}")));
    }
    Ok(())
}

fn to_canonical_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("documents always serialize");
    out.push(b'\n');
    out
}

pub fn load_problem(bytes: &[u8]) -> Result<Problem, DocError> {
    let doc: ProblemDocument = serde_json::from_slice(bytes)?;
    doc.to_problem()
}

pub fn save_problem(problem: &Problem) -> Vec<u8> {
    to_canonical_bytes(&ProblemDocument::from_problem(problem))
}

/// Hex SHA-256 of the canonical problem bytes.
pub fn problem_hash(problem: &Problem) -> String {
    hex::encode(Sha256::digest(save_problem(problem)))
}

pub fn save_schedule(problem: &Problem, schedule: &Schedule) -> Vec<u8> {
    let doc = ScheduleDocument {
        format: SCHEDULE_FORMAT.into(),
        version: VERSION,
        problem_hash: problem_hash(problem),
        assignments: schedule
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
            .collect(),
    };
    to_canonical_bytes(&doc)
}

/// Human-readable rendering of a violation.
pub fn describe_violation(problem: &Problem, v: &Violation) -> String {
    let aid = |a: &ActivityIdx| {
        problem
            .activities()
            .get(a.0)
            .map_or_else(|| a.to_string(), |x| x.id.clone())
    };
    match v {
        Violation::InvalidSelection { activity } => {
            format!(
                "activity `{}` has an invalid resource selection",
                aid(activity)
            )
        }
        Violation::OutOfGrid { activity } => {
            format!("activity `{}` runs past the end of the grid", aid(activity))
        }
        Violation::HardForbidden { activity, slots } => {
            format!(
                "activity `{}` covers hard-forbidden slots {slots:?}",
                aid(activity)
            )
        }
        Violation::ResourceOverlap {
            resource,
            activities: (a, b),
            slots,
        } => format!(
            "activities `{}` and `{}` both use resource `{}` at slots {slots:?}",
            aid(a),
            aid(b),
            problem.resource(*resource).id
        ),
        Violation::DependencyViolated {
            dependency,
            first,
            second,
        } => {
            let kind = problem.dependencies()[*dependency].kind;
            format!(
                "dependency {kind:?}(`{}`, `{}`) is violated",
                aid(first),
                aid(second)
            )
        }
        Violation::FixedUnassigned { activity } => {
            format!("fixed activity `{}` is not scheduled", aid(activity))
        }
    }
}

/// Parses a schedule document without checking soundness.
pub fn parse_schedule(bytes: &[u8], problem: &Problem) -> Result<Schedule, DocError> {
    let doc: ScheduleDocument = serde_json::from_slice(bytes)?;
    check_header(&doc.format, SCHEDULE_FORMAT, doc.version)?;
    let actual = problem_hash(problem);
    if doc.problem_hash != actual {
        return Err(DocError::HashMismatch {
            expected: doc.problem_hash,
            actual,
        });
    }
    let mut schedule = Schedule::new(problem);
    for (i, entry) in doc.assignments.iter().enumerate() {
        let path = format!("assignments[{i}]");
        let a = problem
            .activity_by_id(&entry.activity)
            .ok_or_else(|| DocError::UnknownId {
                path: format!("{path}.activity"),
                id: entry.activity.clone(),
            })?;
        if schedule.is_assigned(a) {
            return Err(invalid(
                path,
                format!("activity `{}` assigned twice", entry.activity),
            ));
        }
        let loc = LocationDoc {
            start: entry.start,
            resources: entry.resources.clone(),
        }
        .resolve(problem, a, &path)?;
        schedule.assign(problem, a, loc);
        schedule.set_fixed(a, entry.fixed);
    }
    schedule.reindex(problem);
    Ok(schedule)
}

/// Result of loading a schedule with repair enabled.
#[derive(Debug, Clone)]
pub struct LoadedSchedule {
    pub schedule: Schedule,
    /// Activities detached to restore soundness, in detachment order.
    pub detached: Vec<ActivityIdx>,
}

/// Loads a schedule and checks soundness. Unsound input is refused unless
/// `repair` is set, in which case violating activities are detached.
pub fn load_schedule(
    bytes: &[u8],
    problem: &Problem,
    repair: bool,
) -> Result<LoadedSchedule, DocError> {
    let mut schedule = parse_schedule(bytes, problem)?;
    let violations = check_schedule(problem, &schedule);
    if violations.is_empty() {
        return Ok(LoadedSchedule {
            schedule,
            detached: Vec::new(),
        });
    }
    if !repair {
        return Err(DocError::Unsound(
            violations
                .iter()
                .map(|v| describe_violation(problem, v))
                .collect(),
        ));
    }
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    match crate::session::repair_schedule(problem, &mut schedule, &mut rng) {
        Ok(detached) => Ok(LoadedSchedule {
            schedule,
            detached: detached.into_iter().map(|(a, _)| a).collect(),
        }),
        Err(stuck) => Err(DocError::Unrepairable(
            stuck
                .iter()
                .map(|v| describe_violation(problem, v))
                .collect(),
        )),
    }
}
