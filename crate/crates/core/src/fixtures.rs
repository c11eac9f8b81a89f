//! Small hand-built instances used by tests, examples and the demo page.

use crate::model::{
    Activity, ActivityIdx, Dependency, DependencyKind, GroupMode, Problem, Resource, ResourceGroup,
    ResourceIdx, SlotMark, TimeGrid, TimePreference,
};

fn resource(id: &str, kind: &str, total: usize) -> Resource {
    Resource {
        id: id.into(),
        name: id.into(),
        kind: kind.into(),
        prefs: TimePreference::neutral(total),
    }
}

fn group(mode: GroupMode, members: &[usize]) -> ResourceGroup {
    ResourceGroup {
        mode,
        members: members.iter().map(|&m| ResourceIdx(m)).collect(),
    }
}

fn activity(id: &str, duration: usize, total: usize, groups: Vec<ResourceGroup>) -> Activity {
    Activity {
        id: id.into(),
        name: id.into(),
        duration,
        prefs: TimePreference::neutral(total),
        groups,
        user_prefs: Vec::new(),
    }
}

/// One day of six slots; resources `t1 c1 t2 c2 r1 r2`.
///
/// * `A`: duration 2, needs `t1` and `c1`, plus one of `r1`/`r2`.
/// * `B`: duration 1, needs one of `t1`/`t2`, `c2`, and one of `r1`/`r2`.
pub fn tiny() -> Problem {
    tiny_with(Vec::new())
}

fn tiny_with(deps: Vec<(DependencyKind, &str, &str)>) -> Problem {
    let total = 6;
    let resources = vec![
        resource("t1", "teacher", total),
        resource("c1", "class", total),
        resource("t2", "teacher", total),
        resource("c2", "class", total),
        resource("r1", "room", total),
        resource("r2", "room", total),
    ];
    let activities = vec![
        activity(
            "A",
            2,
            total,
            vec![
                group(GroupMode::Conjunctive, &[0, 1]),
                group(GroupMode::Disjunctive, &[4, 5]),
            ],
        ),
        activity(
            "B",
            1,
            total,
            vec![
                group(GroupMode::Disjunctive, &[0, 2]),
                group(GroupMode::Conjunctive, &[3]),
                group(GroupMode::Disjunctive, &[4, 5]),
            ],
        ),
    ];
    let idx = |id: &str| ActivityIdx(if id == "A" { 0 } else { 1 });
    let deps = deps
        .into_iter()
        .map(|(kind, first, second)| Dependency {
            kind,
            first: idx(first),
            second: idx(second),
        })
        .collect();
    Problem::new(
        TimeGrid::new(1, total).unwrap(),
        resources,
        activities,
        deps,
    )
    .unwrap()
}

/// [`tiny`] plus a single dependency between `A` and `B`.
pub fn tiny_with_dependency(kind: DependencyKind, first: &str, second: &str) -> Problem {
    tiny_with(vec![(kind, first, second)])
}

/// [`tiny`] with one slot mark set on a resource or activity.
pub fn tiny_with_mark(entity: &str, slot: usize, mark: SlotMark) -> Problem {
    let mut p = tiny();
    let e = p.lookup(entity).expect("fixture entity");
    p.set_slot_mark(e, slot, mark).expect("fixture slot");
    p
}

/// One day of four slots, one room `r1`, two unit activities `A` and `B`
/// that both need it.
pub fn single_room() -> Problem {
    single_room_with(4, 2)
}

/// `n` unit activities competing for one room over `slots` slots.
pub fn single_room_with(slots: usize, n: usize) -> Problem {
    let resources = vec![resource("r1", "room", slots)];
    let names = ["A", "B", "C", "D", "E", "F", "G", "H"];
    let activities = (0..n)
        .map(|i| {
            let id = names
                .get(i)
                .map(|s| s.to_string())
                .unwrap_or(format!("X{i}"));
            activity(&id, 1, slots, vec![group(GroupMode::Conjunctive, &[0])])
        })
        .collect();
    Problem::new(
        TimeGrid::new(1, slots).unwrap(),
        resources,
        activities,
        vec![],
    )
    .unwrap()
}
