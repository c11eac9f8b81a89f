use super::*;
use crate::fixtures::{single_room_with, tiny, tiny_with_mark};
use crate::io::GroupDoc;
use crate::model::{DependencyKind, GroupMode, ResourceIdx};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const A: ActivityIdx = ActivityIdx(0);
const B: ActivityIdx = ActivityIdx(1);

fn loc(start: usize, ids: &[&str]) -> LocationDoc {
    LocationDoc {
        start,
        resources: ids.iter().map(|s| s.to_string()).collect(),
    }
}

fn place(activity: &str, start: usize, ids: &[&str]) -> Edit {
    Edit::PlaceAndFix {
        activity: activity.into(),
        location: loc(start, ids),
    }
}

fn dep(kind: DependencyKind, first: &str, second: &str) -> DependencyDoc {
    DependencyDoc {
        kind,
        first: first.into(),
        second: second.into(),
    }
}

fn fresh(p: Problem) -> SolverState {
    SolverState::new(p, HeuristicWeights::default(), 0).unwrap()
}

fn sound(s: &SolverState) -> bool {
    check_schedule(s.problem(), s.schedule()).is_empty()
}

#[test]
fn place_and_fix_on_empty_schedule() {
    let mut s = fresh(tiny());
    let rep = s.apply_edit(place("A", 0, &["t1", "c1", "r1"])).unwrap();
    assert_eq!(rep.edit, "place_and_fix");
    assert!(rep.displaced.is_empty() && rep.detached.is_empty());
    assert!(s.schedule().is_fixed(A));
    assert!(!s.is_unscheduled(A));
    assert_eq!(s.tabu().len(), 0);
}

#[test]
fn place_and_fix_displaces_unfixed() {
    let mut s = fresh(tiny());
    s.place(
        B,
        Location::new(0, vec![ResourceIdx(0), ResourceIdx(3), ResourceIdx(4)]),
    )
    .unwrap();
    let rep = s.apply_edit(place("A", 0, &["r2", "t1", "c1"])).unwrap();
    assert_eq!(rep.displaced, vec!["B"]);
    assert_eq!(s.history(B).n_removed, 1);
    assert!(s.is_unscheduled(B));
    assert!(sound(&s));
}

#[test]
fn place_and_fix_moves_already_placed_activity() {
    let mut s = fresh(tiny());
    s.apply_edit(place("A", 0, &["t1", "c1", "r1"])).unwrap();
    s.apply_edit(place("A", 3, &["t1", "c1", "r2"])).unwrap();
    assert_eq!(s.schedule().location(A).unwrap().start, 3);
    assert!(s.schedule().is_fixed(A));
    assert!(sound(&s));
}

#[test]
fn place_and_fix_rejections_leave_state_alone() {
    let p = tiny_with_mark("t1", 5, SlotMark::HardForbidden);
    let mut s = fresh(p);
    let before = s.snapshot(ViewKind::Latest);
    assert!(matches!(
        s.apply_edit(place("A", 4, &["t1", "c1", "r1"])),
        Err(EditError::Rejected(_))
    ));
    assert_eq!(
        s.apply_edit(place("Z", 0, &["t1"])),
        Err(EditError::UnknownId("Z".into()))
    );
    s.apply_edit(place("B", 0, &["t1", "c2", "r1"])).unwrap();
    let err = s
        .apply_edit(place("A", 0, &["t1", "c1", "r2"]))
        .unwrap_err();
    assert!(
        matches!(err, EditError::Rejected(ref m) if m.contains("`B`")),
        "{err}"
    );
    assert!(s.is_unscheduled(A));
    assert_ne!(before, s.snapshot(ViewKind::Latest));
}

#[test]
fn rejected_edit_restores_rng() {
    let mut s = fresh(single_room_with(4, 3));
    let mut twin = s.clone();
    let _ = s.apply_edit(place("A", 9, &["r1"]));
    assert_eq!(s.select_activity(), twin.select_activity());
}

#[test]
fn set_duration_past_grid_detaches() {
    let mut s = fresh(tiny());
    s.place(A, Location::new(4, s.problem().selections(A)[0].clone()))
        .unwrap();
    let rep = s
        .apply_edit(Edit::SetDuration {
            activity: "A".into(),
            duration: 3,
        })
        .unwrap();
    assert_eq!(rep.detached, vec!["A"]);
    assert_eq!(s.problem().activity(A).duration, 3);
    assert_eq!(s.history(A).n_removed, 1);
    assert!(sound(&s));
}

#[test]
fn set_duration_with_room_keeps_activity() {
    let mut s = fresh(tiny());
    s.place(A, Location::new(0, s.problem().selections(A)[0].clone()))
        .unwrap();
    let rep = s
        .apply_edit(Edit::SetDuration {
            activity: "A".into(),
            duration: 3,
        })
        .unwrap();
    assert!(rep.detached.is_empty());
}

#[test]
fn add_dependency_detaches_exactly_one() {
    let mut s = fresh(tiny());
    s.place(
        B,
        Location::new(0, vec![ResourceIdx(2), ResourceIdx(3), ResourceIdx(4)]),
    )
    .unwrap();
    s.place(
        A,
        Location::new(2, vec![ResourceIdx(0), ResourceIdx(1), ResourceIdx(5)]),
    )
    .unwrap();
    let rep = s
        .apply_edit(Edit::AddDependency {
            dependency: dep(DependencyKind::Before, "A", "B"),
        })
        .unwrap();
    assert_eq!(rep.detached.len(), 1);
    assert_eq!(rep.scheduled, 1);
    assert!(sound(&s));
}

#[test]
fn dependency_between_fixed_rolls_back() {
    let mut s = fresh(tiny());
    s.apply_edit(place("B", 0, &["t2", "c2", "r1"])).unwrap();
    s.apply_edit(place("A", 2, &["t1", "c1", "r2"])).unwrap();
    let before = s.clone();
    let err = s
        .apply_edit(Edit::AddDependency {
            dependency: dep(DependencyKind::Before, "A", "B"),
        })
        .unwrap_err();
    assert!(matches!(err, EditError::RolledBack(ref v) if !v.is_empty()));
    assert!(s.problem().dependencies().is_empty());
    assert_eq!(
        s.snapshot(ViewKind::Latest),
        before.snapshot(ViewKind::Latest)
    );
}

#[test]
fn remove_dependency_requires_existing() {
    let mut s = fresh(tiny());
    let d = dep(DependencyKind::Meets, "A", "B");
    assert!(matches!(
        s.apply_edit(Edit::RemoveDependency {
            dependency: d.clone()
        }),
        Err(EditError::Rejected(_))
    ));
    s.apply_edit(Edit::AddDependency {
        dependency: d.clone(),
    })
    .unwrap();
    s.apply_edit(Edit::RemoveDependency { dependency: d })
        .unwrap();
    assert!(s.problem().dependencies().is_empty());
}

#[test]
fn hard_mark_under_placed_activity_detaches_it() {
    let mut s = fresh(tiny());
    s.place(A, Location::new(0, s.problem().selections(A)[0].clone()))
        .unwrap();
    let rep = s
        .apply_edit(Edit::SetSlotMark {
            entity: "c1".into(),
            slot: 1,
            mark: SlotMark::HardForbidden,
        })
        .unwrap();
    assert_eq!(rep.detached, vec!["A"]);
}

#[test]
fn soft_mark_changes_nothing_structural() {
    let mut s = fresh(tiny());
    s.place(A, Location::new(0, s.problem().selections(A)[0].clone()))
        .unwrap();
    let rep = s
        .apply_edit(Edit::SetSlotMark {
            entity: "A".into(),
            slot: 0,
            mark: SlotMark::SoftDiscouraged,
        })
        .unwrap();
    assert!(rep.detached.is_empty());
    assert_eq!(s.snapshot(ViewKind::Latest).soft_total, 1);
}

#[test]
fn unfix_and_detach() {
    let mut s = fresh(tiny());
    s.apply_edit(place("A", 0, &["t1", "c1", "r1"])).unwrap();
    s.apply_edit(Edit::Unfix {
        activity: "A".into(),
    })
    .unwrap();
    assert!(!s.schedule().is_fixed(A));
    assert!(s.schedule().is_assigned(A));
    s.apply_edit(Edit::Detach {
        activity: "A".into(),
    })
    .unwrap();
    assert!(s.is_unscheduled(A));
    assert_eq!(s.history(A).n_removed, 0);
    assert_eq!(s.history(A).last_location.as_ref().unwrap().start, 0);
}

#[test]
fn add_and_remove_activity() {
    let mut s = fresh(tiny());
    let doc = ActivityDoc {
        id: "C".into(),
        name: "extra".into(),
        duration: 1,
        soft: vec![],
        hard: vec![],
        groups: vec![GroupDoc {
            mode: GroupMode::Conjunctive,
            members: vec!["t2".into(), "r2".into()],
        }],
        user_prefs: vec![],
    };
    s.apply_edit(Edit::AddActivity { activity: doc }).unwrap();
    assert_eq!(s.problem().activity_count(), 3);
    assert_eq!(s.unscheduled(), &[A, B, ActivityIdx(2)]);

    s.place(
        ActivityIdx(2),
        Location::new(1, vec![ResourceIdx(2), ResourceIdx(5)]),
    )
    .unwrap();
    s.place(
        B,
        Location::new(1, vec![ResourceIdx(0), ResourceIdx(3), ResourceIdx(4)]),
    )
    .unwrap();
    s.apply_edit(Edit::RemoveActivity {
        activity: "A".into(),
    })
    .unwrap();
    assert_eq!(s.problem().activity_count(), 2);
    assert_eq!(s.problem().activity_by_id("C"), Some(B));
    assert!(s.unscheduled().is_empty());
    assert!(sound(&s));
    assert!(s.tabu().entries().all(|(a, _)| a.0 < 2));
}

#[test]
fn add_activity_with_duplicate_id_rejected() {
    let mut s = fresh(tiny());
    let doc = ActivityDoc {
        id: "t1".into(),
        name: String::new(),
        duration: 1,
        soft: vec![],
        hard: vec![],
        groups: vec![GroupDoc {
            mode: GroupMode::Conjunctive,
            members: vec!["t2".into()],
        }],
        user_prefs: vec![],
    };
    assert!(matches!(
        s.apply_edit(Edit::AddActivity { activity: doc }),
        Err(EditError::Rejected(_))
    ));
}

#[test]
fn set_weights_validates_and_resizes_tabu() {
    let mut s = fresh(tiny());
    let mut w = HeuristicWeights::default();
    w.tabu_length = 3;
    s.apply_edit(Edit::SetWeights { weights: w }).unwrap();
    assert_eq!(s.tabu().capacity(), 3);
    let mut bad = HeuristicWeights::default();
    bad.sample_probability = 0.0;
    assert!(s.apply_edit(Edit::SetWeights { weights: bad }).is_err());
    assert_eq!(s.weights().tabu_length, 3);
}

#[test]
fn repair_overlap_pair_detaches_one() {
    let p = single_room_with(2, 2);
    let mut sched = Schedule::new(&p);
    sched.assign(&p, A, Location::new(0, vec![ResourceIdx(0)]));
    sched.assign(&p, B, Location::new(0, vec![ResourceIdx(0)]));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let detached = repair_schedule(&p, &mut sched, &mut rng).unwrap();
    assert_eq!(detached.len(), 1);
    assert_eq!(sched.scheduled_count(), 1);
    assert!(check_schedule(&p, &sched).is_empty());
}

#[test]
fn repair_sound_schedule_is_noop() {
    let p = tiny();
    let mut sched = Schedule::new(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(repair_schedule(&p, &mut sched, &mut rng), Ok(vec![]));
}

#[test]
fn repair_never_moves_fixed() {
    let p = single_room_with(1, 3);
    let mut sched = Schedule::new(&p);
    for a in 0..3 {
        sched.assign(&p, ActivityIdx(a), Location::new(0, vec![ResourceIdx(0)]));
    }
    sched.set_fixed(ActivityIdx(0), true);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let detached = repair_schedule(&p, &mut sched, &mut rng).unwrap();
    assert_eq!(detached.len(), 2);
    assert!(sched.is_assigned(ActivityIdx(0)));
}

#[test]
fn snapshots_partition_and_repeat() {
    let mut s = fresh(single_room_with(4, 6));
    let v0 = s.snapshot(ViewKind::Latest);
    assert!(v0.assignments.is_empty());
    assert_eq!(v0.unscheduled.len(), 6);
    for _ in 0..7 {
        s.iterate().unwrap();
    }
    let v = s.snapshot(ViewKind::Latest);
    assert_eq!(v.assignments.len() + v.unscheduled.len(), v.total);
    assert_eq!(v.scheduled, v.assignments.len());
    assert_eq!(v, s.snapshot(ViewKind::Latest));
    let best = s.snapshot(ViewKind::Best);
    assert_eq!(best.scheduled, best.best.scheduled);
}

#[test]
fn best_resets_after_edit() {
    let mut s = fresh(single_room_with(2, 2));
    s.solve(&AtomicBool::new(false));
    assert_eq!(s.best().key.scheduled, 2);
    s.apply_edit(Edit::Detach {
        activity: "A".into(),
    })
    .unwrap();
    assert_eq!(s.best().key.scheduled, 1);
}

#[test]
fn session_applies_queued_edits_before_iterating() {
    let mut sess = Session::new(tiny(), HeuristicWeights::default(), 8).unwrap();
    sess.enqueue(place("A", 0, &["t1", "c1", "r1"]));
    sess.enqueue(Edit::Detach {
        activity: "nope".into(),
    });
    let mut events = Vec::new();
    let n = sess.run(Some(1), &AtomicBool::new(false), |e, _| events.push(e));
    assert_eq!(n, 1);
    assert_eq!(events.len(), 3);
    assert!(matches!(events[0], SessionEvent::Edit(Ok(_))));
    assert!(matches!(
        events[1],
        SessionEvent::Edit(Err(EditError::UnknownId(_)))
    ));
    match &events[2] {
        SessionEvent::Iteration(r) => assert_eq!(r.activity, "B"),
        other => panic!("{other:?}"),
    }
    assert_eq!(sess.pending(), 0);
    assert!(sess.state().is_complete());
    assert!(sess.state().schedule().is_fixed(A));
}

#[test]
fn session_run_stops_on_completion() {
    let mut sess = Session::new(tiny(), HeuristicWeights::default(), 1).unwrap();
    let n = sess.run(None, &AtomicBool::new(false), |_, _| {});
    assert!(n >= 2);
    assert!(sess.state().is_complete());
    assert_eq!(sess.run(Some(5), &AtomicBool::new(false), |_, _| {}), 0);
}

#[test]
fn edit_json_shape() {
    let e: Edit = serde_json::from_str(
        r#"{"kind":"place_and_fix","activity":"A","location":{"start":0,"resources":["t1","c1","r1"]}}"#,
    )
    .unwrap();
    assert_eq!(e, place("A", 0, &["t1", "c1", "r1"]));
    let e: Edit = serde_json::from_str(
        r#"{"kind":"set_slot_mark","entity":"t1","slot":2,"mark":"hard_forbidden"}"#,
    )
    .unwrap();
    assert_eq!(e.kind(), "set_slot_mark");
    assert!(serde_json::from_str::<Edit>(r#"{"kind":"detach","activity":"A","x":1}"#).is_err());
    let err = serde_json::to_value(EditError::UnknownId("Q".into())).unwrap();
    assert_eq!(err, serde_json::json!({"kind":"unknown_id","detail":"Q"}));
}
