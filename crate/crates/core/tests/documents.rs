use timetable_core::generator::{generate, GenParams};
use timetable_core::io::{
    load_problem, load_schedule, problem_hash, save_problem, save_schedule, DocError,
};

fn corpus() -> impl Iterator<Item = GenParams> {
    [20.0, 50.0, 85.0].into_iter().flat_map(|fill| {
        (0..4).map(move |seed| GenParams {
            n_teachers: 8,
            n_classes: 8,
            n_rooms: 8,
            ..GenParams::default().with_fill(fill).with_seed(seed)
        })
    })
}

#[test]
fn problems_round_trip_byte_identical() {
    for params in corpus() {
        let inst = generate(&params).unwrap();
        let bytes = save_problem(&inst.problem);
        let back = load_problem(&bytes).unwrap();
        assert_eq!(
            back, inst.problem,
            "fill {} seed {}",
            params.fill_percent, params.seed
        );
        assert_eq!(save_problem(&back), bytes);
        assert_eq!(problem_hash(&back), problem_hash(&inst.problem));
    }
}

#[test]
fn witnesses_round_trip() {
    for params in corpus() {
        let inst = generate(&params).unwrap();
        let bytes = save_schedule(&inst.problem, &inst.witness);
        let loaded = load_schedule(&bytes, &inst.problem, false).unwrap();
        assert!(loaded.detached.is_empty());
        assert_eq!(save_schedule(&inst.problem, &loaded.schedule), bytes);
    }
}

#[test]
fn schedule_for_other_problem_is_refused() {
    let a = generate(&GenParams::default().with_fill(30.0).with_seed(1)).unwrap();
    let b = generate(&GenParams::default().with_fill(30.0).with_seed(2)).unwrap();
    let bytes = save_schedule(&a.problem, &a.witness);
    assert!(matches!(
        load_schedule(&bytes, &b.problem, false),
        Err(DocError::HashMismatch { .. })
    ));
}
