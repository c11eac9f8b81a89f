use serde_json::Value;
use timetable_wasm::Demo;

fn frame(d: &Demo) -> Value {
    serde_json::from_str(&d.snapshot()).unwrap()
}

fn assignment<'a>(f: &'a Value, id: &str) -> Option<&'a Value> {
    f["view"]["assignments"]
        .as_array()
        .unwrap()
        .iter()
        .find(|a| a["activity"] == id)
}

#[test]
fn steps_to_completion() {
    let mut d = Demo::new(6, 50.0, 3).unwrap();
    let f = frame(&d);
    assert_eq!(f["days"], 5);
    assert_eq!(f["resources"].as_array().unwrap().len(), 18);
    let mut total = 0;
    while !d.is_complete() && total < 2000 {
        let reports: Vec<Value> = serde_json::from_str(&d.step(50)).unwrap();
        assert!(!reports.is_empty());
        total += reports.len();
    }
    assert!(d.is_complete());
}

#[test]
fn place_fix_then_detach() {
    let mut d = Demo::new(6, 50.0, 5).unwrap();
    let f = frame(&d);
    let id = f["view"]["unscheduled"][0]["id"]
        .as_str()
        .unwrap()
        .to_string();
    let d0 = f["durations"].as_array().unwrap();
    assert!(d0.iter().any(|p| p[0] == id.as_str()));
    // Try every class row at slot 0 until one fits.
    let classes: Vec<String> = f["resources"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["kind"] == "class")
        .map(|r| r["id"].as_str().unwrap().to_string())
        .collect();
    let placed = classes.iter().any(|c| d.place_and_fix(&id, c, 0).is_ok());
    assert!(placed);
    let f = frame(&d);
    let a = assignment(&f, &id).unwrap();
    assert_eq!(a["fixed"], true);
    assert_eq!(a["start"], 0);

    d.step(30);
    let f = frame(&d);
    assert_eq!(assignment(&f, &id).unwrap()["start"], 0);

    d.detach(&id).unwrap();
    assert!(assignment(&frame(&d), &id).is_none());
}

#[test]
fn errors_are_reported() {
    let mut d = Demo::new(4, 40.0, 1).unwrap();
    assert!(d
        .place_and_fix("zz", "c1", 0)
        .unwrap_err()
        .contains("unknown activity"));
    assert!(d.detach("zz").is_err());
    assert!(Demo::new(4, 400.0, 1).is_err());
}
