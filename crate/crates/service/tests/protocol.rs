use serde_json::{json, Value};
use std::time::Duration;
use timetable_core::fixtures::tiny_with_mark;
use timetable_core::generator::{generate, GenParams};
use timetable_core::io::{load_schedule, problem_hash, ProblemDocument, SCHEDULE_FORMAT, VERSION};
use timetable_core::model::{Problem, SlotMark};
use timetable_service::{serve, ServiceConfig};
use tokio::io::{AsyncBufReadExt, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::time::timeout;

async fn start_server() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    tokio::spawn(serve(listener, ServiceConfig::default()));
    addr
}

async fn request(addr: &str, method: &str, path: &str, body: Option<&Value>) -> (u16, Value) {
    let mut s = TcpStream::connect(addr).await.unwrap();
    let payload = body.map(|b| b.to_string()).unwrap_or_default();
    let head = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n",
        payload.len()
    );
    s.write_all(head.as_bytes()).await.unwrap();
    s.write_all(payload.as_bytes()).await.unwrap();
    let mut raw = Vec::new();
    s.read_to_end(&mut raw).await.unwrap();
    let text = String::from_utf8(raw).unwrap();
    let status: u16 = text[9..12].parse().unwrap();
    let (headers, body) = text.split_once("\r\n\r\n").unwrap();
    let body = if headers
        .to_ascii_lowercase()
        .contains("transfer-encoding: chunked")
    {
        dechunk(body)
    } else {
        body.to_string()
    };
    (status, serde_json::from_str(&body).unwrap_or(Value::Null))
}

fn dechunk(mut s: &str) -> String {
    let mut out = String::new();
    loop {
        let (len, rest) = s.split_once("\r\n").unwrap();
        let n = usize::from_str_radix(len.trim(), 16).unwrap();
        if n == 0 {
            return out;
        }
        out.push_str(&rest[..n]);
        s = &rest[n + 2..];
    }
}

async fn post(addr: &str, path: &str, body: Value) -> (u16, Value) {
    request(addr, "POST", path, Some(&body)).await
}

/// Reads SSE `data:` payloads from a session stream.
struct EventReader {
    lines: tokio::io::Lines<BufReader<TcpStream>>,
}

impl EventReader {
    async fn open(addr: &str, id: &str) -> Self {
        let mut s = TcpStream::connect(addr).await.unwrap();
        let head = format!(
            "GET /api/sessions/{id}/stream HTTP/1.1\r\nHost: {addr}\r\nAccept: text/event-stream\r\n\r\n"
        );
        s.write_all(head.as_bytes()).await.unwrap();
        let mut lines = BufReader::new(s).lines();
        // Skip the response head.
        while let Some(l) = lines.next_line().await.unwrap() {
            if l.is_empty() {
                break;
            }
        }
        Self { lines }
    }

    async fn next(&mut self) -> Value {
        loop {
            let line = timeout(Duration::from_secs(20), self.lines.next_line())
                .await
                .expect("stream stalled")
                .unwrap()
                .expect("stream closed");
            if let Some(data) = line.strip_prefix("data:") {
                return serde_json::from_str(data.trim()).unwrap();
            }
        }
    }
}

fn create_body(problem: &Problem, seed: u64) -> Value {
    json!({
        "type": "create",
        "problem": ProblemDocument::from_problem(problem),
        "seed": seed,
    })
}

async fn create(addr: &str, problem: &Problem) -> (String, Value) {
    let (status, body) = post(addr, "/api/sessions", create_body(problem, 3)).await;
    assert_eq!(status, 201, "{body}");
    (body["session"].as_str().unwrap().to_string(), body)
}

fn medium() -> Problem {
    generate(&GenParams::default().with_fill(70.0).with_seed(4))
        .unwrap()
        .problem
}

fn assert_view_sound(problem: &Problem, view: &Value) {
    let doc = json!({
        "format": SCHEDULE_FORMAT,
        "version": VERSION,
        "problem_hash": problem_hash(problem),
        "assignments": view["assignments"],
    });
    let bytes = serde_json::to_vec(&doc).unwrap();
    load_schedule(&bytes, problem, false).expect("streamed view is sound");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn health_counts_sessions() {
    let addr = start_server().await;
    let (status, body) = request(&addr, "GET", "/health", None).await;
    assert_eq!(status, 200);
    assert_eq!(body, json!({"status": "ok", "sessions": 0}));
    create(&addr, &medium()).await;
    let (_, body) = request(&addr, "GET", "/health", None).await;
    assert_eq!(body["sessions"], 1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn create_then_snapshot_is_empty() {
    let addr = start_server().await;
    let problem = medium();
    let (id, created) = create(&addr, &problem).await;
    assert_eq!(created["type"], "snapshot");
    let (status, snap) = post(
        &addr,
        &format!("/api/sessions/{id}"),
        json!({"type": "get_snapshot"}),
    )
    .await;
    assert_eq!(status, 200);
    assert_eq!(snap["type"], "snapshot");
    assert_eq!(snap["running"], false);
    assert_eq!(snap["view"]["iteration"], 0);
    assert_eq!(snap["view"]["assignments"], json!([]));
    assert_eq!(
        snap["view"]["unscheduled"].as_array().unwrap().len(),
        problem.activity_count()
    );
    assert!(snap["seq"].as_u64().unwrap() > created["seq"].as_u64().unwrap());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn step_runs_exactly_n_then_pauses() {
    let addr = start_server().await;
    let (id, _) = create(&addr, &medium()).await;
    let mut events = EventReader::open(&addr, &id).await;
    assert_eq!(events.next().await["type"], "snapshot");
    let (_, reply) = post(
        &addr,
        &format!("/api/sessions/{id}"),
        json!({"type": "step", "n": 5}),
    )
    .await;
    assert_eq!(reply["type"], "snapshot");
    assert_eq!(reply["running"], false);
    assert_eq!(reply["view"]["iteration"], 5);

    let mut reports = Vec::new();
    let mut last_seq = 0;
    loop {
        let e = events.next().await;
        let seq = e["seq"].as_u64().unwrap();
        assert!(seq > last_seq);
        last_seq = seq;
        match e["type"].as_str().unwrap() {
            "iteration_report" => reports.push(e["report"]["iteration"].as_u64().unwrap()),
            "snapshot" if e["view"]["iteration"] == 5 => break,
            "snapshot" => {}
            other => panic!("unexpected {other}"),
        }
    }
    assert_eq!(reports, vec![1, 2, 3, 4, 5]);
    let (_, snap) = post(
        &addr,
        &format!("/api/sessions/{id}"),
        json!({"type": "get_snapshot"}),
    )
    .await;
    assert_eq!(snap["view"]["iteration"], 5);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn edit_result_precedes_snapshot_reflecting_it() {
    let addr = start_server().await;
    let problem = generate(&GenParams::default().with_fill(85.0).with_seed(1))
        .unwrap()
        .problem;
    let (id, _) = create(&addr, &problem).await;
    let mut events = EventReader::open(&addr, &id).await;
    let path = format!("/api/sessions/{id}");
    let (_, started) = post(&addr, &path, json!({"type": "start"})).await;
    assert_eq!(started["running"], true);
    tokio::time::sleep(Duration::from_millis(150)).await;

    let act = &problem.activities()[0];
    let first = &problem.selections(timetable_core::ActivityIdx(0))[0];
    let resources: Vec<&str> = first
        .iter()
        .map(|r| problem.resource(*r).id.as_str())
        .collect();
    let edit = json!({"type": "edit", "edit": {
        "kind": "place_and_fix",
        "activity": act.id,
        "location": {"start": 0, "resources": resources},
    }});
    let (status, result) = post(&addr, &path, edit).await;
    assert_eq!(status, 200);
    assert_eq!(result["type"], "edit_result");
    assert_eq!(result["result"]["status"], "applied", "{result}");
    let edit_seq = result["seq"].as_u64().unwrap();

    let fixed_in = |view: &Value| {
        view["assignments"]
            .as_array()
            .unwrap()
            .iter()
            .any(|a| a["activity"] == act.id.as_str() && a["fixed"] == true)
    };
    let mut seen_result = false;
    let mut last_iter = None;
    let mut reflected = false;
    while !reflected {
        let e = events.next().await;
        match e["type"].as_str().unwrap() {
            "edit_result" => {
                assert_eq!(e["seq"].as_u64().unwrap(), edit_seq);
                seen_result = true;
            }
            "snapshot" => {
                let it = e["view"]["iteration"].as_u64().unwrap();
                assert!(
                    last_iter.map_or(true, |l| it > l),
                    "iterations must increase"
                );
                last_iter = Some(it);
                assert_view_sound(&problem, &e["view"]);
                if fixed_in(&e["view"]) {
                    assert!(seen_result, "snapshot reflecting the edit arrived first");
                    assert!(e["seq"].as_u64().unwrap() > edit_seq);
                    reflected = true;
                }
            }
            _ => {}
        }
    }
    let (_, paused) = post(&addr, &path, json!({"type": "pause"})).await;
    assert_eq!(paused["running"], false);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn pause_freezes_iteration() {
    let addr = start_server().await;
    let problem = generate(&GenParams::default().with_fill(85.0).with_seed(2))
        .unwrap()
        .problem;
    let (id, _) = create(&addr, &problem).await;
    let path = format!("/api/sessions/{id}");
    post(&addr, &path, json!({"type": "start"})).await;
    tokio::time::sleep(Duration::from_millis(100)).await;
    let (_, paused) = post(&addr, &path, json!({"type": "pause"})).await;
    let at = paused["view"]["iteration"].as_u64().unwrap();
    assert!(at > 0);
    tokio::time::sleep(Duration::from_millis(200)).await;
    let (_, later) = post(&addr, &path, json!({"type": "get_snapshot"})).await;
    assert_eq!(later["view"]["iteration"].as_u64().unwrap(), at);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn rejection_is_forwarded_verbatim() {
    let addr = start_server().await;
    let problem = tiny_with_mark("t1", 5, SlotMark::HardForbidden);
    let (id, _) = create(&addr, &problem).await;
    let edit = json!({"type": "edit", "edit": {
        "kind": "place_and_fix",
        "activity": "A",
        "location": {"start": 4, "resources": ["t1", "c1", "r1"]},
    }});
    let (status, result) = post(&addr, &format!("/api/sessions/{id}"), edit).await;
    assert_eq!(status, 200);
    assert_eq!(result["result"]["status"], "rejected");
    assert_eq!(result["result"]["error"]["kind"], "rejected");
    assert!(result["result"]["error"]["detail"]
        .as_str()
        .unwrap()
        .contains("hard-forbidden"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn set_weights_round_trip() {
    let addr = start_server().await;
    let (id, _) = create(&addr, &medium()).await;
    let (_, ok) = post(
        &addr,
        &format!("/api/sessions/{id}"),
        json!({"type": "set_weights", "weights": {"strategy": "full", "tabu_length": 5}}),
    )
    .await;
    assert_eq!(ok["result"]["status"], "applied");
    let (_, bad) = post(
        &addr,
        &format!("/api/sessions/{id}"),
        json!({"type": "set_weights", "weights": {"sample_probability": 0}}),
    )
    .await;
    assert_eq!(bad["result"]["status"], "rejected");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn errors_for_unknown_and_malformed() {
    let addr = start_server().await;
    let (status, body) = post(&addr, "/api/sessions/nope", json!({"type": "start"})).await;
    assert_eq!(status, 404);
    assert_eq!(body["type"], "error");
    let (id, _) = create(&addr, &medium()).await;
    let (status, body) = post(
        &addr,
        &format!("/api/sessions/{id}"),
        json!({"type": "jump"}),
    )
    .await;
    assert_eq!(status, 400);
    assert!(body["message"].as_str().unwrap().contains("malformed"));
    let (status, _) = post(&addr, "/api/sessions", json!({"type": "start"})).await;
    assert_eq!(status, 400);
    let (status, _) = post(
        &addr,
        "/api/sessions",
        json!({"type": "create", "problem": {"format": "timetable-problem", "version": 1}}),
    )
    .await;
    assert_eq!(status, 400);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stream_reattaches_with_latest_snapshot() {
    let addr = start_server().await;
    let (id, _) = create(&addr, &medium()).await;
    post(
        &addr,
        &format!("/api/sessions/{id}"),
        json!({"type": "step", "n": 3}),
    )
    .await;
    let mut events = EventReader::open(&addr, &id).await;
    let first = events.next().await;
    assert_eq!(first["type"], "snapshot");
    assert_eq!(first["view"]["iteration"], 3);
}
