//! One OS thread per session owns the solver. Handlers talk to it through a
//! command channel and read its output from a broadcast channel.

use crate::message::{EditOutcome, ServerMessage};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, TryRecvError};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};
use timetable_core::search::HeuristicWeights;
use timetable_core::session::{Edit, Session, SessionEvent, ViewKind};
use tokio::sync::{broadcast, oneshot};

pub(crate) enum Command {
    Start(oneshot::Sender<ServerMessage>),
    Pause(oneshot::Sender<ServerMessage>),
    Step(u64, oneshot::Sender<ServerMessage>),
    Edit(Edit, oneshot::Sender<ServerMessage>),
    Snapshot(ViewKind, oneshot::Sender<ServerMessage>),
}

/// Shared view of a session held by the HTTP layer.
pub struct SessionHandle {
    pub id: String,
    pub(crate) commands: Mutex<mpsc::Sender<Command>>,
    /// The only mutable datum shared with the worker.
    pub(crate) running: Arc<AtomicBool>,
    pub(crate) events: broadcast::Sender<Arc<ServerMessage>>,
    pub(crate) latest: Arc<Mutex<Arc<ServerMessage>>>,
    pub(crate) last_seen: Mutex<Instant>,
    pub(crate) streams: Arc<AtomicUsize>,
}

impl SessionHandle {
    pub(crate) fn touch(&self) {
        *self.last_seen.lock().unwrap() = Instant::now();
    }

    pub(crate) fn idle_for(&self) -> Duration {
        self.last_seen.lock().unwrap().elapsed()
    }

    pub(crate) fn send(&self, cmd: Command) -> bool {
        self.commands.lock().unwrap().send(cmd).is_ok()
    }

    pub fn is_running(&self) -> bool {
        self.running.load(Ordering::SeqCst)
    }

    /// Most recent snapshot pushed on the stream.
    pub fn latest_snapshot(&self) -> Arc<ServerMessage> {
        self.latest.lock().unwrap().clone()
    }
}

struct Worker {
    id: String,
    session: Session,
    running: Arc<AtomicBool>,
    events: broadcast::Sender<Arc<ServerMessage>>,
    latest: Arc<Mutex<Arc<ServerMessage>>>,
    seq: AtomicU64,
    interval: Duration,
    last_emit: Option<Instant>,
    last_emitted_iteration: Option<u64>,
}

impl Worker {
    fn next_seq(&self) -> u64 {
        self.seq.fetch_add(1, Ordering::SeqCst) + 1
    }

    fn publish(&self, msg: ServerMessage) -> Arc<ServerMessage> {
        let msg = Arc::new(msg);
        // No subscribers is fine.
        let _ = self.events.send(msg.clone());
        msg
    }

    fn snapshot_message(&self, kind: ViewKind) -> ServerMessage {
        ServerMessage::Snapshot {
            seq: self.next_seq(),
            session: self.id.clone(),
            running: self.running.load(Ordering::SeqCst),
            view: self.session.snapshot(kind),
        }
    }

    /// Pushes the latest view if the stream has not seen this iteration yet.
    fn flush_snapshot(&mut self) {
        let iteration = self.session.state().iteration();
        if self.last_emitted_iteration.is_some_and(|i| i >= iteration) {
            return;
        }
        let msg = self.publish(self.snapshot_message(ViewKind::Latest));
        *self.latest.lock().unwrap() = msg;
        self.last_emit = Some(Instant::now());
        self.last_emitted_iteration = Some(iteration);
    }

    fn maybe_snapshot(&mut self) {
        if self.last_emit.is_none_or(|t| t.elapsed() >= self.interval) {
            self.flush_snapshot();
        }
    }

    fn iterate_once(&mut self) -> bool {
        let stop = AtomicBool::new(false);
        let mut reports = Vec::new();
        let ran = self.session.run(Some(1), &stop, |e, _| {
            if let SessionEvent::Iteration(r) = e {
                reports.push(r);
            }
        });
        for report in reports {
            let seq = self.next_seq();
            self.publish(ServerMessage::IterationReport {
                seq,
                session: self.id.clone(),
                report,
            });
        }
        ran == 1
    }

    fn handle(&mut self, cmd: Command) {
        match cmd {
            Command::Start(reply) => {
                self.running.store(true, Ordering::SeqCst);
                let _ = reply.send(self.snapshot_message(ViewKind::Latest));
            }
            Command::Pause(reply) => {
                self.running.store(false, Ordering::SeqCst);
                self.flush_snapshot();
                let _ = reply.send(self.snapshot_message(ViewKind::Latest));
            }
            Command::Step(n, reply) => {
                self.running.store(false, Ordering::SeqCst);
                for _ in 0..n {
                    if !self.iterate_once() {
                        break;
                    }
                    self.maybe_snapshot();
                }
                self.flush_snapshot();
                let _ = reply.send(self.snapshot_message(ViewKind::Latest));
            }
            Command::Edit(edit, reply) => {
                let result = EditOutcome::from(self.session.apply(edit));
                let msg = ServerMessage::EditResult {
                    seq: self.next_seq(),
                    session: self.id.clone(),
                    result,
                    view: self.session.snapshot(ViewKind::Latest),
                };
                let msg = self.publish(msg);
                let _ = reply.send((*msg).clone());
            }
            Command::Snapshot(kind, reply) => {
                let _ = reply.send(self.snapshot_message(kind));
            }
        }
    }

    fn run(mut self, commands: mpsc::Receiver<Command>) {
        loop {
            let active = self.running.load(Ordering::SeqCst);
            let next = if active {
                match commands.try_recv() {
                    Ok(c) => Some(c),
                    Err(TryRecvError::Empty) => None,
                    Err(TryRecvError::Disconnected) => return,
                }
            } else {
                match commands.recv_timeout(Duration::from_millis(250)) {
                    Ok(c) => Some(c),
                    Err(RecvTimeoutError::Timeout) => continue,
                    Err(RecvTimeoutError::Disconnected) => return,
                }
            };
            if let Some(cmd) = next {
                self.handle(cmd);
                continue;
            }
            if self.iterate_once() {
                self.maybe_snapshot();
            } else {
                self.running.store(false, Ordering::SeqCst);
                self.flush_snapshot();
            }
        }
    }
}

/// Starts the worker thread and returns its handle.
pub(crate) fn spawn(id: String, session: Session, interval: Duration) -> Arc<SessionHandle> {
    let (tx, rx) = mpsc::channel();
    let (events, _) = broadcast::channel(4096);
    let running = Arc::new(AtomicBool::new(false));
    let placeholder = Arc::new(ServerMessage::error("no snapshot yet"));
    let latest = Arc::new(Mutex::new(placeholder));
    let mut worker = Worker {
        id: id.clone(),
        session,
        running: running.clone(),
        events: events.clone(),
        latest: latest.clone(),
        seq: AtomicU64::new(0),
        interval,
        last_emit: None,
        last_emitted_iteration: None,
    };
    worker.flush_snapshot();
    std::thread::Builder::new()
        .name(format!("session-{id}"))
        .spawn(move || worker.run(rx))
        .expect("spawn session worker");
    Arc::new(SessionHandle {
        id,
        commands: Mutex::new(tx),
        running,
        events,
        latest,
        last_seen: Mutex::new(Instant::now()),
        streams: Arc::new(AtomicUsize::new(0)),
    })
}

pub(crate) fn weights_edit(weights: HeuristicWeights) -> Edit {
    Edit::SetWeights { weights }
}
