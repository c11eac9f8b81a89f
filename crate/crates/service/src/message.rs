//! Wire envelopes. Every body is JSON with a `type` tag.

use serde::{Deserialize, Serialize};
use timetable_core::io::ProblemDocument;
use timetable_core::search::{HeuristicWeights, IterationReport};
use timetable_core::session::{Edit, EditError, RepairReport, SnapshotView, ViewKind};

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Create {
        problem: ProblemDocument,
        #[serde(default)]
        weights: Option<HeuristicWeights>,
        #[serde(default)]
        seed: u64,
    },
    Start,
    Pause,
    Step {
        n: u64,
    },
    Edit {
        edit: Edit,
    },
    SetWeights {
        weights: HeuristicWeights,
    },
    GetSnapshot {
        #[serde(default)]
        view: ViewKind,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EditOutcome {
    Applied { report: RepairReport },
    Rejected { error: EditError },
}

impl From<Result<RepairReport, EditError>> for EditOutcome {
    fn from(r: Result<RepairReport, EditError>) -> Self {
        match r {
            Ok(report) => EditOutcome::Applied { report },
            Err(error) => EditOutcome::Rejected { error },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot {
        seq: u64,
        session: String,
        running: bool,
        view: SnapshotView,
    },
    IterationReport {
        seq: u64,
        session: String,
        report: IterationReport,
    },
    EditResult {
        seq: u64,
        session: String,
        result: EditOutcome,
        /// Latest view right after the edit was applied or refused.
        view: SnapshotView,
    },
    Error {
        message: String,
    },
}

impl ServerMessage {
    pub fn error(message: impl Into<String>) -> Self {
        ServerMessage::Error {
            message: message.into(),
        }
    }

    /// SSE event name.
    pub fn kind(&self) -> &'static str {
        match self {
            ServerMessage::Snapshot { .. } => "snapshot",
            ServerMessage::IterationReport { .. } => "iteration_report",
            ServerMessage::EditResult { .. } => "edit_result",
            ServerMessage::Error { .. } => "error",
        }
    }

    pub fn snapshot_iteration(&self) -> Option<u64> {
        match self {
            ServerMessage::Snapshot { view, .. } => Some(view.iteration),
            _ => None,
        }
    }
}
