use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::state::{SessionEvent, SessionState, StateError};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("line {line}: {source}")]
    State { line: usize, source: StateError },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ReplayError {
    /// 1-based line of the offending event, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            Self::Corrupt { line, .. } | Self::State { line, .. } => Some(*line),
            Self::Io(_) => None,
        }
    }
}

/// Append-only JSON-lines file, one event per line, flushed per event.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, event: &SessionEvent) -> io::Result<()> {
        let mut line = serde_json::to_string(event).map_err(io::Error::other)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()
    }
}

/// Parses every line into an event. Blank lines are skipped.
pub fn read_events(reader: impl Read) -> Result<Vec<SessionEvent>, ReplayError> {
    let mut events = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| ReplayError::Corrupt {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| ReplayError::Corrupt {
            line: i + 1,
            message: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}

/// Rebuilds a session from a log. An empty log gives a fresh session.
pub fn replay_reader(reader: impl Read) -> Result<SessionState, ReplayError> {
    let mut state = SessionState::fresh();
    for (i, raw) in BufReader::new(reader).lines().enumerate() {
        let line = i + 1;
        let raw = raw.map_err(|e| ReplayError::Corrupt {
            line,
            message: e.to_string(),
        })?;
        if raw.trim().is_empty() {
            continue;
        }
        let event: SessionEvent = serde_json::from_str(&raw).map_err(|e| ReplayError::Corrupt {
            line,
            message: e.to_string(),
        })?;
        state
            .apply(event)
            .map_err(|source| ReplayError::State { line, source })?;
    }
    Ok(state)
}

pub fn replay(path: impl AsRef<Path>) -> Result<SessionState, ReplayError> {
    replay_reader(File::open(path)?)
}
