//! Line-delimited append-only event log.
//!
//! Every state change is one JSON line. Lines are never rewritten; the only
//! repair done at open time is dropping a torn final line (no trailing
//! newline and not parseable), which is what an interrupted write leaves.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use facetkit_core::stats::Criterion;
use serde::{Deserialize, Serialize};

use crate::model::{Choice, QualificationStatus};
use crate::AnnotationError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Qualification {
        annotator_id: String,
        status: QualificationStatus,
        score: f64,
        at: DateTime<Utc>,
    },
    Assignment {
        annotator_id: String,
        criterion: Criterion,
        task_id: String,
    },
    Judgment {
        task_id: String,
        annotator_id: String,
        criterion: Criterion,
        choice: Choice,
        received_at: DateTime<Utc>,
    },
}

pub struct EventLog {
    path: PathBuf,
    file: File,
    lines: usize,
}

impl EventLog {
    /// Opens (creating if needed) the log at `path` and returns it with the
    /// events already recorded.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<Event>), AnnotationError> {
        let path = path.as_ref().to_path_buf();
        let io = |e: std::io::Error| AnnotationError::Log(format!("{}: {e}", path.display()));
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io)?;

        let mut text = String::new();
        file.read_to_string(&mut text).map_err(io)?;
        let mut events = Vec::new();
        let mut good_len = 0usize;
        let mut reader = BufReader::new(text.as_bytes());
        let mut line = String::new();
        let mut line_no = 0;
        let mut missing_newline = false;
        loop {
            line.clear();
            let n = reader.read_line(&mut line).map_err(io)?;
            if n == 0 {
                break;
            }
            line_no += 1;
            let terminated = line.ends_with('\n');
            match serde_json::from_str::<Event>(line.trim_end()) {
                Ok(e) => {
                    events.push(e);
                    good_len += n;
                    if !terminated {
                        missing_newline = true;
                    }
                }
                Err(_) if !terminated => {
                    tracing::warn!(line = line_no, "dropping torn final log line");
                    break;
                }
                Err(e) => {
                    return Err(AnnotationError::Log(format!(
                        "{}: line {line_no}: {e}",
                        path.display()
                    )))
                }
            }
        }
        if good_len < text.len() {
            file.set_len(good_len as u64).map_err(io)?;
            file.seek(SeekFrom::End(0)).map_err(io)?;
        }
        if missing_newline {
            file.write_all(b"\n").map_err(io)?;
        }
        let lines = events.len();
        Ok((Self { path, file, lines }, events))
    }

    /// Appends one event and flushes it to disk before returning.
    pub fn append(&mut self, event: &Event) -> Result<(), AnnotationError> {
        let mut line = serde_json::to_string(event).expect("event serializes");
        line.push('\n');
        let io = |e: std::io::Error| AnnotationError::Log(format!("{}: {e}", self.path.display()));
        self.file.write_all(line.as_bytes()).map_err(io)?;
        self.file.sync_data().map_err(io)?;
        self.lines += 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lines
    }

    pub fn is_empty(&self) -> bool {
        self.lines == 0
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assignment(task: &str) -> Event {
        Event::Assignment {
            annotator_id: "w1".into(),
            criterion: Criterion::Quality,
            task_id: task.into(),
        }
    }

    #[test]
    fn append_then_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let (mut log, events) = EventLog::open(&path).unwrap();
        assert!(events.is_empty());
        log.append(&assignment("a")).unwrap();
        log.append(&assignment("b")).unwrap();
        drop(log);
        let (log, events) = EventLog::open(&path).unwrap();
        assert_eq!(events, vec![assignment("a"), assignment("b")]);
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let (mut log, _) = EventLog::open(&path).unwrap();
        log.append(&assignment("a")).unwrap();
        drop(log);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"type\":\"assign").unwrap();
        drop(f);

        let (mut log, events) = EventLog::open(&path).unwrap();
        assert_eq!(events.len(), 1);
        log.append(&assignment("b")).unwrap();
        drop(log);
        let (_, events) = EventLog::open(&path).unwrap();
        assert_eq!(events, vec![assignment("a"), assignment("b")]);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        std::fs::write(&path, "not json\n{}\n").unwrap();
        assert!(matches!(EventLog::open(&path), Err(AnnotationError::Log(_))));
    }
}
