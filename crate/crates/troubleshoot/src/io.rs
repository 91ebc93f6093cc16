//! JSONL readers and writers for corpora and exports.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use troubleshoot_core::domain::{FaultAnalysisRecord, TicketRecord};
use troubleshoot_core::fault_analysis::TroubleshootSession;
use troubleshoot_core::{ChatMessage, Corpus, LabelSet};

use crate::error::{AppError, Result};

pub const TICKETS_FILE: &str = "tickets.jsonl";
pub const FAULTS_FILE: &str = "faults.jsonl";

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| AppError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| AppError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| AppError::Record {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn jsonl_string<T: Serialize>(records: &[T]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("records serialize"));
        s.push('\n');
    }
    s
}

/// Writes records, one per `\n`-terminated line. Returns the record count.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<usize> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| AppError::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| AppError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(jsonl_string(records).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| AppError::io(path, e))?;
    Ok(records.len())
}

/// A corpus directory holds `tickets.jsonl` and `faults.jsonl`.
pub fn load_corpus(dir: &Path, labels: &LabelSet) -> Result<Corpus> {
    let tickets: Vec<TicketRecord> = read_jsonl(&dir.join(TICKETS_FILE))?;
    let faults: Vec<FaultAnalysisRecord> = read_jsonl(&dir.join(FAULTS_FILE))?;
    Ok(Corpus::from_records(&tickets, &faults, labels)?)
}

pub fn save_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    let (tickets, faults) = corpus.to_records();
    write_jsonl(&dir.join(TICKETS_FILE), &tickets)?;
    write_jsonl(&dir.join(FAULTS_FILE), &faults)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub session_id: String,
    pub ticket_id: String,
    pub demonstration_ids: Vec<(String, String)>,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TranscriptLine {
    Header { header: TranscriptHeader },
    Message(ChatMessage),
}

/// Header line followed by one line per message.
pub fn transcript_lines(session: &TroubleshootSession) -> Vec<TranscriptLine> {
    let header = TranscriptHeader {
        session_id: session.session_id.clone(),
        ticket_id: session.ticket.id.clone(),
        demonstration_ids: session
            .demonstrations
            .iter()
            .map(|d| (d.ticket.id.clone(), d.fault_analysis.id.clone()))
            .collect(),
        created_at: session.created_at,
    };
    std::iter::once(TranscriptLine::Header { header })
        .chain(session.messages.iter().cloned().map(TranscriptLine::Message))
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| AppError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| AppError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

pub fn ensure_dir(path: &Path) -> Result<PathBuf> {
    fs::create_dir_all(path).map_err(|e| AppError::io(path, e))?;
    Ok(path.to_path_buf())
}
