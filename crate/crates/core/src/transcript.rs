//! Line-delimited JSON transcripts: a header, one line per move, the
//! certificates, and a closing summary. Lines are flushed as written, so an
//! aborted run leaves a readable prefix.

use std::fs::File;
use std::io::{BufRead, BufReader, LineWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Mode, RunConfig};
use crate::engine::{Certificate, GameTranscript, Move};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub won: bool,
    pub mode: Mode,
    /// Guaranteed margin of the schedule, "p/q".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_theory: Option<String>,
    /// min_k d(M_k x, Z_k) over the final ball and the certified indices; "inf" if none.
    pub realized_margin: String,
    pub k_max: Vec<usize>,
    pub epochs_completed: usize,
    pub rounds: usize,
    pub certificates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bad_margin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bad_margin_q: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
    /// Reported on stderr only; files stay byte-identical across replays.
    #[serde(skip)]
    pub wall_time: Option<std::time::Duration>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Record {
    Header { version: u32, seed: u64, config: RunConfig },
    Move(Move),
    Certificate(Certificate),
    Summary(RunSummary),
}

pub struct TranscriptWriter {
    out: LineWriter<File>,
}

impl TranscriptWriter {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        Ok(TranscriptWriter { out: LineWriter::new(File::create(path)?) })
    }

    pub fn record(&mut self, r: &Record) -> std::io::Result<()> {
        let line = serde_json::to_string(r).map_err(std::io::Error::other)?;
        writeln!(self.out, "{line}")
    }
}

pub fn read_records(path: &Path) -> Result<Vec<Record>, String> {
    let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    Ok(out)
}

/// The parts of a transcript file.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub seed: u64,
    pub config: RunConfig,
    pub moves: Vec<Move>,
    pub certificates: Vec<Certificate>,
    pub summary: Option<RunSummary>,
}

impl Loaded {
    pub fn transcript(&self) -> Option<GameTranscript> {
        Some(GameTranscript {
            final_enclosure: self.moves.last()?.ball.clone(),
            moves: self.moves.clone(),
            certificates: self.certificates.clone(),
        })
    }
}

pub fn load(records: Vec<Record>) -> Result<Loaded, String> {
    let mut it = records.into_iter();
    let Some(Record::Header { version, seed, config }) = it.next() else {
        return Err("transcript does not start with a header".into());
    };
    if version != FORMAT_VERSION {
        return Err(format!("unsupported transcript version {version}"));
    }
    let mut l = Loaded { seed, config, moves: Vec::new(), certificates: Vec::new(), summary: None };
    for r in it {
        match r {
            Record::Move(m) => l.moves.push(m),
            Record::Certificate(c) => l.certificates.push(c),
            Record::Summary(s) => l.summary = Some(s),
            Record::Header { .. } => return Err("second header".into()),
        }
    }
    Ok(l)
}
