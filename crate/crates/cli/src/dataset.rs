//! Line-by-line JSONL ingestion.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use anyhow::anyhow;
use pedants::QAExample;
use serde::Deserialize;

use crate::error::{Classify, CliError, CliResult};

/// A dataset line: a plain example, optionally carrying verdicts already
/// produced by external judges.
#[derive(Debug, Clone, Deserialize)]
pub struct InputRecord {
    #[serde(flatten)]
    pub example: QAExample,
    #[serde(default)]
    pub metric_verdicts: BTreeMap<String, bool>,
}

fn parse(line: &str) -> anyhow::Result<Option<InputRecord>> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let rec: InputRecord = serde_json::from_str(trimmed)?;
    if rec.example.references.is_empty() {
        return Err(pedants::PedantsError::EmptyReferences.into());
    }
    Ok(Some(rec))
}

/// Streams records from a JSONL file, one line in memory at a time.
pub struct Records {
    lines: io::Lines<Box<dyn BufRead + Send>>,
    origin: String,
    line_no: usize,
    skip_bad: bool,
    pub skipped: usize,
}

impl Records {
    pub fn open(path: &Path, skip_bad: bool) -> CliResult<Self> {
        let file = File::open(path).invalid(|| format!("cannot open {}", path.display()))?;
        Ok(Self::from_reader(
            Box::new(BufReader::new(file)),
            path.display().to_string(),
            skip_bad,
        ))
    }

    pub fn from_reader(reader: Box<dyn BufRead + Send>, origin: String, skip_bad: bool) -> Self {
        Records {
            lines: reader.lines(),
            origin,
            line_no: 0,
            skip_bad,
            skipped: 0,
        }
    }
}

impl Iterator for Records {
    /// `(line number, record)`
    type Item = CliResult<(usize, InputRecord)>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => {
                    return Some(Err(CliError::runtime(
                        anyhow!(e).context(format!("reading {}", self.origin)),
                    )))
                }
            };
            self.line_no += 1;
            match parse(&line) {
                Ok(Some(rec)) => return Some(Ok((self.line_no, rec))),
                Ok(None) => {}
                Err(e) if self.skip_bad => {
                    eprintln!("warning: {}:{}: skipped: {e:#}", self.origin, self.line_no);
                    self.skipped += 1;
                }
                Err(e) => {
                    return Some(Err(CliError::validation(e.context(format!(
                        "{}:{}: malformed record",
                        self.origin, self.line_no
                    )))))
                }
            }
        }
    }
}

/// Reads a whole dataset; used where the full corpus is needed anyway.
pub fn read_all(path: &Path, skip_bad: bool) -> CliResult<Vec<InputRecord>> {
    Records::open(path, skip_bad)?
        .map(|r| r.map(|(_, rec)| rec))
        .collect()
}
