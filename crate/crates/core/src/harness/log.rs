//! JSON-lines run logs: one `meta` line, one `step` line per training
//! step, one `epoch` line per epoch, and a closing `final` line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{EpochLog, FinalSummary, RunMeta, RunRecord, StepLog};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LogLine {
    Meta(RunMeta),
    Step(StepLog),
    Epoch(EpochLog),
    Final(FinalSummary),
}

pub fn write_run_log<W: Write>(record: &RunRecord, mut out: W) -> Result<()> {
    let mut line = |l: LogLine| -> Result<()> {
        serde_json::to_writer(&mut out, &l)?;
        out.write_all(b"\n")?;
        Ok(())
    };
    line(LogLine::Meta(record.meta.clone()))?;
    let mut steps = record.steps.iter().peekable();
    for epoch in &record.epochs {
        while let Some(s) = steps.next_if(|s| s.epoch <= epoch.epoch) {
            line(LogLine::Step(s.clone()))?;
        }
        line(LogLine::Epoch(epoch.clone()))?;
    }
    for s in steps {
        line(LogLine::Step(s.clone()))?;
    }
    line(LogLine::Final(record.summary.clone()))?;
    out.flush()?;
    Ok(())
}

/// Inverse of [`write_run_log`]. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn read_run_log<R: BufRead>(input: R) -> Result<RunRecord> {
    let mut meta = None;
    let mut steps = Vec::new();
    let mut epochs = Vec::new();
    let mut summary = None;
    let mut last_line = 0;
    for (i, text) in input.lines().enumerate() {
        let n = i + 1;
        last_line = n;
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::RunLog { line: n, message };
        if summary.is_some() {
            return Err(err("content after the final line".into()));
        }
        let parsed: LogLine = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        match parsed {
            LogLine::Meta(m) if meta.is_none() => meta = Some(m),
            LogLine::Meta(_) => return Err(err("duplicate meta line".into())),
            _ if meta.is_none() => return Err(err("first line must be meta".into())),
            LogLine::Step(s) => steps.push(s),
            LogLine::Epoch(e) => epochs.push(e),
            LogLine::Final(f) => summary = Some(f),
        }
    }
    let meta = meta.ok_or(Error::RunLog {
        line: last_line,
        message: "missing meta line".into(),
    })?;
    let summary = summary.ok_or(Error::RunLog {
        line: last_line,
        message: "missing final line".into(),
    })?;
    Ok(RunRecord {
        meta,
        steps,
        epochs,
        summary,
    })
}
