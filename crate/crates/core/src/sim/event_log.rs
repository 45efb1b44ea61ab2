use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

/// One JSON-lines record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRecord {
    pub tick: u64,
    pub cell: String,
    pub kind: String,
    pub detail: Value,
}

/// Records ordered by (tick, cell, arrival within the tick).
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    records: Vec<LogRecord>,
    current: Vec<LogRecord>,
}

impl EventLog {
    pub fn push(&mut self, tick: u64, cell: &str, kind: &str, detail: Value) {
        self.current.push(LogRecord {
            tick,
            cell: cell.to_string(),
            kind: kind.to_string(),
            detail,
        });
    }

    /// Closes the current tick; the sort is stable so arrival order survives.
    pub fn flush(&mut self) {
        let mut batch = std::mem::take(&mut self.current);
        if let Some(tick) = batch.first().map(|r| r.tick) {
            // Reopen records already flushed for the same tick.
            let keep = self.records.partition_point(|r| r.tick < tick);
            let mut earlier = self.records.split_off(keep);
            earlier.append(&mut batch);
            batch = earlier;
        }
        batch.sort_by(|a, b| (a.tick, &a.cell).cmp(&(b.tick, &b.cell)));
        self.records.append(&mut batch);
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn count(&self, kind: &str) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_jsonl().as_bytes())?;
        f.flush()
    }
}
