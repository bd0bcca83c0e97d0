//! Per-epoch run traces and their CSV form.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 6] = ["epoch", "wall_seconds", "objective", "nnz", "sparsity_pct", "grad_evals"];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    /// Cumulative time spent stepping (excludes loading and tracing).
    pub wall_seconds: f64,
    pub objective: f64,
    pub nnz: usize,
    /// `100 · nnz / p`
    pub sparsity_pct: f64,
    pub grad_evals: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceMeta {
    pub optimizer: String,
    pub seed: u64,
    pub flags: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub meta: TraceMeta,
    rows: Vec<TraceRow>,
    aborted: Option<String>,
}

impl RunTrace {
    pub fn new(meta: TraceMeta) -> Self {
        Self { meta, rows: Vec::new(), aborted: None }
    }

    /// Rebuilds a trace from rows, e.g. read back from CSV.
    pub fn from_rows(meta: TraceMeta, rows: Vec<TraceRow>) -> Result<Self> {
        let mut trace = Self::new(meta);
        for row in rows {
            trace.try_push(row)?;
        }
        Ok(trace)
    }

    /// Appends a row; panics if it breaks the epoch/grad_evals ordering.
    pub fn push(&mut self, row: TraceRow) {
        self.try_push(row).expect("trace rows out of order");
    }

    fn try_push(&mut self, row: TraceRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.epoch <= last.epoch || row.grad_evals < last.grad_evals {
                return Err(Error::InvalidParameter(format!(
                    "trace row for epoch {} does not follow epoch {}",
                    row.epoch, last.epoch
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn mark_aborted(&mut self, reason: String) {
        self.aborted = Some(reason);
    }

    pub fn aborted(&self) -> Option<&str> {
        self.aborted.as_deref()
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Objective column.
    pub fn objectives(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.objective).collect()
    }

    /// First epoch whose objective is at most `threshold`.
    pub fn epochs_to(&self, threshold: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.objective <= threshold).map(|r| r.epoch)
    }
}

/// Receives trace rows as they are produced.
pub trait TraceSink {
    fn record(&mut self, row: &TraceRow) -> Result<()>;
}

impl TraceSink for Vec<TraceRow> {
    fn record(&mut self, row: &TraceRow) -> Result<()> {
        self.push(row.clone());
        Ok(())
    }
}

/// Discards rows.
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _row: &TraceRow) -> Result<()> {
        Ok(())
    }
}

fn format_row(row: &TraceRow) -> [String; 6] {
    // `Display` for f64 never uses exponent notation and round-trips.
    [
        row.epoch.to_string(),
        format!("{:.6}", row.wall_seconds),
        row.objective.to_string(),
        row.nnz.to_string(),
        row.sparsity_pct.to_string(),
        row.grad_evals.to_string(),
    ]
}

/// Writes the header on creation and flushes after every row, so a trace
/// stays parseable if the process dies mid-run.
pub struct CsvTraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl CsvTraceWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> CsvTraceWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        inner.write_record(CSV_HEADER)?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

impl<W: Write> TraceSink for CsvTraceWriter<W> {
    fn record(&mut self, row: &TraceRow) -> Result<()> {
        self.inner.write_record(format_row(row))?;
        self.inner.flush()?;
        Ok(())
    }
}

/// Renders a whole trace as CSV text.
pub fn to_csv_string(rows: &[TraceRow]) -> Result<String> {
    let mut w = CsvTraceWriter::new(Vec::new())?;
    for row in rows {
        w.record(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?).expect("CSV output is ASCII"))
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let raw = record.get(i).ok_or_else(|| Error::Parse { line, message: format!("missing column {}", CSV_HEADER[i]) })?;
    raw.trim()
        .parse()
        .map_err(|_| Error::Parse { line, message: format!("bad {} value `{raw}`", CSV_HEADER[i]) })
}

/// Parses trace CSV. A trailing partial line (from an interrupted write) is
/// an error only if it is not the last line.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse { line: 1, message: "unexpected trace header".into() });
    }
    let records = reader.records().collect::<std::result::Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(records.len());
    let last = records.len().saturating_sub(1);
    for (k, rec) in records.iter().enumerate() {
        let line = k + 2;
        if rec.len() != CSV_HEADER.len() {
            if k == last {
                break;
            }
            return Err(Error::Parse { line, message: format!("expected 6 columns, got {}", rec.len()) });
        }
        rows.push(TraceRow {
            epoch: field(rec, 0, line)?,
            wall_seconds: field(rec, 1, line)?,
            objective: field(rec, 2, line)?,
            nnz: field(rec, 3, line)?,
            sparsity_pct: field(rec, 4, line)?,
            grad_evals: field(rec, 5, line)?,
        });
    }
    Ok(rows)
}

pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Vec<TraceRow>> {
    read_csv(File::open(path)?)
}

/// CSV text with the `wall_seconds` column removed; the part of a trace
/// that must be identical across repeated runs.
pub fn csv_body_without_wall(csv: &str) -> String {
    csv.lines()
        .skip(1)
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            cols.iter().enumerate().filter(|(i, _)| *i != 1).map(|(_, c)| *c).collect::<Vec<_>>().join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}
