//! CSV files for simulation records and summary tables.
//!
//! Every file starts with a `#schema=<name>/<version>` line followed by a
//! header row. Column order follows the field order of the row type.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::CycleRecord;
use crate::metrics::{ImprovementRow, SummaryRow};

pub const RECORDS_SCHEMA: &str = "records/v1";
pub const SUMMARY_SCHEMA: &str = "summary/v1";
pub const IMPROVEMENTS_SCHEMA: &str = "improvements/v1";

/// Streaming CSV writer for rows of one schema.
pub struct TableWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TableWriter<W> {
    pub fn new(mut out: W, schema: &str) -> Result<Self> {
        writeln!(out, "#schema={schema}").map_err(|e| Error::io("<stream>", e))?;
        Ok(TableWriter {
            inner: csv::Writer::from_writer(out),
        })
    }

    pub fn write<T: Serialize>(&mut self, row: &T) -> Result<()> {
        self.inner.serialize(row)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush().map_err(|e| Error::io("<stream>", e))?;
        self.inner
            .into_inner()
            .map_err(|e| Error::io("<stream>", std::io::Error::other(e.to_string())))
    }
}

pub fn write_table<W: Write, T: Serialize>(out: W, schema: &str, rows: &[T]) -> Result<W> {
    let mut w = TableWriter::new(out, schema)?;
    for r in rows {
        w.write(r)?;
    }
    w.finish()
}

pub fn read_table<R: Read, T: DeserializeOwned>(input: R, schema: &str) -> Result<Vec<T>> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io("<stream>", e))?;
    let found = first.trim_end().strip_prefix("#schema=").unwrap_or("");
    if found != schema {
        return Err(Error::Parse(format!("expected schema `{schema}`, found `{}`", first.trim_end())));
    }
    let mut csv_reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let mut out = Vec::new();
    for row in csv_reader.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })
}

pub fn write_records_file(path: &Path, records: &[CycleRecord]) -> Result<()> {
    let mut w = write_table(create(path)?, RECORDS_SCHEMA, records)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records_file(path: &Path) -> Result<Vec<CycleRecord>> {
    read_table(open(path)?, RECORDS_SCHEMA)
}

pub fn write_summary_file(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = write_table(create(path)?, SUMMARY_SCHEMA, rows)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary_file(path: &Path) -> Result<Vec<SummaryRow>> {
    read_table(open(path)?, SUMMARY_SCHEMA)
}

pub fn write_improvements_file(path: &Path, rows: &[ImprovementRow]) -> Result<()> {
    let mut w = write_table(create(path)?, IMPROVEMENTS_SCHEMA, rows)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_improvements_file(path: &Path) -> Result<Vec<ImprovementRow>> {
    read_table(open(path)?, IMPROVEMENTS_SCHEMA)
}
