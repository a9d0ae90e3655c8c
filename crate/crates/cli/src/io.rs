//! CSV ingestion, groups configuration, and output helpers.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use vecdep::{Group, GroupedData, Matrix};

use crate::DataError;

/// Numeric table read from a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub values: Matrix,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupEntry {
    pub name: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupsConfig {
    pub groups: Vec<GroupEntry>,
}

fn data_err(msg: impl Into<String>) -> anyhow::Error {
    DataError(msg.into()).into()
}

/// Parse CSV text with a header row and a fully numeric body.
pub fn parse_csv(text: &str) -> anyhow::Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| data_err(format!("cannot read CSV header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(data_err("CSV header row is empty"));
    }
    let d = headers.len();
    let mut values = Vec::new();
    let mut n = 0usize;
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| data_err(format!("row {row}: {e}")))?;
        if record.len() > d {
            return Err(data_err(format!(
                "row {row}: {} cells but {d} header columns",
                record.len()
            )));
        }
        for (c, name) in headers.iter().enumerate() {
            let cell = record.get(c).unwrap_or("");
            if cell.is_empty() {
                return Err(data_err(format!(
                    "row {row}, column {} (`{name}`): missing value",
                    c + 1
                )));
            }
            let v: f64 = cell.parse().map_err(|_| {
                data_err(format!(
                    "row {row}, column {} (`{name}`): cannot parse {cell:?} as a number",
                    c + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(data_err(format!(
                    "row {row}, column {} (`{name}`): non-finite value {cell:?}",
                    c + 1
                )));
            }
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(data_err("CSV has no data rows"));
    }
    Ok(Table {
        headers,
        values: Matrix::new(values, n, d)?,
    })
}

pub fn ingest_csv(path: &Path) -> anyhow::Result<Table> {
    let text = fs::read_to_string(path)
        .map_err(|e| data_err(format!("cannot read {}: {e}", path.display())))?;
    parse_csv(&text).with_context(|| format!("in {}", path.display()))
}

pub fn read_groups(path: &Path) -> anyhow::Result<GroupsConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| data_err(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        data_err(format!(
            "invalid groups configuration {}: {e}",
            path.display()
        ))
    })
}

/// Resolve the column names of `config` against `table`.
pub fn group_table(table: Table, config: &GroupsConfig) -> anyhow::Result<GroupedData> {
    let index: HashMap<&str, usize> = table
        .headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();
    let mut names = HashSet::new();
    let mut used = HashSet::new();
    let mut groups = Vec::with_capacity(config.groups.len());
    for g in &config.groups {
        if !names.insert(g.name.as_str()) {
            return Err(data_err(format!("duplicate group name `{}`", g.name)));
        }
        let mut cols = Vec::with_capacity(g.columns.len());
        for c in &g.columns {
            let i = *index.get(c.as_str()).ok_or_else(|| {
                data_err(format!(
                    "group `{}`: column `{c}` not in CSV header",
                    g.name
                ))
            })?;
            if !used.insert(i) {
                return Err(data_err(format!(
                    "column `{c}` is assigned to more than one group"
                )));
            }
            cols.push(i);
        }
        groups.push(Group::new(g.name.clone(), cols));
    }
    Ok(GroupedData::new(table.values, groups)?)
}

pub fn load_grouped(input: &Path, groups: &Path) -> anyhow::Result<GroupedData> {
    let table = ingest_csv(input)?;
    let config = read_groups(groups)?;
    group_table(table, &config)
}

/// CSV writer over an in-memory buffer.
pub fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

pub fn finish_csv(w: csv::Writer<Vec<u8>>) -> anyhow::Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| anyhow::anyhow!("CSV writer: {e}"))
}

/// Shortest decimal that round-trips to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn to_json(value: &impl Serialize) -> anyhow::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// Write `bytes` to `path`, or to stdout when `path` is `None`.
pub fn emit(bytes: &[u8], path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(bytes).and_then(|()| out.flush()) {
                // A closed downstream pipe (e.g. `| head`) is not an error.
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}
