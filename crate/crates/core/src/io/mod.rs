//! File formats: edge-list, array and crosswalk CSV, matrix CSV, key lists,
//! DOT, and aligned text tables.
//!
//! All CSV dialects are UTF-8 with a mandatory header, `\n` line endings on
//! output, and RFC-4180 quoting for cells containing commas, quotes or
//! newlines. Writers emit canonical (sorted) rows so that reading and then
//! writing a canonical file reproduces it byte for byte.

mod dot;
mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Read, Write};

use serde::Serialize;

use crate::algebra::MatrixEncoding;
use crate::key::Key;
use crate::model::{
    build_crossmap, Crossmap, Edge, EdgeListDraft, Finding, FindingCode, MassValue, Severity,
    SharedMassArray, Subject, ValidationReport,
};
use crate::rational::{parse_rational, Rational};

pub use dot::export_dot;
pub use table::TextTable;

pub const EDGE_LIST_HEADER: [&str; 3] = ["from", "to", "weight"];
pub const ARRAY_HEADER: [&str; 2] = ["key", "value"];
pub const CROSSWALK_HEADER: [&str; 2] = ["from", "to"];
/// The only accepted missing-value marker in array files.
pub const MISSING_MARKER: &str = "NA";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: expected header `{expected}`, found `{found}`")]
    Header {
        line: u64,
        expected: String,
        found: String,
    },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FormatError {
    fn row(line: u64, message: impl Into<String>) -> Self {
        FormatError::Row {
            line,
            message: message.into(),
        }
    }

    /// Line number the error refers to, when it refers to one.
    pub fn line(&self) -> Option<u64> {
        match self {
            FormatError::Header { line, .. } | FormatError::Row { line, .. } => Some(*line),
            FormatError::Io(_) => None,
        }
    }
}

/// How weights are written to edge-list files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WeightFormat {
    /// Exact `p/q` (integers as plain `1`).
    #[default]
    Fraction,
    /// Terminating decimals where the value has one, `p/q` otherwise.
    Decimal,
}

fn render_weight(weight: &Rational, format: WeightFormat) -> String {
    match format {
        WeightFormat::Fraction => weight.to_string(),
        WeightFormat::Decimal => weight
            .to_terminating_decimal()
            .unwrap_or_else(|| weight.to_string()),
    }
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input)
}

fn csv_writer<W: Write>(output: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(output)
}

fn csv_error(err: csv::Error) -> FormatError {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(io) => FormatError::Io(io),
        csv::ErrorKind::Utf8 { err, .. } => FormatError::row(line, format!("invalid UTF-8: {err}")),
        other => FormatError::row(line, format!("{other:?}")),
    }
}

fn write_error(err: csv::Error) -> FormatError {
    match err.into_kind() {
        csv::ErrorKind::Io(io) => FormatError::Io(io),
        other => FormatError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Iterate data records after checking the header, yielding `(line, fields)`.
fn records<R: Read>(
    input: R,
    header: &[&str],
) -> Result<impl Iterator<Item = Result<(u64, csv::StringRecord), FormatError>>, FormatError> {
    let reader = csv_reader(input);
    let mut iter = reader.into_records();
    let expected = header.join(",");
    let first = match iter.next() {
        None => {
            return Err(FormatError::Header {
                line: 1,
                expected,
                found: String::new(),
            })
        }
        Some(rec) => rec.map_err(csv_error)?,
    };
    let found: Vec<&str> = first
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let cell = if i == 0 {
                cell.trim_start_matches('\u{feff}')
            } else {
                cell
            };
            cell.trim()
        })
        .collect();
    if found != header {
        return Err(FormatError::Header {
            line: first.position().map_or(1, |p| p.line()),
            expected,
            found: found.join(","),
        });
    }
    let width = header.len();
    Ok(iter.map(move |rec| {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(FormatError::row(
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        Ok((line, rec))
    }))
}

fn parse_key(line: u64, column: &str, cell: &str) -> Result<Key, FormatError> {
    Key::new(cell).map_err(|_| FormatError::row(line, format!("blank `{column}` key")))
}

/// Read an edge-list CSV (`from,to,weight`) into a draft.
///
/// Weights must parse exactly and lie in `(0, 1]`; mass-preservation and
/// duplicate checks are left to [`build_crossmap`].
pub fn read_edge_list<R: Read>(input: R) -> Result<EdgeListDraft, FormatError> {
    let mut edges = Vec::new();
    for rec in records(input, &EDGE_LIST_HEADER)? {
        let (line, rec) = rec?;
        let from = parse_key(line, "from", &rec[0])?;
        let to = parse_key(line, "to", &rec[1])?;
        let weight = parse_rational(&rec[2])
            .map_err(|e| FormatError::row(line, format!("invalid weight: {e}")))?;
        if !weight.is_unit_weight() {
            return Err(FormatError::row(
                line,
                format!("weight {weight} must be in (0, 1]"),
            ));
        }
        edges.push(Edge::new(from, to, weight));
    }
    Ok(EdgeListDraft::new(edges))
}

/// Read an edge list and validate it into a crossmap. The outer error is a
/// format problem, the inner one a validation report.
pub fn read_crossmap<R: Read>(input: R) -> Result<Result<Crossmap, ValidationReport>, FormatError> {
    Ok(build_crossmap(&read_edge_list(input)?))
}

pub fn write_edge_list<W: Write>(
    map: &Crossmap,
    output: W,
    format: WeightFormat,
) -> Result<(), FormatError> {
    let mut writer = csv_writer(output);
    writer.write_record(EDGE_LIST_HEADER).map_err(write_error)?;
    for edge in map.edges() {
        writer
            .write_record([
                edge.from.as_str(),
                edge.to.as_str(),
                &render_weight(&edge.weight, format),
            ])
            .map_err(write_error)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn edge_list_to_string(map: &Crossmap, format: WeightFormat) -> String {
    let mut buf = Vec::new();
    write_edge_list(map, &mut buf, format).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is UTF-8")
}

/// Read an array CSV (`key,value`). `NA` becomes [`MassValue::Missing`];
/// empty cells and repeated keys are errors.
pub fn read_array<R: Read>(input: R) -> Result<SharedMassArray, FormatError> {
    let mut array = SharedMassArray::new();
    for rec in records(input, &ARRAY_HEADER)? {
        let (line, rec) = rec?;
        let key = parse_key(line, "key", &rec[0])?;
        let cell = rec[1].trim();
        let value = if cell == MISSING_MARKER {
            MassValue::Missing
        } else if cell.is_empty() {
            return Err(FormatError::row(
                line,
                format!("empty value for {key} (write {MISSING_MARKER} for missing or 0 for zero)"),
            ));
        } else {
            MassValue::Known(
                parse_rational(cell)
                    .map_err(|e| FormatError::row(line, format!("invalid value: {e}")))?,
            )
        };
        array
            .insert(key, value)
            .map_err(|dup| FormatError::row(line, format!("duplicate key {}", dup.0)))?;
    }
    Ok(array)
}

/// Write an array sorted by key, values as exact `p/q`.
pub fn write_array<W: Write>(array: &SharedMassArray, output: W) -> Result<(), FormatError> {
    write_array_with(array, output, |v| v.to_string())
}

/// Write an array rendering known values with `render`.
pub fn write_array_with<W, F>(
    array: &SharedMassArray,
    output: W,
    render: F,
) -> Result<(), FormatError>
where
    W: Write,
    F: Fn(&Rational) -> String,
{
    let mut writer = csv_writer(output);
    writer.write_record(ARRAY_HEADER).map_err(write_error)?;
    for (key, value) in array.iter() {
        let cell = match value {
            MassValue::Known(v) => render(v),
            MassValue::Missing => MISSING_MARKER.to_string(),
        };
        writer
            .write_record([key.as_str(), &cell])
            .map_err(write_error)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn array_to_string(array: &SharedMassArray) -> String {
    let mut buf = Vec::new();
    write_array(array, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is UTF-8")
}

/// Unweighted two-column lookup table.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Crosswalk {
    pub pairs: BTreeSet<(Key, Key)>,
}

pub fn read_crosswalk<R: Read>(input: R) -> Result<Crosswalk, FormatError> {
    let mut pairs = BTreeSet::new();
    for rec in records(input, &CROSSWALK_HEADER)? {
        let (line, rec) = rec?;
        let from = parse_key(line, "from", &rec[0])?;
        let to = parse_key(line, "to", &rec[1])?;
        if !pairs.insert((from.clone(), to.clone())) {
            return Err(FormatError::row(
                line,
                format!("duplicate pair ({from}, {to})"),
            ));
        }
    }
    Ok(Crosswalk { pairs })
}

pub fn write_crosswalk<W: Write>(crosswalk: &Crosswalk, output: W) -> Result<(), FormatError> {
    let mut writer = csv_writer(output);
    writer.write_record(CROSSWALK_HEADER).map_err(write_error)?;
    for (from, to) in &crosswalk.pairs {
        writer
            .write_record([from.as_str(), to.as_str()])
            .map_err(write_error)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    /// A source listed with several targets is an error.
    #[default]
    RejectSplits,
    /// Split such a source equally, with a warning per split source.
    EqualSplit,
}

/// A crossmap imported from a crosswalk together with its warnings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrosswalkImport {
    pub crossmap: Crossmap,
    pub report: ValidationReport,
}

/// Turn a crosswalk into a crossmap: single-target sources get weight 1;
/// multi-target sources are rejected or split equally depending on `policy`.
pub fn import_crosswalk(
    crosswalk: &Crosswalk,
    policy: SplitPolicy,
) -> Result<CrosswalkImport, ValidationReport> {
    let mut by_source: BTreeMap<&Key, Vec<&Key>> = BTreeMap::new();
    for (from, to) in &crosswalk.pairs {
        by_source.entry(from).or_default().push(to);
    }
    let mut findings = Vec::new();
    let mut edges = Vec::new();
    for (source, targets) in by_source {
        let n = targets.len();
        if n > 1 {
            let names: Vec<&str> = targets.iter().map(|t| t.as_str()).collect();
            let (severity, code, message) = match policy {
                SplitPolicy::RejectSplits => (
                    Severity::Error,
                    FindingCode::SplitSource,
                    format!(
                        "{source} maps to {n} targets ({}); a crosswalk cannot say how to split it",
                        names.join(", ")
                    ),
                ),
                SplitPolicy::EqualSplit => (
                    Severity::Warning,
                    FindingCode::ImputedEqualSplit,
                    format!(
                        "imputed equal split, review: {source} -> {} at 1/{n} each",
                        names.join(", ")
                    ),
                ),
            };
            findings.push(Finding {
                severity,
                code,
                subject: Subject::Key {
                    key: source.clone(),
                },
                message,
                sum: None,
            });
        }
        let weight = Rational::new(1, n as i64);
        edges.extend(
            targets
                .into_iter()
                .map(|t| Edge::new(source.clone(), t.clone(), weight.clone())),
        );
    }
    let report = ValidationReport::from_findings(findings);
    if !report.ok {
        return Err(report);
    }
    match build_crossmap(&EdgeListDraft::new(edges)) {
        Ok(crossmap) => Ok(CrosswalkImport { crossmap, report }),
        Err(structural) => Err(structural),
    }
}

/// Dense matrix as CSV: header row of target keys (first cell empty), then one
/// row per source key with exact cells.
pub fn write_matrix<W: Write>(matrix: &MatrixEncoding, output: W) -> Result<(), FormatError> {
    let mut writer = csv_writer(output);
    let header = std::iter::once("").chain(matrix.col_keys.iter().map(Key::as_str));
    writer.write_record(header).map_err(write_error)?;
    for (key, row) in matrix.row_keys.iter().zip(&matrix.values) {
        let cells: Vec<String> = std::iter::once(key.to_string())
            .chain(row.iter().map(Rational::to_string))
            .collect();
        writer.write_record(&cells).map_err(write_error)?;
    }
    writer.flush()?;
    Ok(())
}

/// One key per line; blank lines are skipped, order preserved, repeats rejected.
pub fn read_key_list<R: BufRead>(input: R) -> Result<Vec<Key>, FormatError> {
    let mut seen = BTreeSet::new();
    let mut keys = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let Ok(key) = Key::new(line.trim_start_matches('\u{feff}')) else {
            continue;
        };
        if !seen.insert(key.clone()) {
            return Err(FormatError::row(
                i as u64 + 1,
                format!("duplicate key {key}"),
            ));
        }
        keys.push(key);
    }
    Ok(keys)
}
