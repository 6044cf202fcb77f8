//! Triples, labels and the line formats they are read from.
//!
//! `ckbc-tsv` lines are `relation<TAB>head<TAB>tail<TAB>label` with label `1`/`0`;
//! `candidate-tsv` lines are `relation<TAB>head<TAB>tail` (extra columns ignored).

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::templates::TemplateRegistry;
use crate::text::{join_words, normalize_surface};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: Vec<String>,
    pub relation: String,
    pub tail: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
}

impl Triple {
    /// Build from raw surface strings, normalizing head and tail.
    pub fn new(head: &str, relation: &str, tail: &str) -> Result<Self, ParseError> {
        Ok(Triple {
            head: normalize_surface(head).map_err(|_| ParseError::EmptyField { line: 0, field: "head" })?,
            relation: relation.to_owned(),
            tail: normalize_surface(tail).map_err(|_| ParseError::EmptyField { line: 0, field: "tail" })?,
            source_id: None,
        })
    }

    pub fn head_text(&self) -> String {
        join_words(&self.head)
    }

    pub fn tail_text(&self) -> String {
        join_words(&self.tail)
    }

    /// Identity ignoring the record id.
    pub fn same_fact(&self, other: &Triple) -> bool {
        self.head == other.head && self.relation == other.relation && self.tail == other.tail
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head_text(), self.relation, self.tail_text())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ValidityScore(pub f64);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTriple {
    pub triple: Triple,
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripleFormat {
    CkbcTsv,
    CandidateTsv,
}

impl FromStr for TripleFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ckbc-tsv" | "ckbc" => Ok(TripleFormat::CkbcTsv),
            "candidate-tsv" | "candidate" => Ok(TripleFormat::CandidateTsv),
            other => Err(format!("unknown triple format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Record {
    Labeled(LabeledTriple),
    Candidate(Triple),
}

impl Record {
    pub fn triple(&self) -> &Triple {
        match self {
            Record::Labeled(l) => &l.triple,
            Record::Candidate(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: expected at least {expected} tab-separated fields, found {found}")]
    FieldCount { line: usize, expected: usize, found: usize },
    #[error("line {line}: {field} is empty")]
    EmptyField { line: usize, field: &'static str },
    #[error("line {line}: label must be 1 or 0, found {value:?}")]
    BadLabel { line: usize, value: String },
    #[error("line {line}: unknown relation {relation:?}")]
    UnknownRelation { line: usize, relation: String },
    #[error("line {line}: {message}")]
    Io { line: usize, message: String },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::FieldCount { line, .. }
            | ParseError::EmptyField { line, .. }
            | ParseError::BadLabel { line, .. }
            | ParseError::UnknownRelation { line, .. }
            | ParseError::Io { line, .. } => *line,
        }
    }
}

/// Parse one record. `line_no` is 1-based and only used for error reporting.
pub fn parse_triple_line(
    line: &str,
    line_no: usize,
    format: TripleFormat,
    registry: &TemplateRegistry,
) -> Result<Record, ParseError> {
    let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
    let expected = match format {
        TripleFormat::CkbcTsv => 4,
        TripleFormat::CandidateTsv => 3,
    };
    if fields.len() < expected {
        return Err(ParseError::FieldCount {
            line: line_no,
            expected,
            found: fields.len(),
        });
    }
    let relation = fields[0].trim();
    if relation.is_empty() {
        return Err(ParseError::EmptyField {
            line: line_no,
            field: "relation",
        });
    }
    if !registry.contains(relation) {
        return Err(ParseError::UnknownRelation {
            line: line_no,
            relation: relation.to_owned(),
        });
    }
    let head = normalize_surface(fields[1]).map_err(|_| ParseError::EmptyField {
        line: line_no,
        field: "head",
    })?;
    let tail = normalize_surface(fields[2]).map_err(|_| ParseError::EmptyField {
        line: line_no,
        field: "tail",
    })?;
    let triple = Triple {
        head,
        relation: relation.to_owned(),
        tail,
        source_id: Some(line_no.to_string()),
    };
    match format {
        TripleFormat::CandidateTsv => Ok(Record::Candidate(triple)),
        TripleFormat::CkbcTsv => {
            let label = match fields[3].trim() {
                "1" => true,
                "0" => false,
                other => {
                    return Err(ParseError::BadLabel {
                        line: line_no,
                        value: other.to_owned(),
                    })
                }
            };
            Ok(Record::Labeled(LabeledTriple { triple, label }))
        }
    }
}

/// Read every record from `reader`, skipping blank lines and `#` comments.
///
/// With `skip_bad` set, malformed records are returned as warnings instead of
/// failing the whole read.
pub fn read_records<R: BufRead>(
    reader: R,
    format: TripleFormat,
    registry: &TemplateRegistry,
    skip_bad: bool,
) -> Result<(Vec<Record>, Vec<ParseError>), ParseError> {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| ParseError::Io {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_triple_line(&line, line_no, format, registry) {
            Ok(r) => records.push(r),
            Err(e) if skip_bad => {
                log::warn!("skipping record: {e}");
                skipped.push(e);
            }
            Err(e) => return Err(e),
        }
    }
    Ok((records, skipped))
}

/// Serialize a record back into its line format.
pub fn format_record(record: &Record) -> String {
    match record {
        Record::Labeled(l) => format!(
            "{}\t{}\t{}\t{}",
            l.triple.relation,
            l.triple.head_text(),
            l.triple.tail_text(),
            if l.label { 1 } else { 0 }
        ),
        Record::Candidate(t) => format!("{}\t{}\t{}", t.relation, t.head_text(), t.tail_text()),
    }
}
