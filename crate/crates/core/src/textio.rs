//! Shared pieces of the comma-separated data files: a single `#` comment
//! line of `key=value` annotations, then a header row, then data rows.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataFileError {
    #[error("file is empty")]
    Empty,
    #[error("missing `# {expected}` comment line")]
    WrongKind { expected: &'static str },
    #[error("line {line}: missing header row")]
    MissingHeader { line: usize },
    #[error("line {line}: cannot parse `{field}` as a number")]
    BadNumber { line: usize, field: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("no data rows")]
    NoRows,
}

/// `# kind key=value key=value ...`
pub(crate) fn comment_line(kind: &str, annotations: &[(&str, String)]) -> String {
    let mut line = format!("# {kind}");
    for (k, v) in annotations {
        line.push(' ');
        line.push_str(k);
        line.push('=');
        line.push_str(v);
    }
    line
}

/// Numbered, non-blank lines of a data file.
pub(crate) struct Lines<'a> {
    pub comment: Vec<(String, String)>,
    pub header: (usize, &'a str),
    pub rows: Vec<(usize, &'a str)>,
}

pub(crate) fn split<'a>(text: &'a str, expected_kind: &'static str) -> Result<Lines<'a>, DataFileError> {
    let mut numbered = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (_, first) = numbered.next().ok_or(DataFileError::Empty)?;
    let body = first
        .strip_prefix('#')
        .ok_or(DataFileError::WrongKind { expected: expected_kind })?;
    let mut words = body.split_whitespace();
    if words.next() != Some(expected_kind) {
        return Err(DataFileError::WrongKind { expected: expected_kind });
    }
    let comment = words
        .filter_map(|w| w.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();

    let header = numbered
        .next()
        .ok_or(DataFileError::MissingHeader { line: 2 })?;
    let rows: Vec<_> = numbered.collect();
    Ok(Lines {
        comment,
        header,
        rows,
    })
}

/// The first comment-line kind of a data file, if any.
pub fn file_kind(text: &str) -> Option<&str> {
    let first = text.lines().map(str::trim).find(|l| !l.is_empty())?;
    first.strip_prefix('#')?.split_whitespace().next()
}

pub(crate) fn parse_f64(line: usize, field: &str) -> Result<f64, DataFileError> {
    field.trim().parse().map_err(|_| DataFileError::BadNumber {
        line,
        field: field.trim().to_string(),
    })
}

pub(crate) fn parse_u64(line: usize, field: &str) -> Result<u64, DataFileError> {
    field.trim().parse().map_err(|_| DataFileError::BadNumber {
        line,
        field: field.trim().to_string(),
    })
}

pub(crate) fn fields(line: usize, row: &str, expected: usize) -> Result<Vec<&str>, DataFileError> {
    let out: Vec<&str> = row.split(',').collect();
    if out.len() != expected {
        return Err(DataFileError::RaggedRow {
            line,
            expected,
            found: out.len(),
        });
    }
    Ok(out)
}

/// Looks up an annotation from the comment line.
pub(crate) fn annotation<'a>(comment: &'a [(String, String)], key: &str) -> Option<&'a str> {
    comment
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}
