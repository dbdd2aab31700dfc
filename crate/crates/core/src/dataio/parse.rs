use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use super::{InteractionLog, Record, Token};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Delimiter {
    Comma,
    Tab,
    /// MovieLens `::` separator.
    DoubleColon,
    /// Any run of spaces or tabs.
    Whitespace,
    Other(String),
}

impl Delimiter {
    fn split<'a>(&'a self, line: &'a str) -> Vec<&'a str> {
        match self {
            Delimiter::Comma => line.split(',').map(str::trim).collect(),
            Delimiter::Tab => line.split('\t').map(str::trim).collect(),
            Delimiter::DoubleColon => line.split("::").map(str::trim).collect(),
            Delimiter::Whitespace => line.split_whitespace().collect(),
            Delimiter::Other(sep) => line.split(sep.as_str()).map(str::trim).collect(),
        }
    }
}

/// Column layout of a raw interaction file.
#[derive(Clone, Debug, PartialEq)]
pub struct FormatSpec {
    pub delimiter: Delimiter,
    pub user_col: usize,
    pub item_col: usize,
    pub rating_col: Option<usize>,
    pub timestamp_col: Option<usize>,
    pub skip_header: bool,
}

impl FormatSpec {
    fn with_delimiter(delimiter: Delimiter) -> Self {
        FormatSpec {
            delimiter,
            user_col: 0,
            item_col: 1,
            rating_col: Some(2),
            timestamp_col: Some(3),
            skip_header: false,
        }
    }

    /// `user::item::rating::timestamp`, as in MovieLens 1M/10M.
    pub fn movielens() -> Self {
        Self::with_delimiter(Delimiter::DoubleColon)
    }

    pub fn csv() -> Self {
        Self::with_delimiter(Delimiter::Comma)
    }

    pub fn tsv() -> Self {
        Self::with_delimiter(Delimiter::Tab)
    }

    /// Space separated `user item rating`, as in the Epinions dump.
    pub fn whitespace() -> Self {
        FormatSpec {
            timestamp_col: None,
            ..Self::with_delimiter(Delimiter::Whitespace)
        }
    }
}

impl FromStr for FormatSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "movielens" | "ml" => Ok(Self::movielens()),
            "csv" => Ok(Self::csv()),
            "tsv" => Ok(Self::tsv()),
            "whitespace" | "epinions" => Ok(Self::whitespace()),
            other => Err(Error::InvalidArgument(format!(
                "unknown format '{other}' (expected movielens, csv, tsv or whitespace)"
            ))),
        }
    }
}

pub fn parse_interactions(path: impl AsRef<Path>, format: &FormatSpec) -> Result<InteractionLog> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_reader(BufReader::new(file), format).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses interaction lines from any buffered reader.
///
/// Blank lines and lines starting with `#` or `%` are skipped. Missing
/// rating columns default to 1.0; a missing timestamp leaves the record
/// untimed.
pub fn parse_reader(reader: impl BufRead, format: &FormatSpec) -> Result<InteractionLog> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if idx == 0 && format.skip_header {
            continue;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        records.push(parse_line(trimmed, lineno, format)?);
    }
    if records.is_empty() {
        return Err(Error::Empty("input contains no interaction records".into()));
    }
    Ok(InteractionLog::from_records(records))
}

fn parse_line(line: &str, lineno: usize, format: &FormatSpec) -> Result<Record<Token>> {
    let fields = format.delimiter.split(line);
    let malformed = |message: String| Error::Malformed {
        line: lineno,
        message,
    };
    if fields.len() < 2 {
        return Err(malformed(format!(
            "expected at least 2 fields, found {}",
            fields.len()
        )));
    }
    let token = |col: usize, what: &str| -> Result<Token> {
        match fields.get(col) {
            Some(f) if !f.is_empty() => Ok(f.to_string()),
            _ => Err(malformed(format!("missing {what} in column {col}"))),
        }
    };
    let user = token(format.user_col, "user")?;
    let item = token(format.item_col, "item")?;

    let rating = match format.rating_col.and_then(|c| fields.get(c)) {
        Some(f) => f
            .parse::<f64>()
            .map_err(|_| malformed(format!("bad rating '{f}'")))?,
        None => 1.0,
    };
    let timestamp = match format.timestamp_col.and_then(|c| fields.get(c)) {
        Some(f) => Some(
            f.parse::<i64>()
                .map_err(|_| malformed(format!("bad timestamp '{f}'")))?,
        ),
        None => None,
    };
    Ok(Record {
        user,
        item,
        rating,
        timestamp,
    })
}
