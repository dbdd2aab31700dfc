//! Canonical preprocessed files.
//!
//! ```text
//! users=<n> items=<m> interactions=<c>
//! <u>\t<i>\t<t>[\t<role>]
//! ```
//!
//! `t` is the integer timestamp or `-` when the record has none. Split files
//! carry a fourth column with role `train`, `val` or `test`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{InteractionLog, Record, SplitSet};
use crate::error::{Error, Result};

/// A densely indexed interaction log together with its catalog sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n_users: usize,
    pub n_items: usize,
    pub log: InteractionLog<u32>,
}

fn header(n_users: usize, n_items: usize, interactions: usize) -> String {
    format!("users={n_users} items={n_items} interactions={interactions}")
}

fn write_record(out: &mut impl Write, r: &Record<u32>) -> std::io::Result<()> {
    match r.timestamp {
        Some(t) => write!(out, "{}\t{}\t{}", r.user, r.item, t),
        None => write!(out, "{}\t{}\t-", r.user, r.item),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

pub fn write_dataset(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = create(path)?;
    writeln!(out, "{}", header(data.n_users, data.n_items, data.log.len())).map_err(io)?;
    for r in data.log.records() {
        write_record(&mut out, r).map_err(io)?;
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_split(path: impl AsRef<Path>, split: &SplitSet) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = create(path)?;
    let total = split.train.len() + split.validation.len() + split.test.len();
    writeln!(out, "{}", header(split.n_users, split.n_items, total)).map_err(io)?;
    let rows = split
        .train
        .records()
        .iter()
        .map(|r| (r, "train"))
        .chain(split.validation.iter().map(|r| (r, "val")))
        .chain(split.test.iter().map(|r| (r, "test")));
    for (r, role) in rows {
        write_record(&mut out, r).map_err(io)?;
        writeln!(out, "\t{role}").map_err(io)?;
    }
    out.flush().map_err(io)
}

struct Parsed {
    n_users: usize,
    n_items: usize,
    rows: Vec<(Record<u32>, Option<String>)>,
}

fn read_rows(path: &Path) -> Result<Parsed> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Malformed {
            line: 1,
            message: "missing header".into(),
        })?
        .map_err(|e| Error::io(path, e))?;
    let (n_users, n_items, declared) = parse_header(&first)?;

    let mut rows = Vec::with_capacity(declared);
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| Error::Malformed {
            line: lineno,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(bad(format!("expected 3 or 4 fields, found {}", fields.len())));
        }
        let index = |s: &str, bound: usize, what: &str| -> Result<u32> {
            let v: usize = s.parse().map_err(|_| bad(format!("bad {what} index '{s}'")))?;
            if v >= bound {
                return Err(bad(format!("{what} index {v} exceeds declared {bound}")));
            }
            Ok(v as u32)
        };
        let user = index(fields[0], n_users, "user")?;
        let item = index(fields[1], n_items, "item")?;
        let timestamp = match fields[2] {
            "-" => None,
            t => Some(t.parse().map_err(|_| bad(format!("bad timestamp '{t}'")))?),
        };
        let role = fields.get(3).map(|s| s.to_string());
        rows.push((
            Record {
                user,
                item,
                rating: 1.0,
                timestamp,
            },
            role,
        ));
    }
    if rows.len() != declared {
        return Err(Error::Malformed {
            line: 1,
            message: format!("header declares {declared} interactions, found {}", rows.len()),
        });
    }
    Ok(Parsed {
        n_users,
        n_items,
        rows,
    })
}

fn parse_header(line: &str) -> Result<(usize, usize, usize)> {
    let bad = || Error::Malformed {
        line: 1,
        message: format!("bad header '{line}'"),
    };
    let mut values = [None; 3];
    for part in line.split_whitespace() {
        let (key, value) = part.split_once('=').ok_or_else(bad)?;
        let slot = match key {
            "users" => 0,
            "items" => 1,
            "interactions" => 2,
            _ => return Err(bad()),
        };
        values[slot] = Some(value.parse::<usize>().map_err(|_| bad())?);
    }
    match values {
        [Some(u), Some(i), Some(c)] => Ok((u, i, c)),
        _ => Err(bad()),
    }
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let parsed = read_rows(path.as_ref())?;
    Ok(Dataset {
        n_users: parsed.n_users,
        n_items: parsed.n_items,
        log: InteractionLog::from_records(parsed.rows.into_iter().map(|(r, _)| r)),
    })
}

/// Reads a split file. `kept_users` of the result is the identity.
pub fn read_split(path: impl AsRef<Path>) -> Result<SplitSet> {
    let parsed = read_rows(path.as_ref())?;
    let n_users = parsed.n_users;
    let mut train = Vec::new();
    let mut validation: Vec<Option<Record<u32>>> = vec![None; n_users];
    let mut test: Vec<Option<Record<u32>>> = vec![None; n_users];
    for (r, role) in parsed.rows {
        let slot = match role.as_deref() {
            Some("train") => {
                train.push(r);
                continue;
            }
            Some("val") => &mut validation[r.user as usize],
            Some("test") => &mut test[r.user as usize],
            other => {
                return Err(Error::Malformed {
                    line: 0,
                    message: format!("unknown role {other:?}"),
                })
            }
        };
        if slot.is_some() {
            return Err(Error::Malformed {
                line: 0,
                message: format!("user {} has more than one held-out record of a role", r.user),
            });
        }
        *slot = Some(r);
    }
    let complete = |v: Vec<Option<Record<u32>>>, role: &str| -> Result<Vec<Record<u32>>> {
        v.into_iter()
            .enumerate()
            .map(|(u, r)| {
                r.ok_or_else(|| Error::Malformed {
                    line: 0,
                    message: format!("user {u} has no {role} record"),
                })
            })
            .collect()
    };
    Ok(SplitSet {
        n_users,
        n_items: parsed.n_items,
        train: InteractionLog::from_records(train),
        validation: complete(validation, "val")?,
        test: complete(test, "test")?,
        kept_users: (0..n_users as u32).collect(),
    })
}
