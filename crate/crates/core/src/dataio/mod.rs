//! Interaction data: parsing raw rating files, implicit binarization,
//! k-core filtering, dense id remapping and leave-one-out splitting.

mod canonical;
mod kcore;
mod parse;
mod split;

use std::collections::HashMap;
use std::hash::Hash;

use indexmap::IndexSet;

pub use canonical::{read_dataset, read_split, write_dataset, write_split, Dataset};
pub use kcore::kcore_filter;
pub use parse::{parse_interactions, parse_reader, Delimiter, FormatSpec};
pub use split::{leave_one_out_split, ShortUserPolicy, SplitSet};

/// Raw user/item identifier as it appears in an input file.
pub type Token = String;

#[derive(Clone, Debug, PartialEq)]
pub struct Record<T> {
    pub user: T,
    pub item: T,
    pub rating: f64,
    pub timestamp: Option<i64>,
}

impl<T> Record<T> {
    pub fn new(user: T, item: T) -> Self {
        Record {
            user,
            item,
            rating: 1.0,
            timestamp: None,
        }
    }

    pub fn with_timestamp(mut self, timestamp: i64) -> Self {
        self.timestamp = Some(timestamp);
        self
    }

    pub fn with_rating(mut self, rating: f64) -> Self {
        self.rating = rating;
        self
    }
}

/// A deduplicated set of user-item interactions.
///
/// Each `(user, item)` pair occurs at most once. When a pair is seen more
/// than once, the record keeps the position of its first occurrence and the
/// earliest timestamp.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionLog<T = Token> {
    records: Vec<Record<T>>,
    has_timestamps: bool,
}

impl<T: Hash + Eq + Clone> InteractionLog<T> {
    pub fn from_records(records: impl IntoIterator<Item = Record<T>>) -> Self {
        let mut out: Vec<Record<T>> = Vec::new();
        let mut seen: HashMap<(T, T), usize> = HashMap::new();
        for rec in records {
            let key = (rec.user.clone(), rec.item.clone());
            match seen.get(&key) {
                Some(&pos) => {
                    let kept = &mut out[pos];
                    let earlier = match (rec.timestamp, kept.timestamp) {
                        (Some(new), Some(old)) => new < old,
                        (Some(_), None) => true,
                        _ => false,
                    };
                    if earlier {
                        kept.timestamp = rec.timestamp;
                        kept.rating = rec.rating;
                    }
                }
                None => {
                    seen.insert(key, out.len());
                    out.push(rec);
                }
            }
        }
        Self::from_unique(out)
    }

    pub(crate) fn from_unique(records: Vec<Record<T>>) -> Self {
        let has_timestamps = !records.is_empty() && records.iter().all(|r| r.timestamp.is_some());
        InteractionLog {
            records,
            has_timestamps,
        }
    }
}

impl<T> InteractionLog<T> {
    pub fn records(&self) -> &[Record<T>] {
        &self.records
    }

    pub fn into_records(self) -> Vec<Record<T>> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_timestamps(&self) -> bool {
        self.has_timestamps
    }
}

impl InteractionLog<u32> {
    /// One past the largest user index present.
    pub fn n_users(&self) -> usize {
        self.records.iter().map(|r| r.user as usize + 1).max().unwrap_or(0)
    }

    pub fn n_items(&self) -> usize {
        self.records.iter().map(|r| r.item as usize + 1).max().unwrap_or(0)
    }
}

/// Sets every rating to 1.0.
pub fn to_implicit<T>(mut log: InteractionLog<T>) -> InteractionLog<T> {
    for rec in &mut log.records {
        rec.rating = 1.0;
    }
    log
}

/// Dense index assignment for user and item tokens, in first-appearance order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IdMaps {
    users: IndexSet<Token>,
    items: IndexSet<Token>,
}

impl IdMaps {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn user_index(&self, token: &str) -> Option<u32> {
        self.users.get_index_of(token).map(|i| i as u32)
    }

    pub fn item_index(&self, token: &str) -> Option<u32> {
        self.items.get_index_of(token).map(|i| i as u32)
    }

    pub fn user_token(&self, index: u32) -> Option<&str> {
        self.users.get_index(index as usize).map(String::as_str)
    }

    pub fn item_token(&self, index: u32) -> Option<&str> {
        self.items.get_index(index as usize).map(String::as_str)
    }

    /// Keeps only the listed users, renumbered in the given order.
    pub fn restrict_users(&self, kept: &[u32]) -> IdMaps {
        IdMaps {
            users: kept
                .iter()
                .map(|&u| self.users[u as usize].clone())
                .collect(),
            items: self.items.clone(),
        }
    }
}

pub fn remap_ids(log: &InteractionLog<Token>) -> (InteractionLog<u32>, IdMaps) {
    let mut maps = IdMaps::default();
    let records = log
        .records
        .iter()
        .map(|r| {
            let (u, _) = maps.users.insert_full(r.user.clone());
            let (i, _) = maps.items.insert_full(r.item.clone());
            Record {
                user: u as u32,
                item: i as u32,
                rating: r.rating,
                timestamp: r.timestamp,
            }
        })
        .collect();
    (
        InteractionLog {
            records,
            has_timestamps: log.has_timestamps,
        },
        maps,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    /// Percentage of the user-item matrix that is observed.
    pub density_pct: f64,
    /// Fraction of interactions that fall on the most popular 10% of items.
    pub top_decile_share: f64,
}

impl std::fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "users={}", self.users)?;
        writeln!(f, "items={}", self.items)?;
        writeln!(f, "interactions={}", self.interactions)?;
        writeln!(f, "density_pct={:.4}", self.density_pct)?;
        write!(f, "top_decile_share={:.4}", self.top_decile_share)
    }
}

pub fn dataset_stats<T: Hash + Eq>(log: &InteractionLog<T>) -> DatasetStats {
    let mut users: HashMap<&T, usize> = HashMap::new();
    let mut items: HashMap<&T, usize> = HashMap::new();
    for r in &log.records {
        *users.entry(&r.user).or_default() += 1;
        *items.entry(&r.item).or_default() += 1;
    }
    let interactions = log.records.len();
    let cells = users.len() as f64 * items.len() as f64;
    let density_pct = if cells > 0.0 {
        100.0 * interactions as f64 / cells
    } else {
        0.0
    };

    let mut degrees: Vec<usize> = items.into_values().collect();
    degrees.sort_unstable_by(|a, b| b.cmp(a));
    let top = degrees.len().div_ceil(10);
    let top_decile_share = if interactions > 0 {
        degrees[..top].iter().sum::<usize>() as f64 / interactions as f64
    } else {
        0.0
    };

    DatasetStats {
        users: users.len(),
        items: degrees.len(),
        interactions,
        density_pct,
        top_decile_share,
    }
}

/// Per-user sorted item lists in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct UserItems {
    offsets: Vec<usize>,
    items: Vec<u32>,
    n_items: usize,
}

impl UserItems {
    pub fn from_pairs(
        n_users: usize,
        n_items: usize,
        pairs: impl IntoIterator<Item = (u32, u32)>,
    ) -> Self {
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n_users];
        for (u, i) in pairs {
            rows[u as usize].push(i);
        }
        let mut offsets = Vec::with_capacity(n_users + 1);
        let mut items = Vec::new();
        offsets.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            items.extend(row);
            offsets.push(items.len());
        }
        UserItems {
            offsets,
            items,
            n_items,
        }
    }

    pub fn n_users(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn items(&self, user: usize) -> &[u32] {
        &self.items[self.offsets[user]..self.offsets[user + 1]]
    }

    pub fn degree(&self, user: usize) -> usize {
        self.offsets[user + 1] - self.offsets[user]
    }

    pub fn contains(&self, user: usize, item: u32) -> bool {
        self.items(user).binary_search(&item).is_ok()
    }

    pub fn nnz(&self) -> usize {
        self.items.len()
    }

    /// Iterates `(user, item)` pairs in row-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n_users()).flat_map(move |u| self.items(u).iter().map(move |&i| (u as u32, i)))
    }
}
