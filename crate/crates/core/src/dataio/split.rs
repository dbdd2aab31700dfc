use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{InteractionLog, Record, UserItems};
use crate::error::{Error, Result};

/// What to do with users that have fewer than 3 interactions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ShortUserPolicy {
    #[default]
    Drop,
    Fail,
}

/// Leave-one-out split: one validation and one test interaction per user.
///
/// `validation[u]` and `test[u]` are the held-out records of user `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSet {
    pub n_users: usize,
    pub n_items: usize,
    pub train: InteractionLog<u32>,
    pub validation: Vec<Record<u32>>,
    pub test: Vec<Record<u32>>,
    /// Pre-split index of every retained user, in split order.
    pub kept_users: Vec<u32>,
}

impl SplitSet {
    pub fn train_items(&self) -> UserItems {
        UserItems::from_pairs(
            self.n_users,
            self.n_items,
            self.train.records().iter().map(|r| (r.user, r.item)),
        )
    }

    /// Train items plus each user's validation item; the exclusion set used
    /// when scoring the test split.
    pub fn known_items(&self) -> UserItems {
        UserItems::from_pairs(
            self.n_users,
            self.n_items,
            self.train
                .records()
                .iter()
                .chain(&self.validation)
                .map(|r| (r.user, r.item)),
        )
    }

    pub fn validation_items(&self) -> Vec<u32> {
        self.validation.iter().map(|r| r.item).collect()
    }

    pub fn test_items(&self) -> Vec<u32> {
        self.test.iter().map(|r| r.item).collect()
    }
}

/// Holds out two interactions per user.
///
/// With timestamps the latest interaction becomes the test item and the
/// second latest the validation item (timestamp ties resolve by file
/// order). Without timestamps both are drawn uniformly without replacement
/// from a generator seeded with `seed`. Users are renumbered densely if any
/// are dropped.
pub fn leave_one_out_split(
    log: &InteractionLog<u32>,
    seed: u64,
    policy: ShortUserPolicy,
) -> Result<SplitSet> {
    let n_users = log.n_users();
    let n_items = log.n_items();
    let mut by_user: Vec<Vec<&Record<u32>>> = vec![Vec::new(); n_users];
    for r in log.records() {
        by_user[r.user as usize].push(r);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept_users = Vec::with_capacity(n_users);
    let mut train = Vec::with_capacity(log.len());
    let mut validation = Vec::with_capacity(n_users);
    let mut test = Vec::with_capacity(n_users);

    for (user, records) in by_user.iter().enumerate() {
        if records.len() < 3 {
            match policy {
                ShortUserPolicy::Fail => {
                    return Err(Error::TooFewInteractions {
                        user,
                        count: records.len(),
                    })
                }
                ShortUserPolicy::Drop => {
                    log::warn!(
                        "dropping user {user}: {} interactions, need at least 3",
                        records.len()
                    );
                    continue;
                }
            }
        }
        let (test_pos, val_pos) = if log.has_timestamps() {
            let mut order: Vec<usize> = (0..records.len()).collect();
            order.sort_by_key(|&p| (records[p].timestamp, p));
            (order[order.len() - 1], order[order.len() - 2])
        } else {
            let picked = sample(&mut rng, records.len(), 2);
            (picked.index(0), picked.index(1))
        };

        let new_user = kept_users.len() as u32;
        kept_users.push(user as u32);
        let relabel = |r: &Record<u32>| Record {
            user: new_user,
            ..r.clone()
        };
        for (pos, r) in records.iter().enumerate() {
            if pos != test_pos && pos != val_pos {
                train.push(relabel(r));
            }
        }
        validation.push(relabel(records[val_pos]));
        test.push(relabel(records[test_pos]));
    }

    if kept_users.is_empty() {
        return Err(Error::Empty("no user has enough interactions to split".into()));
    }
    Ok(SplitSet {
        n_users: kept_users.len(),
        n_items,
        train: InteractionLog::from_unique(train),
        validation,
        test,
        kept_users,
    })
}
