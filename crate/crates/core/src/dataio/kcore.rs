use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

use super::InteractionLog;
use crate::error::{Error, Result};

/// Iteratively removes users and items with fewer than `core` interactions
/// until every survivor meets the threshold.
///
/// Peeling is queue driven: removing a node decrements its neighbours and
/// enqueues any that fall below the threshold, so the result is the maximal
/// bipartite (core, core)-core of the interaction graph.
pub fn kcore_filter<T: Hash + Eq + Clone>(
    log: &InteractionLog<T>,
    core: usize,
) -> Result<InteractionLog<T>> {
    if core == 0 {
        return Err(Error::InvalidArgument("core must be at least 1".into()));
    }
    let records = log.records();

    // Node ids: users then items, each densely numbered locally.
    let mut user_ids: HashMap<&T, usize> = HashMap::new();
    let mut item_ids: HashMap<&T, usize> = HashMap::new();
    let mut edges = Vec::with_capacity(records.len());
    for r in records {
        let next = user_ids.len();
        let u = *user_ids.entry(&r.user).or_insert(next);
        let next = item_ids.len();
        let i = *item_ids.entry(&r.item).or_insert(next);
        edges.push((u, i));
    }
    let n_users = user_ids.len();
    let n_nodes = n_users + item_ids.len();

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for (e, &(u, i)) in edges.iter().enumerate() {
        adjacency[u].push(e);
        adjacency[n_users + i].push(e);
    }
    let mut degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();
    let mut node_alive = vec![true; n_nodes];
    let mut edge_alive = vec![true; edges.len()];

    let mut queue: VecDeque<usize> = (0..n_nodes).filter(|&n| degree[n] < core).collect();
    while let Some(node) = queue.pop_front() {
        if !node_alive[node] {
            continue;
        }
        node_alive[node] = false;
        for &e in &adjacency[node] {
            if !edge_alive[e] {
                continue;
            }
            edge_alive[e] = false;
            let (u, i) = edges[e];
            let other = if node == u { n_users + i } else { u };
            degree[other] -= 1;
            if node_alive[other] && degree[other] + 1 == core {
                queue.push_back(other);
            }
        }
    }

    let kept: Vec<_> = records
        .iter()
        .zip(&edge_alive)
        .filter(|(_, &alive)| alive)
        .map(|(r, _)| r.clone())
        .collect();
    if kept.is_empty() {
        return Err(Error::Empty(format!(
            "{core}-core filtering removed every interaction"
        )));
    }
    Ok(InteractionLog::from_unique(kept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Record;
    use proptest::prelude::*;

    fn log_of(pairs: &[(u32, u32)]) -> InteractionLog<u32> {
        InteractionLog::from_records(pairs.iter().map(|&(u, i)| Record::new(u, i)))
    }

    fn degrees(log: &InteractionLog<u32>) -> (HashMap<u32, usize>, HashMap<u32, usize>) {
        let mut du = HashMap::new();
        let mut di = HashMap::new();
        for r in log.records() {
            *du.entry(r.user).or_default() += 1;
            *di.entry(r.item).or_default() += 1;
        }
        (du, di)
    }

    #[test]
    fn already_dense_log_is_unchanged() {
        let pairs: Vec<_> = (0..3).flat_map(|u| (0..3).map(move |i| (u, i))).collect();
        let log = log_of(&pairs);
        assert_eq!(kcore_filter(&log, 3).unwrap(), log);
    }

    #[test]
    fn star_graph_cascades_to_empty() {
        let pairs: Vec<_> = (0..20).map(|i| (0, i)).collect();
        let err = kcore_filter(&log_of(&pairs), 2).unwrap_err();
        assert!(matches!(err, Error::Empty(_)));
    }

    #[test]
    fn removal_cascades_through_users() {
        // 2x2 complete block plus user 2 hanging off item 0 and a private item 9.
        let log = log_of(&[(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 9)]);
        let out = kcore_filter(&log, 2).unwrap();
        assert_eq!(out, log_of(&[(0, 0), (0, 1), (1, 0), (1, 1)]));
    }

    #[test]
    fn zero_core_rejected() {
        assert!(kcore_filter(&log_of(&[(0, 0)]), 0).is_err());
    }

    proptest! {
        #[test]
        fn output_is_a_fixed_point_with_degree_floor(
            pairs in proptest::collection::vec((0u32..15, 0u32..15), 1..200),
            core in 1usize..5,
        ) {
            let log = log_of(&pairs);
            if let Ok(out) = kcore_filter(&log, core) {
                let (du, di) = degrees(&out);
                prop_assert!(du.values().all(|&d| d >= core));
                prop_assert!(di.values().all(|&d| d >= core));
                prop_assert_eq!(kcore_filter(&out, core).unwrap(), out);
            }
        }
    }
}
