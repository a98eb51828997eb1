use crate::error::{Error, Result};

/// Task order of the two-subdomains-per-worker ordering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedTable {
    /// `tasks[p]` lists `(i, k)` in the order worker `p` runs them.
    pub tasks: Vec<Vec<(usize, usize)>>,
    /// Worker of subdomain `i` at index `i - 1`.
    pub owner: Vec<usize>,
}

impl PackedTable {
    pub fn workers(&self) -> usize {
        self.tasks.len()
    }
}

/// Which of `{2p - 1, 2p}` worker `p` (1-based) runs first in each
/// iterate: the one nearer the pivot.
fn first_of_pair(p: usize, m: usize) -> (usize, usize) {
    if 2 * p < m {
        (2 * p, 2 * p - 1)
    } else if 2 * p - 1 > m {
        (2 * p - 1, 2 * p)
    } else if 2 * p == m {
        (2 * p, 2 * p - 1)
    } else {
        (2 * p - 1, 2 * p)
    }
}

/// Worker assignment for `N` subdomains, `K` iterates and pivot `m`.
///
/// Pair `q` holds subdomains `2q - 1` and `2q`. With `2K >= ceil(N/2)` each
/// of the `ceil(N/2)` workers takes one pair and alternates nearer, farther
/// in every iterate. With fewer iterates `2K` workers share the pairs in
/// round-robin order of their distance from the pivot's pair, and each runs
/// its tasks by iterate, then distance from the pivot.
pub fn packed_table(subdomains: usize, iterates: usize, pivot: usize) -> Result<PackedTable> {
    if subdomains == 0 || iterates == 0 {
        return Err(Error::Config("N and K must be at least 1".into()));
    }
    if pivot == 0 || pivot > subdomains {
        return Err(Error::Config(format!("pivot m = {pivot} must lie in 1..={subdomains}")));
    }
    let n = subdomains;
    let pairs = n.div_ceil(2);
    let in_range = |i: usize| (1..=n).contains(&i);

    let tasks: Vec<Vec<(usize, usize)>> = if 2 * iterates >= pairs {
        (1..=pairs)
            .map(|p| {
                let (a, b) = first_of_pair(p, pivot);
                (1..=iterates)
                    .flat_map(|k| [(a, k), (b, k)])
                    .filter(|&(i, _)| in_range(i))
                    .collect()
            })
            .collect()
    } else {
        let workers = 2 * iterates;
        let home = pivot.div_ceil(2);
        let mut order: Vec<usize> = (1..=pairs).collect();
        order.sort_by_key(|&q| (q.abs_diff(home), q));
        let mut members = vec![Vec::new(); workers];
        for (r, q) in order.into_iter().enumerate() {
            members[r % workers].extend([2 * q - 1, 2 * q].into_iter().filter(|&i| in_range(i)));
        }
        members
            .into_iter()
            .map(|subs| {
                let mut t: Vec<(usize, usize)> = (1..=iterates)
                    .flat_map(|k| subs.iter().map(move |&i| (i, k)))
                    .collect();
                t.sort_by_key(|&(i, k)| (k, i.abs_diff(pivot), i));
                t
            })
            .collect()
    };

    let mut owner = vec![usize::MAX; n];
    for (p, list) in tasks.iter().enumerate() {
        for &(i, _) in list {
            owner[i - 1] = p;
        }
    }
    Ok(PackedTable { tasks, owner })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn eight_subdomains_four_iterates() {
        // m = 4: worker 1 runs 2 then 1, worker 2 runs 4 then 3,
        // workers 3 and 4 run the odd subdomain first
        let t = packed_table(8, 4, 4).unwrap();
        assert_eq!(t.workers(), 4);
        let firsts: Vec<_> = t.tasks.iter().map(|l| (l[0].0, l[1].0)).collect();
        assert_eq!(firsts, vec![(2, 1), (4, 3), (5, 6), (7, 8)]);
        assert_eq!(t.owner, vec![0, 0, 1, 1, 2, 2, 3, 3]);
    }

    #[test]
    fn odd_pivot_leads_its_pair() {
        // N = 5, m = 3: worker 2 holds 3 and 4, pivot first
        let t = packed_table(5, 2, 3).unwrap();
        assert_eq!(t.workers(), 3);
        assert_eq!(t.tasks[1][..2], [(3, 1), (4, 1)]);
        assert_eq!(t.tasks[0][..2], [(2, 1), (1, 1)]);
        // subdomain 6 does not exist
        assert_eq!(t.tasks[2], vec![(5, 1), (5, 2)]);
    }

    #[test]
    fn few_iterates_share_pairs() {
        let t = packed_table(16, 1, 8).unwrap();
        assert_eq!(t.workers(), 2);
        // pairs by distance from pair 4: 4, 3, 5, 2, 6, 1, 7, 8
        assert_eq!(t.owner, vec![1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1]);
    }

    #[test]
    fn every_task_once_and_in_dependency_order() {
        for n in 1..=9usize {
            for k in 1..=4 {
                let m = n.div_ceil(2);
                let t = packed_table(n, k, m).unwrap();
                let all: BTreeSet<_> = t.tasks.iter().flatten().copied().collect();
                assert_eq!(all.len(), n * k);
                assert_eq!(t.tasks.iter().map(Vec::len).sum::<usize>(), n * k);
                for list in &t.tasks {
                    for w in list.windows(2) {
                        let key = |(i, k): (usize, usize)| (k, i.abs_diff(m));
                        assert!(key(w[0]) <= key(w[1]), "n{n} k{k} {list:?}");
                    }
                }
                let expected = if 2 * k >= n.div_ceil(2) { n.div_ceil(2) } else { 2 * k };
                assert_eq!(t.workers(), expected);
            }
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(packed_table(0, 1, 1).is_err());
        assert!(packed_table(4, 0, 1).is_err());
        assert!(packed_table(4, 1, 5).is_err());
    }
}
