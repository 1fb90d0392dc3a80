//! Independent reference implementations used as oracles. These stay
//! deliberately naive and separate from the library's code paths.

// Each test binary compiles this module and uses a different subset.
#![allow(dead_code)]

use std::collections::HashMap;

use notikb_core::discovery::{ClusterConfig, Clustering};
use notikb_core::{relative_edit_distance, Token, TokenSeq};

/// Textbook recursive Levenshtein with memoization, word-level unit costs.
pub fn reference_levenshtein(a: &[Token], b: &[Token]) -> usize {
    fn go(
        a: &[Token],
        b: &[Token],
        i: usize,
        j: usize,
        memo: &mut HashMap<(usize, usize), usize>,
    ) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&d) = memo.get(&(i, j)) {
            return d;
        }
        let substitute = go(a, b, i + 1, j + 1, memo) + usize::from(a[i] != b[j]);
        let delete = go(a, b, i + 1, j, memo) + 1;
        let insert = go(a, b, i, j + 1, memo) + 1;
        let d = substitute.min(delete).min(insert);
        memo.insert((i, j), d);
        d
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

/// Exhaustive longest-common-subsequence length: enumerate every
/// subsequence of `a` (2^|a|) and check it against `b`. Only usable for
/// short sequences.
pub fn brute_force_lcs_len(a: &[Token], b: &[Token]) -> usize {
    assert!(a.len() <= 20, "exponential oracle");
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let candidate: Vec<&Token> = (0..a.len())
            .filter(|&k| mask & (1 << k) != 0)
            .map(|k| &a[k])
            .collect();
        if candidate.len() <= best {
            continue;
        }
        if is_subsequence(&candidate, b) {
            best = candidate.len();
        }
    }
    best
}

pub fn is_subsequence(needle: &[&Token], haystack: &[Token]) -> bool {
    let mut it = haystack.iter();
    needle.iter().all(|n| it.any(|h| h == *n))
}

/// Naive quadratic DBSCAN that recomputes neighborhoods on demand. Visits
/// points in index order and expands clusters breadth-first, the same
/// deterministic convention as the library, so outputs are comparable
/// exactly.
pub fn naive_dbscan(items: &[&TokenSeq], config: &ClusterConfig) -> Clustering {
    let n = items.len();
    let neighbors = |p: usize| -> Vec<usize> {
        (0..n)
            .filter(|&q| {
                relative_edit_distance(items[p], items[q]).expect("non-empty") <= config.delta
            })
            .collect()
    };

    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Unvisited,
        Noise,
        Cluster(usize),
    }
    let mut state = vec![State::Unvisited; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();

    for p in 0..n {
        if state[p] != State::Unvisited {
            continue;
        }
        let seeds = neighbors(p);
        if seeds.len() < config.min_pts {
            state[p] = State::Noise;
            continue;
        }
        let id = clusters.len();
        clusters.push(vec![p]);
        state[p] = State::Cluster(id);
        let mut queue: std::collections::VecDeque<usize> = seeds.into();
        while let Some(q) = queue.pop_front() {
            match state[q] {
                State::Noise => {
                    state[q] = State::Cluster(id);
                    clusters[id].push(q);
                }
                State::Unvisited => {
                    state[q] = State::Cluster(id);
                    clusters[id].push(q);
                    let q_neighbors = neighbors(q);
                    if q_neighbors.len() >= config.min_pts {
                        queue.extend(q_neighbors);
                    }
                }
                State::Cluster(_) => {}
            }
        }
    }

    let mut noise: Vec<usize> = (0..n)
        .filter(|&p| state[p] == State::Noise)
        .collect();
    noise.sort_unstable();
    for members in &mut clusters {
        members.sort_unstable();
    }
    Clustering { clusters, noise }
}

/// Compare clusterings as partitions: same noise set and same family of
/// clusters regardless of cluster numbering.
pub fn same_clustering(a: &Clustering, b: &Clustering) -> bool {
    use std::collections::BTreeSet;
    let family = |c: &Clustering| -> BTreeSet<Vec<usize>> {
        c.clusters.iter().cloned().collect()
    };
    a.noise == b.noise && family(a) == family(b)
}
