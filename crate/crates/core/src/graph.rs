//! Reachability over state graphs given as index edge lists.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

/// States reachable from `start` following `edges` forward.
pub fn reachable_from(nodes: usize, edges: &[(usize, usize)], start: usize) -> Vec<bool> {
    let mut adj = vec![Vec::new(); nodes];
    for &(a, b) in edges {
        adj[a].push(b);
    }
    flood(&adj, [start])
}

/// States from which at least one of `targets` is reachable.
pub fn can_reach(nodes: usize, edges: &[(usize, usize)], targets: &[usize]) -> Vec<bool> {
    let mut rev = vec![Vec::new(); nodes];
    for &(a, b) in edges {
        rev[b].push(a);
    }
    flood(&rev, targets.iter().copied())
}

fn flood(adj: &[Vec<usize>], seeds: impl IntoIterator<Item = usize>) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::new();
    for s in seeds {
        if s < adj.len() && !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(n) = queue.pop_front() {
        for &m in &adj[n] {
            if !seen[m] {
                seen[m] = true;
                queue.push_back(m);
            }
        }
    }
    seen
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReachabilityIssues {
    /// Not reachable from the initial state.
    pub unreachable: Vec<usize>,
    /// No terminal reachable from here.
    pub dead_ends: Vec<usize>,
}

impl ReachabilityIssues {
    pub fn is_clean(&self) -> bool {
        self.unreachable.is_empty() && self.dead_ends.is_empty()
    }
}

pub fn check_reachability(
    nodes: usize,
    edges: &[(usize, usize)],
    initial: usize,
    terminals: &[usize],
) -> ReachabilityIssues {
    let forward = reachable_from(nodes, edges, initial);
    let backward = can_reach(nodes, edges, terminals);
    ReachabilityIssues {
        unreachable: (0..nodes).filter(|&n| !forward[n]).collect(),
        dead_ends: (0..nodes).filter(|&n| !backward[n]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Warshall transitive closure, independent of the BFS above.
    fn closure(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
        let mut r = vec![vec![false; n]; n];
        for (i, row) in r.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(a, b) in edges {
            r[a][b] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if r[i][k] {
                    for j in 0..n {
                        if r[k][j] {
                            r[i][j] = true;
                        }
                    }
                }
            }
        }
        r
    }

    fn digraph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>, usize, Vec<usize>)> {
        (1usize..=12).prop_flat_map(|n| {
            (
                Just(n),
                proptest::collection::vec((0..n, 0..n), 0..30),
                0..n,
                proptest::collection::vec(0..n, 1..4),
            )
        })
    }

    proptest! {
        #[test]
        fn agrees_with_closure_oracle((n, edges, init, terms) in digraph()) {
            let got = check_reachability(n, &edges, init, &terms);
            let r = closure(n, &edges);
            let unreachable: Vec<usize> = (0..n).filter(|&s| !r[init][s]).collect();
            let dead: Vec<usize> = (0..n).filter(|&s| !terms.iter().any(|&t| r[s][t])).collect();
            prop_assert_eq!(got.unreachable, unreachable);
            prop_assert_eq!(got.dead_ends, dead);
        }
    }

    #[test]
    fn state_with_no_path_to_terminal() {
        // 0 -> 1 -> 2(terminal), 0 -> 3, 3 loops on itself
        let edges = [(0, 1), (1, 2), (0, 3), (3, 3)];
        let issues = check_reachability(4, &edges, 0, &[2]);
        assert_eq!(issues.dead_ends, vec![3]);
        assert!(issues.unreachable.is_empty());
    }
}
