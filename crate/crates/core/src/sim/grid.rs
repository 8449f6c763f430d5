//! Occupancy grid and 4-connected shortest paths.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use super::Cell;

/// Neighbor expansion order; fixed so paths are reproducible.
const STEPS: [[i64; 2]; 4] = [[1, 0], [-1, 0], [0, 1], [0, -1]];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    pub width: i64,
    pub height: i64,
    obstacles: BTreeSet<Cell>,
}

impl Grid {
    pub fn new(width: i64, height: i64, obstacles: impl IntoIterator<Item = Cell>) -> Self {
        Grid { width, height, obstacles: obstacles.into_iter().collect() }
    }

    pub fn in_bounds(&self, [x, y]: Cell) -> bool {
        (0..self.width).contains(&x) && (0..self.height).contains(&y)
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        self.in_bounds(cell) && !self.obstacles.contains(&cell)
    }

    pub fn obstacles(&self) -> impl Iterator<Item = &Cell> {
        self.obstacles.iter()
    }

    fn index(&self, [x, y]: Cell) -> usize {
        (y * self.width + x) as usize
    }

    /// Shortest obstacle-free path from `from` to `to`, both included.
    /// `None` when either end is blocked or no path exists.
    pub fn bfs_path(&self, from: Cell, to: Cell) -> Option<Vec<Cell>> {
        if !self.is_free(from) || !self.is_free(to) {
            return None;
        }
        let mut parent: Vec<Option<Cell>> = vec![None; (self.width * self.height) as usize];
        let mut seen = vec![false; parent.len()];
        let mut queue = VecDeque::from([from]);
        seen[self.index(from)] = true;
        while let Some(cell) = queue.pop_front() {
            if cell == to {
                let mut path = vec![to];
                let mut cur = to;
                while let Some(p) = parent[self.index(cur)] {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            for [dx, dy] in STEPS {
                let next = [cell[0] + dx, cell[1] + dy];
                if self.is_free(next) && !seen[self.index(next)] {
                    seen[self.index(next)] = true;
                    parent[self.index(next)] = Some(cell);
                    queue.push_back(next);
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BinaryHeap;
    use core::cmp::Reverse;
    use proptest::prelude::*;

    /// Dijkstra with unit weights over the same free cells; independent of
    /// the BFS above.
    fn dijkstra(grid: &Grid, from: Cell, to: Cell) -> Option<usize> {
        if !grid.is_free(from) || !grid.is_free(to) {
            return None;
        }
        let mut dist = alloc::collections::BTreeMap::new();
        let mut heap = BinaryHeap::new();
        dist.insert(from, 0usize);
        heap.push(Reverse((0usize, from)));
        while let Some(Reverse((d, c))) = heap.pop() {
            if c == to {
                return Some(d);
            }
            if dist.get(&c).is_some_and(|&best| d > best) {
                continue;
            }
            for [dx, dy] in [[0, 1], [1, 0], [0, -1], [-1, 0]] {
                let n = [c[0] + dx, c[1] + dy];
                if grid.is_free(n) && dist.get(&n).map_or(true, |&best| d + 1 < best) {
                    dist.insert(n, d + 1);
                    heap.push(Reverse((d + 1, n)));
                }
            }
        }
        None
    }

    fn path_is_valid(grid: &Grid, path: &[Cell], from: Cell, to: Cell) -> bool {
        path.first() == Some(&from)
            && path.last() == Some(&to)
            && path.iter().all(|c| grid.is_free(*c))
            && path.windows(2).all(|w| (w[0][0] - w[1][0]).abs() + (w[0][1] - w[1][1]).abs() == 1)
    }

    #[test]
    fn straight_line_on_free_grid() {
        let g = Grid::new(10, 10, []);
        let p = g.bfs_path([0, 0], [3, 0]).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.len() - 1, 3);
    }

    #[test]
    fn enclosed_target_is_unreachable() {
        let g = Grid::new(5, 5, [[1, 2], [3, 2], [2, 1], [2, 3]]);
        assert!(g.bfs_path([0, 0], [2, 2]).is_none());
        assert!(g.bfs_path([0, 0], [1, 2]).is_none(), "target on obstacle");
    }

    fn grid() -> impl Strategy<Value = (Grid, Cell, Cell)> {
        (1i64..=20, 1i64..=20).prop_flat_map(|(w, h)| {
            (
                proptest::collection::vec((0..w, 0..h), 0..((w * h) as usize / 2 + 1)),
                (0..w, 0..h),
                (0..w, 0..h),
            )
                .prop_map(move |(obs, a, b)| {
                    let obstacles = obs.into_iter().map(|(x, y)| [x, y]).filter(|c| *c != [a.0, a.1] && *c != [b.0, b.1]);
                    (Grid::new(w, h, obstacles), [a.0, a.1], [b.0, b.1])
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn bfs_is_valid_and_minimal((g, a, b) in grid()) {
            let got = g.bfs_path(a, b);
            let oracle = dijkstra(&g, a, b);
            prop_assert_eq!(got.as_ref().map(|p| p.len() - 1), oracle);
            if let Some(p) = got {
                prop_assert!(path_is_valid(&g, &p, a, b));
                let manhattan = ((a[0] - b[0]).abs() + (a[1] - b[1]).abs()) as usize;
                prop_assert!(p.len() - 1 >= manhattan);
            }
        }
    }
}
