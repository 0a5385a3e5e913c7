//! 8-connected labeling on row-major grids.

use std::collections::VecDeque;

const NEIGHBORS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

pub(crate) fn neighbors(index: usize, width: usize, height: usize) -> impl Iterator<Item = usize> {
    let (c, r) = ((index % width) as isize, (index / width) as isize);
    NEIGHBORS.iter().filter_map(move |&(dc, dr)| {
        let (nc, nr) = (c + dc, r + dr);
        (nc >= 0 && nr >= 0 && (nc as usize) < width && (nr as usize) < height)
            .then(|| nr as usize * width + nc as usize)
    })
}

/// Connected components of cells with a nonzero class; neighbors join only
/// when their classes match. Components come out in order of their first
/// cell, each sorted ascending.
pub(crate) fn components(width: usize, height: usize, class: &[i8]) -> Vec<Vec<usize>> {
    debug_assert_eq!(class.len(), width * height);
    let mut seen = vec![false; class.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..class.len() {
        if class[start] == 0 || seen[start] {
            continue;
        }
        let label = class[start];
        seen[start] = true;
        queue.push_back(start);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push(i);
            for n in neighbors(i, width, height) {
                if !seen[n] && class[n] == label {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_cells_join() {
        #[rustfmt::skip]
        let grid = [
            1, 0, 0, 0,
            0, 1, 0, -1,
            0, 0, 0, -1,
        ];
        let comps = components(4, 3, &grid);
        assert_eq!(comps, vec![vec![0, 5], vec![7, 11]]);
    }

    #[test]
    fn opposite_signs_stay_apart() {
        let comps = components(3, 1, &[1, -1, 1]);
        assert_eq!(comps.len(), 3);
    }

    #[test]
    fn corner_has_three_neighbors() {
        assert_eq!(neighbors(0, 3, 3).count(), 3);
        assert_eq!(neighbors(4, 3, 3).count(), 8);
    }
}
