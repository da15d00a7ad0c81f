//! Cell-set outlines and segment chaining on the integer corner lattice.

use std::collections::BTreeMap;

/// Closed outlines of the cells for which `inside(x, y)` holds, over the box
/// `[0, w) x [0, h)`. Each loop runs with the cells on its left (outer
/// boundaries counter-clockwise, holes clockwise, with y pointing up) and has
/// collinear corners removed. Loops are ordered by their smallest corner.
pub fn boundary_loops(
    w: usize,
    h: usize,
    inside: impl Fn(usize, usize) -> bool,
) -> Vec<Vec<[i64; 2]>> {
    let at = |x: i64, y: i64| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && inside(x as usize, y as usize)
    };
    let mut out_edges: BTreeMap<[i64; 2], Vec<[i64; 2]>> = BTreeMap::new();
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if !at(x, y) {
                continue;
            }
            let mut add = |a: [i64; 2], b: [i64; 2]| out_edges.entry(a).or_default().push(b);
            if !at(x, y - 1) {
                add([x, y], [x + 1, y]);
            }
            if !at(x + 1, y) {
                add([x + 1, y], [x + 1, y + 1]);
            }
            if !at(x, y + 1) {
                add([x + 1, y + 1], [x, y + 1]);
            }
            if !at(x - 1, y) {
                add([x, y + 1], [x, y]);
            }
        }
    }
    let mut loops = Vec::new();
    while let Some((&start, _)) = out_edges.iter().find(|(_, v)| !v.is_empty()) {
        let mut lp = vec![start];
        let mut cur = start;
        let mut dir: Option<[i64; 2]> = None;
        loop {
            let outs = out_edges.get_mut(&cur).unwrap();
            let k = match dir {
                Some(d) if outs.len() > 1 => {
                    // at a pinch corner turn left so diagonal cells stay apart
                    let left = [-d[1], d[0]];
                    outs.iter()
                        .position(|n| [n[0] - cur[0], n[1] - cur[1]] == left)
                        .unwrap_or(0)
                }
                _ => 0,
            };
            let next = outs.swap_remove(k);
            dir = Some([next[0] - cur[0], next[1] - cur[1]]);
            cur = next;
            if cur == start {
                break;
            }
            lp.push(cur);
        }
        loops.push(simplify_closed(lp));
    }
    loops
}

fn collinear(a: [i64; 2], b: [i64; 2], c: [i64; 2]) -> bool {
    (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) == 0
}

fn simplify_closed(pts: Vec<[i64; 2]>) -> Vec<[i64; 2]> {
    let n = pts.len();
    let keep: Vec<[i64; 2]> = (0..n)
        .filter(|&i| !collinear(pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]))
        .map(|i| pts[i])
        .collect();
    // start at the smallest corner for a canonical form
    let m = keep
        .iter()
        .enumerate()
        .min_by_key(|(_, p)| **p)
        .map(|(i, _)| i)
        .unwrap_or(0);
    keep[m..].iter().chain(&keep[..m]).copied().collect()
}

/// Joins unit segments into maximal poly-lines. Open chains start at their
/// smaller end; closed chains repeat their first point at the end.
pub fn chain_segments(segments: &[[[i64; 2]; 2]]) -> Vec<Vec<[i64; 2]>> {
    let mut adj: BTreeMap<[i64; 2], Vec<usize>> = BTreeMap::new();
    for (i, s) in segments.iter().enumerate() {
        adj.entry(s[0]).or_default().push(i);
        adj.entry(s[1]).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();
    let follow = |start: [i64; 2], used: &mut Vec<bool>| {
        let mut line = vec![start];
        let mut cur = start;
        while let Some(&i) = adj[&cur].iter().find(|&&i| !used[i]) {
            used[i] = true;
            let s = segments[i];
            cur = if s[0] == cur { s[1] } else { s[0] };
            line.push(cur);
            if adj[&cur].len() != 2 {
                break;
            }
        }
        line
    };
    let ends: Vec<[i64; 2]> = adj
        .iter()
        .filter(|(_, v)| v.len() != 2)
        .map(|(p, _)| *p)
        .collect();
    for p in ends {
        while adj[&p].iter().any(|&i| !used[i]) {
            out.push(follow(p, &mut used));
        }
    }
    while let Some(i) = (0..segments.len()).find(|&i| !used[i]) {
        let start = segments[i][0].min(segments[i][1]);
        out.push(follow(start, &mut used));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_outline() {
        let loops = boundary_loops(3, 3, |x, y| x == 1 && y == 1);
        assert_eq!(loops, vec![vec![[1, 1], [2, 1], [2, 2], [1, 2]]]);
    }

    #[test]
    fn ring_has_hole() {
        let loops = boundary_loops(3, 3, |x, y| !(x == 1 && y == 1));
        assert_eq!(loops.len(), 2);
        assert_eq!(loops[0], vec![[0, 0], [3, 0], [3, 3], [0, 3]]);
        assert_eq!(loops[1].len(), 4);
    }

    #[test]
    fn diagonal_cells_stay_separate() {
        let loops = boundary_loops(2, 2, |x, y| x == y);
        assert_eq!(loops.len(), 2);
    }

    #[test]
    fn segments_join() {
        let segs = [[[0, 0], [0, 1]], [[0, 2], [0, 1]], [[5, 5], [6, 5]]];
        let lines = chain_segments(&segs);
        assert_eq!(
            lines,
            vec![vec![[0, 0], [0, 1], [0, 2]], vec![[5, 5], [6, 5]]]
        );
    }
}
