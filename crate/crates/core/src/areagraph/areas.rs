use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::map::{GridMap2D, NEIGHBORS8};
use super::polygon::chain_segments;
use super::topology::TopologyGraph2D;

/// Shared boundary of two areas, as unit segments between map cell corners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaPassage {
    pub a: u32,
    pub b: u32,
    /// Sorted.
    pub segments: Vec<[[i64; 2]; 2]>,
}

impl AreaPassage {
    pub fn polylines(&self) -> Vec<Vec<[i64; 2]>> {
        chain_segments(&self.segments)
    }
}

/// A labeling of the free cells of a map into areas `1..=area_count`
/// (0 marks occupied cells), with the passages between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaGraph2D {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub area_count: u32,
    pub passages: Vec<AreaPassage>,
}

impl AreaGraph2D {
    /// Renumbers labels by first appearance in row-major order and derives the
    /// passages.
    pub fn from_labels(width: usize, height: usize, labels: &[u32]) -> Self {
        let mut remap: BTreeMap<u32, u32> = BTreeMap::new();
        let mut out = Vec::with_capacity(labels.len());
        for &l in labels {
            if l == 0 {
                out.push(0);
                continue;
            }
            let next = remap.len() as u32 + 1;
            out.push(*remap.entry(l).or_insert(next));
        }
        let passages = area_passages(width, height, &out);
        AreaGraph2D {
            width,
            height,
            area_count: remap.len() as u32,
            labels: out,
            passages,
        }
    }

    /// Cell count per label, index 0 unused.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.area_count as usize + 1];
        for &l in &self.labels {
            s[l as usize] += 1;
        }
        s[0] = 0;
        s
    }
}

/// Grid-adjacent cells with different nonzero labels, grouped by label pair.
pub fn area_passages(width: usize, height: usize, labels: &[u32]) -> Vec<AreaPassage> {
    let mut pairs: BTreeMap<(u32, u32), Vec<[[i64; 2]; 2]>> = BTreeMap::new();
    for y in 0..height {
        for x in 0..width {
            let l = labels[y * width + x];
            if l == 0 {
                continue;
            }
            let (xi, yi) = (x as i64, y as i64);
            if x + 1 < width {
                let r = labels[y * width + x + 1];
                if r != 0 && r != l {
                    pairs
                        .entry((l.min(r), l.max(r)))
                        .or_default()
                        .push([[xi + 1, yi], [xi + 1, yi + 1]]);
                }
            }
            if y + 1 < height {
                let u = labels[(y + 1) * width + x];
                if u != 0 && u != l {
                    pairs
                        .entry((l.min(u), l.max(u)))
                        .or_default()
                        .push([[xi, yi + 1], [xi + 1, yi + 1]]);
                }
            }
        }
    }
    pairs
        .into_iter()
        .map(|((a, b), mut segments)| {
            segments.sort_unstable();
            AreaPassage { a, b, segments }
        })
        .collect()
}

const STEP: u64 = 1000;
const DIAG: u64 = 1414;

/// Labels each free cell with `1 + id` of the topology edge whose waypoints
/// are nearest, measuring distance through free space (8-connected chamfer
/// steps, no corner cutting between two occupied cells). Ties go to the
/// smaller edge id. Free components no edge reaches get a label each.
pub fn label_cells(map: &GridMap2D, tg: &TopologyGraph2D) -> Vec<u32> {
    let n = map.width * map.height;
    let mut dist = vec![u64::MAX; n];
    let mut label = vec![0u32; n];
    let mut heap = BinaryHeap::new();
    for e in &tg.edges {
        for c in tg.edge_waypoints(e) {
            if map.free[c] {
                heap.push(Reverse((0u64, e.id + 1, c)));
            }
        }
    }
    while let Some(Reverse((d, l, c))) = heap.pop() {
        if label[c] != 0 {
            continue;
        }
        label[c] = l;
        dist[c] = d;
        let (x, y) = map.xy(c);
        for (k, &(dx, dy)) in NEIGHBORS8.iter().enumerate() {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx < 0 || ny < 0 || nx as usize >= map.width || ny as usize >= map.height {
                continue;
            }
            let j = map.idx(nx as usize, ny as usize);
            if !map.free[j] || label[j] != 0 {
                continue;
            }
            let diagonal = k % 2 == 1;
            if diagonal && !map.is_free(nx as usize, y) && !map.is_free(x, ny as usize) {
                continue;
            }
            let nd = d + if diagonal { DIAG } else { STEP };
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(Reverse((nd, l, j)));
            }
        }
    }
    let mut next = tg.edges.len() as u32 + 1;
    for s in 0..n {
        if !map.free[s] || label[s] != 0 {
            continue;
        }
        label[s] = next;
        let mut stack = vec![s];
        while let Some(c) = stack.pop() {
            let (x, y) = map.xy(c);
            for (nx, ny) in map.neighbors4(x, y) {
                let j = map.idx(nx, ny);
                if map.free[j] && label[j] == 0 {
                    label[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    label
}

pub fn area_graph(tg: &TopologyGraph2D, map: &GridMap2D) -> AreaGraph2D {
    AreaGraph2D::from_labels(map.width, map.height, &label_cells(map, tg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::areagraph::topology::topology_graph;
    use crate::areagraph::voronoi::voronoi;

    fn build(rows: &[&str]) -> (GridMap2D, AreaGraph2D) {
        let m = GridMap2D::from_ascii(rows, 0.1);
        let tg = topology_graph(&voronoi(&m, 1.0), 4);
        let ag = area_graph(&tg, &m);
        (m, ag)
    }

    fn assert_partition(m: &GridMap2D, ag: &AreaGraph2D) {
        for i in 0..m.free.len() {
            assert_eq!(m.free[i], ag.labels[i] != 0);
        }
    }

    fn plus(arm: usize, width: usize) -> Vec<String> {
        let n = 2 * arm + width + 2;
        (0..n)
            .map(|y| {
                (0..n)
                    .map(|x| {
                        let inner = |v: usize| v >= 1 && v <= n - 2;
                        let band = |v: usize| v > arm && v <= arm + width;
                        if inner(x) && inner(y) && (band(x) || band(y)) {
                            '.'
                        } else {
                            '#'
                        }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn plus_has_four_areas() {
        let rows = plus(12, 5);
        let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        let (m, ag) = build(&refs);
        assert_partition(&m, &ag);
        assert_eq!(ag.area_count, 4);
        assert!(ag.passages.len() >= 4);
        // every arm touches both of its cyclic neighbors
        let arm_label = |x: usize, y: usize| ag.labels[m.idx(x, y)];
        let c = 12 + 3;
        let (e, n, w, s) = (
            arm_label(m.width - 3, c),
            arm_label(c, m.height - 3),
            arm_label(2, c),
            arm_label(c, 2),
        );
        let has = |a: u32, b: u32| {
            ag.passages
                .iter()
                .any(|p| (p.a, p.b) == (a.min(b), a.max(b)))
        };
        assert!(has(e, n) && has(n, w) && has(w, s) && has(s, e));
    }

    #[test]
    fn straight_corridor_is_one_area() {
        let (m, ag) = build(&[
            "##################",
            "#................#",
            "#................#",
            "#................#",
            "##################",
        ]);
        assert_partition(&m, &ag);
        assert_eq!(ag.area_count, 1);
        assert!(ag.passages.is_empty());
    }

    #[test]
    fn rooms_and_corridor_give_three_areas() {
        let mut rows = Vec::new();
        rows.push("#".repeat(40));
        for y in 1..12 {
            let mut r = String::new();
            for x in 0..40 {
                let room = (1..12).contains(&x) || (28..39).contains(&x);
                let corridor = (12..28).contains(&x) && (5..8).contains(&y);
                r.push(if room || corridor { '.' } else { '#' });
            }
            rows.push(r);
        }
        rows.push("#".repeat(40));
        let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        let (m, ag) = build(&refs);
        assert_partition(&m, &ag);
        assert_eq!(ag.area_count, 3);
        assert_eq!(ag.passages.len(), 2);
    }

    #[test]
    fn corridor_tee_splits_in_three() {
        let (w, bar, stem) = (5usize, 36usize, 18usize);
        let mut rows = vec!["#".repeat(bar + 2)];
        for _ in 0..w {
            rows.push(format!("#{}#", ".".repeat(bar)));
        }
        let left = (bar + 2 - w) / 2;
        for _ in 0..stem {
            rows.push(format!(
                "{}{}{}",
                "#".repeat(left),
                ".".repeat(w),
                "#".repeat(bar + 2 - left - w)
            ));
        }
        rows.push("#".repeat(bar + 2));
        let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        let (m, ag) = build(&refs);
        assert_partition(&m, &ag);
        assert_eq!(ag.area_count, 3);
        // each area is one 4-connected piece
        for l in 1..=ag.area_count {
            let cells: Vec<usize> = (0..ag.labels.len())
                .filter(|&i| ag.labels[i] == l)
                .collect();
            let mut seen = vec![cells[0]];
            let mut k = 0;
            while k < seen.len() {
                let (x, y) = m.xy(seen[k]);
                k += 1;
                for (nx, ny) in m.neighbors4(x, y) {
                    let j = m.idx(nx, ny);
                    if ag.labels[j] == l && !seen.contains(&j) {
                        seen.push(j);
                    }
                }
            }
            assert_eq!(seen.len(), cells.len());
        }
    }

    #[test]
    fn labels_renumbered_by_first_appearance() {
        let ag = AreaGraph2D::from_labels(3, 1, &[7, 0, 2]);
        assert_eq!(ag.labels, vec![1, 0, 2]);
        assert_eq!(ag.area_count, 2);
    }
}
