use serde::{Deserialize, Serialize};

use super::map::NEIGHBORS8;
use super::voronoi::VoronoiDiagram2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexKind {
    DeadEnd,
    Junction,
    /// A skeleton component without branches or ends.
    Isolated,
    /// Arbitrary cut point of a closed loop.
    Loop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoVertex {
    pub id: u32,
    pub kind: VertexKind,
    /// Cell indices, ascending.
    pub cells: Vec<usize>,
}

/// A degree-2 waypoint chain between two vertices (possibly the same one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoEdge {
    pub id: u32,
    pub a: u32,
    pub b: u32,
    /// Interior chain cells in walking order from `a`.
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyGraph2D {
    pub width: usize,
    pub height: usize,
    pub vertices: Vec<TopoVertex>,
    pub edges: Vec<TopoEdge>,
}

impl TopologyGraph2D {
    pub fn degree(&self, v: u32) -> usize {
        self.edges
            .iter()
            .map(|e| (e.a == v) as usize + (e.b == v) as usize)
            .sum()
    }

    /// Cells that seed the area of edge `e`: its chain plus any non-junction
    /// end vertex.
    pub fn edge_waypoints(&self, e: &TopoEdge) -> Vec<usize> {
        let mut cells = e.cells.clone();
        let mut ends = vec![e.a];
        if e.b != e.a {
            ends.push(e.b);
        }
        for v in ends {
            let v = &self.vertices[v as usize];
            if v.kind != VertexKind::Junction || e.cells.is_empty() && e.a == e.b {
                cells.extend(&v.cells);
            }
        }
        cells.sort_unstable();
        cells.dedup();
        cells
    }
}

fn neighbors(w: usize, h: usize, i: usize) -> impl Iterator<Item = usize> {
    let (x, y) = ((i % w) as i64, (i / w) as i64);
    NEIGHBORS8.iter().filter_map(move |&(dx, dy)| {
        let (nx, ny) = (x + dx, y + dy);
        (nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h)
            .then(|| ny as usize * w + nx as usize)
    })
}

/// Splits a one-cell-wide skeleton into vertices (cells of degree other than
/// two, with touching junction cells merged) and the chains between them.
pub fn decompose(w: usize, h: usize, mask: &[bool]) -> TopologyGraph2D {
    let n = w * h;
    let deg: Vec<usize> = (0..n)
        .map(|i| {
            if mask[i] {
                neighbors(w, h, i).filter(|&j| mask[j]).count()
            } else {
                0
            }
        })
        .collect();
    let mut vertex_of = vec![u32::MAX; n];
    let mut vertices: Vec<TopoVertex> = Vec::new();
    for i in 0..n {
        if !mask[i] || deg[i] == 2 || vertex_of[i] != u32::MAX {
            continue;
        }
        let id = vertices.len() as u32;
        let (kind, cells) = match deg[i] {
            0 => (VertexKind::Isolated, vec![i]),
            1 => (VertexKind::DeadEnd, vec![i]),
            _ => {
                let mut cells = vec![i];
                vertex_of[i] = id;
                let mut k = 0;
                while k < cells.len() {
                    let c = cells[k];
                    k += 1;
                    for j in neighbors(w, h, c) {
                        if mask[j] && deg[j] >= 3 && vertex_of[j] == u32::MAX {
                            vertex_of[j] = id;
                            cells.push(j);
                        }
                    }
                }
                cells.sort_unstable();
                (VertexKind::Junction, cells)
            }
        };
        for &c in &cells {
            vertex_of[c] = id;
        }
        vertices.push(TopoVertex { id, kind, cells });
    }

    let mut edges: Vec<TopoEdge> = Vec::new();
    let mut on_chain = vec![false; n];
    let mut direct = std::collections::BTreeSet::new();
    for v in 0..vertices.len() {
        let cells = vertices[v].cells.clone();
        for c in cells {
            for nb in neighbors(w, h, c) {
                if !mask[nb] {
                    continue;
                }
                if vertex_of[nb] != u32::MAX {
                    if vertex_of[nb] != v as u32 {
                        let (a, b) = (v as u32, vertex_of[nb]);
                        direct.insert((a.min(b), a.max(b)));
                    }
                    continue;
                }
                if on_chain[nb] {
                    continue;
                }
                let (end, chain) = walk(w, h, mask, &vertex_of, &mut on_chain, c, nb);
                let end = end.unwrap_or(v as u32);
                edges.push(TopoEdge {
                    id: 0,
                    a: v as u32,
                    b: end,
                    cells: chain,
                });
            }
        }
    }
    for (a, b) in direct {
        edges.push(TopoEdge {
            id: 0,
            a,
            b,
            cells: Vec::new(),
        });
    }
    // closed loops with no vertex on them
    for i in 0..n {
        if mask[i] && vertex_of[i] == u32::MAX && !on_chain[i] {
            let id = vertices.len() as u32;
            vertex_of[i] = id;
            vertices.push(TopoVertex {
                id,
                kind: VertexKind::Loop,
                cells: vec![i],
            });
            let start = neighbors(w, h, i).find(|&j| mask[j]).unwrap();
            let (_, chain) = walk(w, h, mask, &vertex_of, &mut on_chain, i, start);
            edges.push(TopoEdge {
                id: 0,
                a: id,
                b: id,
                cells: chain,
            });
        }
    }
    let mut graph = TopologyGraph2D {
        width: w,
        height: h,
        vertices,
        edges,
    };
    // a vertex without edges still owns an area
    for v in 0..graph.vertices.len() as u32 {
        if graph.degree(v) == 0 {
            graph.edges.push(TopoEdge {
                id: 0,
                a: v,
                b: v,
                cells: Vec::new(),
            });
        }
    }
    for e in &mut graph.edges {
        if e.a > e.b {
            std::mem::swap(&mut e.a, &mut e.b);
            e.cells.reverse();
        }
    }
    graph
        .edges
        .sort_by(|x, y| (x.a, x.b, x.cells.first()).cmp(&(y.a, y.b, y.cells.first())));
    for (k, e) in graph.edges.iter_mut().enumerate() {
        e.id = k as u32;
    }
    graph
}

/// Follows degree-2 cells from `first` (a neighbor of `from`) until a vertex
/// cell is reached. Returns that vertex (if any) and the chain.
fn walk(
    w: usize,
    h: usize,
    mask: &[bool],
    vertex_of: &[u32],
    on_chain: &mut [bool],
    from: usize,
    first: usize,
) -> (Option<u32>, Vec<usize>) {
    let mut chain = vec![first];
    on_chain[first] = true;
    let (mut prev, mut cur) = (from, first);
    loop {
        // chain cells have degree two, so there is one way on
        match neighbors(w, h, cur).find(|&j| mask[j] && j != prev) {
            Some(j) if vertex_of[j] != u32::MAX => return (Some(vertex_of[j]), chain),
            Some(j) if !on_chain[j] => {
                on_chain[j] = true;
                chain.push(j);
                prev = cur;
                cur = j;
            }
            _ => return (None, chain),
        }
    }
}

/// Iteratively removes spurs (chains from a dead end to a junction) that are
/// shorter than `prune_len` cells, or no longer than the clearance at their
/// junction and ending in a corner (tip clearance at most half of it). The
/// latter are the branches a wall corner adds inside the inscribed disk of a
/// corridor end or junction; a short spur into a room off a corridor stays. Tiny loops hanging off a
/// junction go as well.
pub fn prune_spurs(
    w: usize,
    h: usize,
    mask: &mut [bool],
    clearance: impl Fn(usize) -> f64,
    prune_len: usize,
) {
    loop {
        let g = decompose(w, h, mask);
        let mut remove: Vec<usize> = Vec::new();
        for e in &g.edges {
            let (va, vb) = (&g.vertices[e.a as usize], &g.vertices[e.b as usize]);
            if e.a == e.b && va.kind == VertexKind::Junction && e.cells.len() <= 2 {
                remove.extend(&e.cells);
                continue;
            }
            let (dead, junction) = match (va.kind, vb.kind) {
                (VertexKind::DeadEnd, VertexKind::Junction) => (va, vb),
                (VertexKind::Junction, VertexKind::DeadEnd) => (vb, va),
                _ => continue,
            };
            let len = e.cells.len() + 1;
            let reach = junction
                .cells
                .iter()
                .map(|&c| clearance(c))
                .fold(0.0, f64::max);
            let tip = dead.cells.iter().map(|&c| clearance(c)).fold(0.0, f64::max);
            if len < prune_len || (len as f64 <= reach + 1.0 && tip <= reach / 2.0) {
                remove.extend(&e.cells);
                remove.extend(&dead.cells);
            }
        }
        if remove.is_empty() {
            break;
        }
        for c in remove {
            mask[c] = false;
        }
        super::voronoi::thin(w, h, mask);
    }
}

/// Prunes the diagram's skeleton and decomposes it.
pub fn topology_graph(vd: &VoronoiDiagram2D, prune_len: usize) -> TopologyGraph2D {
    let mut mask = vd.mask();
    prune_spurs(
        vd.width,
        vd.height,
        &mut mask,
        |c| vd.clearance(c),
        prune_len,
    );
    decompose(vd.width, vd.height, &mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::areagraph::map::GridMap2D;
    use crate::areagraph::voronoi::voronoi;

    fn mask_of(rows: &[&str]) -> (usize, usize, Vec<bool>) {
        let w = rows[0].len();
        let mask = rows
            .iter()
            .flat_map(|r| r.bytes().map(|b| b == b'#'))
            .collect();
        (w, rows.len(), mask)
    }

    fn kinds(g: &TopologyGraph2D) -> (usize, usize) {
        let j = g
            .vertices
            .iter()
            .filter(|v| v.kind == VertexKind::Junction)
            .count();
        let d = g
            .vertices
            .iter()
            .filter(|v| v.kind == VertexKind::DeadEnd)
            .count();
        (j, d)
    }

    #[test]
    fn plus_skeleton() {
        let (w, h, mask) = mask_of(&[
            ".....#.....",
            ".....#.....",
            ".....#.....",
            ".....#.....",
            ".....#.....",
            "###########",
            ".....#.....",
            ".....#.....",
            ".....#.....",
            ".....#.....",
            ".....#.....",
        ]);
        let g = decompose(w, h, &mask);
        assert_eq!(kinds(&g), (1, 4));
        assert_eq!(g.edges.len(), 4);
        assert!(g.edges.iter().all(|e| e.cells.len() == 3));
    }

    #[test]
    fn line_skeleton() {
        let (w, h, mask) = mask_of(&["..........", ".########.", ".........."]);
        let g = decompose(w, h, &mask);
        assert_eq!(kinds(&g), (0, 2));
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].cells.len(), 6);
    }

    #[test]
    fn ring_and_dot() {
        let (w, h, mask) = mask_of(&[".###....", "#...#...", ".###...#"]);
        let g = decompose(w, h, &mask);
        assert_eq!(g.vertices.len(), 2);
        assert_eq!(g.edges.len(), 2);
        assert!(g.edges.iter().all(|e| e.a == e.b));
    }

    #[test]
    fn short_spur_is_pruned() {
        let (w, h, mut mask) = mask_of(&[
            "..........#.......",
            "..........#.......",
            "..################",
            "..................",
        ]);
        prune_spurs(w, h, &mut mask, |_| 0.0, 4);
        let g = decompose(w, h, &mask);
        assert_eq!(kinds(&g), (0, 2));
        assert_eq!(g.edges.len(), 1);
    }

    fn corridor_map(rows: &[&str]) -> GridMap2D {
        GridMap2D::from_ascii(rows, 0.1)
    }

    #[test]
    fn plus_corridor_graph() {
        let mut rows = Vec::new();
        let arm = "############.....############";
        let bar = "#...........................#";
        rows.push("#############################".to_string());
        for _ in 0..12 {
            rows.push(arm.to_string());
        }
        for _ in 0..5 {
            rows.push(bar.to_string());
        }
        for _ in 0..12 {
            rows.push(arm.to_string());
        }
        rows.push("#############################".to_string());
        rows[0] = "#############################".into();
        let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        // close the vertical arms at both ends
        let mut m = corridor_map(&refs);
        for x in 0..m.width {
            let (top, bottom) = (m.idx(x, 1), m.idx(x, m.height - 2));
            m.free[top] = false;
            m.free[bottom] = false;
        }
        let g = topology_graph(&voronoi(&m, 1.0), 4);
        assert_eq!(kinds(&g), (1, 4));
        assert_eq!(g.edges.len(), 4);
    }

    #[test]
    fn nub_does_not_change_corridor_graph() {
        let clean = corridor_map(&[
            "######################",
            "#....................#",
            "#....................#",
            "#....................#",
            "######################",
        ]);
        let nub = corridor_map(&[
            "##########.###########",
            "#....................#",
            "#....................#",
            "#....................#",
            "######################",
        ]);
        let a = topology_graph(&voronoi(&clean, 1.0), 4);
        let b = topology_graph(&voronoi(&nub, 1.0), 4);
        assert_eq!(kinds(&a), (0, 2));
        assert_eq!(kinds(&b), kinds(&a));
        assert_eq!(b.edges.len(), 1);
    }
}
