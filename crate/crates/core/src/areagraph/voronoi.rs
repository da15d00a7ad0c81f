use serde::{Deserialize, Serialize};

use super::map::{squared_edt, GridMap2D, NEIGHBORS8};

/// A free cell equidistant (within tolerance) from two separate walls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub cell: usize,
    /// Distance to the nearest occupied cell, in cells.
    pub clearance: f64,
    /// Two non-adjacent occupied cells on opposite sides, both within the
    /// tolerance of the clearance.
    pub sites: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiDiagram2D {
    pub width: usize,
    pub height: usize,
    /// Sorted by cell index.
    pub waypoints: Vec<Waypoint>,
    /// Squared distance to the nearest occupied cell, per cell.
    pub clearance2: Vec<f64>,
}

impl VoronoiDiagram2D {
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.width * self.height];
        for w in &self.waypoints {
            m[w.cell] = true;
        }
        m
    }

    /// Clearance in cells.
    pub fn clearance(&self, cell: usize) -> f64 {
        self.clearance2[cell].sqrt()
    }
}

const BUCKET: usize = 8;

/// Occupied cells bordering free space, bucketed for range queries.
struct SiteIndex {
    bw: usize,
    bh: usize,
    buckets: Vec<Vec<usize>>,
}

impl SiteIndex {
    fn new(map: &GridMap2D) -> Self {
        let bw = map.width.div_ceil(BUCKET);
        let bh = map.height.div_ceil(BUCKET);
        let mut buckets = vec![Vec::new(); bw * bh];
        for y in 0..map.height {
            for x in 0..map.width {
                if !map.is_free(x, y) && map.neighbors8(x, y).any(|(nx, ny)| map.is_free(nx, ny)) {
                    buckets[(y / BUCKET) * bw + x / BUCKET].push(map.idx(x, y));
                }
            }
        }
        SiteIndex { bw, bh, buckets }
    }

    /// Sites within `r` cells of `(x, y)`, as (squared distance, cell).
    fn within(&self, width: usize, x: usize, y: usize, r: f64, out: &mut Vec<(f64, usize)>) {
        out.clear();
        let r2 = r * r + 1e-9;
        let span = |c: usize, n: usize| {
            let lo = ((c as f64 - r).floor().max(0.0) as usize) / BUCKET;
            let hi = (((c as f64 + r).ceil() as usize) / BUCKET).min(n - 1);
            lo..=hi
        };
        for by in span(y, self.bh) {
            for bx in span(x, self.bw) {
                for &s in &self.buckets[by * self.bw + bx] {
                    let (sx, sy) = ((s % width) as f64, (s / width) as f64);
                    let d2 = (sx - x as f64).powi(2) + (sy - y as f64).powi(2);
                    if d2 <= r2 {
                        out.push((d2, s));
                    }
                }
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }
}

/// Free cells whose nearest walls lie on opposite sides: some two sites within
/// `clearance + tol` cells are not 8-adjacent and subtend an obtuse angle at
/// the cell. Not thinned.
pub fn voronoi_candidates(map: &GridMap2D, tol: f64) -> VoronoiDiagram2D {
    let occupied: Vec<bool> = map.free.iter().map(|f| !f).collect();
    let clearance2 = squared_edt(map.width, map.height, &occupied);
    let index = SiteIndex::new(map);
    let mut waypoints = Vec::new();
    let mut near = Vec::new();
    let w = map.width;
    for y in 0..map.height {
        for x in 0..w {
            let i = map.idx(x, y);
            if !map.free[i] || !clearance2[i].is_finite() {
                continue;
            }
            let d1 = clearance2[i].sqrt();
            index.within(w, x, y, d1 + tol, &mut near);
            if let Some(sites) = opposite_pair(w, x, y, &near) {
                waypoints.push(Waypoint {
                    cell: i,
                    clearance: d1,
                    sites,
                });
            }
        }
    }
    VoronoiDiagram2D {
        width: map.width,
        height: map.height,
        waypoints,
        clearance2,
    }
}

fn opposite_pair(w: usize, x: usize, y: usize, near: &[(f64, usize)]) -> Option<[usize; 2]> {
    let rel = |s: usize| ((s % w) as i64 - x as i64, (s / w) as i64 - y as i64);
    for (i, &(_, a)) in near.iter().enumerate() {
        let (ax, ay) = rel(a);
        for &(_, b) in &near[i + 1..] {
            let (bx, by) = rel(b);
            let adjacent = (ax - bx).abs() <= 1 && (ay - by).abs() <= 1;
            if !adjacent && ax * bx + ay * by < 0 {
                return Some([a, b]);
            }
        }
    }
    None
}

/// Waypoints thinned to a one-cell-wide, topology-preserving skeleton.
pub fn voronoi(map: &GridMap2D, tol: f64) -> VoronoiDiagram2D {
    let mut vd = voronoi_candidates(map, tol);
    let mut mask = vd.mask();
    thin(vd.width, vd.height, &mut mask);
    vd.waypoints.retain(|w| mask[w.cell]);
    vd
}

fn ring(mask: &[bool], w: usize, h: usize, i: usize) -> [bool; 8] {
    let (x, y) = ((i % w) as i64, (i / w) as i64);
    NEIGHBORS8.map(|(dx, dy)| {
        let (nx, ny) = (x + dx, y + dy);
        nx >= 0
            && ny >= 0
            && (nx as usize) < w
            && (ny as usize) < h
            && mask[ny as usize * w + nx as usize]
    })
}

/// Yokoi's 8-connectivity number; 1 means deleting the cell keeps topology.
fn connectivity_number(r: &[bool; 8]) -> u32 {
    let b = |k: usize| !r[k % 8] as u32;
    (0..8)
        .step_by(2)
        .map(|k| b(k) - b(k) * b(k + 1) * b(k + 2))
        .sum()
}

/// Directional sequential thinning: peel simple, non-end cells from the east,
/// north, west and south sides in turn until nothing changes.
pub(crate) fn thin(w: usize, h: usize, mask: &mut [bool]) {
    loop {
        let mut changed = false;
        for side in [0usize, 2, 4, 6] {
            let candidates: Vec<usize> = (0..w * h)
                .filter(|&i| mask[i] && !ring(mask, w, h, i)[side])
                .collect();
            for i in candidates {
                let r = ring(mask, w, h, i);
                let n = r.iter().filter(|&&b| b).count();
                if n >= 2 && connectivity_number(&r) == 1 {
                    mask[i] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}
