//! Volume graph edges. Every pair of horizontally adjacent columns in
//! different volumes contributes the shared vertical voxel faces of their
//! overlapping layers; the face corners of each volume pair are clustered by
//! distance, and each cluster becomes one passage (a quad mesh).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::columns::ColumnField;
use crate::grid::GridMeta;
use crate::unionfind::UnionFind;
use crate::volumes::VolumeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FaceAxis {
    /// Between `(ix, iy)` and `(ix + 1, iy)`.
    X,
    /// Between `(ix, iy)` and `(ix, iy + 1)`.
    Y,
}

/// A vertical voxel face at layer `z` on the +axis side of cell `(ix, iy)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Face {
    pub ix: u32,
    pub iy: u32,
    pub z: u32,
    pub axis: FaceAxis,
}

impl Face {
    /// The two cells this face separates.
    pub fn cells(&self) -> [(usize, usize); 2] {
        let (x, y) = (self.ix as usize, self.iy as usize);
        match self.axis {
            FaceAxis::X => [(x, y), (x + 1, y)],
            FaceAxis::Y => [(x, y), (x, y + 1)],
        }
    }

    /// Lattice corners, counter-clockwise seen from the low side.
    pub fn corners(&self) -> [[i64; 3]; 4] {
        let (x, y, z) = (self.ix as i64, self.iy as i64, self.z as i64);
        match self.axis {
            FaceAxis::X => [
                [x + 1, y, z],
                [x + 1, y + 1, z],
                [x + 1, y + 1, z + 1],
                [x + 1, y, z + 1],
            ],
            FaceAxis::Y => [
                [x, y + 1, z],
                [x + 1, y + 1, z],
                [x + 1, y + 1, z + 1],
                [x, y + 1, z + 1],
            ],
        }
    }
}

/// Contact surface between two volumes (or two regions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    /// Endpoint ids, `a < b`.
    pub a: u32,
    pub b: u32,
    /// Sorted, distinct.
    pub faces: Vec<Face>,
    /// Lattice corner points, sorted and distinct.
    pub points: Vec<[i64; 3]>,
    /// Indices into `points`, one quad per face.
    pub quads: Vec<[u32; 4]>,
}

impl Passage {
    pub fn from_faces(a: u32, b: u32, faces: impl IntoIterator<Item = Face>) -> Passage {
        let faces: Vec<Face> = faces
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let points: Vec<[i64; 3]> = faces
            .iter()
            .flat_map(|f| f.corners())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let quads = faces
            .iter()
            .map(|f| {
                f.corners()
                    .map(|p| points.binary_search(&p).unwrap() as u32)
            })
            .collect();
        let (a, b) = (a.min(b), a.max(b));
        Passage {
            a,
            b,
            faces,
            points,
            quads,
        }
    }

    pub fn metric_points(&self, meta: &GridMeta) -> Vec<[f64; 3]> {
        self.points.iter().map(|&g| meta.lattice_point(g)).collect()
    }

    /// Area of the contact surface in m².
    pub fn area(&self, voxel: f64) -> f64 {
        self.faces.len() as f64 * voxel * voxel
    }
}

/// Single-linkage clusters of `points` under `distance < d_th`.
///
/// Clusters are returned as ascending index lists, ordered by their smallest
/// index; this is the fixed point of repeatedly expanding a frontier from the
/// first unvisited point.
pub fn cluster_contact_points(points: &[[f64; 3]], d_th: f64) -> Vec<Vec<usize>> {
    if points.is_empty() {
        return Vec::new();
    }
    let key = |p: &[f64; 3]| p.map(|c| (c / d_th).floor() as i64);
    let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(i);
    }
    let d2 = d_th * d_th;
    let mut uf = UnionFind::new(points.len());
    for (i, p) in points.iter().enumerate() {
        let k = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(others) = buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else {
                        continue;
                    };
                    for &j in others {
                        if j > i && dist2(p, &points[j]) < d2 {
                            uf.union(i, j);
                        }
                    }
                }
            }
        }
    }
    let (comp, n) = uf.components();
    let mut out = vec![Vec::new(); n];
    for (i, c) in comp.into_iter().enumerate() {
        out[c].push(i);
    }
    out
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum()
}

/// Shared faces per unordered id pair, given an id per column (`u32::MAX`
/// marks columns to ignore).
pub fn contact_faces(field: &ColumnField, id_of: &[u32]) -> BTreeMap<(u32, u32), Vec<Face>> {
    let cols = field.columns();
    let [nx, ny, _] = field.meta.dims;
    let mut pairs: BTreeMap<(u32, u32), Vec<Face>> = BTreeMap::new();
    for (c, col) in cols.iter().enumerate() {
        let vc = id_of[c];
        if vc == u32::MAX {
            continue;
        }
        let (x, y) = col.cell();
        for axis in [FaceAxis::X, FaceAxis::Y] {
            let (nxp, nyp) = match axis {
                FaceAxis::X => (x + 1, y),
                FaceAxis::Y => (x, y + 1),
            };
            if nxp >= nx || nyp >= ny {
                continue;
            }
            for n in field.ids_at(nxp, nyp) {
                let vn = id_of[n];
                if vn == u32::MAX || vn == vc {
                    continue;
                }
                let other = cols[n];
                let (lo, hi) = (col.z1.max(other.z1), col.z2.min(other.z2));
                if lo > hi {
                    continue;
                }
                let faces = pairs.entry((vc.min(vn), vc.max(vn))).or_default();
                faces.extend((lo..=hi).map(|z| Face {
                    ix: col.ix,
                    iy: col.iy,
                    z,
                    axis,
                }));
            }
        }
    }
    pairs
}

/// Splits the faces of one pair into passages by clustering their corners.
pub fn passages_for_pair(
    meta: &GridMeta,
    a: u32,
    b: u32,
    faces: &[Face],
    d_th: f64,
) -> Vec<Passage> {
    let whole = Passage::from_faces(a, b, faces.iter().copied());
    let metric = whole.metric_points(meta);
    let clusters = cluster_contact_points(&metric, d_th);
    if clusters.len() == 1 {
        return vec![whole];
    }
    let mut cluster_of = vec![0usize; metric.len()];
    for (k, members) in clusters.iter().enumerate() {
        for &i in members {
            cluster_of[i] = k;
        }
    }
    let mut split: Vec<Vec<Face>> = vec![Vec::new(); clusters.len()];
    for (face, quad) in whole.faces.iter().zip(&whole.quads) {
        // face corners are 1 voxel apart, so all four share a cluster whenever d_th > voxel
        split[cluster_of[quad[0] as usize]].push(*face);
    }
    split
        .into_iter()
        .filter(|f| !f.is_empty())
        .map(|f| Passage::from_faces(a, b, f))
        .collect()
}

/// All passages of the volume graph, ordered by `(a, b)` then by first point.
pub fn generate_passages(field: &ColumnField, volume_of: &[u32], d_th: f64) -> Vec<Passage> {
    let pairs = contact_faces(field, volume_of);
    let mut out = Vec::new();
    for ((a, b), faces) in pairs {
        out.extend(passages_for_pair(&field.meta, a, b, &faces, d_th));
    }
    out
}

/// Volumes as vertices, passages as (multi-)edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeGraph {
    pub volumes: VolumeSet,
    pub edges: Vec<Passage>,
}

impl VolumeGraph {
    pub fn build(field: &ColumnField, volumes: VolumeSet, d_th: f64) -> VolumeGraph {
        let edges = generate_passages(field, &volumes.volume_of, d_th);
        VolumeGraph { volumes, edges }
    }

    /// Sorted, distinct neighbor ids per volume.
    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        adjacency(self.volumes.volumes.len(), &self.edges)
    }
}

/// Sorted, distinct neighbor lists of `n` vertices joined by `edges`.
pub fn adjacency(n: usize, edges: &[Passage]) -> Vec<Vec<u32>> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.a as usize].push(e.b);
        adj[e.b as usize].push(e.a);
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Checks every face of every passage against the column field: the face must
/// separate a free voxel of one endpoint from a free voxel of the other.
/// Returns human-readable violations.
pub fn verify_passages(field: &ColumnField, id_of: &[u32], passages: &[Passage]) -> Vec<String> {
    let owner = |(x, y): (usize, usize), z: u32| {
        field
            .ids_at(x, y)
            .find(|&c| {
                let col = field.columns()[c];
                col.z1 <= z && z <= col.z2
            })
            .map(|c| id_of[c])
    };
    let mut bad = Vec::new();
    for p in passages {
        if p.a >= p.b {
            bad.push(format!("passage ({}, {}) not normalized", p.a, p.b));
        }
        if p.faces.is_empty() {
            bad.push(format!("passage ({}, {}) has an empty mesh", p.a, p.b));
        }
        for f in &p.faces {
            let [c0, c1] = f.cells();
            let (o0, o1) = (owner(c0, f.z), owner(c1, f.z));
            let ok = matches!((o0, o1), (Some(u), Some(v)) if (u == p.a && v == p.b) || (u == p.b && v == p.a));
            if !ok {
                bad.push(format!(
                    "face {f:?} of ({}, {}) separates {o0:?} and {o1:?}",
                    p.a, p.b
                ));
            }
        }
        let corners: BTreeSet<[i64; 3]> = p.faces.iter().flat_map(|f| f.corners()).collect();
        if corners.into_iter().collect::<Vec<_>>() != p.points {
            bad.push(format!(
                "passage ({}, {}) points differ from face corners",
                p.a, p.b
            ));
        }
    }
    bad
}
