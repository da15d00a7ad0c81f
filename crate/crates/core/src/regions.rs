//! Regions: groups of volumes grown breadth-first from large seed volumes.
//! Volumes reached from more than one seed cluster become connection regions.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::passages::{passages_for_pair, Face, Passage, VolumeGraph};
use crate::unionfind::UnionFind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Room,
    Connection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: u32,
    pub kind: RegionKind,
    /// Volume ids, ascending.
    pub volumes: Vec<u32>,
    pub storey: u32,
    /// Sub-region ids, filled by subdivision.
    pub children: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGraph {
    pub regions: Vec<Region>,
    /// Region id per volume id.
    pub region_of: Vec<u32>,
    pub edges: Vec<Passage>,
}

/// Volumes strictly larger than `a_th` cubic meters.
pub fn select_seeds(graph: &VolumeGraph, a_th: f64) -> Result<Vec<u32>> {
    if !(a_th > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "a_th must be positive, got {a_th}"
        )));
    }
    let vols = &graph.volumes.volumes;
    let seeds: Vec<u32> = vols
        .iter()
        .filter(|v| v.size_m3 > a_th)
        .map(|v| v.id)
        .collect();
    if seeds.is_empty() {
        let largest = vols.iter().map(|v| v.size_m3).fold(0.0, f64::max);
        return Err(Error::NoSeed { a_th, largest });
    }
    Ok(seeds)
}

/// Connected components of the seed-induced subgraph, each sorted, ordered by
/// smallest member.
pub fn filter_seeds(seeds: &[u32], graph: &VolumeGraph) -> Vec<Vec<u32>> {
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let index: BTreeMap<u32, usize> = seeds.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut uf = UnionFind::new(seeds.len());
    for e in &graph.edges {
        if let (Some(&i), Some(&j)) = (index.get(&e.a), index.get(&e.b)) {
            uf.union(i, j);
        }
    }
    let (comp, n) = uf.components();
    let mut out = vec![Vec::new(); n];
    for (i, c) in comp.into_iter().enumerate() {
        out[c].push(seeds[i]);
    }
    out
}

/// Grows one region per seed cluster through non-seed volumes. A volume
/// reached by two or more clusters is removed from all of them and becomes a
/// singleton connection region; volumes no cluster reaches become singleton
/// rooms. Region ids follow the smallest volume id of each region.
pub fn grow_regions(graph: &VolumeGraph, clusters: &[Vec<u32>], storey: u32) -> Vec<Region> {
    let n = graph.volumes.volumes.len();
    let adj = graph.adjacency();
    let mut is_seed = vec![false; n];
    for &s in clusters.iter().flatten() {
        is_seed[s as usize] = true;
    }
    let mut count = vec![0u32; n];
    let mut owner = vec![u32::MAX; n];
    for (k, cluster) in clusters.iter().enumerate() {
        let mut reached = vec![false; n];
        let mut queue: VecDeque<u32> = cluster.iter().copied().collect();
        for &s in cluster {
            reached[s as usize] = true;
            owner[s as usize] = k as u32;
        }
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v as usize] {
                let w = w as usize;
                if reached[w] || is_seed[w] {
                    continue;
                }
                reached[w] = true;
                count[w] += 1;
                owner[w] = k as u32;
                queue.push_back(w as u32);
            }
        }
    }

    let mut groups: Vec<(RegionKind, Vec<u32>)> = clusters
        .iter()
        .map(|c| (RegionKind::Room, c.clone()))
        .collect();
    for v in 0..n {
        if is_seed[v] {
            continue;
        }
        match count[v] {
            0 => groups.push((RegionKind::Room, vec![v as u32])),
            1 => groups[owner[v] as usize].1.push(v as u32),
            _ => groups.push((RegionKind::Connection, vec![v as u32])),
        }
    }
    for g in &mut groups {
        g.1.sort_unstable();
    }
    groups.sort_by_key(|g| g.1[0]);
    groups
        .into_iter()
        .enumerate()
        .map(|(id, (kind, volumes))| Region {
            id: id as u32,
            kind,
            volumes,
            storey,
            children: Vec::new(),
        })
        .collect()
}

/// Region id per volume id.
pub fn region_index(regions: &[Region], n_volumes: usize) -> Vec<u32> {
    let mut region_of = vec![u32::MAX; n_volumes];
    for r in regions {
        for &v in &r.volumes {
            region_of[v as usize] = r.id;
        }
    }
    region_of
}

/// Region edges: the volume passages crossing each region pair, pooled and
/// re-clustered with `d_th`.
pub fn lift_passages(graph: &VolumeGraph, regions: &[Region], d_th: f64) -> RegionGraph {
    let region_of = region_index(regions, graph.volumes.volumes.len());
    let mut pairs: BTreeMap<(u32, u32), Vec<Face>> = BTreeMap::new();
    for e in &graph.edges {
        let (ra, rb) = (region_of[e.a as usize], region_of[e.b as usize]);
        if ra != rb {
            pairs
                .entry((ra.min(rb), ra.max(rb)))
                .or_default()
                .extend(&e.faces);
        }
    }
    let mut edges = Vec::new();
    for ((a, b), faces) in pairs {
        edges.extend(passages_for_pair(&graph.volumes.meta, a, b, &faces, d_th));
    }
    RegionGraph {
        regions: regions.to_vec(),
        region_of,
        edges,
    }
}

/// The whole region stage: seeds, seed clusters, growth and lifted edges.
pub fn build_regions(
    graph: &VolumeGraph,
    a_th: f64,
    d_th: f64,
    storey: u32,
) -> Result<RegionGraph> {
    let seeds = select_seeds(graph, a_th)?;
    let clusters = filter_seeds(&seeds, graph);
    let regions = grow_regions(graph, &clusters, storey);
    Ok(lift_passages(graph, &regions, d_th))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridMeta;
    use crate::passages::FaceAxis;
    use crate::volumes::{Volume, VolumeSet};

    /// A graph with the given volume sizes and one single-face passage per pair.
    fn graph(sizes: &[f64], pairs: &[(u32, u32)]) -> VolumeGraph {
        let volumes = sizes
            .iter()
            .enumerate()
            .map(|(i, &s)| Volume {
                id: i as u32,
                columns: vec![i as u32],
                voxel_count: 1,
                size_m3: s,
                z_min: 0.0,
                z_max: 1.0,
            })
            .collect();
        let edges = pairs
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| {
                let face = Face {
                    ix: 10 * k as u32,
                    iy: 0,
                    z: 0,
                    axis: FaceAxis::X,
                };
                Passage::from_faces(a, b, [face])
            })
            .collect();
        VolumeGraph {
            volumes: VolumeSet {
                meta: GridMeta {
                    origin: [0.0; 3],
                    voxel: 1.0,
                    dims: [64, 4, 4],
                    floor_z_index: 0,
                },
                volumes,
                volume_of: (0..sizes.len() as u32).collect(),
            },
            edges,
        }
    }

    #[test]
    fn seeds_by_threshold() {
        let g = graph(&[30.0, 0.5, 25.0], &[]);
        assert_eq!(select_seeds(&g, 20.0).unwrap(), vec![0, 2]);
        let g = graph(&[0.1, 0.1], &[]);
        assert!(matches!(select_seeds(&g, 20.0), Err(Error::NoSeed { .. })));
    }

    #[test]
    fn seed_clusters() {
        let g = graph(&[30.0, 30.0, 1.0, 30.0], &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(filter_seeds(&[0, 1, 3], &g), vec![vec![0, 1], vec![3]]);
    }

    #[test]
    fn chain_gives_room_connection_room() {
        // s0 - v1 - s2, with a small volume v3 hanging off s0
        let g = graph(&[30.0, 1.0, 30.0, 2.0], &[(0, 1), (1, 2), (0, 3)]);
        let rg = build_regions(&g, 20.0, 1.5, 0).unwrap();
        let summary: Vec<_> = rg
            .regions
            .iter()
            .map(|r| (r.kind, r.volumes.clone()))
            .collect();
        assert_eq!(
            summary,
            vec![
                (RegionKind::Room, vec![0, 3]),
                (RegionKind::Connection, vec![1]),
                (RegionKind::Room, vec![2]),
            ]
        );
        let pairs: Vec<_> = rg.edges.iter().map(|e| (e.a, e.b)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn single_room_takes_everything() {
        let g = graph(&[30.0, 1.0, 2.0], &[(0, 1), (1, 2)]);
        let rg = build_regions(&g, 20.0, 1.5, 0).unwrap();
        assert_eq!(rg.regions.len(), 1);
        assert_eq!(rg.regions[0].volumes, vec![0, 1, 2]);
        assert!(rg.edges.is_empty());
    }

    #[test]
    fn unreached_volume_is_own_room() {
        let g = graph(&[30.0, 1.0], &[]);
        let rg = build_regions(&g, 20.0, 1.5, 0).unwrap();
        assert_eq!(rg.regions.len(), 2);
        assert!(rg.regions.iter().all(|r| r.kind == RegionKind::Room));
    }

    #[test]
    fn growth_stops_at_foreign_seeds() {
        // s0 - v1 - s2 - v3: v3 is only reachable through s2
        let g = graph(&[30.0, 1.0, 30.0, 1.0], &[(0, 1), (1, 2), (2, 3)]);
        let rg = build_regions(&g, 20.0, 1.5, 0).unwrap();
        assert_eq!(rg.region_of, vec![0, 1, 2, 2]);
    }

    #[test]
    fn partition_on_random_graphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.random_range(1..30);
            let sizes: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..40.0)).collect();
            let mut pairs = Vec::new();
            for _ in 0..rng.random_range(0..2 * n) {
                let (a, b) = (rng.random_range(0..n) as u32, rng.random_range(0..n) as u32);
                if a != b {
                    pairs.push((a.min(b), a.max(b)));
                }
            }
            let g = graph(&sizes, &pairs);
            let Ok(rg) = build_regions(&g, 20.0, 1.5, 0) else {
                continue;
            };
            let total: usize = rg.regions.iter().map(|r| r.volumes.len()).sum();
            assert_eq!(total, n);
            assert!(rg.region_of.iter().all(|&r| r != u32::MAX));
            let clusters = filter_seeds(&select_seeds(&g, 20.0).unwrap(), &g);
            for r in &rg.regions {
                let foreign = clusters
                    .iter()
                    .filter(|c| c.iter().any(|s| r.volumes.contains(s)))
                    .count();
                assert!(foreign <= 1);
                if r.kind == RegionKind::Connection {
                    assert_eq!(r.volumes.len(), 1);
                }
            }
            assert!(rg.edges.iter().all(|e| e.a < e.b));
        }
    }
}
