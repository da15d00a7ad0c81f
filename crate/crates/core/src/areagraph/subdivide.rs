use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::map::{project_region, GridMap2D};
use super::{segment_map, AreaGraphParams, RegionSegmentation};
use crate::columns::ColumnField;
use crate::passages::{generate_passages, passages_for_pair, Face, Passage, VolumeGraph};
use crate::regions::{lift_passages, Region, RegionGraph};
use crate::volumes::VolumeSet;

/// Columns of one original volume sharing one area label, 4-connected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub source_volume: u32,
    pub label: u32,
    /// Ascending.
    pub columns: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subdivision {
    /// Ordered by source volume, then smallest column.
    pub pieces: Vec<Piece>,
    /// Piece indices per label, labels ascending; one entry per label present.
    pub groups: Vec<(u32, Vec<u32>)>,
    /// Between pieces, by piece index.
    pub passages: Vec<Passage>,
    /// Columns whose cell carried no label.
    pub unlabeled: usize,
}

/// Splits the volumes of a region by the area label under each column.
/// Unlabeled columns take the label of the nearest labeled cell.
pub fn subdivide_region(
    field: &ColumnField,
    volumes: &VolumeSet,
    region_volumes: &[u32],
    map: &GridMap2D,
    labels: &[u32],
    d_th: f64,
) -> Subdivision {
    let cols = field.columns();
    let labeled: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 0).collect();
    let mut unlabeled = 0;
    let mut label_of = |c: u32| -> u32 {
        let col = cols[c as usize];
        let cell = map
            .from_storey(col.ix as i64, col.iy as i64)
            .map(|(x, y)| map.idx(x, y));
        match cell.map(|i| labels[i]) {
            Some(l) if l != 0 => l,
            _ => {
                unlabeled += 1;
                let (px, py) = (col.ix as i64 - map.offset[0], col.iy as i64 - map.offset[1]);
                labeled
                    .iter()
                    .min_by_key(|&&i| {
                        let (x, y) = map.xy(i);
                        ((x as i64 - px).pow(2) + (y as i64 - py).pow(2), i)
                    })
                    .map_or(0, |&i| labels[i])
            }
        }
    };

    let mut label = BTreeMap::new();
    for &v in region_volumes {
        for &c in &volumes.volumes[v as usize].columns {
            label.insert(c, label_of(c));
        }
    }

    let mut piece_of: BTreeMap<u32, u32> = BTreeMap::new();
    let mut pieces = Vec::new();
    let mut queue = VecDeque::new();
    for &v in region_volumes {
        for &seed in &volumes.volumes[v as usize].columns {
            if piece_of.contains_key(&seed) {
                continue;
            }
            let id = pieces.len() as u32;
            let l = label[&seed];
            piece_of.insert(seed, id);
            let mut members = vec![seed];
            queue.push_back(seed);
            while let Some(c) = queue.pop_front() {
                for n in field.neighbor_ids(c as usize) {
                    let n = n as u32;
                    if volumes.volume_of[n as usize] == v
                        && label.get(&n) == Some(&l)
                        && !piece_of.contains_key(&n)
                    {
                        piece_of.insert(n, id);
                        members.push(n);
                        queue.push_back(n);
                    }
                }
            }
            members.sort_unstable();
            pieces.push(Piece {
                source_volume: v,
                label: l,
                columns: members,
            });
        }
    }

    let mut by_label: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for (i, p) in pieces.iter().enumerate() {
        by_label.entry(p.label).or_default().push(i as u32);
    }
    let mut id_of = vec![u32::MAX; field.len()];
    for (&c, &p) in &piece_of {
        id_of[c as usize] = p;
    }
    Subdivision {
        passages: generate_passages(field, &id_of, d_th),
        groups: by_label.into_iter().collect(),
        pieces,
        unlabeled,
    }
}

/// One storey after subdivision: leaf volumes, region1 and region2 levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreyHierarchy {
    /// Leaf volumes with regenerated passages.
    pub graph: VolumeGraph,
    /// Region1 level over the leaf volumes; `children` index `region2`.
    pub regions: RegionGraph,
    /// Region2 level; ids index this vector.
    pub region2: Vec<Region>,
    /// Parent region1 id per region2.
    pub region2_parent: Vec<u32>,
    /// Between region2 nodes.
    pub region2_edges: Vec<Passage>,
    /// 2D segmentations of the regions above the size gate, by region1 id.
    pub segmentations: BTreeMap<u32, RegionSegmentation>,
    pub unlabeled_columns: usize,
    pub warnings: Vec<String>,
}

/// Subdivides every region whose size exceeds `gate_m3` and rebuilds the
/// volume graph over the resulting pieces.
pub fn subdivide_storey(
    field: &ColumnField,
    graph: &VolumeGraph,
    rg: &RegionGraph,
    gate_m3: f64,
    params: &AreaGraphParams,
    d_th: f64,
) -> StoreyHierarchy {
    let vols = &graph.volumes;
    let big: Vec<&Region> = rg
        .regions
        .iter()
        .filter(|r| {
            r.volumes
                .iter()
                .map(|&v| vols.volumes[v as usize].size_m3)
                .sum::<f64>()
                > gate_m3
        })
        .collect();
    let results: Vec<(u32, RegionSegmentation, Subdivision)> = big
        .par_iter()
        .map(|r| {
            let columns: Vec<u32> = r
                .volumes
                .iter()
                .flat_map(|&v| vols.volumes[v as usize].columns.iter().copied())
                .collect();
            let seg = segment_map(&project_region(field, &columns), params);
            let sub = subdivide_region(field, vols, &r.volumes, &seg.map, &seg.areas.labels, d_th);
            (r.id, seg, sub)
        })
        .collect();

    let mut warnings = Vec::new();
    let mut unlabeled_columns = 0;
    let mut split: BTreeMap<u32, Subdivision> = BTreeMap::new();
    let mut segmentations = BTreeMap::new();
    for (rid, seg, sub) in results {
        warnings.extend(seg.warnings.iter().map(|w| format!("region {rid}: {w}")));
        unlabeled_columns += sub.unlabeled;
        if sub.unlabeled > 0 {
            warnings.push(format!(
                "region {rid}: {} columns had no area label",
                sub.unlabeled
            ));
        }
        if sub.groups.len() >= 2 {
            split.insert(rid, sub);
        }
        segmentations.insert(rid, seg);
    }

    // new volume ids: original order, split volumes replaced by their pieces
    let mut pieces_of_volume: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
    for (&rid, sub) in &split {
        for (i, p) in sub.pieces.iter().enumerate() {
            pieces_of_volume
                .entry(p.source_volume)
                .or_default()
                .push((rid, i as u32));
        }
    }
    let mut volume_of = vec![u32::MAX; field.len()];
    let mut new_of_piece: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    let mut new_of_volume = vec![u32::MAX; vols.volumes.len()];
    let mut next = 0u32;
    for v in &vols.volumes {
        match pieces_of_volume.get(&v.id) {
            Some(ps) => {
                for &(rid, i) in ps {
                    for &c in &split[&rid].pieces[i as usize].columns {
                        volume_of[c as usize] = next;
                    }
                    new_of_piece.insert((rid, i), next);
                    next += 1;
                }
            }
            None => {
                for &c in &v.columns {
                    volume_of[c as usize] = next;
                }
                new_of_volume[v.id as usize] = next;
                next += 1;
            }
        }
    }
    let leaf = VolumeGraph::build(field, VolumeSet::from_assignment(field, volume_of), d_th);

    let mut region1 = Vec::with_capacity(rg.regions.len());
    let mut region2 = Vec::new();
    let mut region2_parent = Vec::new();
    for r in &rg.regions {
        let mut r1 = r.clone();
        r1.children.clear();
        match split.get(&r.id) {
            Some(sub) => {
                let mut all = Vec::new();
                let mut groups: Vec<Vec<u32>> = sub
                    .groups
                    .iter()
                    .map(|(_, ps)| {
                        let mut vs: Vec<u32> =
                            ps.iter().map(|&i| new_of_piece[&(r.id, i)]).collect();
                        vs.sort_unstable();
                        vs
                    })
                    .collect();
                groups.sort();
                for vs in groups {
                    let id = region2.len() as u32;
                    all.extend(&vs);
                    r1.children.push(id);
                    region2_parent.push(r.id);
                    region2.push(Region {
                        id,
                        kind: r.kind,
                        volumes: vs,
                        storey: r.storey,
                        children: Vec::new(),
                    });
                }
                all.sort_unstable();
                r1.volumes = all;
            }
            None => {
                r1.volumes = r
                    .volumes
                    .iter()
                    .map(|&v| new_of_volume[v as usize])
                    .collect();
                r1.volumes.sort_unstable();
            }
        }
        region1.push(r1);
    }
    let regions = lift_passages(&leaf, &region1, d_th);
    let region2_edges = lift_to(&leaf, &region2, d_th);
    StoreyHierarchy {
        graph: leaf,
        regions,
        region2,
        region2_parent,
        region2_edges,
        segmentations,
        unlabeled_columns,
        warnings,
    }
}

/// Passages between groups of volumes; volumes outside every group are
/// ignored.
fn lift_to(graph: &VolumeGraph, groups: &[Region], d_th: f64) -> Vec<Passage> {
    let mut group_of = vec![u32::MAX; graph.volumes.volumes.len()];
    for g in groups {
        for &v in &g.volumes {
            group_of[v as usize] = g.id;
        }
    }
    let mut pairs: BTreeMap<(u32, u32), Vec<Face>> = BTreeMap::new();
    for e in &graph.edges {
        let (a, b) = (group_of[e.a as usize], group_of[e.b as usize]);
        if a != b && a != u32::MAX && b != u32::MAX {
            pairs
                .entry((a.min(b), a.max(b)))
                .or_default()
                .extend(&e.faces);
        }
    }
    let mut out = Vec::new();
    for ((a, b), faces) in pairs {
        out.extend(passages_for_pair(&graph.volumes.meta, a, b, &faces, d_th));
    }
    out
}
