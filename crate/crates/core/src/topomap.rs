//! The hierarchical map (storey → region1 → region2 → volume) and its
//! 0D/1D/2D/3D exports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::areagraph::polygon::{boundary_loops, chain_segments};
use crate::areagraph::subdivide::StoreyHierarchy;
use crate::areagraph::RegionSegmentation;
use crate::cloud::io::write_ply_mesh;
use crate::columns::{Column, ColumnField};
use crate::error::{Error, Result};
use crate::eval::{LabelImage, Placement};
use crate::grid::GridMeta;
use crate::passages::{Face, FaceAxis, Passage};
use crate::regions::{Region, RegionKind};
use crate::storey::StoreySlab;
use crate::volumes::Volume;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreyMap {
    pub slab: StoreySlab,
    pub field: ColumnField,
    pub volumes: Vec<Volume>,
    pub volume_edges: Vec<Passage>,
    pub regions: Vec<Region>,
    pub region_edges: Vec<Passage>,
    /// `children` of a region index this vector.
    pub region2: Vec<Region>,
    pub region2_parent: Vec<u32>,
    pub region2_edges: Vec<Passage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoMap {
    pub storeys: Vec<StoreyMap>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Storey,
    Region1,
    Region2,
    Volume,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dim {
    D0,
    D1,
    D2,
    D3,
}

impl std::str::FromStr for Dim {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d0" | "0" => Ok(Dim::D0),
            "d1" | "1" => Ok(Dim::D1),
            "d2" | "2" => Ok(Dim::D2),
            "d3" | "3" => Ok(Dim::D3),
            _ => Err(Error::InvalidParameter(format!(
                "unknown export dimension `{s}`"
            ))),
        }
    }
}

impl Dim {
    pub fn name(self) -> &'static str {
        match self {
            Dim::D0 => "d0",
            Dim::D1 => "d1",
            Dim::D2 => "d2",
            Dim::D3 => "d3",
        }
    }
}

pub fn storey_id(s: usize) -> String {
    format!("s{s}")
}

pub fn region_id(s: usize, r: u32) -> String {
    format!("s{s}.r{r}")
}

/// Region2 ids carry their parent and their storey-wide index.
pub fn region2_id(s: usize, parent: u32, a: u32) -> String {
    format!("s{s}.r{parent}.a{a}")
}

pub fn volume_id(s: usize, v: u32) -> String {
    format!("s{s}.v{v}")
}

impl StoreyMap {
    pub fn from_hierarchy(slab: StoreySlab, field: ColumnField, h: StoreyHierarchy) -> StoreyMap {
        StoreyMap {
            slab,
            field,
            volumes: h.graph.volumes.volumes,
            volume_edges: h.graph.edges,
            regions: h.regions.regions,
            region_edges: h.regions.edges,
            region2: h.region2,
            region2_parent: h.region2_parent,
            region2_edges: h.region2_edges,
        }
    }

    fn columns_of(&self, vols: &[u32]) -> Vec<u32> {
        let mut c: Vec<u32> = vols
            .iter()
            .flat_map(|&v| self.volumes[v as usize].columns.iter().copied())
            .collect();
        c.sort_unstable();
        c
    }

    /// Leaf (region2, else region1) label per volume, 1-based, numbered in
    /// region order.
    pub fn leaf_of_volume(&self) -> Vec<u32> {
        let mut out = vec![0; self.volumes.len()];
        let mut next = 1;
        for r in &self.regions {
            if r.children.is_empty() {
                for &v in &r.volumes {
                    out[v as usize] = next;
                }
                next += 1;
            } else {
                for &c in &r.children {
                    for &v in &self.region2[c as usize].volumes {
                        out[v as usize] = next;
                    }
                    next += 1;
                }
            }
        }
        out
    }

    /// Top view of the storey grid labeled through `label_of_volume`; a cell
    /// with several columns shows its tallest one.
    pub fn projection(&self, label_of_volume: &[u32]) -> LabelImage {
        let meta = &self.field.meta;
        let [nx, ny, _] = meta.dims;
        let mut img = LabelImage::new(nx, ny);
        img.placement = Some(Placement {
            origin: [meta.origin[0], meta.origin[1]],
            resolution: meta.voxel,
        });
        let mut volume_of = vec![0u32; self.field.len()];
        for v in &self.volumes {
            for &c in &v.columns {
                volume_of[c as usize] = v.id;
            }
        }
        let cols = self.field.columns();
        for x in 0..nx {
            for y in 0..ny {
                let best = self
                    .field
                    .ids_at(x, y)
                    .max_by_key(|&c| (cols[c].height(), std::cmp::Reverse(c)));
                if let Some(c) = best {
                    img.set(x, y, label_of_volume[volume_of[c] as usize]);
                }
            }
        }
        img
    }

    pub fn leaf_image(&self) -> LabelImage {
        self.projection(&self.leaf_of_volume())
    }

    pub fn region1_image(&self) -> LabelImage {
        let mut lab = vec![0; self.volumes.len()];
        for r in &self.regions {
            for &v in &r.volumes {
                lab[v as usize] = r.id + 1;
            }
        }
        self.projection(&lab)
    }
}

/// Voxel-count-weighted centroid of the columns, moved to the nearest free
/// voxel center the columns own.
pub fn snapped_centroid(field: &ColumnField, columns: &[u32]) -> [f64; 3] {
    let meta = &field.meta;
    let cols = field.columns();
    let (mut sum, mut n) = ([0.0f64; 3], 0.0f64);
    for &c in columns {
        let col = cols[c as usize];
        let h = col.height() as f64;
        sum[0] += (col.ix as f64 + 0.5) * h;
        sum[1] += (col.iy as f64 + 0.5) * h;
        sum[2] += (col.z1 as f64 + col.z2 as f64 + 1.0) / 2.0 * h;
        n += h;
    }
    if n == 0.0 {
        return meta.origin;
    }
    let m = sum.map(|s| s / n);
    let mut best = (f64::INFINITY, [0usize; 3]);
    for &c in columns {
        let col = cols[c as usize];
        let z = (m[2] - 0.5).round().clamp(col.z1 as f64, col.z2 as f64);
        let p = [col.ix as f64 + 0.5, col.iy as f64 + 0.5, z + 0.5];
        let d = (0..3).map(|k| (p[k] - m[k]).powi(2)).sum::<f64>();
        if d < best.0 {
            best = (d, [col.ix as usize, col.iy as usize, z as usize]);
        }
    }
    meta.cell_center(best.1[0], best.1[1], best.1[2])
}

impl TopoMap {
    /// Builds the map and checks the tree and edge invariants.
    pub fn assemble(storeys: Vec<StoreyMap>) -> Result<TopoMap> {
        let map = TopoMap { storeys };
        let problems = map.check();
        if problems.is_empty() {
            Ok(map)
        } else {
            Err(Error::Consistency(problems.join("; ")))
        }
    }

    /// Violations of the structural invariants, empty when consistent.
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (s, st) in self.storeys.iter().enumerate() {
            let n = st.field.len();
            let mut owner = vec![u32::MAX; n];
            for v in &st.volumes {
                for &c in &v.columns {
                    if owner[c as usize] != u32::MAX {
                        out.push(format!("s{s}: column {c} in two volumes"));
                    }
                    owner[c as usize] = v.id;
                }
            }
            if owner.contains(&u32::MAX) {
                out.push(format!("s{s}: column without volume"));
            }
            let mut vol_region = vec![u32::MAX; st.volumes.len()];
            for r in &st.regions {
                for &v in &r.volumes {
                    if vol_region[v as usize] != u32::MAX {
                        out.push(format!("s{s}: volume {v} in two regions"));
                    }
                    vol_region[v as usize] = r.id;
                }
                if !r.children.is_empty() {
                    let mut union: Vec<u32> = r
                        .children
                        .iter()
                        .flat_map(|&c| st.region2[c as usize].volumes.iter().copied())
                        .collect();
                    union.sort_unstable();
                    if union != r.volumes {
                        out.push(format!(
                            "s{s}: children of region {} do not partition it",
                            r.id
                        ));
                    }
                    for &c in &r.children {
                        if st.region2_parent[c as usize] != r.id {
                            out.push(format!("s{s}: region2 {c} has the wrong parent"));
                        }
                    }
                }
            }
            if vol_region.contains(&u32::MAX) {
                out.push(format!("s{s}: volume without region"));
            }
            let check_edges =
                |edges: &[Passage], count: usize, what: &str, out: &mut Vec<String>| {
                    for e in edges {
                        if e.a >= e.b || e.b as usize >= count {
                            out.push(format!("s{s}: bad {what} edge ({}, {})", e.a, e.b));
                        }
                    }
                };
            check_edges(&st.volume_edges, st.volumes.len(), "volume", &mut out);
            check_edges(&st.region_edges, st.regions.len(), "region", &mut out);
            check_edges(&st.region2_edges, st.region2.len(), "region2", &mut out);
            for v in &st.volumes {
                if !inside(
                    &st.field,
                    &v.columns,
                    snapped_centroid(&st.field, &v.columns),
                ) {
                    out.push(format!(
                        "s{s}: centroid of volume {} outside its columns",
                        v.id
                    ));
                }
            }
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "storeys {}", self.storeys.len());
        for (i, st) in self.storeys.iter().enumerate() {
            let rooms = st
                .regions
                .iter()
                .filter(|r| r.kind == RegionKind::Room)
                .count();
            let _ = writeln!(
                s,
                "s{i}: floor {:.3} m ceiling {:.3} m | columns {} volumes {} (edges {}) regions {} ({} room, {} connection, edges {}) sub-regions {} (edges {})",
                st.slab.floor_height,
                st.slab.ceiling_height,
                st.field.len(),
                st.volumes.len(),
                st.volume_edges.len(),
                st.regions.len(),
                rooms,
                st.regions.len() - rooms,
                st.region_edges.len(),
                st.region2.len(),
                st.region2_edges.len(),
            );
        }
        s
    }
}

fn inside(field: &ColumnField, columns: &[u32], p: [f64; 3]) -> bool {
    let m = &field.meta;
    let cols = field.columns();
    columns.iter().any(|&c| {
        let c = cols[c as usize].metric(m);
        let h = m.voxel / 2.0;
        (p[0] - c.x).abs() <= h && (p[1] - c.y).abs() <= h && p[2] >= c.z_1 && p[2] <= c.z_2
    })
}

// ---------------------------------------------------------------------------
// serialized form

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDoc {
    pub format_version: u32,
    pub dim: Dim,
    pub storeys: Vec<StoreyDoc>,
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreyDoc {
    pub id: String,
    pub index: usize,
    pub floor: f64,
    pub ceiling: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_images: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: String,
    pub level: Level,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<RegionKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centroid: Option<[f64; 3]>,
    /// Outline loops in meters, outer loops counter-clockwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Vec<Vec<[f64; 2]>>>,
    /// (ix, iy, z1, z2) runs of the storey grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<[u32; 4]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_m3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub id: String,
    pub level: Level,
    pub a: String,
    pub b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polyline: Option<Vec<Vec<[f64; 2]>>>,
    /// (ix, iy, z, axis) voxel faces, axis 0 for x and 1 for y.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faces: Option<Vec<[u32; 4]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_m2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<String>,
}

fn node(id: String, level: Level, kind: Option<RegionKind>, parent: Option<String>) -> NodeDoc {
    NodeDoc {
        id,
        level,
        kind,
        parent,
        centroid: None,
        polygon: None,
        columns: None,
        size_m3: None,
        mesh: None,
    }
}

fn cell_outline(field: &ColumnField, columns: &[u32]) -> Vec<Vec<[f64; 2]>> {
    let cols = field.columns();
    let cells: BTreeSet<(usize, usize)> =
        columns.iter().map(|&c| cols[c as usize].cell()).collect();
    let Some(x0) = cells.iter().map(|c| c.0).min() else {
        return Vec::new();
    };
    let y0 = cells.iter().map(|c| c.1).min().unwrap();
    let x1 = cells.iter().map(|c| c.0).max().unwrap();
    let y1 = cells.iter().map(|c| c.1).max().unwrap();
    let m = &field.meta;
    boundary_loops(x1 - x0 + 1, y1 - y0 + 1, |x, y| {
        cells.contains(&(x + x0, y + y0))
    })
    .into_iter()
    .map(|lp| {
        lp.into_iter()
            .map(|[x, y]| {
                let p = m.lattice_point([x + x0 as i64, y + y0 as i64, 0]);
                [p[0], p[1]]
            })
            .collect()
    })
    .collect()
}

/// Footprint of a passage: its faces seen from above, chained.
fn passage_polyline(meta: &GridMeta, e: &Passage) -> Vec<Vec<[f64; 2]>> {
    let segs: BTreeSet<[[i64; 2]; 2]> = e
        .faces
        .iter()
        .map(|f| {
            let (x, y) = (f.ix as i64, f.iy as i64);
            match f.axis {
                FaceAxis::X => [[x + 1, y], [x + 1, y + 1]],
                FaceAxis::Y => [[x, y + 1], [x + 1, y + 1]],
            }
        })
        .collect();
    let segs: Vec<_> = segs.into_iter().collect();
    chain_segments(&segs)
        .into_iter()
        .map(|line| {
            line.into_iter()
                .map(|[x, y]| {
                    let p = meta.lattice_point([x, y, 0]);
                    [p[0], p[1]]
                })
                .collect()
        })
        .collect()
}

fn face_row(f: &Face) -> [u32; 4] {
    [f.ix, f.iy, f.z, if f.axis == FaceAxis::X { 0 } else { 1 }]
}

fn mesh_name(id: &str) -> String {
    format!("meshes/{id}.ply")
}

fn label_image_names(s: usize) -> Vec<String> {
    vec![format!("s{s}_region1.png"), format!("s{s}_leaves.png")]
}

/// Document for `dim`. Nodes and edges are the same at every dimension; only
/// their annotations grow.
pub fn to_doc(map: &TopoMap, dim: Dim) -> MapDoc {
    let mut storeys = Vec::new();
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for (s, st) in map.storeys.iter().enumerate() {
        let field = &st.field;
        storeys.push(StoreyDoc {
            id: storey_id(s),
            index: s,
            floor: st.slab.floor_height,
            ceiling: st.slab.ceiling_height,
            grid: (dim == Dim::D3).then_some(field.meta),
            label_images: (dim >= Dim::D2).then(|| label_image_names(s)),
        });
        let annotate = |mut n: NodeDoc, columns: &[u32]| {
            if dim >= Dim::D1 {
                n.centroid = Some(snapped_centroid(field, columns));
            }
            if dim == Dim::D2 && n.level != Level::Storey {
                n.polygon = Some(cell_outline(field, columns));
            }
            n
        };
        let all: Vec<u32> = (0..field.len() as u32).collect();
        nodes.push(annotate(
            node(storey_id(s), Level::Storey, None, None),
            &all,
        ));
        for r in &st.regions {
            let n = node(
                region_id(s, r.id),
                Level::Region1,
                Some(r.kind),
                Some(storey_id(s)),
            );
            nodes.push(annotate(n, &st.columns_of(&r.volumes)));
        }
        for (k, r) in st.region2.iter().enumerate() {
            let p = st.region2_parent[k];
            let n = node(
                region2_id(s, p, r.id),
                Level::Region2,
                Some(r.kind),
                Some(region_id(s, p)),
            );
            nodes.push(annotate(n, &st.columns_of(&r.volumes)));
        }
        let mut parent_of_volume = vec![String::new(); st.volumes.len()];
        for r in &st.regions {
            if r.children.is_empty() {
                for &v in &r.volumes {
                    parent_of_volume[v as usize] = region_id(s, r.id);
                }
            }
        }
        for (k, r) in st.region2.iter().enumerate() {
            for &v in &r.volumes {
                parent_of_volume[v as usize] = region2_id(s, st.region2_parent[k], r.id);
            }
        }
        let cols = field.columns();
        for v in &st.volumes {
            let id = volume_id(s, v.id);
            let mut n = node(
                id.clone(),
                Level::Volume,
                None,
                Some(parent_of_volume[v.id as usize].clone()),
            );
            n = annotate(n, &v.columns);
            if dim == Dim::D3 {
                n.columns = Some(
                    v.columns
                        .iter()
                        .map(|&c| {
                            let c = cols[c as usize];
                            [c.ix, c.iy, c.z1, c.z2]
                        })
                        .collect(),
                );
                n.size_m3 = Some(v.size_m3);
                n.mesh = Some(mesh_name(&id));
            }
            nodes.push(n);
        }
        let r2_ids: Vec<String> = (0..st.region2.len())
            .map(|k| region2_id(s, st.region2_parent[k], k as u32))
            .collect();
        let levels: [(Level, &[Passage], &str); 3] = [
            (Level::Region1, &st.region_edges, "re"),
            (Level::Region2, &st.region2_edges, "ae"),
            (Level::Volume, &st.volume_edges, "ve"),
        ];
        for (level, list, tag) in levels {
            for (k, e) in list.iter().enumerate() {
                let name = |i: u32| match level {
                    Level::Region1 => region_id(s, i),
                    Level::Region2 => r2_ids[i as usize].clone(),
                    _ => volume_id(s, i),
                };
                let id = format!("s{s}.{tag}{k}");
                let mut d = EdgeDoc {
                    id: id.clone(),
                    level,
                    a: name(e.a),
                    b: name(e.b),
                    polyline: None,
                    faces: None,
                    area_m2: None,
                    mesh: None,
                };
                if dim == Dim::D2 {
                    d.polyline = Some(passage_polyline(&field.meta, e));
                }
                if dim == Dim::D3 {
                    d.faces = Some(e.faces.iter().map(face_row).collect());
                    d.area_m2 = Some(e.area(field.meta.voxel));
                    d.mesh = Some(mesh_name(&id));
                }
                edges.push(d);
            }
        }
    }
    MapDoc {
        format_version: FORMAT_VERSION,
        dim,
        storeys,
        nodes,
        edges,
    }
}

pub fn doc_file_name(dim: Dim) -> String {
    format!("topomap_{}.json", dim.name())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Writes the export for `dim` into `dir`; returns the files written.
pub fn export(map: &TopoMap, dim: Dim, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let doc = to_doc(map, dim);
    let mut written = Vec::new();
    let main = dir.join(doc_file_name(dim));
    write_json(&main, &doc)?;
    written.push(main);
    if dim == Dim::D2 {
        for (s, st) in map.storeys.iter().enumerate() {
            let names = label_image_names(s);
            for (name, img) in names.iter().zip([st.region1_image(), st.leaf_image()]) {
                let p = dir.join(name);
                img.write_png(&p)?;
                written.push(p);
            }
        }
    }
    if dim == Dim::D3 {
        let meshes = dir.join("meshes");
        std::fs::create_dir_all(&meshes).map_err(|e| Error::io(&meshes, e))?;
        for (s, st) in map.storeys.iter().enumerate() {
            let meta = &st.field.meta;
            for v in &st.volumes {
                let (verts, faces) = volume_mesh(&st.field, &v.columns);
                let p = dir.join(mesh_name(&volume_id(s, v.id)));
                let metric: Vec<[f64; 3]> = verts.iter().map(|&g| meta.lattice_point(g)).collect();
                write_ply_mesh(&p, &metric, &faces)?;
                written.push(p);
            }
            for (list, tag) in [
                (&st.region_edges, "re"),
                (&st.region2_edges, "ae"),
                (&st.volume_edges, "ve"),
            ] {
                for (k, e) in list.iter().enumerate() {
                    let p = dir.join(mesh_name(&format!("s{s}.{tag}{k}")));
                    let faces: Vec<Vec<u32>> = e.quads.iter().map(|q| q.to_vec()).collect();
                    write_ply_mesh(&p, &e.metric_points(meta), &faces)?;
                    written.push(p);
                }
            }
        }
    }
    Ok(written)
}

/// 2D map and area labels of each subdivided region, as `s{k}_r{id}_map.png`
/// (occupied 0, free 255) and `s{k}_r{id}_areas.png`.
pub fn export_area_rasters(
    storey: usize,
    segs: &BTreeMap<u32, RegionSegmentation>,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (rid, seg) in segs {
        let m = &seg.map;
        let placement = Some(Placement {
            origin: m.corner(0, 0),
            resolution: m.resolution,
        });
        let free = LabelImage {
            width: m.width,
            height: m.height,
            labels: m.free.iter().map(|&f| if f { 255 } else { 0 }).collect(),
            placement,
        };
        let areas = LabelImage {
            width: m.width,
            height: m.height,
            labels: seg.areas.labels.clone(),
            placement,
        };
        for (suffix, img) in [("map", free), ("areas", areas)] {
            let p = dir.join(format!("s{storey}_r{rid}_{suffix}.png"));
            img.write_png(&p)?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Outer boundary of a column set as lattice-point quads.
pub fn volume_mesh(field: &ColumnField, columns: &[u32]) -> (Vec<[i64; 3]>, Vec<Vec<u32>>) {
    let cols = field.columns();
    let own: BTreeSet<u32> = columns.iter().copied().collect();
    let mut quads: Vec<[[i64; 3]; 4]> = Vec::new();
    for &c in columns {
        let col = cols[c as usize];
        let (x, y) = (col.ix as i64, col.iy as i64);
        let (z1, z2) = (col.z1 as i64, col.z2 as i64 + 1);
        quads.push([
            [x, y, z1],
            [x, y + 1, z1],
            [x + 1, y + 1, z1],
            [x + 1, y, z1],
        ]);
        quads.push([
            [x, y, z2],
            [x + 1, y, z2],
            [x + 1, y + 1, z2],
            [x, y + 1, z2],
        ]);
        // sides: z ranges not covered by an own column next door
        let sides: [((i64, i64), [[i64; 2]; 2]); 4] = [
            ((1, 0), [[x + 1, y], [x + 1, y + 1]]),
            ((0, 1), [[x + 1, y + 1], [x, y + 1]]),
            ((-1, 0), [[x, y + 1], [x, y]]),
            ((0, -1), [[x, y], [x + 1, y]]),
        ];
        for ((dx, dy), [p, q]) in sides {
            let (nx, ny) = (x + dx, y + dy);
            let mut covered: Vec<(i64, i64)> = Vec::new();
            if nx >= 0
                && ny >= 0
                && (nx as usize) < field.meta.dims[0]
                && (ny as usize) < field.meta.dims[1]
            {
                for n in field.ids_at(nx as usize, ny as usize) {
                    if own.contains(&(n as u32)) {
                        let o = cols[n];
                        covered.push((o.z1 as i64, o.z2 as i64 + 1));
                    }
                }
            }
            covered.sort_unstable();
            let mut z = z1;
            for (a, b) in covered.into_iter().chain([(z2, z2)]) {
                let top = a.min(z2);
                if top > z {
                    quads.push([
                        [p[0], p[1], z],
                        [q[0], q[1], z],
                        [q[0], q[1], top],
                        [p[0], p[1], top],
                    ]);
                }
                z = z.max(b);
                if z >= z2 {
                    break;
                }
            }
        }
    }
    let verts: Vec<[i64; 3]> = quads
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let faces = quads
        .iter()
        .map(|q| {
            q.iter()
                .map(|p| verts.binary_search(p).unwrap() as u32)
                .collect()
        })
        .collect();
    (verts, faces)
}

/// Reads a d3 export back into a map.
pub fn import_d3(path: &Path) -> Result<TopoMap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: MapDoc = serde_json::from_str(&text).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    from_doc(&doc)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(format!("malformed map document: {}", msg.into()))
}

fn suffix_index(id: &str, tag: char) -> Result<u32> {
    let last = id.rsplit('.').next().unwrap_or("");
    last.strip_prefix(tag)
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| bad(format!("node id `{id}`")))
}

fn storey_of(id: &str) -> Result<usize> {
    id.split('.')
        .next()
        .and_then(|s| s.strip_prefix('s'))
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| bad(format!("node id `{id}`")))
}

pub fn from_doc(doc: &MapDoc) -> Result<TopoMap> {
    if doc.format_version != FORMAT_VERSION {
        return Err(bad(format!(
            "format_version {} is not {FORMAT_VERSION}",
            doc.format_version
        )));
    }
    if doc.dim != Dim::D3 {
        return Err(bad("only d3 documents carry the full map"));
    }
    let mut storeys = Vec::new();
    for sd in &doc.storeys {
        let s = sd.index;
        let meta = sd.grid.ok_or_else(|| bad("storey without grid"))?;
        let mine = |id: &str| storey_of(id).map(|k| k == s).unwrap_or(false);
        let vol_nodes: Vec<&NodeDoc> = doc
            .nodes
            .iter()
            .filter(|n| n.level == Level::Volume && mine(&n.id))
            .collect();
        let mut runs: Vec<(u32, Vec<Column>)> = Vec::new();
        for n in &vol_nodes {
            let cols = n
                .columns
                .as_ref()
                .ok_or_else(|| bad("volume without columns"))?;
            let cols = cols
                .iter()
                .map(|&[ix, iy, z1, z2]| Column { ix, iy, z1, z2 })
                .collect();
            runs.push((suffix_index(&n.id, 'v')?, cols));
        }
        runs.sort_by_key(|r| r.0);
        let all: Vec<Column> = runs.iter().flat_map(|r| r.1.iter().copied()).collect();
        let field = ColumnField::from_columns(meta, all);
        let volumes: Vec<Volume> = runs
            .iter()
            .enumerate()
            .map(|(k, (id, cols))| {
                if *id as usize != k {
                    return Err(bad("volume ids are not contiguous"));
                }
                let ids = cols
                    .iter()
                    .map(|c| {
                        field
                            .columns()
                            .binary_search(c)
                            .map(|i| i as u32)
                            .map_err(|_| bad("column lookup"))
                    })
                    .collect::<Result<Vec<u32>>>()?;
                Ok(Volume::from_columns(*id, ids, &field))
            })
            .collect::<Result<_>>()?;

        let mut regions: Vec<Region> = Vec::new();
        let mut region2: Vec<Region> = Vec::new();
        let mut region2_parent = Vec::new();
        for n in doc.nodes.iter().filter(|n| mine(&n.id)) {
            let kind = n.kind;
            match n.level {
                Level::Region1 => regions.push(Region {
                    id: suffix_index(&n.id, 'r')?,
                    kind: kind.ok_or_else(|| bad("region without kind"))?,
                    volumes: Vec::new(),
                    storey: s as u32,
                    children: Vec::new(),
                }),
                Level::Region2 => {
                    let parent = n
                        .parent
                        .as_deref()
                        .ok_or_else(|| bad("region2 without parent"))?;
                    region2_parent.push(suffix_index(parent, 'r')?);
                    region2.push(Region {
                        id: suffix_index(&n.id, 'a')?,
                        kind: kind.ok_or_else(|| bad("region without kind"))?,
                        volumes: Vec::new(),
                        storey: s as u32,
                        children: Vec::new(),
                    });
                }
                _ => {}
            }
        }
        for (k, r) in regions.iter().enumerate() {
            if r.id as usize != k {
                return Err(bad("region ids are not contiguous"));
            }
        }
        for (k, r) in region2.iter().enumerate() {
            if r.id as usize != k {
                return Err(bad("region2 ids are not contiguous"));
            }
            regions[region2_parent[k] as usize].children.push(k as u32);
        }
        for n in &vol_nodes {
            let v = suffix_index(&n.id, 'v')?;
            let parent = n
                .parent
                .as_deref()
                .ok_or_else(|| bad("volume without parent"))?;
            let last = parent.rsplit('.').next().unwrap_or("");
            if last.starts_with('a') {
                let a = suffix_index(parent, 'a')? as usize;
                region2[a].volumes.push(v);
                regions[region2_parent[a] as usize].volumes.push(v);
            } else {
                regions[suffix_index(parent, 'r')? as usize].volumes.push(v);
            }
        }
        for r in regions.iter_mut().chain(region2.iter_mut()) {
            r.volumes.sort_unstable();
        }

        let mut region_edges = Vec::new();
        let mut region2_edges = Vec::new();
        let mut volume_edges = Vec::new();
        for e in doc.edges.iter().filter(|e| mine(&e.id)) {
            let faces = e
                .faces
                .as_ref()
                .ok_or_else(|| bad("edge without faces"))?
                .iter()
                .map(|&[ix, iy, z, a]| Face {
                    ix,
                    iy,
                    z,
                    axis: if a == 0 { FaceAxis::X } else { FaceAxis::Y },
                });
            let (list, tag) = match e.level {
                Level::Region1 => (&mut region_edges, 'r'),
                Level::Region2 => (&mut region2_edges, 'a'),
                Level::Volume => (&mut volume_edges, 'v'),
                Level::Storey => return Err(bad("storey-level edge")),
            };
            list.push(Passage::from_faces(
                suffix_index(&e.a, tag)?,
                suffix_index(&e.b, tag)?,
                faces,
            ));
        }
        storeys.push(StoreyMap {
            slab: StoreySlab {
                index: s,
                floor_height: sd.floor,
                ceiling_height: sd.ceiling,
            },
            field,
            volumes,
            volume_edges,
            regions,
            region_edges,
            region2,
            region2_parent,
            region2_edges,
        });
    }
    TopoMap::assemble(storeys)
}
