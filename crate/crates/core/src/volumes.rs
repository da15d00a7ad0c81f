//! Volumes: 4-connected clusters of columns with locally similar top heights.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::columns::{Column, ColumnField};
use crate::error::{Error, Result};
use crate::grid::GridMeta;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Volume {
    pub id: u32,
    /// Column ids, ascending.
    pub columns: Vec<u32>,
    pub voxel_count: u64,
    pub size_m3: f64,
    /// Lowest column bottom and highest column top, meters.
    pub z_min: f64,
    pub z_max: f64,
}

impl Volume {
    pub fn from_columns(id: u32, mut columns: Vec<u32>, field: &ColumnField) -> Volume {
        columns.sort_unstable();
        let cols = field.columns();
        let voxel_count = columns
            .iter()
            .map(|&c| cols[c as usize].height() as u64)
            .sum();
        let (lo, hi) = columns.iter().fold((u32::MAX, 0), |(lo, hi), &c| {
            let c = cols[c as usize];
            (lo.min(c.z1), hi.max(c.z2 + 1))
        });
        let m = &field.meta;
        Volume {
            id,
            columns,
            voxel_count,
            size_m3: volume_size(voxel_count, m.voxel),
            z_min: m.origin[2] + lo as f64 * m.voxel,
            z_max: m.origin[2] + hi as f64 * m.voxel,
        }
    }
}

/// Σ column heights · voxel³.
pub fn volume_size(voxel_count: u64, voxel: f64) -> f64 {
    voxel_count as f64 * voxel * voxel * voxel
}

/// A partition of a column field into volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeSet {
    pub meta: GridMeta,
    pub volumes: Vec<Volume>,
    /// Volume id per column id.
    pub volume_of: Vec<u32>,
}

impl VolumeSet {
    pub fn from_assignment(field: &ColumnField, volume_of: Vec<u32>) -> VolumeSet {
        let n = volume_of.iter().map(|&v| v as usize + 1).max().unwrap_or(0);
        let mut members: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (c, &v) in volume_of.iter().enumerate() {
            members[v as usize].push(c as u32);
        }
        let volumes = members
            .into_iter()
            .enumerate()
            .map(|(id, cols)| Volume::from_columns(id as u32, cols, field))
            .collect();
        VolumeSet {
            meta: field.meta,
            volumes,
            volume_of,
        }
    }
}

/// True when `a` and `b` may belong to the same volume.
pub fn similar_tops(a: &Column, b: &Column, rel_tol: f64) -> bool {
    let diff = a.top().abs_diff(b.top()) as f64;
    diff <= rel_tol * a.height().min(b.height()) as f64
}

/// Flood fill from the lowest unassigned `(ix, iy, z1)` column, accepting a
/// 4-adjacent neighbor when its top is within `rel_tol` of the shorter of the
/// two column lengths. The test runs between the accepting column and the
/// candidate, so gently sloped ceilings stay in one volume.
pub fn grow_volumes(field: &ColumnField, rel_tol: f64) -> Result<VolumeSet> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rel_tol must be in (0, 1), got {rel_tol}"
        )));
    }
    let cols = field.columns();
    let mut volume_of = vec![u32::MAX; cols.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    // column ids are already in (ix, iy, z1) order
    for seed in 0..cols.len() {
        if volume_of[seed] != u32::MAX {
            continue;
        }
        volume_of[seed] = next;
        queue.push_back(seed);
        while let Some(c) = queue.pop_front() {
            for n in field.neighbor_ids(c) {
                if volume_of[n] == u32::MAX && similar_tops(&cols[c], &cols[n], rel_tol) {
                    volume_of[n] = next;
                    queue.push_back(n);
                }
            }
        }
        next += 1;
    }
    Ok(VolumeSet::from_assignment(field, volume_of))
}
