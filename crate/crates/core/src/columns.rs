//! Free-space columns: maximal vertical runs of free voxels at one (x, y).

use serde::{Deserialize, Serialize};

use crate::grid::{GridMeta, OccupancyGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Column {
    pub ix: u32,
    pub iy: u32,
    /// Bottom free layer (inclusive).
    pub z1: u32,
    /// Top free layer (inclusive).
    pub z2: u32,
}

impl Column {
    /// Height in voxels.
    pub fn height(&self) -> u32 {
        self.z2 - self.z1 + 1
    }

    pub fn top(&self) -> u32 {
        self.z2
    }

    pub fn cell(&self) -> (usize, usize) {
        (self.ix as usize, self.iy as usize)
    }

    /// Metric (x, y) of the cell center and the bottom / top of the run.
    pub fn metric(&self, meta: &GridMeta) -> ColumnMetric {
        let v = meta.voxel;
        ColumnMetric {
            x: meta.origin[0] + (self.ix as f64 + 0.5) * v,
            y: meta.origin[1] + (self.iy as f64 + 0.5) * v,
            z_1: meta.origin[2] + self.z1 as f64 * v,
            z_2: meta.origin[2] + (self.z2 + 1) as f64 * v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnMetric {
    pub x: f64,
    pub y: f64,
    pub z_1: f64,
    pub z_2: f64,
}

/// Columns stored cell-major: `columns[cell_start[c]..cell_start[c + 1]]` are
/// the columns of cell `c = ix * ny + iy`, sorted by `z1`. A column's index in
/// `columns` is its id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnField {
    pub meta: GridMeta,
    columns: Vec<Column>,
    cell_start: Vec<u32>,
}

/// Counts of what the bounding rules removed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ColumnReport {
    pub raw_runs: usize,
    pub unbounded_removed: usize,
    /// Of those, the ones standing on the storey floor: free space under a
    /// hole in the ceiling rather than outside the building or above its roof.
    pub unbounded_on_floor: usize,
    pub below_floor_removed: usize,
    pub clamped_to_floor: usize,
}

impl ColumnField {
    /// Builds a field from columns in any order; they are sorted into layout.
    pub fn from_columns(meta: GridMeta, mut columns: Vec<Column>) -> Self {
        columns.sort_unstable();
        let ncells = meta.columns_len();
        let ny = meta.dims[1];
        let mut cell_start = vec![0u32; ncells + 1];
        for c in &columns {
            cell_start[c.ix as usize * ny + c.iy as usize + 1] += 1;
        }
        for i in 0..ncells {
            cell_start[i + 1] += cell_start[i];
        }
        ColumnField {
            meta,
            columns,
            cell_start,
        }
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn cell_index(&self, ix: usize, iy: usize) -> usize {
        ix * self.meta.dims[1] + iy
    }

    /// Column id range of cell `(ix, iy)`.
    pub fn ids_at(&self, ix: usize, iy: usize) -> std::ops::Range<usize> {
        let c = self.cell_index(ix, iy);
        self.cell_start[c] as usize..self.cell_start[c + 1] as usize
    }

    pub fn at(&self, ix: usize, iy: usize) -> &[Column] {
        &self.columns[self.ids_at(ix, iy)]
    }

    /// Ids of columns in horizontally 4-adjacent cells.
    pub fn neighbor_ids(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.columns[id];
        crate::grid::neighbors4(self.meta.dims, c.ix as i64, c.iy as i64)
            .flat_map(move |(x, y)| self.ids_at(x, y))
    }

    fn retain_map(self, mut f: impl FnMut(Column) -> Option<Column>) -> Self {
        let meta = self.meta;
        let cols = self.columns.into_iter().filter_map(&mut f).collect();
        ColumnField::from_columns(meta, cols)
    }
}

/// Maximal runs of free voxels per cell, before any bounding rule.
pub fn raw_runs(grid: &OccupancyGrid) -> ColumnField {
    let [nx, ny, nz] = grid.dims();
    let mut cols = Vec::new();
    for ix in 0..nx {
        for iy in 0..ny {
            let mut z = 0;
            while z < nz {
                if grid.is_occupied(ix, iy, z) {
                    z += 1;
                    continue;
                }
                let z1 = z;
                while z < nz && !grid.is_occupied(ix, iy, z) {
                    z += 1;
                }
                cols.push(Column {
                    ix: ix as u32,
                    iy: iy as u32,
                    z1: z1 as u32,
                    z2: (z - 1) as u32,
                });
            }
        }
    }
    ColumnField::from_columns(*grid.meta(), cols)
}

/// Removes columns that are not capped by an occupied voxel, i.e. that reach
/// the top of the grid.
pub fn prune_unbounded(field: ColumnField, grid: &OccupancyGrid) -> (ColumnField, usize) {
    let nz = grid.dims()[2] as u32;
    let before = field.len();
    let out = field.retain_map(|c| {
        let capped =
            c.z2 + 1 < nz && grid.is_occupied(c.ix as usize, c.iy as usize, c.z2 as usize + 1);
        capped.then_some(c)
    });
    let removed = before - out.len();
    (out, removed)
}

/// Stops columns at the storey floor: runs reaching below the floor layer are
/// cut to start at it, runs entirely below it are removed.
pub fn clamp_to_floor(field: ColumnField, grid: &OccupancyGrid) -> (ColumnField, usize, usize) {
    let floor = grid.floor_z_index() as u32;
    let before = field.len();
    let mut clamped = 0;
    let out = field.retain_map(|mut c| {
        if c.z2 < floor {
            return None;
        }
        if c.z1 < floor {
            c.z1 = floor;
            clamped += 1;
        }
        Some(c)
    });
    let removed = before - out.len();
    (out, removed, clamped)
}

pub fn extract_columns(grid: &OccupancyGrid) -> (ColumnField, ColumnReport) {
    let raw = raw_runs(grid);
    let raw_runs = raw.len();
    let nz = grid.dims()[2] as u32;
    let unbounded_on_floor = raw
        .columns()
        .iter()
        .filter(|c| {
            let open_top = c.z2 + 1 >= nz
                || !grid.is_occupied(c.ix as usize, c.iy as usize, c.z2 as usize + 1);
            let floor = grid.floor_z_index() as u32;
            open_top
                && c.z1 > 0
                && c.z1 <= floor + 1
                && grid.is_occupied(c.ix as usize, c.iy as usize, c.z1 as usize - 1)
        })
        .count();
    let (field, unbounded_removed) = prune_unbounded(raw, grid);
    let (field, below_floor_removed, clamped_to_floor) = clamp_to_floor(field, grid);
    (
        field,
        ColumnReport {
            raw_runs,
            unbounded_removed,
            unbounded_on_floor,
            below_floor_removed,
            clamped_to_floor,
        },
    )
}
