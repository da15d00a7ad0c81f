//! Dense binary voxel occupancy grid for one storey.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cloud::{check_positive, PointCloud};
use crate::error::{Error, Result};
use crate::storey::StoreySlab;

/// Default cap on the occupancy bitset allocation (2 GiB).
pub const DEFAULT_MEMORY_CAP: u64 = 2 << 30;

/// Placement of a voxel lattice in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub origin: [f64; 3],
    pub voxel: f64,
    pub dims: [usize; 3],
    pub floor_z_index: usize,
}

impl GridMeta {
    pub fn cell_center(&self, ix: usize, iy: usize, iz: usize) -> [f64; 3] {
        [
            self.origin[0] + (ix as f64 + 0.5) * self.voxel,
            self.origin[1] + (iy as f64 + 0.5) * self.voxel,
            self.origin[2] + (iz as f64 + 0.5) * self.voxel,
        ]
    }

    /// Metric position of lattice corner point `(gx, gy, gz)`.
    pub fn lattice_point(&self, g: [i64; 3]) -> [f64; 3] {
        [
            self.origin[0] + g[0] as f64 * self.voxel,
            self.origin[1] + g[1] as f64 * self.voxel,
            self.origin[2] + g[2] as f64 * self.voxel,
        ]
    }

    pub fn columns_len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    meta: GridMeta,
    bits: Vec<u64>,
}

/// Where to anchor the lattice when rasterizing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Anchor {
    /// Snap the origin to integer multiples of the voxel size (one voxel of
    /// padding below the data). Grids of different clouds then share a lattice.
    Global,
    /// Use this origin verbatim; every point must lie at or above it.
    Explicit([f64; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterOptions {
    pub voxel: f64,
    pub memory_cap: u64,
    pub anchor: Anchor,
}

impl RasterOptions {
    pub fn new(voxel: f64) -> Self {
        RasterOptions {
            voxel,
            memory_cap: DEFAULT_MEMORY_CAP,
            anchor: Anchor::Global,
        }
    }
}

impl OccupancyGrid {
    /// An all-free grid.
    pub fn empty(meta: GridMeta) -> Self {
        let n = meta.dims.iter().product::<usize>();
        OccupancyGrid {
            meta,
            bits: vec![0; n.div_ceil(64)],
        }
    }

    pub fn meta(&self) -> &GridMeta {
        &self.meta
    }

    pub fn dims(&self) -> [usize; 3] {
        self.meta.dims
    }

    pub fn floor_z_index(&self) -> usize {
        self.meta.floor_z_index
    }

    #[inline]
    fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        let [nx, ny, nz] = self.meta.dims;
        assert!(
            ix < nx && iy < ny && iz < nz,
            "voxel ({ix}, {iy}, {iz}) outside grid {:?}",
            self.meta.dims
        );
        (ix * ny + iy) * nz + iz
    }

    /// Panics if the indices are out of bounds.
    #[inline]
    pub fn is_occupied(&self, ix: usize, iy: usize, iz: usize) -> bool {
        let i = self.index(ix, iy, iz);
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set_occupied(&mut self, ix: usize, iy: usize, iz: usize) {
        let i = self.index(ix, iy, iz);
        self.bits[i / 64] |= 1 << (i % 64);
    }

    /// In-bounds horizontal 4-neighbors of `(ix, iy)`.
    pub fn neighbors4(&self, ix: i64, iy: i64) -> impl Iterator<Item = (usize, usize)> {
        neighbors4(self.meta.dims, ix, iy)
    }

    pub fn occupied_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Writes the bitset (little-endian u64 words, x-major then y then z) and
    /// a JSON sidecar holding the grid placement.
    pub fn dump(&self, bin_path: &Path, json_path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.bits.iter().flat_map(|w| w.to_le_bytes()).collect();
        fs::write(bin_path, bytes).map_err(|e| Error::io(bin_path, e))?;
        let json = serde_json::to_string_pretty(&self.meta).map_err(|source| Error::Json {
            context: "grid sidecar".into(),
            source,
        })?;
        fs::write(json_path, json).map_err(|e| Error::io(json_path, e))
    }
}

pub fn neighbors4(dims: [usize; 3], ix: i64, iy: i64) -> impl Iterator<Item = (usize, usize)> {
    const STEPS: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
    let (nx, ny) = (dims[0] as i64, dims[1] as i64);
    STEPS.into_iter().filter_map(move |(dx, dy)| {
        let (x, y) = (ix + dx, iy + dy);
        (x >= 0 && y >= 0 && x < nx && y < ny).then_some((x as usize, y as usize))
    })
}

/// Rasterizes a storey cloud. The grid spans the cloud's bounds and the slab's
/// z range, plus one voxel of padding on every side.
pub fn rasterize(
    cloud: &PointCloud,
    slab: &StoreySlab,
    opts: &RasterOptions,
) -> Result<OccupancyGrid> {
    let voxel = opts.voxel;
    check_positive("voxel", voxel)?;
    let bb = cloud.bounds().ok_or(Error::EmptyCloud { rejected: 0 })?;
    let mut lo = bb.min;
    let mut hi = bb.max;
    lo[2] = lo[2].min(slab.floor_height);
    hi[2] = hi[2].max(slab.ceiling_height);

    let origin = match opts.anchor {
        Anchor::Global => lo.map(|v| ((v / voxel).floor() - 1.0) * voxel),
        Anchor::Explicit(o) => {
            if (0..3).any(|k| lo[k] < o[k]) {
                return Err(Error::InvalidParameter(format!(
                    "explicit origin {o:?} lies above the data minimum {lo:?}"
                )));
            }
            o
        }
    };
    let mut dims = [0usize; 3];
    for k in 0..3 {
        // last occupied index plus one padding voxel
        dims[k] = ((hi[k] - origin[k]) / voxel).floor() as usize + 2;
    }
    let cells = dims.iter().map(|&d| d as u128).product::<u128>();
    let required_bytes = (cells.div_ceil(64) * 8).min(u64::MAX as u128) as u64;
    if required_bytes > opts.memory_cap {
        return Err(Error::Capacity {
            dims,
            required_bytes,
            cap_bytes: opts.memory_cap,
        });
    }
    let floor_z_index =
        (((slab.floor_height - origin[2]) / voxel).floor().max(0.0) as usize).min(dims[2] - 1);
    let mut grid = OccupancyGrid::empty(GridMeta {
        origin,
        voxel,
        dims,
        floor_z_index,
    });
    for p in cloud.points() {
        let idx = voxel_of(p, origin, voxel, dims);
        grid.set_occupied(idx[0], idx[1], idx[2]);
    }
    Ok(grid)
}

/// Voxel containing `p`, clamped into the grid.
pub fn voxel_of(p: &[f64; 3], origin: [f64; 3], voxel: f64, dims: [usize; 3]) -> [usize; 3] {
    let mut out = [0usize; 3];
    for k in 0..3 {
        let i = ((p[k] - origin[k]) / voxel).floor().max(0.0) as usize;
        out[k] = i.min(dims[k] - 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn slab(f: f64, c: f64) -> StoreySlab {
        StoreySlab {
            index: 0,
            floor_height: f,
            ceiling_height: c,
        }
    }

    #[test]
    fn explicit_origin_index_arithmetic() {
        let cloud = PointCloud::new(vec![[0.07, 0.0, 0.0]]).unwrap();
        let opts = RasterOptions {
            anchor: Anchor::Explicit([-0.05, -0.05, -0.05]),
            ..RasterOptions::new(0.05)
        };
        let g = rasterize(&cloud, &slab(0.0, 0.0), &opts).unwrap();
        assert!(g.is_occupied(2, 1, 1));
        assert_eq!(g.occupied_count(), 1);
        assert_eq!(g.dims(), [4, 3, 3]);
    }

    #[test]
    fn global_anchor_pads_one_voxel() {
        let cloud = PointCloud::new(vec![[0.07, 0.0, 0.0], [0.3, 0.2, 0.1]]).unwrap();
        let g = rasterize(&cloud, &slab(0.0, 0.1), &RasterOptions::new(0.05)).unwrap();
        let m = g.meta();
        assert!((m.origin[0] - 0.0).abs() < 1e-12 && (m.origin[1] + 0.05).abs() < 1e-12);
        assert!(g.is_occupied(1, 1, 1));
        assert_eq!(m.floor_z_index, 1);
        // top/side padding stays free
        let [nx, ny, nz] = g.dims();
        for ix in 0..nx {
            for iy in 0..ny {
                assert!(!g.is_occupied(ix, iy, nz - 1));
            }
        }
    }

    #[test]
    fn same_voxel_points_occupy_one_cell() {
        let cloud = PointCloud::new(vec![[0.01, 0.01, 0.01], [0.02, 0.02, 0.02]]).unwrap();
        let g = rasterize(&cloud, &slab(0.0, 0.02), &RasterOptions::new(0.05)).unwrap();
        assert_eq!(g.occupied_count(), 1);
    }

    #[test]
    fn neighbors_at_corner_and_interior() {
        let g = OccupancyGrid::empty(GridMeta {
            origin: [0.0; 3],
            voxel: 1.0,
            dims: [5, 5, 1],
            floor_z_index: 0,
        });
        assert_eq!(g.neighbors4(0, 0).count(), 2);
        assert_eq!(g.neighbors4(2, 2).count(), 4);
        assert_eq!(g.neighbors4(4, 2).count(), 3);
    }

    #[test]
    fn set_then_query() {
        let mut g = OccupancyGrid::empty(GridMeta {
            origin: [0.0; 3],
            voxel: 1.0,
            dims: [3, 4, 5],
            floor_z_index: 0,
        });
        assert!(!g.is_occupied(2, 3, 4));
        g.set_occupied(2, 3, 4);
        assert!(g.is_occupied(2, 3, 4));
        assert_eq!(g.occupied_count(), 1);
    }

    #[test]
    #[should_panic]
    fn out_of_bounds_query_panics() {
        let g = OccupancyGrid::empty(GridMeta {
            origin: [0.0; 3],
            voxel: 1.0,
            dims: [2, 2, 2],
            floor_z_index: 0,
        });
        g.is_occupied(2, 0, 0);
    }

    #[test]
    fn capacity_error_names_bytes() {
        let cloud = PointCloud::new(vec![[0.0; 3], [100.0, 100.0, 10.0]]).unwrap();
        let opts = RasterOptions {
            memory_cap: 1024,
            ..RasterOptions::new(0.05)
        };
        match rasterize(&cloud, &slab(0.0, 10.0), &opts) {
            Err(Error::Capacity {
                required_bytes,
                cap_bytes,
                ..
            }) => {
                assert!(required_bytes > 1024 && cap_bytes == 1024)
            }
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn matches_per_point_binning_and_ignores_order(
            pts in prop::collection::vec(prop::array::uniform3(-2.0f64..2.0), 1..400),
            voxel in 0.1f64..0.7,
            seed in any::<u64>(),
        ) {
            let cloud = PointCloud::new(pts.clone()).unwrap();
            let s = slab(-1.0, 1.0);
            let g = rasterize(&cloud, &s, &RasterOptions::new(voxel)).unwrap();
            let m = *g.meta();
            let mut want = std::collections::BTreeSet::new();
            for p in &pts {
                let idx = [0, 1, 2].map(|k| ((p[k] - m.origin[k]) / voxel).floor() as i64);
                for k in 0..3 {
                    prop_assert!(idx[k] >= 1 && (idx[k] as usize) < m.dims[k] - 1);
                }
                want.insert(idx.map(|v| v as usize));
            }
            prop_assert_eq!(g.occupied_count(), want.len());
            for w in &want {
                prop_assert!(g.is_occupied(w[0], w[1], w[2]));
            }
            let mut shuffled = pts;
            let n = shuffled.len();
            for i in 0..n {
                shuffled.swap(i, (seed as usize ^ i.wrapping_mul(31)) % n);
            }
            let g2 = rasterize(&PointCloud::new(shuffled).unwrap(), &s, &RasterOptions::new(voxel)).unwrap();
            prop_assert_eq!(g, g2);
        }
    }
}
