//! Point cloud container, downsampling and cluster-based denoising.

mod denoise;
pub mod io;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use denoise::{denoise_clusters, DenoiseReport};
pub use io::{load_cloud, write_cloud, CloudFormat, LoadReport};

/// Axis-aligned bounding box in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn of_points(points: &[[f64; 3]]) -> Option<Aabb> {
        let first = *points.first()?;
        let mut bb = Aabb {
            min: first,
            max: first,
        };
        for p in &points[1..] {
            for k in 0..3 {
                bb.min[k] = bb.min[k].min(p[k]);
                bb.max[k] = bb.max[k].max(p[k]);
            }
        }
        Some(bb)
    }

    pub fn extent(&self) -> [f64; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }
}

/// Metric 3D points with cached bounds. All coordinates are finite.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<[f64; 3]>,
    bounds: Option<Aabb>,
}

impl PointCloud {
    /// Builds a cloud, failing if any coordinate is NaN or infinite.
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !is_finite(p)) {
            return Err(Error::InvalidParameter(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        Ok(Self::from_finite(points))
    }

    /// Builds a cloud from the finite points only; returns the number dropped.
    pub fn from_lossy(mut points: Vec<[f64; 3]>) -> (Self, usize) {
        let before = points.len();
        points.retain(is_finite);
        let dropped = before - points.len();
        (Self::from_finite(points), dropped)
    }

    fn from_finite(points: Vec<[f64; 3]>) -> Self {
        let bounds = Aabb::of_points(&points);
        PointCloud { points, bounds }
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn into_points(self) -> Vec<[f64; 3]> {
        self.points
    }

    pub fn bounds(&self) -> Option<Aabb> {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keeps the points whose index passes `keep`, preserving order.
    pub fn select(&self, mut keep: impl FnMut(usize, &[f64; 3]) -> bool) -> PointCloud {
        let pts = self
            .points
            .iter()
            .enumerate()
            .filter(|(i, p)| keep(*i, p))
            .map(|(_, p)| *p)
            .collect();
        Self::from_finite(pts)
    }
}

fn is_finite(p: &[f64; 3]) -> bool {
    p.iter().all(|c| c.is_finite())
}

/// Replaces the points of every occupied `cell`-sized lattice cell by their
/// centroid. The lattice is anchored at the cloud's min corner.
pub fn voxel_downsample(cloud: &PointCloud, cell: f64) -> Result<PointCloud> {
    match cloud.bounds() {
        Some(bb) => voxel_downsample_anchored(cloud, cell, bb.min),
        None => {
            check_positive("cell", cell)?;
            Ok(PointCloud::default())
        }
    }
}

/// Same as [`voxel_downsample`] with an explicit lattice anchor.
///
/// Output points are ordered by lattice key (x, then y, then z index).
pub fn voxel_downsample_anchored(
    cloud: &PointCloud,
    cell: f64,
    anchor: [f64; 3],
) -> Result<PointCloud> {
    check_positive("cell", cell)?;
    let mut cells: HashMap<[i64; 3], ([f64; 3], u32)> = HashMap::new();
    for p in cloud.points() {
        let key = lattice_key(p, anchor, cell);
        let acc = cells.entry(key).or_insert(([0.0; 3], 0));
        for k in 0..3 {
            acc.0[k] += p[k];
        }
        acc.1 += 1;
    }
    let mut keyed: Vec<_> = cells.into_iter().collect();
    keyed.sort_unstable_by_key(|(k, _)| *k);
    let points = keyed
        .into_iter()
        .map(|(_, (sum, n))| {
            let n = n as f64;
            [sum[0] / n, sum[1] / n, sum[2] / n]
        })
        .collect();
    Ok(PointCloud::from_finite(points))
}

pub(crate) fn lattice_key(p: &[f64; 3], anchor: [f64; 3], cell: f64) -> [i64; 3] {
    [
        ((p[0] - anchor[0]) / cell).floor() as i64,
        ((p[1] - anchor[1]) / cell).floor() as i64,
        ((p[2] - anchor[2]) / cell).floor() as i64,
    ]
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be > 0, got {v}"
        )))
    }
}
