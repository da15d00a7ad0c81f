use std::collections::HashMap;

use super::{check_positive, lattice_key, PointCloud};
use crate::error::{Error, Result};
use crate::unionfind::UnionFind;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct DenoiseReport {
    pub clusters: usize,
    pub clusters_removed: usize,
    pub points_removed: usize,
}

/// Single-linkage clustering under `dist <= link_dist`, dropping every
/// cluster smaller than `min_points`. Survivors keep their input order.
pub fn denoise_clusters(
    cloud: &PointCloud,
    link_dist: f64,
    min_points: usize,
) -> Result<(PointCloud, DenoiseReport)> {
    check_positive("link_dist", link_dist)?;
    if min_points == 0 {
        return Err(Error::InvalidParameter("min_points must be >= 1".into()));
    }
    let Some(bb) = cloud.bounds() else {
        return Ok((PointCloud::default(), DenoiseReport::default()));
    };
    let pts = cloud.points();
    let labels = link_components(pts, bb.min, link_dist);

    let mut sizes: HashMap<usize, usize> = HashMap::new();
    for &l in &labels {
        *sizes.entry(l).or_default() += 1;
    }
    let clusters = sizes.len();
    let clusters_removed = sizes.values().filter(|&&n| n < min_points).count();
    let out = cloud.select(|i, _| sizes[&labels[i]] >= min_points);
    let report = DenoiseReport {
        clusters,
        clusters_removed,
        points_removed: pts.len() - out.len(),
    };
    Ok((out, report))
}

/// Component root per point, using a hash grid with cell = `link_dist`.
fn link_components(pts: &[[f64; 3]], anchor: [f64; 3], link_dist: f64) -> Vec<usize> {
    let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in pts.iter().enumerate() {
        buckets
            .entry(lattice_key(p, anchor, link_dist))
            .or_default()
            .push(i);
    }
    let d2 = link_dist * link_dist;
    let mut uf = UnionFind::new(pts.len());
    for (key, members) in &buckets {
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let nk = [key[0] + dx, key[1] + dy, key[2] + dz];
                    // visit each unordered bucket pair once
                    if nk < *key {
                        continue;
                    }
                    let Some(others) = buckets.get(&nk) else {
                        continue;
                    };
                    let same = nk == *key;
                    for (a_pos, &a) in members.iter().enumerate() {
                        let rest = if same {
                            &others[a_pos + 1..]
                        } else {
                            &others[..]
                        };
                        for &b in rest {
                            if dist2(&pts[a], &pts[b]) <= d2 {
                                uf.union(a, b);
                            }
                        }
                    }
                }
            }
        }
    }
    (0..pts.len()).map(|i| uf.find(i)).collect()
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}
