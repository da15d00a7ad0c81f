use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::areas::AreaGraph2D;
use super::map::{squared_edt, GridMap2D};

/// Edges `(i, j)`, `i < j`, of the alpha-shape of `points`: pairs at most
/// `alpha` apart for which at least one of the two circles of diameter `alpha`
/// through both points holds no other point strictly inside.
pub fn alpha_shape_edges(points: &[[f64; 2]], alpha: f64) -> Vec<(usize, usize)> {
    if !(alpha > 0.0) || points.len() < 2 {
        return Vec::new();
    }
    let r = alpha / 2.0;
    let key = |p: &[f64; 2]| [(p[0] / alpha).floor() as i64, (p[1] / alpha).floor() as i64];
    let mut buckets: HashMap<[i64; 2], Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(i);
    }
    let around = |p: &[f64; 2]| {
        let k = key(p);
        (-1..=1).flat_map(move |dx| (-1..=1).map(move |dy| [k[0] + dx, k[1] + dy]))
    };
    let mut edges = Vec::new();
    for (i, p) in points.iter().enumerate() {
        for b in around(p) {
            let Some(list) = buckets.get(&b) else {
                continue;
            };
            for &j in list {
                if j <= i {
                    continue;
                }
                let Some(centers) = circle_centers(p, &points[j], r) else {
                    continue;
                };
                let empty = |c: &[f64; 2]| {
                    around(c).all(|b| {
                        buckets.get(&b).is_none_or(|l| {
                            l.iter()
                                .all(|&k| k == i || k == j || !strictly_inside(&points[k], c, r))
                        })
                    })
                };
                if centers.iter().any(empty) {
                    edges.push((i, j));
                }
            }
        }
    }
    edges.sort_unstable();
    edges
}

/// Centers of the two radius-`r` circles through `a` and `b`.
pub fn circle_centers(a: &[f64; 2], b: &[f64; 2], r: f64) -> Option<[[f64; 2]; 2]> {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let d2 = dx * dx + dy * dy;
    if d2 == 0.0 || d2 > 4.0 * r * r {
        return None;
    }
    let h = (r * r - d2 / 4.0).max(0.0).sqrt();
    let d = d2.sqrt();
    let (mx, my) = ((a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0);
    let (ux, uy) = (-dy / d, dx / d);
    Some([[mx + h * ux, my + h * uy], [mx - h * ux, my - h * uy]])
}

pub fn strictly_inside(p: &[f64; 2], c: &[f64; 2], r: f64) -> bool {
    let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
    d2 < r * r * (1.0 - 1e-12)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaMerge {
    pub graph: AreaGraph2D,
    /// Connected groups of empty-disk centers found.
    pub components: usize,
    pub warning: Option<String>,
}

/// Merges areas lying in one open room. The free space swept by disks of
/// diameter `alpha` that touch no occupied cell is split into its connected
/// pieces (pieces joined only through gaps narrower than `alpha` stay apart).
/// An area whose cells are covered to at least `merge_fraction` by one piece
/// joins it; all areas joining the same piece become one area.
pub fn alpha_merge(
    ag: &AreaGraph2D,
    map: &GridMap2D,
    alpha: f64,
    merge_fraction: f64,
) -> AlphaMerge {
    if alpha < 2.0 * map.resolution {
        return AlphaMerge {
            graph: ag.clone(),
            components: 0,
            warning: Some(format!(
                "alpha {alpha} m is below twice the resolution ({} m); area merge skipped",
                map.resolution
            )),
        };
    }
    let (w, h) = (map.width, map.height);
    let occupied: Vec<bool> = map.free.iter().map(|f| !f).collect();
    let clear2 = squared_edt(w, h, &occupied);
    let rc = alpha / 2.0 / map.resolution;
    let is_center: Vec<bool> = (0..w * h)
        .map(|i| map.free[i] && clear2[i] >= rc * rc)
        .collect();

    // 8-connected groups of centers
    let mut comp = vec![u32::MAX; w * h];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for s in 0..w * h {
        if !is_center[s] || comp[s] != u32::MAX {
            continue;
        }
        let id = groups.len() as u32;
        comp[s] = id;
        let mut members = vec![s];
        let mut k = 0;
        while k < members.len() {
            let (x, y) = map.xy(members[k]);
            k += 1;
            for (nx, ny) in map.neighbors8(x, y) {
                let j = map.idx(nx, ny);
                if is_center[j] && comp[j] == u32::MAX {
                    comp[j] = id;
                    members.push(j);
                }
            }
        }
        groups.push(members);
    }

    let sizes = ag.sizes();
    let mut best: Vec<Option<(f64, u32)>> = vec![None; sizes.len()];
    let mut stamp = vec![u32::MAX; w * h];
    let reach = rc.floor() as i64;
    for (g, members) in groups.iter().enumerate() {
        let mut covered = vec![0usize; sizes.len()];
        for &c in members {
            let (cx, cy) = map.xy(c);
            // interior centers add nothing their neighbors don't
            if map.neighbors8(cx, cy).count() == 8
                && map
                    .neighbors8(cx, cy)
                    .all(|(x, y)| is_center[map.idx(x, y)])
            {
                continue;
            }
            for dy in -reach..=reach {
                for dx in -reach..=reach {
                    if ((dx * dx + dy * dy) as f64) > rc * rc {
                        continue;
                    }
                    let (x, y) = (cx as i64 + dx, cy as i64 + dy);
                    if x < 0 || y < 0 || x as usize >= w || y as usize >= h {
                        continue;
                    }
                    let j = y as usize * w + x as usize;
                    if stamp[j] != g as u32 && ag.labels[j] != 0 {
                        stamp[j] = g as u32;
                        covered[ag.labels[j] as usize] += 1;
                    }
                }
            }
        }
        for &c in members {
            if stamp[c] != g as u32 {
                stamp[c] = g as u32;
                covered[ag.labels[c] as usize] += 1;
            }
        }
        for (l, &n) in covered.iter().enumerate().skip(1) {
            let frac = n as f64 / sizes[l] as f64;
            if frac >= merge_fraction && best[l].is_none_or(|(f, _)| frac > f) {
                best[l] = Some((frac, g as u32));
            }
        }
    }

    let n_groups = groups.len() as u32;
    let relabeled: Vec<u32> = ag
        .labels
        .iter()
        .map(|&l| match (l, best.get(l as usize).copied().flatten()) {
            (0, _) => 0,
            (_, Some((_, g))) => g + 1,
            (_, None) => n_groups + l,
        })
        .collect();
    AlphaMerge {
        graph: AreaGraph2D::from_labels(w, h, &relabeled),
        components: groups.len(),
        warning: None,
    }
}
