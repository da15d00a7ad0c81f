use serde::{Deserialize, Serialize};

use crate::columns::ColumnField;

/// Binary 2D map of one region's footprint. Cell `(x, y)` is stored at
/// `y * width + x` and corresponds to storey cell `(x + offset[0], y + offset[1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMap2D {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub offset: [i64; 2],
    /// Metric position of the storey grid's cell (0, 0) corner.
    pub grid_origin: [f64; 2],
    pub free: Vec<bool>,
}

impl GridMap2D {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        offset: [i64; 2],
        grid_origin: [f64; 2],
    ) -> Self {
        GridMap2D {
            width,
            height,
            resolution,
            offset,
            grid_origin,
            free: vec![false; width * height],
        }
    }

    /// Builds a map from an ASCII picture, `.` free and anything else occupied,
    /// first line at `y = 0`.
    pub fn from_ascii(rows: &[&str], resolution: f64) -> Self {
        let height = rows.len();
        let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        let mut m = GridMap2D::new(width, height, resolution, [0, 0], [0.0, 0.0]);
        for (y, row) in rows.iter().enumerate() {
            for (x, ch) in row.bytes().enumerate() {
                m.free[y * width + x] = ch == b'.';
            }
        }
        m
    }

    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn xy(&self, i: usize) -> (usize, usize) {
        (i % self.width, i / self.width)
    }

    pub fn is_free(&self, x: usize, y: usize) -> bool {
        self.free[self.idx(x, y)]
    }

    pub fn free_count(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }

    /// Storey cell of map cell `(x, y)`.
    pub fn to_storey(&self, x: usize, y: usize) -> (i64, i64) {
        (x as i64 + self.offset[0], y as i64 + self.offset[1])
    }

    /// Map cell of storey cell, if inside the map.
    pub fn from_storey(&self, ix: i64, iy: i64) -> Option<(usize, usize)> {
        let (x, y) = (ix - self.offset[0], iy - self.offset[1]);
        (x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height)
            .then_some((x as usize, y as usize))
    }

    /// Metric lower-left corner of map cell `(x, y)`.
    pub fn corner(&self, x: i64, y: i64) -> [f64; 2] {
        [
            self.grid_origin[0] + (x + self.offset[0]) as f64 * self.resolution,
            self.grid_origin[1] + (y + self.offset[1]) as f64 * self.resolution,
        ]
    }

    /// In-bounds 8-neighbors.
    pub fn neighbors8(&self, x: usize, y: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        NEIGHBORS8.iter().filter_map(move |&(dx, dy)| {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            (nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height)
                .then_some((nx as usize, ny as usize))
        })
    }

    pub fn neighbors4(&self, x: usize, y: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        NEIGHBORS8.iter().step_by(2).filter_map(move |&(dx, dy)| {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            (nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height)
                .then_some((nx as usize, ny as usize))
        })
    }
}

/// Ring order starting east, counter-clockwise; even entries are 4-neighbors.
pub(crate) const NEIGHBORS8: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Marks the cells of the given columns free, cropped to their bounds plus a
/// one-cell occupied border.
pub fn project_region(field: &ColumnField, column_ids: &[u32]) -> GridMap2D {
    let cols = field.columns();
    let meta = &field.meta;
    let origin = [meta.origin[0], meta.origin[1]];
    if column_ids.is_empty() {
        return GridMap2D::new(0, 0, meta.voxel, [0, 0], origin);
    }
    let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for &c in column_ids {
        let c = cols[c as usize];
        x0 = x0.min(c.ix as i64);
        y0 = y0.min(c.iy as i64);
        x1 = x1.max(c.ix as i64);
        y1 = y1.max(c.iy as i64);
    }
    let (w, h) = ((x1 - x0 + 3) as usize, (y1 - y0 + 3) as usize);
    let mut map = GridMap2D::new(w, h, meta.voxel, [x0 - 1, y0 - 1], origin);
    for &c in column_ids {
        let c = cols[c as usize];
        let (x, y) = map.from_storey(c.ix as i64, c.iy as i64).unwrap();
        let i = map.idx(x, y);
        map.free[i] = true;
    }
    map
}

/// Squared Euclidean distance, in cells, from every cell to the nearest cell
/// where `site` is true. Cells with no site anywhere get `f64::INFINITY`.
pub fn squared_edt(width: usize, height: usize, site: &[bool]) -> Vec<f64> {
    let mut d: Vec<f64> = site
        .iter()
        .map(|&s| if s { 0.0 } else { f64::INFINITY })
        .collect();
    let mut buf = Vec::new();
    for x in 0..width {
        buf.clear();
        buf.extend((0..height).map(|y| d[y * width + x]));
        let col = edt_1d(&buf);
        for (y, v) in col.into_iter().enumerate() {
            d[y * width + x] = v;
        }
    }
    for y in 0..height {
        let row = edt_1d(&d[y * width..(y + 1) * width]);
        d[y * width..(y + 1) * width].copy_from_slice(&row);
    }
    d
}

/// Lower envelope of parabolas (Felzenszwalb and Huttenlocher).
fn edt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![f64::INFINITY; n];
    let finite: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if finite.is_empty() {
        return out;
    }
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    let mut k = 0usize;
    v[0] = finite[0];
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for &q in &finite[1..] {
        loop {
            let p = v[k];
            let s =
                ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            // z[0] is -inf, so k never underflows
            if s <= z[k] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *o = dq * dq + f[p];
    }
    out
}
