//! Synthetic indoor scenes with known structure.
//!
//! A scene is a set of free-space boxes ("spaces") plus solid boxes inside
//! them. Only surfaces that separate free space from non-free space are
//! sampled, so shared openings between touching spaces (doors, glass fronts,
//! ceiling steps) come out of the geometry without special cases.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::cloud::{write_cloud, CloudFormat, PointCloud};
use crate::error::{Error, Result};
use crate::eval::{LabelImage, Placement};
use crate::regions::RegionKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    TwoRoomsDoor,
    SlantedCeiling,
    TwoStorey,
    CorridorT,
    TableRoom,
    GlassFront,
    /// 50 x 20 m floor of offices along a corridor.
    Office,
}

impl FixtureKind {
    pub const ALL: [FixtureKind; 7] = [
        FixtureKind::TwoRoomsDoor,
        FixtureKind::SlantedCeiling,
        FixtureKind::TwoStorey,
        FixtureKind::CorridorT,
        FixtureKind::TableRoom,
        FixtureKind::GlassFront,
        FixtureKind::Office,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FixtureKind::TwoRoomsDoor => "two_rooms_door",
            FixtureKind::SlantedCeiling => "slanted_ceiling",
            FixtureKind::TwoStorey => "two_storey",
            FixtureKind::CorridorT => "corridor_T",
            FixtureKind::TableRoom => "table_room",
            FixtureKind::GlassFront => "glass_front",
            FixtureKind::Office => "office",
        }
    }
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FixtureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FixtureKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown fixture kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureParams {
    /// Surface sample spacing, meters.
    pub spacing: f64,
    /// Horizontal shift of the whole scene, so walls avoid lattice planes.
    pub offset: [f64; 2],
    /// Isolated stray points inside free space.
    pub outliers: usize,
    pub seed: u64,
    /// Room footprint and height for two_rooms_door.
    pub room: [f64; 3],
    /// Door width and height.
    pub door: [f64; 2],
    pub wall: f64,
    /// Ceiling rise per meter for slanted_ceiling.
    pub slope: f64,
    /// Relative ceiling drop over half of the slanted_ceiling room; 0 for none.
    pub step: f64,
    pub corridor_width: f64,
    /// Pixel size of the ground-truth label image.
    pub voxel: f64,
}

impl Default for FixtureParams {
    fn default() -> Self {
        FixtureParams {
            spacing: 0.05,
            offset: [0.0123, 0.0371],
            outliers: 12,
            seed: 7,
            room: [4.0, 4.0, 3.0],
            door: [0.9, 2.0],
            wall: 0.3,
            slope: 0.05,
            step: 0.0,
            corridor_width: 1.5,
            voxel: 0.15,
        }
    }
}

impl FixtureParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("spacing", self.spacing),
            ("room width", self.room[0]),
            ("room depth", self.room[1]),
            ("room height", self.room[2]),
            ("door width", self.door[0]),
            ("door height", self.door[1]),
            ("wall", self.wall),
            ("corridor_width", self.corridor_width),
            ("voxel", self.voxel),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.door[0] >= self.room[1] || self.door[1] >= self.room[2] {
            return Err(Error::InvalidParameter(
                "door must be smaller than the room wall".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.step) || !(self.slope.abs() < 1.0) {
            return Err(Error::InvalidParameter(
                "step must be in [0, 1) and |slope| < 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ceiling {
    Flat(f64),
    /// z = z0 + rise * (x - x0)
    Slope {
        z0: f64,
        x0: f64,
        rise: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Space {
    min: [f64; 3],
    max: [f64; 2],
    ceiling: Ceiling,
    /// Index into the truth regions.
    region: usize,
    /// Ground-truth leaf label, 1-based.
    leaf: u32,
}

impl Space {
    fn ceiling_at(&self, x: f64) -> f64 {
        match self.ceiling {
            Ceiling::Flat(z) => z,
            Ceiling::Slope { z0, x0, rise } => z0 + rise * (x - x0),
        }
    }

    fn top(&self) -> f64 {
        self.ceiling_at(self.min[0])
            .max(self.ceiling_at(self.max[0]))
    }

    fn contains(&self, p: [f64; 3]) -> bool {
        p[0] > self.min[0]
            && p[0] < self.max[0]
            && p[1] > self.min[1]
            && p[1] < self.max[1]
            && p[2] > self.min[2]
            && p[2] < self.ceiling_at(p[0])
    }

    fn contains_xy(&self, x: f64, y: f64) -> bool {
        x > self.min[0] && x < self.max[0] && y > self.min[1] && y < self.max[1]
    }
}

fn space(min: [f64; 3], max: [f64; 2], ceiling: f64, region: usize, leaf: u32) -> Space {
    Space {
        min,
        max,
        ceiling: Ceiling::Flat(ceiling),
        region,
        leaf,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Solid {
    min: [f64; 3],
    max: [f64; 3],
}

/// Three-way split of a T junction the way an area graph cuts it: from the
/// junction vertex of the medial axis (equidistant to the far wall and both
/// inner corners) straight to each of those three obstacle points.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TeeSplit {
    vertex: [f64; 2],
    /// Inner corners where the stem meets the bar; the stem lies below.
    corners: [[f64; 2]; 2],
    /// Labels of the -x, +x and -y branches.
    labels: [u32; 3],
}

impl TeeSplit {
    /// For a bar of width `w` along x whose lower wall is at `y0`, and a stem
    /// of the same width centered on `x_mid` below it.
    fn new(x_mid: f64, y0: f64, w: f64, labels: [u32; 3]) -> Self {
        let h = w / 2.0;
        TeeSplit {
            vertex: [x_mid, y0 + 0.75 * h],
            corners: [[x_mid - h, y0], [x_mid + h, y0]],
            labels,
        }
    }

    fn label(&self, x: f64, y: f64) -> u32 {
        let [vx, vy] = self.vertex;
        let c = if x < vx {
            self.corners[0]
        } else {
            self.corners[1]
        };
        let on_line = c[1] + (x - c[0]) * (vy - c[1]) / (vx - c[0]);
        if y < on_line {
            self.labels[2]
        } else if x < vx {
            self.labels[0]
        } else {
            self.labels[1]
        }
    }

    fn shift(&mut self, d: [f64; 2]) {
        let [c0, c1] = &mut self.corners;
        for p in [&mut self.vertex, c0, c1] {
            p[0] += d[0];
            p[1] += d[1];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Scene {
    spaces: Vec<Space>,
    solids: Vec<Solid>,
    tee: Option<TeeSplit>,
}

const EPS: f64 = 1e-3;

impl Scene {
    fn is_free(&self, p: [f64; 3]) -> bool {
        self.spaces.iter().any(|s| s.contains(p))
            && !self
                .solids
                .iter()
                .any(|b| (0..3).all(|k| p[k] > b.min[k] && p[k] < b.max[k]))
    }

    /// Samples every parallelogram `o + u*s + v*t`, `s, t in [0, 1]`, on a
    /// grid of roughly `spacing`, keeping points where `keep(p, n)` holds.
    fn sample_face(
        out: &mut Vec<[f64; 3]>,
        spacing: f64,
        o: [f64; 3],
        u: [f64; 3],
        v: [f64; 3],
        n: [f64; 3],
        keep: impl Fn([f64; 3], [f64; 3]) -> bool,
    ) {
        let len = |a: [f64; 3]| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        let nu = (len(u) / spacing).round().max(1.0) as usize;
        let nv = (len(v) / spacing).round().max(1.0) as usize;
        for i in 0..nu {
            let s = (i as f64 + 0.5) / nu as f64;
            for j in 0..nv {
                let t = (j as f64 + 0.5) / nv as f64;
                let p = [0, 1, 2].map(|k| o[k] + u[k] * s + v[k] * t);
                if keep(p, n) {
                    out.push(p);
                }
            }
        }
    }

    fn sample(&self, spacing: f64) -> Vec<[f64; 3]> {
        let mut pts = Vec::new();
        let step = |p: [f64; 3], n: [f64; 3], d: f64| [0, 1, 2].map(|k| p[k] + n[k] * d);
        let boundary = |p: [f64; 3], n: [f64; 3]| {
            self.is_free(step(p, n, -EPS)) && !self.is_free(step(p, n, EPS))
        };
        for s in &self.spaces {
            let [x0, y0, z0] = s.min;
            let [x1, y1] = s.max;
            let top = s.top();
            let (lx, ly, lz) = (x1 - x0, y1 - y0, top - z0);
            // floor
            Self::sample_face(
                &mut pts,
                spacing,
                [x0, y0, z0],
                [lx, 0.0, 0.0],
                [0.0, ly, 0.0],
                [0.0, 0.0, -1.0],
                boundary,
            );
            // ceiling, possibly sloped
            let (c0, c1) = (s.ceiling_at(x0), s.ceiling_at(x1));
            let n = {
                let r = (c1 - c0) / lx;
                let m = (1.0 + r * r).sqrt();
                [-r / m, 0.0, 1.0 / m]
            };
            Self::sample_face(
                &mut pts,
                spacing,
                [x0, y0, c0],
                [lx, 0.0, c1 - c0],
                [0.0, ly, 0.0],
                n,
                boundary,
            );
            // walls span the full height; parts above a sloped ceiling fail the
            // inside test and are dropped
            Self::sample_face(
                &mut pts,
                spacing,
                [x0, y0, z0],
                [0.0, ly, 0.0],
                [0.0, 0.0, lz],
                [-1.0, 0.0, 0.0],
                boundary,
            );
            Self::sample_face(
                &mut pts,
                spacing,
                [x1, y0, z0],
                [0.0, ly, 0.0],
                [0.0, 0.0, lz],
                [1.0, 0.0, 0.0],
                boundary,
            );
            Self::sample_face(
                &mut pts,
                spacing,
                [x0, y0, z0],
                [lx, 0.0, 0.0],
                [0.0, 0.0, lz],
                [0.0, -1.0, 0.0],
                boundary,
            );
            Self::sample_face(
                &mut pts,
                spacing,
                [x0, y1, z0],
                [lx, 0.0, 0.0],
                [0.0, 0.0, lz],
                [0.0, 1.0, 0.0],
                boundary,
            );
        }
        let visible = |p: [f64; 3], n: [f64; 3]| self.is_free(step(p, n, EPS));
        for b in &self.solids {
            let [x0, y0, z0] = b.min;
            let [x1, y1, z1] = b.max;
            let (lx, ly, lz) = (x1 - x0, y1 - y0, z1 - z0);
            Self::sample_face(
                &mut pts,
                spacing,
                [x0, y0, z0],
                [lx, 0.0, 0.0],
                [0.0, ly, 0.0],
                [0.0, 0.0, -1.0],
                visible,
            );
            Self::sample_face(
                &mut pts,
                spacing,
                [x0, y0, z1],
                [lx, 0.0, 0.0],
                [0.0, ly, 0.0],
                [0.0, 0.0, 1.0],
                visible,
            );
            Self::sample_face(
                &mut pts,
                spacing,
                [x0, y0, z0],
                [0.0, ly, 0.0],
                [0.0, 0.0, lz],
                [-1.0, 0.0, 0.0],
                visible,
            );
            Self::sample_face(
                &mut pts,
                spacing,
                [x1, y0, z0],
                [0.0, ly, 0.0],
                [0.0, 0.0, lz],
                [1.0, 0.0, 0.0],
                visible,
            );
            Self::sample_face(
                &mut pts,
                spacing,
                [x0, y0, z0],
                [lx, 0.0, 0.0],
                [0.0, 0.0, lz],
                [0.0, -1.0, 0.0],
                visible,
            );
            Self::sample_face(
                &mut pts,
                spacing,
                [x0, y1, z0],
                [lx, 0.0, 0.0],
                [0.0, 0.0, lz],
                [0.0, 1.0, 0.0],
                visible,
            );
        }
        pts
    }

    /// Points well inside free space, at least `margin` from every surface.
    fn outliers(&self, n: usize, seed: u64, margin: f64) -> Vec<[f64; 3]> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        let mut tries = 0;
        while out.len() < n && tries < 1000 * (n + 1) {
            tries += 1;
            let s = &self.spaces[rng.random_range(0..self.spaces.len())];
            let lo = [s.min[0] + margin, s.min[1] + margin, s.min[2] + margin];
            let hi = [s.max[0] - margin, s.max[1] - margin, s.top() - margin];
            if (0..3).any(|k| lo[k] >= hi[k]) {
                continue;
            }
            let p = [0, 1, 2].map(|k| rng.random_range(lo[k]..hi[k]));
            let clear = [-1.0, 1.0].iter().all(|&d| {
                (0..3).all(|k| {
                    let mut q = p;
                    q[k] += d * margin;
                    self.is_free(q)
                })
            });
            if clear {
                out.push(p);
            }
        }
        out
    }

    fn shift(&mut self, d: [f64; 2]) {
        for s in &mut self.spaces {
            s.min[0] += d[0];
            s.min[1] += d[1];
            s.max[0] += d[0];
            s.max[1] += d[1];
            if let Ceiling::Slope { x0, .. } = &mut s.ceiling {
                *x0 += d[0];
            }
        }
        for b in &mut self.solids {
            for k in 0..2 {
                b.min[k] += d[k];
                b.max[k] += d[k];
            }
        }
        if let Some(t) = &mut self.tee {
            t.shift(d);
        }
    }

    /// Leaf label per cell of a `voxel` lattice over the spaces whose floor is
    /// at `floor`. A cell is free when its whole footprint lies in the union
    /// of those spaces; it takes the space with the lowest ceiling over it.
    fn label_image(&self, floor: f64, voxel: f64) -> LabelImage {
        let spaces: Vec<&Space> = self
            .spaces
            .iter()
            .filter(|s| (s.min[2] - floor).abs() < 1e-9)
            .collect();
        let lo = [0, 1].map(|k| {
            spaces
                .iter()
                .map(|s| s.min[k])
                .fold(f64::INFINITY, f64::min)
        });
        let hi = [0, 1].map(|k| {
            spaces
                .iter()
                .map(|s| s.max[k])
                .fold(f64::NEG_INFINITY, f64::max)
        });
        let origin = lo.map(|v| ((v / voxel).floor() - 1.0) * voxel);
        let w = ((hi[0] - origin[0]) / voxel).floor() as usize + 2;
        let h = ((hi[1] - origin[1]) / voxel).floor() as usize + 2;
        let mut img = LabelImage::new(w, h);
        img.placement = Some(Placement {
            origin,
            resolution: voxel,
        });
        let inset = 1e-6;
        for y in 0..h {
            for x in 0..w {
                let (cx0, cy0) = (origin[0] + x as f64 * voxel, origin[1] + y as f64 * voxel);
                let covered = (0..3).all(|i| {
                    (0..3).all(|j| {
                        let px = cx0 + inset + (voxel - 2.0 * inset) * i as f64 / 2.0;
                        let py = cy0 + inset + (voxel - 2.0 * inset) * j as f64 / 2.0;
                        spaces.iter().any(|s| s.contains_xy(px, py))
                    })
                });
                if !covered {
                    continue;
                }
                let (mx, my) = (cx0 + voxel / 2.0, cy0 + voxel / 2.0);
                let overlaps = |s: &&&Space| {
                    s.min[0] < cx0 + voxel
                        && s.max[0] > cx0
                        && s.min[1] < cy0 + voxel
                        && s.max[1] > cy0
                };
                let best = spaces
                    .iter()
                    .filter(overlaps)
                    .min_by(|a, b| a.ceiling_at(mx).total_cmp(&b.ceiling_at(mx)))
                    .expect("covered cell overlaps a space");
                let label = match self.tee {
                    Some(t) if best.leaf == t.labels[0] || best.leaf == t.labels[2] => {
                        t.label(mx, my)
                    }
                    _ => best.leaf,
                };
                img.set(x, y, label);
            }
        }
        img
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionTruth {
    pub name: String,
    pub kind: RegionKind,
    pub storey: usize,
    /// Leaf labels of the expected sub-regions, if the region is subdivided.
    pub leaves: Vec<u32>,
}

/// An axis-aligned box, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxTruth {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureTruth {
    pub kind: FixtureKind,
    /// (floor, ceiling) per storey; for a sloped or stepped ceiling the
    /// highest value.
    pub storeys: Vec<[f64; 2]>,
    pub peaks: Vec<f64>,
    pub regions: Vec<RegionTruth>,
    /// Region index pairs.
    pub region_edges: Vec<[usize; 2]>,
    /// Expected volume count, when fixed by construction.
    pub volumes: Option<usize>,
    pub doors: Vec<BoxTruth>,
    pub outliers: usize,
    pub points: usize,
    /// File name of the ground-truth label image, storey 0.
    pub label_image: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub cloud: PointCloud,
    pub truth: FixtureTruth,
    pub labels: LabelImage,
}

pub const LABEL_IMAGE: &str = "gt_labels.png";

fn region(name: &str, kind: RegionKind, storey: usize, leaves: &[u32]) -> RegionTruth {
    RegionTruth {
        name: name.into(),
        kind,
        storey,
        leaves: leaves.to_vec(),
    }
}

pub fn make_fixture(kind: FixtureKind, p: &FixtureParams) -> Result<Fixture> {
    p.validate()?;
    let [rw, rd, rh] = p.room;
    let [dw, dh] = p.door;
    let t = p.wall;
    let cw = p.corridor_width;
    let mut doors = Vec::new();
    let mut volumes = None;
    let mut storeys = vec![[0.0, rh]];
    let mut tee = None;
    let mut solids = Vec::new();
    let (spaces, regions, edges) = match kind {
        FixtureKind::TwoRoomsDoor => {
            let y0 = (rd - dw) / 2.0;
            doors.push(BoxTruth {
                min: [rw, y0, 0.0],
                max: [rw + t, y0 + dw, dh],
            });
            volumes = Some(3);
            (
                vec![
                    space([0.0, 0.0, 0.0], [rw, rd], rh, 0, 1),
                    space([rw, y0, 0.0], [rw + t, y0 + dw], dh, 1, 2),
                    space([rw + t, 0.0, 0.0], [2.0 * rw + t, rd], rh, 2, 3),
                ],
                vec![
                    region("room_a", RegionKind::Room, 0, &[]),
                    region("door", RegionKind::Connection, 0, &[]),
                    region("room_b", RegionKind::Room, 0, &[]),
                ],
                vec![[0, 1], [1, 2]],
            )
        }
        FixtureKind::SlantedCeiling => {
            let (lx, ly, z0) = (6.0, 4.0, 2.7);
            if p.step > 0.0 {
                let hi = z0 + p.slope.max(0.0) * lx;
                storeys = vec![[0.0, hi]];
                volumes = Some(2);
                (
                    vec![
                        space([0.0, 0.0, 0.0], [lx / 2.0, ly], hi, 0, 1),
                        space([lx / 2.0, 0.0, 0.0], [lx, ly], hi * (1.0 - p.step), 0, 1),
                    ],
                    vec![region("room", RegionKind::Room, 0, &[])],
                    vec![],
                )
            } else {
                volumes = Some(1);
                storeys = vec![[0.0, z0.max(z0 + p.slope * lx)]];
                (
                    vec![Space {
                        min: [0.0, 0.0, 0.0],
                        max: [lx, ly],
                        ceiling: Ceiling::Slope {
                            z0,
                            x0: 0.0,
                            rise: p.slope,
                        },
                        region: 0,
                        leaf: 1,
                    }],
                    vec![region("room", RegionKind::Room, 0, &[])],
                    vec![],
                )
            }
        }
        FixtureKind::TwoStorey => {
            let (lx, ly) = (6.0, 5.0);
            storeys = vec![[0.0, 3.0], [3.3, 6.3]];
            volumes = Some(2);
            (
                vec![
                    space([0.0, 0.0, 0.0], [lx, ly], 3.0, 0, 1),
                    space([0.0, 0.0, 3.3], [lx, ly], 6.3, 1, 2),
                ],
                vec![
                    region("lower", RegionKind::Room, 0, &[]),
                    region("upper", RegionKind::Room, 1, &[]),
                ],
                vec![],
            )
        }
        FixtureKind::CorridorT => {
            let (bar, stem) = (12.0, 6.0);
            let sx = (bar - cw) / 2.0;
            tee = Some(TeeSplit::new(bar / 2.0, stem, cw, [1, 2, 3]));
            volumes = Some(1);
            (
                vec![
                    space([0.0, stem, 0.0], [bar, stem + cw], rh, 0, 1),
                    space([sx, 0.0, 0.0], [sx + cw, stem], rh, 0, 3),
                ],
                vec![region("corridor", RegionKind::Room, 0, &[1, 2, 3])],
                vec![],
            )
        }
        FixtureKind::TableRoom => {
            let (lx, ly) = (5.0, 4.0);
            solids.push(Solid {
                min: [2.0, 1.5, 0.72],
                max: [3.5, 2.3, 0.76],
            });
            (
                vec![space([0.0, 0.0, 0.0], [lx, ly], rh, 0, 1)],
                vec![region("room", RegionKind::Room, 0, &[])],
                vec![],
            )
        }
        FixtureKind::GlassFront => {
            // three rooms open towards one corridor along their south side
            let mut spaces = vec![space([0.0, 0.0, 0.0], [3.0 * rw + 2.0 * t, cw], rh, 0, 1)];
            for i in 0..3 {
                let x0 = i as f64 * (rw + t);
                spaces.push(space(
                    [x0, cw, 0.0],
                    [x0 + rw, cw + rd],
                    rh,
                    0,
                    2 + i as u32,
                ));
            }
            volumes = Some(1);
            (
                spaces,
                vec![region("open_plan", RegionKind::Room, 0, &[1, 2, 3, 4])],
                vec![],
            )
        }
        FixtureKind::Office => {
            // rooms on both sides of a 2 m corridor, one door each
            let (len, depth, cwo, tw) = (50.0, 20.0, 2.0, 0.2);
            let ry = (depth - cwo) / 2.0 - tw;
            let n = 10;
            let pitch = len / n as f64;
            let mut spaces = vec![space([0.0, ry + tw, 0.0], [len, ry + tw + cwo], rh, 0, 1)];
            let mut regions = vec![region("corridor", RegionKind::Room, 0, &[])];
            let mut edges = Vec::new();
            for side in 0..2 {
                for i in 0..n {
                    let x0 = i as f64 * pitch + tw / 2.0;
                    let x1 = x0 + pitch - tw;
                    let (ya, yb, dy0, dy1) = if side == 0 {
                        (0.0, ry, ry, ry + tw)
                    } else {
                        (depth - ry, depth, ry + tw + cwo, depth - ry)
                    };
                    let room = regions.len();
                    let leaf = room as u32 + 1;
                    spaces.push(space([x0, ya, 0.0], [x1, yb], rh, room, leaf));
                    regions.push(region(
                        &format!("room_{side}_{i}"),
                        RegionKind::Room,
                        0,
                        &[],
                    ));
                    let dx = (x0 + x1 - dw) / 2.0;
                    let door = regions.len();
                    spaces.push(space(
                        [dx, dy0, 0.0],
                        [dx + dw, dy1],
                        dh.max(2.1),
                        door,
                        door as u32 + 1,
                    ));
                    regions.push(region(
                        &format!("door_{side}_{i}"),
                        RegionKind::Connection,
                        0,
                        &[],
                    ));
                    doors.push(BoxTruth {
                        min: [dx, dy0, 0.0],
                        max: [dx + dw, dy1, dh.max(2.1)],
                    });
                    edges.push([0, door]);
                    edges.push([room, door]);
                }
            }
            (spaces, regions, edges)
        }
    };

    let mut scene = Scene {
        spaces,
        solids,
        tee,
    };
    scene.shift(p.offset);
    for d in &mut doors {
        for k in 0..2 {
            d.min[k] += p.offset[k];
            d.max[k] += p.offset[k];
        }
    }
    let mut points = scene.sample(p.spacing);
    let outliers = scene.outliers(p.outliers, p.seed, 0.5);
    let n_outliers = outliers.len();
    points.extend(outliers);
    let cloud = PointCloud::new(points)?;
    let peaks = storeys.iter().flat_map(|s| [s[0], s[1]]).collect();
    let labels = scene.label_image(storeys[0][0], p.voxel);
    let mut edges = edges;
    for e in &mut edges {
        e.sort_unstable();
    }
    edges.sort_unstable();
    // regions with a single leaf label are never split
    let regions = regions
        .into_iter()
        .map(|mut r| {
            if r.leaves.len() < 2 {
                r.leaves.clear();
            }
            r
        })
        .collect();
    let truth = FixtureTruth {
        kind,
        storeys,
        peaks,
        regions,
        region_edges: edges,
        volumes,
        doors,
        outliers: n_outliers,
        points: cloud.len(),
        label_image: Some(LABEL_IMAGE.into()),
    };
    Ok(Fixture {
        cloud,
        truth,
        labels,
    })
}

pub const CLOUD_FILE: &str = "cloud.ply";
pub const TRUTH_FILE: &str = "truth.json";

/// Writes `cloud.ply` (or the given format), `truth.json` and the label image.
pub fn write_fixture(fx: &Fixture, dir: &Path, format: CloudFormat) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = match format {
        CloudFormat::PlyAscii | CloudFormat::PlyBinaryLe => "cloud.ply",
        CloudFormat::PcdAscii => "cloud.pcd",
        CloudFormat::XyzText => "cloud.xyz",
    };
    write_cloud(&dir.join(name), &fx.cloud, format)?;
    let truth = dir.join(TRUTH_FILE);
    let text = serde_json::to_string_pretty(&fx.truth).expect("truth serializes");
    std::fs::write(&truth, text + "\n").map_err(|e| Error::io(&truth, e))?;
    fx.labels.write_png(&dir.join(LABEL_IMAGE))
}
