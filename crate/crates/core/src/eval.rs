//! Scoring a segmentation label image against a ground-truth one with the
//! Matthews correlation coefficient.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-pixel labels, 0 for background. Row 0 is the lowest y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    /// Metric placement, when known: lower-left corner of pixel (0, 0) and
    /// pixel edge length.
    pub placement: Option<Placement>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub origin: [f64; 2],
    pub resolution: f64,
}

impl LabelImage {
    pub fn new(width: usize, height: usize) -> Self {
        LabelImage {
            width,
            height,
            labels: vec![0; width * height],
            placement: None,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, l: u32) {
        self.labels[y * self.width + x] = l;
    }

    /// Writes a grayscale PNG (8-bit when every label fits, else 16-bit) with
    /// north up, plus a placement sidecar if the placement is known.
    pub fn write_png(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc =
            png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        let max = self.labels.iter().copied().max().unwrap_or(0);
        if max > u16::MAX as u32 {
            return Err(Error::Image {
                context: path.display().to_string(),
                message: format!("label {max} does not fit 16 bits"),
            });
        }
        let wide = max > u8::MAX as u32;
        enc.set_depth(if wide {
            png::BitDepth::Sixteen
        } else {
            png::BitDepth::Eight
        });
        let mut data = Vec::with_capacity(self.labels.len() * if wide { 2 } else { 1 });
        for y in (0..self.height).rev() {
            for &l in &self.labels[y * self.width..(y + 1) * self.width] {
                if wide {
                    data.extend_from_slice(&(l as u16).to_be_bytes());
                } else {
                    data.push(l as u8);
                }
            }
        }
        let img_err = |e: png::EncodingError| Error::Image {
            context: path.display().to_string(),
            message: e.to_string(),
        };
        let mut w = enc.write_header().map_err(img_err)?;
        w.write_image_data(&data).map_err(img_err)?;
        w.finish().map_err(img_err)?;
        if let Some(p) = self.placement {
            let side = sidecar_path(path);
            let text = serde_json::to_string_pretty(&p).expect("placement serializes");
            std::fs::write(&side, text + "\n").map_err(|e| Error::io(&side, e))?;
        }
        Ok(())
    }

    /// Reads an 8- or 16-bit grayscale PNG and its sidecar, if present.
    pub fn read_png(path: &Path) -> Result<LabelImage> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let img_err = |e: png::DecodingError| Error::Image {
            context: path.display().to_string(),
            message: e.to_string(),
        };
        let mut reader = png::Decoder::new(BufReader::new(file))
            .read_info()
            .map_err(img_err)?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader.next_frame(&mut buf).map_err(img_err)?;
        if info.color_type != png::ColorType::Grayscale {
            return Err(Error::Image {
                context: path.display().to_string(),
                message: format!("expected grayscale, found {:?}", info.color_type),
            });
        }
        let (w, h) = (info.width as usize, info.height as usize);
        let mut img = LabelImage::new(w, h);
        for row in 0..h {
            let line = &buf[row * info.line_size..(row + 1) * info.line_size];
            let y = h - 1 - row;
            for x in 0..w {
                let l = match info.bit_depth {
                    png::BitDepth::Eight => line[x] as u32,
                    png::BitDepth::Sixteen => {
                        u16::from_be_bytes([line[2 * x], line[2 * x + 1]]) as u32
                    }
                    d => {
                        return Err(Error::Image {
                            context: path.display().to_string(),
                            message: format!("unsupported bit depth {d:?}"),
                        })
                    }
                };
                img.set(x, y, l);
            }
        }
        let side = sidecar_path(path);
        if side.exists() {
            let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
            img.placement = Some(serde_json::from_str(&text).map_err(|source| Error::Json {
                context: side.display().to_string(),
                source,
            })?);
        }
        Ok(img)
    }
}

/// `labels.png` → `labels.meta.json`.
pub fn sidecar_path(png: &Path) -> PathBuf {
    png.with_extension("meta.json")
}

/// Brings two images onto one canvas. With placements on a shared lattice
/// the canvas is the union of both footprints; otherwise sizes must match.
pub fn register(a: &LabelImage, b: &LabelImage) -> Result<(Vec<u32>, Vec<u32>)> {
    let mismatch = || Error::DimensionMismatch {
        left: (a.width, a.height),
        right: (b.width, b.height),
    };
    let (pa, pb) = match (a.placement, b.placement) {
        (Some(pa), Some(pb)) => (pa, pb),
        _ if a.width == b.width && a.height == b.height => {
            return Ok((a.labels.clone(), b.labels.clone()))
        }
        _ => return Err(mismatch()),
    };
    let r = pa.resolution;
    if (pb.resolution - r).abs() > 1e-9 * r {
        return Err(Error::InvalidParameter(format!(
            "resolutions differ: {} vs {}",
            pa.resolution, pb.resolution
        )));
    }
    let shift = |k: usize| {
        let s = (pb.origin[k] - pa.origin[k]) / r;
        let rounded = s.round();
        ((s - rounded).abs() < 1e-3).then_some(rounded as i64)
    };
    let (Some(dx), Some(dy)) = (shift(0), shift(1)) else {
        return Err(Error::InvalidParameter(
            "images are not on a shared pixel lattice".into(),
        ));
    };
    let x0 = 0.min(dx);
    let y0 = 0.min(dy);
    let x1 = (a.width as i64).max(dx + b.width as i64);
    let y1 = (a.height as i64).max(dy + b.height as i64);
    let (w, h) = ((x1 - x0) as usize, (y1 - y0) as usize);
    let place = |img: &LabelImage, ox: i64, oy: i64| {
        let mut out = vec![0u32; w * h];
        for y in 0..img.height {
            let cy = (y as i64 + oy - y0) as usize;
            for x in 0..img.width {
                out[cy * w + (x as i64 + ox - x0) as usize] = img.get(x, y);
            }
        }
        out
    };
    Ok((place(a, 0, 0), place(b, dx, dy)))
}

/// Matthews correlation coefficient; 0 when any marginal sum is 0.
pub fn mcc(tp: u64, fp: u64, fn_: u64, tn: u64) -> f64 {
    let (tp, fp, fn_, tn) = (tp as f64, fp as f64, fn_ as f64, tn as f64);
    let d1 = (tp + fp) * (tp + fn_);
    let d2 = (tn + fp) * (tn + fn_);
    if d1 == 0.0 || d2 == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) / (d1.sqrt() * d2.sqrt())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    /// Each segment takes the ground-truth label it overlaps most.
    #[default]
    MaxOverlap,
    /// One-to-one assignment maximizing total overlap.
    Assignment,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    #[default]
    PixelWeighted,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionScore {
    pub seg: u32,
    pub gt: Option<u32>,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub mcc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MccReport {
    pub regions: Vec<RegionScore>,
    pub aggregate: f64,
    pub matching: BTreeMap<u32, Option<u32>>,
    /// Ground-truth labels no segment was matched to.
    pub unmatched_gt: Vec<u32>,
    pub pixels: u64,
}

impl MccReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>6} {:>6} {:>9} {:>9} {:>9} {:>11} {:>8}",
            "seg", "gt", "tp", "fp", "fn", "tn", "mcc"
        );
        for r in &self.regions {
            let gt = r.gt.map_or("-".to_string(), |g| g.to_string());
            let _ = writeln!(
                s,
                "{:>6} {:>6} {:>9} {:>9} {:>9} {:>11} {:>8.4}",
                r.seg, gt, r.tp, r.fp, r.fn_, r.tn, r.mcc
            );
        }
        let _ = writeln!(s, "aggregate mcc {:.4}", self.aggregate);
        if !self.unmatched_gt.is_empty() {
            let _ = writeln!(s, "unmatched gt labels {:?}", self.unmatched_gt);
        }
        s
    }
}

/// Overlap counts between nonzero seg labels and nonzero gt labels.
fn overlaps(seg: &[u32], gt: &[u32]) -> BTreeMap<(u32, u32), u64> {
    let mut m = BTreeMap::new();
    for (&s, &g) in seg.iter().zip(gt) {
        if s != 0 && g != 0 {
            *m.entry((s, g)).or_insert(0) += 1;
        }
    }
    m
}

fn sizes(labels: &[u32]) -> BTreeMap<u32, u64> {
    let mut m = BTreeMap::new();
    for &l in labels.iter().filter(|&&l| l != 0) {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}

/// Segment label → matched ground-truth label, by `mode`.
pub fn match_regions(
    seg: &LabelImage,
    gt: &LabelImage,
    mode: Matching,
) -> Result<BTreeMap<u32, Option<u32>>> {
    let (s, g) = register(seg, gt)?;
    Ok(match_labels(&s, &g, mode))
}

fn match_labels(seg: &[u32], gt: &[u32], mode: Matching) -> BTreeMap<u32, Option<u32>> {
    let ov = overlaps(seg, gt);
    let seg_labels: Vec<u32> = sizes(seg).into_keys().collect();
    let mut out: BTreeMap<u32, Option<u32>> = seg_labels.iter().map(|&l| (l, None)).collect();
    match mode {
        Matching::MaxOverlap => {
            for (&(s, g), &n) in &ov {
                let e = out.get_mut(&s).expect("seg label present");
                // ascending g, so strict > keeps the smaller label on ties
                match e {
                    Some(best) if ov[&(s, *best)] >= n => {}
                    _ => *e = Some(g),
                }
            }
        }
        Matching::Assignment => {
            let gt_labels: Vec<u32> = sizes(gt).into_keys().collect();
            if seg_labels.is_empty() || gt_labels.is_empty() {
                return out;
            }
            let cols = gt_labels.len() + seg_labels.len();
            let rows: Vec<Vec<i64>> = seg_labels
                .iter()
                .map(|&s| {
                    (0..cols)
                        .map(|j| {
                            gt_labels
                                .get(j)
                                .map_or(0, |&g| ov.get(&(s, g)).copied().unwrap_or(0) as i64)
                        })
                        .collect()
                })
                .collect();
            let weights = pathfinding::matrix::Matrix::from_rows(rows).expect("rectangular");
            let (_, assign) = pathfinding::kuhn_munkres::kuhn_munkres(&weights);
            for (i, &j) in assign.iter().enumerate() {
                if let Some(&g) = gt_labels.get(j) {
                    if ov.contains_key(&(seg_labels[i], g)) {
                        out.insert(seg_labels[i], Some(g));
                    }
                }
            }
        }
    }
    out
}

/// Per-segment confusion counts and MCC over the registered canvas.
pub fn evaluate(
    seg: &LabelImage,
    gt: &LabelImage,
    mode: Matching,
    aggregate: Aggregate,
) -> Result<MccReport> {
    let (s, g) = register(seg, gt)?;
    let matching = match_labels(&s, &g, mode);
    let ov = overlaps(&s, &g);
    let seg_sizes = sizes(&s);
    let gt_sizes = sizes(&g);
    let n = s.len() as u64;
    let regions: Vec<RegionScore> = matching
        .iter()
        .map(|(&sl, &gl)| {
            let ssize = seg_sizes[&sl];
            let (tp, gsize) = match gl {
                Some(gl) => (ov.get(&(sl, gl)).copied().unwrap_or(0), gt_sizes[&gl]),
                None => (0, 0),
            };
            let (fp, fn_) = (ssize - tp, gsize - tp);
            let tn = n - tp - fp - fn_;
            RegionScore {
                seg: sl,
                gt: gl,
                tp,
                fp,
                fn_,
                tn,
                mcc: mcc(tp, fp, fn_, tn),
            }
        })
        .collect();
    let aggregate = match aggregate {
        _ if regions.is_empty() => 0.0,
        Aggregate::Mean => regions.iter().map(|r| r.mcc).sum::<f64>() / regions.len() as f64,
        Aggregate::PixelWeighted => {
            let total: u64 = regions.iter().map(|r| r.tp + r.fp).sum();
            regions
                .iter()
                .map(|r| r.mcc * (r.tp + r.fp) as f64)
                .sum::<f64>()
                / total as f64
        }
    };
    let matched: Vec<u32> = matching.values().flatten().copied().collect();
    let unmatched_gt = gt_sizes
        .keys()
        .copied()
        .filter(|g| !matched.contains(g))
        .collect();
    Ok(MccReport {
        regions,
        aggregate,
        matching,
        unmatched_gt,
        pixels: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(w: usize, h: usize, labels: &[u32]) -> LabelImage {
        LabelImage {
            width: w,
            height: h,
            labels: labels.to_vec(),
            placement: None,
        }
    }

    #[test]
    fn formula_value() {
        assert_eq!(mcc(2, 1, 1, 2), 1.0 / 3.0);
        assert_eq!(mcc(5, 0, 0, 7), 1.0);
        assert_eq!(mcc(0, 0, 3, 4), 0.0);
    }

    #[test]
    fn perfect_segmentation_scores_one() {
        let gt = img(4, 2, &[1, 1, 2, 2, 1, 1, 2, 0]);
        let seg = img(4, 2, &[7, 7, 3, 3, 7, 7, 3, 0]);
        let r = evaluate(&seg, &gt, Matching::MaxOverlap, Aggregate::PixelWeighted).unwrap();
        assert_eq!(r.aggregate, 1.0);
        assert_eq!(r.matching[&7], Some(1));
        assert_eq!(r.matching[&3], Some(2));
    }

    #[test]
    fn majority_overlap_wins() {
        // seg 1 covers 3 pixels of gt 1 and 2 of gt 2
        let gt = img(5, 1, &[1, 1, 1, 2, 2]);
        let seg = img(5, 1, &[1, 1, 1, 1, 1]);
        let m = match_regions(&seg, &gt, Matching::MaxOverlap).unwrap();
        assert_eq!(m[&1], Some(1));
    }

    #[test]
    fn ties_go_to_smaller_gt_label() {
        let gt = img(4, 1, &[4, 4, 2, 2]);
        let seg = img(4, 1, &[1, 1, 1, 1]);
        assert_eq!(
            match_regions(&seg, &gt, Matching::MaxOverlap).unwrap()[&1],
            Some(2)
        );
    }

    #[test]
    fn segment_on_background_is_unmatched() {
        let gt = img(4, 1, &[0, 0, 1, 1]);
        let seg = img(4, 1, &[5, 5, 6, 6]);
        let r = evaluate(&seg, &gt, Matching::MaxOverlap, Aggregate::PixelWeighted).unwrap();
        assert_eq!(r.matching[&5], None);
        let s5 = &r.regions[0];
        assert_eq!((s5.tp, s5.fp, s5.fn_), (0, 2, 0));
        assert_eq!(s5.mcc, 0.0);
    }

    #[test]
    fn assignment_is_one_to_one() {
        let gt = img(6, 1, &[1, 1, 1, 1, 2, 2]);
        let seg = img(6, 1, &[1, 1, 2, 2, 2, 2]);
        let max = match_regions(&seg, &gt, Matching::MaxOverlap).unwrap();
        assert_eq!(max[&1], Some(1));
        // seg 2 overlaps gt 1 and gt 2 equally, so max overlap picks gt 1
        assert_eq!(max[&2], Some(1));
        let one = match_regions(&seg, &gt, Matching::Assignment).unwrap();
        assert_eq!(one[&1], Some(1));
        assert_eq!(one[&2], Some(2));
    }

    #[test]
    fn size_mismatch_without_placement_errors() {
        let a = img(2, 1, &[1, 1]);
        let b = img(1, 2, &[1, 1]);
        assert!(matches!(
            evaluate(&a, &b, Matching::MaxOverlap, Aggregate::Mean),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn placement_registers_offset_images() {
        let mut a = img(3, 1, &[1, 1, 2]);
        a.placement = Some(Placement {
            origin: [0.0, 0.0],
            resolution: 0.5,
        });
        let mut b = img(2, 1, &[1, 3]);
        b.placement = Some(Placement {
            origin: [0.5, 0.0],
            resolution: 0.5,
        });
        let (ra, rb) = register(&a, &b).unwrap();
        assert_eq!(ra, vec![1, 1, 2]);
        assert_eq!(rb, vec![0, 1, 3]);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for max in [9u32, 700] {
            let mut a = img(3, 2, &[0, 1, 2, 3, max, 0]);
            a.placement = Some(Placement {
                origin: [1.25, -3.0],
                resolution: 0.15,
            });
            let p = dir.path().join(format!("l{max}.png"));
            a.write_png(&p).unwrap();
            assert_eq!(LabelImage::read_png(&p).unwrap(), a);
        }
    }

    proptest! {
        #[test]
        fn class_swap_negates(tp in 0u64..10_000, fp in 0u64..10_000, fn_ in 0u64..10_000, tn in 0u64..10_000) {
            let a = mcc(tp, fp, fn_, tn);
            let b = mcc(fp, tp, tn, fn_);
            prop_assert!((a + b).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&a));
        }

        #[test]
        fn relabeling_leaves_report_unchanged(
            labels in proptest::collection::vec((0u32..4, 0u32..4), 1..60),
        ) {
            let n = labels.len();
            let seg = img(n, 1, &labels.iter().map(|p| p.0).collect::<Vec<_>>());
            let gt = img(n, 1, &labels.iter().map(|p| p.1).collect::<Vec<_>>());
            // an order-preserving relabel keeps tie-breaks identical
            let bump = |v: &LabelImage| img(n, 1, &v.labels.iter().map(|&l| if l == 0 { 0 } else { l * 10 + 3 }).collect::<Vec<_>>());
            let r1 = evaluate(&seg, &gt, Matching::MaxOverlap, Aggregate::PixelWeighted).unwrap();
            let r2 = evaluate(&bump(&seg), &bump(&gt), Matching::MaxOverlap, Aggregate::PixelWeighted).unwrap();
            prop_assert_eq!(r1.aggregate, r2.aggregate);
            let m1: Vec<f64> = r1.regions.iter().map(|r| r.mcc).collect();
            let m2: Vec<f64> = r2.regions.iter().map(|r| r.mcc).collect();
            prop_assert_eq!(m1, m2);
        }
    }
}
