//! Floor and ceiling detection from the z-density histogram.
//!
//! The histogram is smoothed with box windows of several widths, each smoothed
//! signal is binarized with Otsu's threshold, and the above-threshold runs are
//! the peak candidates for that width. Widths that agree (same peak count,
//! pairwise overlapping peaks) are grouped; the largest group wins and its
//! narrowest width supplies the peak positions. Peaks are then read bottom-up
//! as floor, ceiling, floor, ceiling, ...

use serde::{Deserialize, Serialize};

use crate::cloud::{check_positive, PointCloud};
use crate::error::{Error, Result};
use crate::unionfind::UnionFind;

/// Number of quantization levels used by [`otsu_threshold`].
pub const OTSU_LEVELS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightHistogram {
    pub bin_size: f64,
    pub z_min: f64,
    pub counts: Vec<u64>,
}

impl HeightHistogram {
    pub fn bin_of(&self, z: f64) -> usize {
        (((z - self.z_min) / self.bin_size).floor().max(0.0) as usize).min(self.counts.len() - 1)
    }

    pub fn bin_center(&self, bin: f64) -> f64 {
        self.z_min + (bin + 0.5) * self.bin_size
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// One above-threshold run of a smoothed signal, in bins (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub start_bin: usize,
    pub end_bin: usize,
    pub center_height: f64,
}

impl Peak {
    fn overlaps(&self, other: &Peak) -> bool {
        self.start_bin <= other.end_bin && other.start_bin <= self.end_bin
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakCandidateSet {
    /// Window width c in meters.
    pub window_size: f64,
    pub threshold: f64,
    pub peaks: Vec<Peak>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoreySlab {
    pub index: usize,
    pub floor_height: f64,
    pub ceiling_height: f64,
}

pub fn build_z_histogram(cloud: &PointCloud, bin_size: f64) -> Result<HeightHistogram> {
    check_positive("bin_size", bin_size)?;
    let bb = cloud.bounds().ok_or(Error::EmptyCloud { rejected: 0 })?;
    let z_min = bb.min[2];
    let n = ((bb.max[2] - z_min) / bin_size).floor() as usize + 1;
    let mut hist = HeightHistogram {
        bin_size,
        z_min,
        counts: vec![0; n],
    };
    for p in cloud.points() {
        let b = hist.bin_of(p[2]);
        hist.counts[b] += 1;
    }
    Ok(hist)
}

/// Half-width in bins of a window of total width `c`: bins whose centers lie
/// within `c / 2` of the current bin center.
pub fn window_radius(c: f64, bin_size: f64) -> usize {
    (c / bin_size / 2.0 + 1e-9).floor() as usize
}

/// Box-filter the histogram with window width `c`, normalizing by the number
/// of bins actually inside the window (so borders are not darkened).
pub fn smooth(hist: &HeightHistogram, c: f64) -> Result<Vec<f64>> {
    if !(c >= hist.bin_size * (1.0 - 1e-9)) {
        return Err(Error::InvalidParameter(format!(
            "window {c} is narrower than the bin size {}",
            hist.bin_size
        )));
    }
    Ok(box_mean(&hist.counts, window_radius(c, hist.bin_size)))
}

fn box_mean(counts: &[u64], r: usize) -> Vec<f64> {
    let n = counts.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0u64);
    for &c in counts {
        prefix.push(prefix.last().unwrap() + c);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(n - 1);
            (prefix[hi + 1] - prefix[lo]) as f64 / (hi - lo + 1) as f64
        })
        .collect()
}

/// Quantization level of `v` on the 256-level scale spanning `[min, max]`.
pub fn otsu_level(v: f64, min: f64, max: f64) -> usize {
    let t = ((v - min) / (max - min) * (OTSU_LEVELS - 1) as f64).floor();
    (t.max(0.0) as usize).min(OTSU_LEVELS - 1)
}

/// Otsu's threshold over a 256-level quantization of the signal range.
///
/// Values `>= threshold` fall in the upper class. Among equally good cuts the
/// lowest one is chosen.
pub fn otsu_threshold(signal: &[f64]) -> Result<f64> {
    let (min, max) = signal
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if signal.is_empty() || !(max > min) {
        return Err(Error::DegenerateSignal { len: signal.len() });
    }
    let mut hist = [0u64; OTSU_LEVELS];
    for &v in signal {
        hist[otsu_level(v, min, max)] += 1;
    }
    let total = signal.len() as f64;
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(l, &c)| l as f64 * c as f64)
        .sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (t, &c) in hist.iter().enumerate().take(OTSU_LEVELS - 1) {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (sum_all - sum0) / w1;
        let var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1) / (total * total);
        if var > best.0 {
            best = (var, t);
        }
    }
    // level > t  <=>  v >= min + (t + 1) * range / 255
    Ok(min + (best.1 + 1) as f64 * (max - min) / (OTSU_LEVELS - 1) as f64)
}

/// Maximal runs of `signal >= threshold`, each with its count-weighted center.
fn above_threshold_runs(hist: &HeightHistogram, signal: &[f64], threshold: f64) -> Vec<Peak> {
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < signal.len() {
        if signal[i] < threshold {
            i += 1;
            continue;
        }
        let start = i;
        while i < signal.len() && signal[i] >= threshold {
            i += 1;
        }
        let end = i - 1;
        let mass: u64 = hist.counts[start..=end].iter().sum();
        let center_bin = if mass > 0 {
            hist.counts[start..=end]
                .iter()
                .enumerate()
                .map(|(k, &c)| (start + k) as f64 * c as f64)
                .sum::<f64>()
                / mass as f64
        } else {
            (start + end) as f64 / 2.0
        };
        peaks.push(Peak {
            start_bin: start,
            end_bin: end,
            center_height: hist.bin_center(center_bin),
        });
    }
    peaks
}

pub fn peaks_for_window(hist: &HeightHistogram, c: f64) -> Result<PeakCandidateSet> {
    let signal = smooth(hist, c)?;
    let threshold = otsu_threshold(&signal)?;
    Ok(PeakCandidateSet {
        window_size: c,
        threshold,
        peaks: above_threshold_runs(hist, &signal, threshold),
    })
}

/// Peak candidates for every window width. Widths whose smoothed signal is
/// degenerate are skipped; if all are, the first error is returned.
pub fn detect_peaks(hist: &HeightHistogram, window_sizes: &[f64]) -> Result<Vec<PeakCandidateSet>> {
    if window_sizes.is_empty() {
        return Err(Error::InvalidParameter("window_sizes is empty".into()));
    }
    use rayon::prelude::*;
    let results: Vec<Result<PeakCandidateSet>> = window_sizes
        .par_iter()
        .map(|&c| peaks_for_window(hist, c))
        .collect();
    let mut first_err = None;
    let mut out = Vec::new();
    for r in results {
        match r {
            Ok(set) => out.push(set),
            Err(e @ Error::DegenerateSignal { .. }) => {
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    match (out.is_empty(), first_err) {
        (true, Some(e)) => Err(e),
        _ => Ok(out),
    }
}

fn agree(a: &PeakCandidateSet, b: &PeakCandidateSet) -> bool {
    a.peaks.len() == b.peaks.len() && a.peaks.iter().zip(&b.peaks).all(|(p, q)| p.overlaps(q))
}

/// Index (into `candidates`) of the set whose peaks are used.
pub fn select_candidate(candidates: &[PeakCandidateSet]) -> Result<usize> {
    let live: Vec<usize> = (0..candidates.len())
        .filter(|&i| !candidates[i].peaks.is_empty())
        .collect();
    if live.is_empty() {
        return Err(Error::NoPeaks);
    }
    let mut uf = UnionFind::new(candidates.len());
    for (k, &i) in live.iter().enumerate() {
        for &j in &live[k + 1..] {
            if agree(&candidates[i], &candidates[j]) {
                uf.union(i, j);
            }
        }
    }
    // per cluster: (member count, smallest window, index of that window)
    let mut clusters: Vec<(usize, usize, f64, usize)> = Vec::new();
    for &i in &live {
        let root = uf.find(i);
        let c = candidates[i].window_size;
        match clusters.iter_mut().find(|e| e.0 == root) {
            Some(e) => {
                e.1 += 1;
                if c < e.2 || (c == e.2 && i < e.3) {
                    e.2 = c;
                    e.3 = i;
                }
            }
            None => clusters.push((root, 1, c, i)),
        }
    }
    let best = clusters
        .iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.2.total_cmp(&a.2)))
        .expect("at least one cluster");
    Ok(best.3)
}

/// Peak heights of the winning window-size cluster.
pub fn select_peaks(candidates: &[PeakCandidateSet]) -> Result<Vec<f64>> {
    let i = select_candidate(candidates)?;
    Ok(candidates[i]
        .peaks
        .iter()
        .map(|p| p.center_height)
        .collect())
}

/// Pairs sorted peak heights into floor/ceiling slabs, bottom-up.
pub fn slabs_from_peaks(peak_heights: &[f64]) -> Result<Vec<StoreySlab>> {
    let mut peaks = peak_heights.to_vec();
    peaks.sort_by(f64::total_cmp);
    if peaks.is_empty() || peaks.len() % 2 != 0 {
        return Err(Error::Alternation { peaks });
    }
    let slabs: Vec<StoreySlab> = peaks
        .chunks(2)
        .enumerate()
        .map(|(index, pair)| StoreySlab {
            index,
            floor_height: pair[0],
            ceiling_height: pair[1],
        })
        .collect();
    for s in &slabs {
        if !(s.floor_height < s.ceiling_height) {
            return Err(Error::Alternation { peaks });
        }
    }
    Ok(slabs)
}

/// Splits the cloud into storeys. Storey k takes z in
/// `[floor_k - bin_size, min(ceiling_k + slab_margin, floor_{k+1} - bin_size))`,
/// so every point lands in at most one storey.
pub fn label_and_split(
    cloud: &PointCloud,
    peak_heights: &[f64],
    bin_size: f64,
    slab_margin: f64,
) -> Result<Vec<(StoreySlab, PointCloud)>> {
    let slabs = slabs_from_peaks(peak_heights)?;
    let ranges = storey_ranges(&slabs, bin_size, slab_margin);
    Ok(slabs
        .iter()
        .zip(&ranges)
        .map(|(s, &(lo, hi))| (*s, cloud.select(|_, p| p[2] >= lo && p[2] < hi)))
        .collect())
}

pub fn storey_ranges(slabs: &[StoreySlab], bin_size: f64, slab_margin: f64) -> Vec<(f64, f64)> {
    (0..slabs.len())
        .map(|k| {
            let lo = slabs[k].floor_height - bin_size;
            let mut hi = slabs[k].ceiling_height + slab_margin;
            if let Some(next) = slabs.get(k + 1) {
                hi = hi.min(next.floor_height - bin_size);
            }
            (lo, hi)
        })
        .collect()
}
