//! End-to-end build: cloud in, exported map and run report out.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::areagraph::{subdivide_storey, AreaGraphParams, RegionSegmentation};
use crate::cloud::{
    denoise_clusters, load_cloud, voxel_downsample, CloudFormat, DenoiseReport, PointCloud,
};
use crate::columns::{extract_columns, ColumnReport};
use crate::error::{Error, Result};
use crate::grid::{rasterize, RasterOptions, DEFAULT_MEMORY_CAP};
use crate::passages::VolumeGraph;
use crate::regions::{build_regions, RegionKind};
use crate::storey::{build_z_histogram, detect_peaks, label_and_split, select_peaks};
use crate::topomap::{export, export_area_rasters, Dim, StoreyMap, TopoMap};
use crate::volumes::grow_volumes;

pub const REPORT_FILE: &str = "run_report.json";

/// Every tunable of the build. Lengths in meters, sizes in cubic meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    /// Guessed from the extension when absent.
    pub input_format: Option<CloudFormat>,
    pub out_dir: PathBuf,
    pub voxel: f64,
    /// Downsampling cell; 0 disables.
    pub downsample: f64,
    pub denoise_link: f64,
    /// Clusters with fewer points are dropped; 0 disables denoising.
    pub denoise_min_points: usize,
    /// Denoise before downsampling instead of after.
    pub denoise_first: bool,
    pub bin_size: f64,
    pub window_sizes: Vec<f64>,
    /// Floor/ceiling heights to use instead of detected peaks.
    pub peaks: Option<Vec<f64>>,
    /// Extra height kept above each ceiling peak.
    pub slab_margin: f64,
    pub rel_tol: f64,
    /// Defaults to 1.5 voxels.
    pub d_th: Option<f64>,
    pub a_th: f64,
    pub subdivide_gate: f64,
    pub alpha: f64,
    pub merge_fraction: f64,
    pub prune_len: usize,
    pub voronoi_tol: f64,
    pub dims: Vec<Dim>,
    /// Bytes one occupancy grid may take.
    pub memory_cap: u64,
    pub threads: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let ag = AreaGraphParams::default();
        PipelineConfig {
            input: None,
            input_format: None,
            out_dir: PathBuf::from("out"),
            voxel: 0.15,
            downsample: 0.05,
            denoise_link: 0.20,
            denoise_min_points: 100,
            denoise_first: false,
            bin_size: 0.01,
            window_sizes: vec![0.02, 0.04, 0.06, 0.08, 0.10],
            peaks: None,
            slab_margin: 0.30,
            rel_tol: 0.10,
            d_th: None,
            a_th: 20.0,
            subdivide_gate: 20.0,
            alpha: ag.alpha,
            merge_fraction: ag.merge_fraction,
            prune_len: ag.prune_len,
            voronoi_tol: ag.voronoi_tol,
            dims: vec![Dim::D0, Dim::D1, Dim::D2, Dim::D3],
            memory_cap: DEFAULT_MEMORY_CAP,
            threads: None,
        }
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidParameter(msg)
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| invalid(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| invalid(format!("config {}: {}", path.display(), e.message())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Sets one key from its textual value, e.g. `("voxel", "0.1")` or
    /// `("window_sizes", "[0.02, 0.04]")`. Bare words are taken as strings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut table = toml::Table::try_from(&*self).expect("config serializes");
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        table.insert(key.to_string(), parsed);
        *self = table
            .try_into()
            .map_err(|e: toml::de::Error| invalid(format!("`{key} = {value}`: {}", e.message())))?;
        Ok(())
    }

    pub fn d_th(&self) -> f64 {
        self.d_th.unwrap_or(1.5 * self.voxel)
    }

    pub fn area_params(&self) -> AreaGraphParams {
        AreaGraphParams {
            prune_len: self.prune_len,
            voronoi_tol: self.voronoi_tol,
            alpha: self.alpha,
            merge_fraction: self.merge_fraction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("voxel", self.voxel),
            ("denoise_link", self.denoise_link),
            ("bin_size", self.bin_size),
            ("rel_tol", self.rel_tol),
            ("d_th", self.d_th()),
            ("a_th", self.a_th),
            ("alpha", self.alpha),
            ("voronoi_tol", self.voronoi_tol),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{k} must be positive, got {v}")));
            }
        }
        for (k, v) in [
            ("downsample", self.downsample),
            ("slab_margin", self.slab_margin),
            ("subdivide_gate", self.subdivide_gate),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{k} must be non-negative, got {v}")));
            }
        }
        if !(self.merge_fraction > 0.0 && self.merge_fraction <= 1.0) {
            return Err(invalid(format!(
                "merge_fraction must lie in (0, 1], got {}",
                self.merge_fraction
            )));
        }
        if self.window_sizes.is_empty() {
            return Err(invalid("window_sizes is empty".into()));
        }
        if let Some(w) = self.window_sizes.iter().find(|&&w| !(w >= self.bin_size)) {
            return Err(invalid(format!(
                "window size {w} is below bin_size {}",
                self.bin_size
            )));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StoreyReport {
    pub index: usize,
    pub floor: f64,
    pub ceiling: f64,
    pub points: usize,
    pub grid_dims: [usize; 3],
    pub occupied_voxels: usize,
    pub column_report: ColumnReport,
    pub columns: usize,
    pub volumes_grown: usize,
    pub volumes: usize,
    pub volume_edges: usize,
    pub regions: usize,
    pub rooms: usize,
    pub connections: usize,
    pub region_edges: usize,
    pub subdivided_regions: usize,
    pub region2: usize,
    pub region2_edges: usize,
    pub unlabeled_columns: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub points_loaded: usize,
    pub points_rejected: usize,
    pub points_after_downsample: usize,
    pub denoise: Option<DenoiseReport>,
    pub points_used: usize,
    pub peaks: Vec<f64>,
    pub peaks_overridden: bool,
    pub storeys: Vec<StoreyReport>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub timings: Vec<StageTiming>,
}

impl RunReport {
    pub fn regions(&self) -> usize {
        self.storeys.iter().map(|s| s.regions).sum()
    }

    pub fn region_edges(&self) -> usize {
        self.storeys.iter().map(|s| s.region_edges).sum()
    }

    /// Adds `seconds` to `stage`, keeping first-seen stage order.
    fn time(&mut self, stage: &str, seconds: f64) {
        match self.timings.iter_mut().find(|t| t.stage == stage) {
            Some(t) => t.seconds += seconds,
            None => self.timings.push(StageTiming {
                stage: stage.to_string(),
                seconds,
            }),
        }
    }

    pub fn total_seconds(&self) -> f64 {
        self.timings.iter().map(|t| t.seconds).sum()
    }
}

/// In-memory result of a build.
#[derive(Debug, Clone)]
pub struct Built {
    pub map: TopoMap,
    /// Area-graph segmentations per storey, keyed by region1 id.
    pub segmentations: Vec<BTreeMap<u32, RegionSegmentation>>,
    pub report: RunReport,
}

fn timed<T>(
    report: &mut RunReport,
    stage: &'static str,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let t = Instant::now();
    let out = f().map_err(|e| e.in_stage(stage));
    report.time(stage, t.elapsed().as_secs_f64());
    out
}

/// Runs every stage after loading on `cloud`.
pub fn build(cloud: PointCloud, config: &PipelineConfig) -> Result<Built> {
    config.validate()?;
    with_threads(config.threads, || {
        build_inner(cloud, config, RunReport::default())
    })
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?
            .install(f),
    }
}

fn build_inner(cloud: PointCloud, cfg: &PipelineConfig, mut report: RunReport) -> Result<Built> {
    if report.points_loaded == 0 {
        report.points_loaded = cloud.len();
    }
    let mut cloud = cloud;
    let denoise = |c: &PointCloud, report: &mut RunReport| -> Result<PointCloud> {
        if cfg.denoise_min_points == 0 {
            return Ok(c.clone());
        }
        let (out, r) = timed(report, "denoise", || {
            denoise_clusters(c, cfg.denoise_link, cfg.denoise_min_points)
        })?;
        if r.points_removed > 0 {
            report.warnings.push(format!(
                "denoise removed {} points in {} of {} clusters",
                r.points_removed, r.clusters_removed, r.clusters
            ));
        }
        report.denoise = Some(r);
        Ok(out)
    };
    if cfg.denoise_first {
        cloud = denoise(&cloud, &mut report)?;
    }
    if cfg.downsample > 0.0 {
        cloud = timed(&mut report, "downsample", || {
            voxel_downsample(&cloud, cfg.downsample)
        })?;
    }
    report.points_after_downsample = cloud.len();
    if !cfg.denoise_first {
        cloud = denoise(&cloud, &mut report)?;
    }
    if cloud.is_empty() {
        return Err(Error::EmptyCloud { rejected: 0 }.in_stage("denoise"));
    }
    report.points_used = cloud.len();

    let peaks = timed(&mut report, "storeys", || match &cfg.peaks {
        Some(p) => Ok(p.clone()),
        None => {
            let hist = build_z_histogram(&cloud, cfg.bin_size)?;
            select_peaks(&detect_peaks(&hist, &cfg.window_sizes)?)
        }
    })?;
    report.peaks_overridden = cfg.peaks.is_some();
    report.peaks = peaks.clone();
    let split = timed(&mut report, "storeys", || {
        label_and_split(&cloud, &peaks, cfg.bin_size, cfg.slab_margin)
    })?;
    drop(cloud);

    let d_th = cfg.d_th();
    let params = cfg.area_params();
    let mut storeys = Vec::new();
    let mut segmentations = Vec::new();
    for (slab, part) in split {
        let mut sr = StoreyReport {
            index: slab.index,
            floor: slab.floor_height,
            ceiling: slab.ceiling_height,
            points: part.len(),
            ..Default::default()
        };
        let opts = RasterOptions {
            memory_cap: cfg.memory_cap,
            ..RasterOptions::new(cfg.voxel)
        };
        let grid = timed(&mut report, "grid", || rasterize(&part, &slab, &opts))?;
        sr.grid_dims = grid.dims();
        sr.occupied_voxels = grid.occupied_count();
        let (field, creport) = timed(&mut report, "columns", || Ok(extract_columns(&grid)))?;
        drop(grid);
        if creport.unbounded_on_floor > 0 {
            report.warnings.push(format!(
                "storey {}: {} columns above a floor reach the top of the grid and were deleted (unscanned ceiling?)",
                slab.index, creport.unbounded_on_floor
            ));
        }
        sr.column_report = creport;
        sr.columns = field.len();
        let vs = timed(&mut report, "volumes", || grow_volumes(&field, cfg.rel_tol))?;
        sr.volumes_grown = vs.volumes.len();
        let graph = timed(&mut report, "passages", || {
            Ok(VolumeGraph::build(&field, vs, d_th))
        })?;
        let rg = timed(&mut report, "regions", || {
            build_regions(&graph, cfg.a_th, d_th, slab.index as u32)
        })?;
        let h = timed(&mut report, "subdivide", || {
            Ok(subdivide_storey(
                &field,
                &graph,
                &rg,
                cfg.subdivide_gate,
                &params,
                d_th,
            ))
        })?;
        if h.unlabeled_columns > 0 {
            report.warnings.push(format!(
                "storey {}: {} columns had no area label and took the nearest one",
                slab.index, h.unlabeled_columns
            ));
        }
        report.warnings.extend(
            h.warnings
                .iter()
                .map(|w| format!("storey {}: {w}", slab.index)),
        );
        sr.unlabeled_columns = h.unlabeled_columns;
        sr.subdivided_regions = h
            .regions
            .regions
            .iter()
            .filter(|r| !r.children.is_empty())
            .count();
        segmentations.push(h.segmentations.clone());
        let st = StoreyMap::from_hierarchy(slab, field, h);
        sr.volumes = st.volumes.len();
        sr.volume_edges = st.volume_edges.len();
        sr.regions = st.regions.len();
        sr.rooms = st
            .regions
            .iter()
            .filter(|r| r.kind == RegionKind::Room)
            .count();
        sr.connections = sr.regions - sr.rooms;
        sr.region_edges = st.region_edges.len();
        sr.region2 = st.region2.len();
        sr.region2_edges = st.region2_edges.len();
        report.storeys.push(sr);
        storeys.push(st);
    }
    let map = timed(&mut report, "assemble", || TopoMap::assemble(storeys))?;
    Ok(Built {
        map,
        segmentations,
        report,
    })
}

/// Loads the configured input, builds and writes every configured export plus
/// the run report into `out_dir`. Nothing is left in `out_dir` on failure.
pub fn run(config: &PipelineConfig) -> Result<Built> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let input = config
        .input
        .as_deref()
        .ok_or_else(|| invalid("no input given".into()).in_stage("config"))?;
    let mut report = RunReport::default();
    let (cloud, load) = timed(&mut report, "load", || {
        let format = match config.input_format {
            Some(f) => f,
            None => CloudFormat::from_path(input).ok_or_else(|| {
                invalid(format!(
                    "cannot tell the format of {}; set input_format",
                    input.display()
                ))
            })?,
        };
        load_cloud(input, format)
    })?;
    report.points_loaded = cloud.len() + load.rejected;
    report.points_rejected = load.rejected;
    if load.rejected > 0 {
        report.warnings.push(format!(
            "{} points with non-finite coordinates rejected",
            load.rejected
        ));
    }

    with_threads(config.threads, || {
        let mut built = build_inner(cloud, config, report)?;
        let t = Instant::now();
        write_outputs(&mut built, config).map_err(|e| e.in_stage("export"))?;
        built.report.time("export", t.elapsed().as_secs_f64());
        Ok(built)
    })
}

fn write_outputs(built: &mut Built, cfg: &PipelineConfig) -> Result<()> {
    let out = &cfg.out_dir;
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".voxtopo-staging-")
        .tempdir_in(&parent)
        .map_err(|e| Error::io(&parent, e))?;
    let dir = staging.path();
    let mut files = Vec::new();
    let mut dims = cfg.dims.clone();
    dims.sort();
    dims.dedup();
    for dim in dims {
        files.extend(export(&built.map, dim, dir)?);
        if dim == Dim::D2 {
            for (s, segs) in built.segmentations.iter().enumerate() {
                files.extend(export_area_rasters(s, segs, dir)?);
            }
        }
    }
    let mut outputs: Vec<String> = files
        .iter()
        .map(|f| {
            f.strip_prefix(dir)
                .unwrap_or(f)
                .to_string_lossy()
                .replace('\\', "/")
        })
        .collect();
    outputs.push(REPORT_FILE.to_string());
    outputs.sort();
    outputs.dedup();
    built.report.outputs = outputs;
    let report_path = dir.join(REPORT_FILE);
    let text = serde_json::to_string_pretty(&built.report).map_err(|source| Error::Json {
        context: report_path.display().to_string(),
        source,
    })?;
    std::fs::write(&report_path, text + "\n").map_err(|e| Error::io(&report_path, e))?;

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let dest = out.join(entry.file_name());
        if dest.is_dir() {
            std::fs::remove_dir_all(&dest).map_err(|e| Error::io(&dest, e))?;
        }
        std::fs::rename(entry.path(), &dest).map_err(|e| Error::io(&dest, e))?;
    }
    Ok(())
}

/// The report as JSON without timings, for run-to-run comparison.
pub fn report_without_timings(report: &RunReport) -> String {
    let mut r = report.clone();
    r.timings.clear();
    serde_json::to_string_pretty(&r).expect("report serializes")
}
