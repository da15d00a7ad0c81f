use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use voxtopo::cloud::CloudFormat;
use voxtopo::eval::{evaluate, Aggregate, LabelImage, Matching};
use voxtopo::fixture::{make_fixture, write_fixture, FixtureKind, FixtureParams};
use voxtopo::pipeline::{run, PipelineConfig};
use voxtopo::topomap::{import_d3, Dim, MapDoc};
use voxtopo::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_PIPELINE: u8 = 3;

/// Hierarchical topometric maps from indoor point clouds.
#[derive(Parser)]
#[command(name = "voxtopo", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a map from a point cloud.
    Build(BuildArgs),
    /// Score a label image against a ground-truth image.
    Eval(EvalArgs),
    /// Write a synthetic scene with its ground truth.
    Fixture(FixtureArgs),
    /// Summarize an exported map.
    Inspect {
        /// A topomap_d*.json file.
        map: PathBuf,
    },
}

#[derive(Args)]
struct BuildArgs {
    /// Point cloud (.ply, .pcd, .xyz).
    input: Option<PathBuf>,
    /// Config file (TOML key = value).
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    voxel: Option<f64>,
    #[arg(long)]
    a_th: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    d_th: Option<f64>,
    #[arg(long)]
    gate: Option<f64>,
    /// Explicit floor/ceiling heights, comma separated.
    #[arg(long, value_delimiter = ',')]
    peaks: Option<Vec<f64>>,
    /// Export dimensions, comma separated (d0,d1,d2,d3).
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<String>>,
    /// Any config key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatchArg {
    MaxOverlap,
    Assignment,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggArg {
    PixelWeighted,
    Mean,
}

#[derive(Args)]
struct EvalArgs {
    /// Segmentation label image (PNG).
    seg: PathBuf,
    /// Ground-truth label image (PNG).
    gt: PathBuf,
    #[arg(long, value_enum, default_value = "max-overlap")]
    matching: MatchArg,
    #[arg(long, value_enum, default_value = "pixel-weighted")]
    aggregate: AggArg,
    /// Also write the report as JSON here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct FixtureArgs {
    /// Scene kind; `--list` shows them.
    kind: Option<String>,
    #[arg(short, long, default_value = "fixture")]
    out: PathBuf,
    #[arg(long, default_value = "ply_ascii")]
    format: String,
    #[arg(long)]
    list: bool,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    outliers: Option<usize>,
    #[arg(long)]
    slope: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    corridor_width: Option<f64>,
    /// Door width.
    #[arg(long)]
    door: Option<f64>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

/// Bad or unreadable input is 2; anything failing inside the build is 3.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Stage { stage, .. } if matches!(*stage, "config" | "load") => EXIT_INPUT,
        Error::Stage { .. } => EXIT_PIPELINE,
        Error::Consistency(_) | Error::Capacity { .. } => EXIT_PIPELINE,
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Build(a) => build(a, cli.threads),
        Command::Eval(a) => with_pool(cli.threads, || eval(a)),
        Command::Fixture(a) => with_pool(cli.threads, || fixture(a)),
        Command::Inspect { map } => inspect(&map),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn with_pool(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<(), Failure> + Send,
) -> Result<(), Failure> {
    match threads {
        Some(0) => Err(Failure::usage("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::usage(e.to_string()))?
            .install(f),
        None => f(),
    }
}

fn build(a: BuildArgs, threads: Option<usize>) -> Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::load(p).map_err(|e| Failure {
            code: EXIT_INPUT,
            message: e.to_string(),
        })?,
        None => PipelineConfig::default(),
    };
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((k.to_string(), v));
        }
    };
    let quoted = |p: &Path| format!("{:?}", p.to_string_lossy());
    push("input", a.input.as_deref().map(quoted));
    push("out_dir", a.out.as_deref().map(quoted));
    push("input_format", a.format.map(|f| format!("{f:?}")));
    push("voxel", a.voxel.map(|v| v.to_string()));
    push("a_th", a.a_th.map(|v| v.to_string()));
    push("alpha", a.alpha.map(|v| v.to_string()));
    push("d_th", a.d_th.map(|v| v.to_string()));
    push("subdivide_gate", a.gate.map(|v| v.to_string()));
    push("peaks", a.peaks.map(|p| format!("{p:?}")));
    push("dims", a.dims.map(|d| format!("{d:?}")));
    push("threads", threads.map(|t| t.to_string()));
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    for (k, v) in pairs {
        cfg.set(&k, &v).map_err(|e| Failure::usage(e.to_string()))?;
    }
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    if a.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    if cfg.input.is_none() {
        return Err(Failure::usage("no input cloud given"));
    }
    let built = run(&cfg)?;
    let r = &built.report;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", built.map.summary());
    for t in &r.timings {
        println!("  {:<10} {:>8.3} s", t.stage, t.seconds);
    }
    println!(
        "total {:.3} s, {} files in {}",
        r.total_seconds(),
        r.outputs.len(),
        cfg.out_dir.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let seg = LabelImage::read_png(&a.seg)?;
    let gt = LabelImage::read_png(&a.gt)?;
    let matching = match a.matching {
        MatchArg::MaxOverlap => Matching::MaxOverlap,
        MatchArg::Assignment => Matching::Assignment,
    };
    let aggregate = match a.aggregate {
        AggArg::PixelWeighted => Aggregate::PixelWeighted,
        AggArg::Mean => Aggregate::Mean,
    };
    let report = evaluate(&seg, &gt, matching, aggregate)?;
    print!("{}", report.table());
    if let Some(p) = a.json {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(&p, text + "\n").map_err(|e| Failure {
            code: EXIT_INPUT,
            message: format!("{}: {e}", p.display()),
        })?;
    }
    Ok(())
}

fn fixture(a: FixtureArgs) -> Result<(), Failure> {
    if a.list {
        for k in FixtureKind::ALL {
            println!("{k}");
        }
        return Ok(());
    }
    let kind: FixtureKind = a
        .kind
        .as_deref()
        .ok_or_else(|| Failure::usage("fixture kind required (see --list)"))?
        .parse()
        .map_err(|e: Error| Failure::usage(e.to_string()))?;
    let format: CloudFormat = a
        .format
        .parse()
        .map_err(|e: Error| Failure::usage(e.to_string()))?;
    let mut p = FixtureParams::default();
    if let Some(v) = a.spacing {
        p.spacing = v;
    }
    if let Some(v) = a.seed {
        p.seed = v;
    }
    if let Some(v) = a.outliers {
        p.outliers = v;
    }
    if let Some(v) = a.slope {
        p.slope = v;
    }
    if let Some(v) = a.step {
        p.step = v;
    }
    if let Some(v) = a.corridor_width {
        p.corridor_width = v;
    }
    if let Some(v) = a.door {
        p.door[0] = v;
    }
    p.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let fx = make_fixture(kind, &p)?;
    write_fixture(&fx, &a.out, format)?;
    println!(
        "{kind}: {} points, {} regions -> {}",
        fx.cloud.len(),
        fx.truth.regions.len(),
        a.out.display()
    );
    Ok(())
}

fn inspect(path: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_INPUT,
        message: format!("{}: {e}", path.display()),
    })?;
    let doc: MapDoc = serde_json::from_str(&text).map_err(|e| Failure {
        code: EXIT_INPUT,
        message: format!("{}: {e}", path.display()),
    })?;
    println!(
        "{}: format {} {}",
        path.display(),
        doc.format_version,
        doc.dim.name()
    );
    if doc.dim == Dim::D3 {
        let map = import_d3(path)?;
        print!("{}", map.summary());
        return Ok(());
    }
    for s in &doc.storeys {
        println!(
            "{}: floor {:.3} m ceiling {:.3} m",
            s.id, s.floor, s.ceiling
        );
    }
    let mut levels = std::collections::BTreeMap::new();
    for n in &doc.nodes {
        levels.entry(n.level).or_insert([0usize; 2])[0] += 1;
    }
    for e in &doc.edges {
        levels.entry(e.level).or_insert([0usize; 2])[1] += 1;
    }
    for (level, [n, e]) in levels {
        println!("{level:?}: {n} nodes, {e} edges");
    }
    Ok(())
}
