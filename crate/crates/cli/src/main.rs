use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rrf::csi::{beamform_report, query_mpcs, ris_incident_query, ArrayGeometry, ArrayKind, QueryConfig};
use rrf::dataset::{gen_dataset, Dataset, GenConfig, Split};
use rrf::eval::{benchmark_scene, evaluate, render_latency, EvalConfig};
use rrf::gradcheck::{gradcheck, GradcheckConfig};
use rrf::io::{read_model, write_model, write_png, write_spectrum};
use rrf::model::init_model;
use rrf::raster::{render_panorama, render_view, PinholeCamera};
use rrf::train::{train_stage1, train_stage2, LogRecord, TrainConfig};
use rrf::{RxPose, Scene, Vec3};

/// Environment variable overriding the worker thread count.
const THREADS_ENV: &str = "RRF_THREADS";

#[derive(Parser)]
#[command(name = "rrf", version, about = "Radio radiance fields from Gaussian primitives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SceneKind {
    Box,
    Corridor,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Stage {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Write a parametric box or corridor scene as JSON.
    GenScene {
        #[arg(long, value_enum, default_value = "box")]
        kind: SceneKind,
        /// Room size in metres, "x,y,z".
        #[arg(long, default_value = "5,4,3")]
        dims: String,
        /// Transmitter position, "x,y,z".
        #[arg(long, default_value = "1.4,1.1,1.9")]
        tx: String,
        /// Carrier frequency in Hz.
        #[arg(long, default_value_t = 2.4e9)]
        freq: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample poses and write oracle spectra, visual targets and a manifest.
    GenDataset {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        n_train: usize,
        #[arg(long, default_value_t = 30)]
        n_test: usize,
        /// Spectrum height; the width is twice this.
        #[arg(long, default_value_t = 128)]
        height: usize,
        #[arg(long, default_value_t = 1)]
        max_order: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit a model to a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        stage: Stage,
        /// Training configuration JSON; every field is optional.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Starting model; required for stage 2 alone.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Line-delimited JSON training log.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Single-threaded execution with ordered reductions.
        #[arg(long)]
        deterministic: bool,
        /// Initial primitives sampled on facets.
        #[arg(long, default_value_t = 6000)]
        init_surface: usize,
        /// Initial primitives sampled in the scene volume.
        #[arg(long, default_value_t = 1000)]
        init_uniform: usize,
        #[arg(long, default_value_t = 3)]
        sh_degree: usize,
    },
    /// Render a panorama or pinhole view of a model.
    Render {
        #[arg(long)]
        model: PathBuf,
        /// "x,y,z", "x,y,z,yaw_deg" or "x,y,z,qw,qx,qy,qz".
        #[arg(long)]
        pose: String,
        /// Panorama height.
        #[arg(long, conflicts_with = "pinhole")]
        panorama: Option<usize>,
        /// Pinhole view "fov_deg,resolution" along the pose's forward axis.
        #[arg(long)]
        pinhole: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Also write one PNG per channel with this path prefix.
        #[arg(long)]
        png: Option<PathBuf>,
    },
    /// Top-k multipath components at a pose as JSON.
    Query {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pose: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
        #[arg(long, default_value_t = 1e-3)]
        min_gain: f64,
        #[arg(long, default_value_t = 2.0)]
        nms_radius: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Metrics of a model on a dataset split as JSON.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Include render latency (the report is then time-dependent).
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Matched beam toward the strongest rendered path.
    Beamform {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pose: String,
        #[arg(long, default_value_t = 16)]
        elements: usize,
        /// Second dimension; values above 1 make a planar array.
        #[arg(long, default_value_t = 1)]
        rows: usize,
        /// Element spacing in wavelengths.
        #[arg(long, default_value_t = 0.5)]
        spacing: f64,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
        /// Scene for an oracle comparison.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        max_order: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Incident spectrum at a reconfigurable surface pose.
    RisQuery {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pose: String,
        #[arg(long, default_value_t = 128)]
        height: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        /// Primitives per random model.
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random models, seeds `seed..seed + models`.
        #[arg(long, default_value_t = 1)]
        models: u64,
        #[arg(long, default_value_t = 32)]
        resolution: usize,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
    /// Render latency distribution of a pinhole view.
    Bench {
        /// Model to render; a synthetic room model is used otherwise.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        pose: Option<String>,
        #[arg(long, default_value_t = 50_000)]
        primitives: usize,
        #[arg(long, default_value_t = 128)]
        resolution: usize,
        #[arg(long, default_value_t = 5)]
        warmup: usize,
        #[arg(long, default_value_t = 50)]
        runs: usize,
    },
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number '{t}'")))
        .collect()
}

fn parse_vec3(s: &str) -> Result<[f64; 3]> {
    let v = parse_floats(s)?;
    match v.as_slice() {
        [x, y, z] => Ok([*x, *y, *z]),
        _ => bail!("expected three comma-separated numbers, got '{s}'"),
    }
}

fn parse_pose(s: &str) -> Result<RxPose> {
    let v = parse_floats(s)?;
    let pose = match v.as_slice() {
        [x, y, z] => RxPose::identity_at(Vec3::new(*x, *y, *z)),
        [x, y, z, yaw] => RxPose::from_yaw(Vec3::new(*x, *y, *z), yaw.to_radians()),
        [x, y, z, w, i, j, k] => RxPose::new(Vec3::new(*x, *y, *z), [*w, *i, *j, *k]),
        _ => bail!("pose needs 3, 4 or 7 numbers, got '{s}'"),
    };
    Ok(pose.snapped())
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display())),
        None => print_stdout(text),
    }
}

/// Prints to stdout, treating a closed pipe as success.
fn print_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn configure_threads(deterministic: bool) -> Result<()> {
    let requested = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.parse::<usize>().with_context(|| format!("{THREADS_ENV}='{v}' is not a count"))?),
        Err(_) => None,
    };
    let n = if deterministic { Some(1) } else { requested };
    if let Some(n) = n {
        rrf::set_threads(n.max(1));
    }
    Ok(())
}

fn run_train(
    dataset: &Path,
    stage: Stage,
    config: Option<&Path>,
    model_in: Option<&Path>,
    out: &Path,
    log_path: Option<&Path>,
    seed: Option<u64>,
    deterministic: bool,
    init: (usize, usize, usize),
) -> Result<()> {
    let mut cfg = match config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.deterministic |= deterministic;
    cfg.validate()?;
    configure_threads(cfg.deterministic)?;
    let ds = Dataset::open(dataset)?;
    let mut model = match model_in {
        Some(p) => read_model(p)?,
        None if stage == Stage::Two => bail!("stage 2 alone needs --model"),
        None => init_model(&ds.scene, init.0, init.1, cfg.seed, init.2)?,
    };
    let mut log_file = match log_path {
        Some(p) => Some(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => None,
    };
    let mut log_error = None;
    let mut sink = |r: &LogRecord| {
        if let Some(f) = log_file.as_mut() {
            let line = serde_json::to_string(r).expect("log record serializes");
            if let Err(e) = writeln!(f, "{line}").and_then(|_| f.flush()) {
                log_error.get_or_insert(e);
            }
        }
    };
    if matches!(stage, Stage::One | Stage::Both) {
        let views = ds.visual_samples(Split::Train)?;
        train_stage1(&mut model, &views, &cfg, &mut sink)?;
    }
    if matches!(stage, Stage::Two | Stage::Both) {
        let spectra = ds.radio_samples(Split::Train)?;
        train_stage2(&mut model, &spectra, &cfg, &mut sink)?;
    }
    if let Some(e) = log_error {
        return Err(e).context("writing training log");
    }
    if let Some(mut f) = log_file {
        f.flush()?;
    }
    write_model(out, &model)?;
    eprintln!("wrote {} primitives to {}", model.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenScene { kind, dims, tx, freq, out } => {
            let dims = parse_vec3(&dims)?;
            let tx = parse_vec3(&tx)?;
            let scene = match kind {
                SceneKind::Box => Scene::box_room(dims, tx, freq, [0.5, 0.4, 0.6, 0.7, 0.65, 0.55]),
                SceneKind::Corridor => Scene::corridor(dims[0], dims[1], dims[2], tx, freq),
            };
            scene.validate()?;
            scene.save(&out)?;
        }
        Command::GenDataset {
            scene,
            out,
            n_train,
            n_test,
            height,
            max_order,
            seed,
        } => {
            configure_threads(false)?;
            let scene = Scene::load(&scene)?;
            let cfg = GenConfig {
                n_train,
                n_test,
                height,
                max_order,
                seed,
                ..Default::default()
            };
            let m = gen_dataset(&scene, &out, &cfg)?;
            eprintln!("wrote {} records to {}", m.records.len(), out.display());
        }
        Command::Train {
            dataset,
            stage,
            config,
            model,
            out,
            log,
            seed,
            deterministic,
            init_surface,
            init_uniform,
            sh_degree,
        } => run_train(
            &dataset,
            stage,
            config.as_deref(),
            model.as_deref(),
            &out,
            log.as_deref(),
            seed,
            deterministic,
            (init_surface, init_uniform, sh_degree),
        )?,
        Command::Render {
            model,
            pose,
            panorama,
            pinhole,
            out,
            png,
        } => {
            configure_threads(false)?;
            let model = read_model(&model)?;
            let pose = parse_pose(&pose)?;
            let spec = match (panorama, pinhole) {
                (Some(h), None) => render_panorama(&model, &pose, h)?,
                (None, Some(p)) => {
                    let v = parse_floats(&p)?;
                    let [fov, res] = v.as_slice() else {
                        bail!("--pinhole needs 'fov_deg,resolution'");
                    };
                    if !(*fov > 0.0 && *fov < 180.0) || *res < 1.0 {
                        bail!("pinhole fov must be in (0, 180) degrees and resolution positive");
                    }
                    let cam = PinholeCamera::along_pose(&pose, fov.to_radians(), *res as usize);
                    render_view(&model, &cam)
                }
                _ => bail!("choose one of --panorama or --pinhole"),
            };
            write_spectrum(&out, &spec)?;
            if let Some(prefix) = png {
                for (c, name) in rrf::model::CHANNEL_LAYOUT.iter().enumerate() {
                    let p = PathBuf::from(format!("{}_{name}.png", prefix.display()));
                    write_png(&p, &spec, c)?;
                }
            }
        }
        Command::Query {
            model,
            pose,
            k,
            height,
            min_gain,
            nms_radius,
            out,
        } => {
            configure_threads(false)?;
            let model = read_model(&model)?;
            let pose = parse_pose(&pose)?;
            let cfg = QueryConfig {
                height,
                k,
                min_gain,
                nms_radius,
            };
            let mpcs = query_mpcs(&model, &pose, &cfg)?;
            write_text(out.as_deref(), &to_json(&mpcs)?)?;
        }
        Command::Eval {
            model,
            dataset,
            split,
            timing,
            out,
        } => {
            configure_threads(false)?;
            let model = read_model(&model)?;
            let ds = Dataset::open(&dataset)?;
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Test => Split::Test,
            };
            let cfg = EvalConfig {
                timing,
                ..Default::default()
            };
            let report = evaluate(&model, &ds, split, &cfg)?;
            write_text(out.as_deref(), &to_json(&report)?)?;
        }
        Command::Beamform {
            model,
            pose,
            elements,
            rows,
            spacing,
            k,
            height,
            scene,
            max_order,
            out,
        } => {
            configure_threads(false)?;
            let model = read_model(&model)?;
            let pose = parse_pose(&pose)?;
            let arr = ArrayGeometry {
                kind: if rows > 1 { ArrayKind::Upa } else { ArrayKind::Ula },
                counts: [elements, rows.max(1)],
                spacing,
                boresight: [1.0, 0.0, 0.0],
            };
            let cfg = QueryConfig {
                height,
                k,
                ..Default::default()
            };
            let scene = scene.map(|p| Scene::load(&p)).transpose()?;
            let report = beamform_report(&model, &pose, &arr, &cfg, scene.as_ref().map(|s| (s, max_order)))?;
            write_text(out.as_deref(), &to_json(&report)?)?;
        }
        Command::RisQuery {
            model,
            pose,
            height,
            out,
        } => {
            configure_threads(false)?;
            let model = read_model(&model)?;
            let pose = parse_pose(&pose)?;
            let spec = ris_incident_query(&model, &pose, height)?;
            write_spectrum(&out, &spec)?;
        }
        Command::Gradcheck {
            n,
            seed,
            models,
            resolution,
            tolerance,
        } => {
            configure_threads(false)?;
            let mut worst: f64 = 0.0;
            let mut passed = true;
            for s in seed..seed + models.max(1) {
                let cfg = GradcheckConfig {
                    primitives: n,
                    resolution,
                    tolerance,
                    seed: s,
                    ..Default::default()
                };
                let report = gradcheck(&cfg)?;
                for g in &report.groups {
                    println!(
                        "seed {s} {:<14} checked {:>6} skipped {:>4} max_rel_error {:.3e}",
                        g.group, g.checked, g.skipped, g.max_rel_error
                    );
                }
                worst = worst.max(report.max_rel_error);
                passed &= report.passed;
            }
            println!("max relative error {worst:.3e}");
            if !passed {
                bail!("max relative error {worst:.3e} exceeds {tolerance:e}");
            }
        }
        Command::Bench {
            model,
            pose,
            primitives,
            resolution,
            warmup,
            runs,
        } => {
            configure_threads(false)?;
            let (model, cam) = match model {
                Some(p) => {
                    let m = read_model(&p)?;
                    let pose = match pose {
                        Some(s) => parse_pose(&s)?,
                        None => bail!("--model needs --pose"),
                    };
                    (m, PinholeCamera::along_pose(&pose, 90f64.to_radians(), resolution))
                }
                None => benchmark_scene(primitives, resolution, 0)?,
            };
            let lat = render_latency(&model, &cam, warmup, runs);
            let out = serde_json::json!({
                "primitives": model.len(),
                "resolution": resolution,
                "threads": rrf::threads(),
                "runs": runs,
                "median_ms": lat.median_ms,
                "p95_ms": lat.p95_ms,
            });
            print_stdout(&to_json(&out)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
