use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use synthscan_core::asset::{load_asset_dir, load_ground_plane, load_obj, LabelRegistry};
use synthscan_core::blocks::{partition_blocks, write_blocks, BlockSpec};
use synthscan_core::geometry::Vec3;
use synthscan_core::pointcloud::{
    compare, merge, read_xyz_file, stats, write_xyz_file, DistanceSummary, PointCloud,
};
use synthscan_core::scanner::{simulate_leg, SceneGeometry};
use synthscan_core::scene::{
    build_scene, generate_scan_positions, parse_scene_xml, write_scene_xml, Layout, Placement,
    Scene,
};
use synthscan_core::survey::{parse_survey_xml, preset, write_survey_xml, Survey};

use crate::{BlocksArgs, Cli, Command, CompareArgs, MergeArgs, ScanArgs, SceneGenArgs, StatsArgs};

/// Process exit classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Input = 2,
    Internal = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

trait InputContext<T> {
    fn input(self) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> InputContext<T> for Result<T, E> {
    fn input(self) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            kind: ExitKind::Input,
            error: e.into(),
        })
    }
}

fn internal(error: anyhow::Error) -> CliError {
    CliError {
        kind: ExitKind::Internal,
        error,
    }
}

fn usage(msg: String) -> CliError {
    CliError {
        kind: ExitKind::Usage,
        error: anyhow!(msg),
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let report = match cli.command {
        Command::SceneGen(a) => scene_gen(&a)?,
        Command::Scan(a) => scan(&a)?,
        Command::Merge(a) => merge_cmd(&a)?,
        Command::Blocks(a) => blocks_cmd(&a)?,
        Command::Stats(a) => stats_cmd(&a)?,
        Command::Compare(a) => compare_cmd(&a)?,
    };
    out.write_all(report.as_bytes())
        .map_err(|e| internal(e.into()))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .input()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .input()
}

pub const SCENE_FILE: &str = "scene.xml";
pub const SURVEY_FILE: &str = "survey.xml";

fn scene_gen(args: &SceneGenArgs) -> Result<String, CliError> {
    let settings = preset(&args.preset).input()?;
    let ground_path = args
        .ground_plane
        .canonicalize()
        .with_context(|| format!("ground plane {}", args.ground_plane.display()))
        .input()?;
    let ground = load_ground_plane(&ground_path).input()?;
    let mut registry = LabelRegistry::new();
    let mut assets = load_asset_dir(
        &args.objects_dir,
        std::slice::from_ref(&ground_path),
        &mut registry,
    )
    .with_context(|| format!("loading objects from {}", args.objects_dir.display()))
    .input()?;
    for a in &mut assets {
        a.path = a.path.canonicalize().input()?;
    }
    let layout = Layout {
        num_objects: args.num_objects as usize,
        spacing: args.spacing,
        placement: if args.scatter {
            Placement::Scatter { seed: args.seed }
        } else {
            Placement::Grid
        },
    };
    let scene = build_scene(&assets, &ground, &layout, &args.name).input()?;
    let ring_center = Vec3::new(scene.center.x, scene.center.y, scene.ground_z());
    let positions = generate_scan_positions(
        ring_center,
        args.radius,
        args.segments as usize,
        args.height,
    );
    let survey = Survey::from_positions(
        &args.name,
        SCENE_FILE,
        &scene.name,
        settings,
        &positions,
        args.seed,
    );

    create_dir(&args.out)?;
    let scene_path = args.out.join(SCENE_FILE);
    let survey_path = args.out.join(SURVEY_FILE);
    write_file(&scene_path, &write_scene_xml(&scene))?;
    write_file(&survey_path, &write_survey_xml(&survey))?;

    let mut report = String::new();
    let _ = writeln!(report, "objects placed: {}", scene.objects().len());
    let _ = writeln!(report, "classes:        {}", registry.len());
    let _ = writeln!(report, "legs generated: {}", survey.legs.len());
    let _ = writeln!(report, "scene:          {}", scene_path.display());
    let _ = writeln!(report, "survey:         {}", survey_path.display());
    Ok(report)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn parent_dir(p: &Path) -> PathBuf {
    p.parent()
        .filter(|d| !d.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

/// Reads a scene file, resolving relative asset paths against its directory.
pub fn load_scene(path: &Path) -> Result<Scene, CliError> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("reading scene {}", path.display()))
        .input()?;
    let dir = parent_dir(path);
    parse_scene_xml(&bytes, |asset| load_obj(&resolve(&dir, asset)))
        .with_context(|| format!("parsing scene {}", path.display()))
        .input()
}

pub fn leg_file_name(index: usize) -> String {
    format!("leg_{index:03}.xyz")
}

fn scan(args: &ScanArgs) -> Result<String, CliError> {
    let started = Instant::now();
    let bytes = std::fs::read(&args.survey)
        .with_context(|| format!("reading survey {}", args.survey.display()))
        .input()?;
    let mut survey = parse_survey_xml(&bytes)
        .with_context(|| format!("parsing survey {}", args.survey.display()))
        .input()?;
    survey.validate().input()?;
    if let Some(seed) = args.seed {
        survey.seed = seed;
    }
    let scene_path = match &args.scene {
        Some(p) => p.clone(),
        None => resolve(&parent_dir(&args.survey), Path::new(&survey.scene_path)),
    };
    let scene = load_scene(&scene_path)?;
    if scene.name != survey.scene_id {
        log::warn!(
            "survey references scene {:?} but {} holds {:?}",
            survey.scene_id,
            scene_path.display(),
            scene.name
        );
    }
    let geometry = SceneGeometry::new(&scene).input()?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        pool = pool.num_threads(n as usize);
    }
    let pool = pool.build().map_err(|e| internal(e.into()))?;

    create_dir(&args.out)?;
    let mut log = String::new();
    let _ = writeln!(log, "survey: {} ({})", survey.name, args.survey.display());
    let _ = writeln!(log, "scene: {} ({})", scene.name, scene_path.display());
    let _ = writeln!(log, "triangles: {}", geometry.bvh.triangles().len());
    let _ = writeln!(log, "seed: {}", survey.seed);
    let _ = writeln!(log, "threads: {}", pool.current_num_threads());
    let s = &survey.settings;
    let _ =
        writeln!(
        log,
        "settings: horizontal {}..{} step {} deg, vertical {}..{} step {} deg, max range {} m, \
         noise sigma {} m, divergence {} mrad, beam sample quality {}",
        s.horiz_start, s.horiz_end, s.horiz_res, s.vert_start, s.vert_end, s.vert_res,
        s.max_range, s.range_noise_sigma, s.beam_divergence, s.beam_sample_quality
    );

    let mut total = 0usize;
    let mut report = String::new();
    for leg in &survey.legs {
        let leg_started = Instant::now();
        let cloud = pool.install(|| simulate_leg(&geometry, &survey, leg));
        let path = args.out.join(leg_file_name(leg.index));
        write_xyz_file(&path, &cloud).input()?;
        total += cloud.len();
        let settings = survey.settings_for(leg);
        let p = leg.position;
        let line = format!(
            "leg {}: position ({}, {}, {}), pulses {}, points {}, {:.3} s -> {}",
            leg.index,
            p.x,
            p.y,
            p.z,
            settings.pulse_count(),
            cloud.len(),
            leg_started.elapsed().as_secs_f64(),
            path.display()
        );
        let _ = writeln!(log, "{line}");
        let _ = writeln!(report, "{line}");
    }
    let wall = started.elapsed().as_secs_f64();
    let _ = writeln!(log, "total points: {total}");
    let _ = writeln!(log, "wall time: {wall:.3} s");
    write_file(&args.out.join("scan.log"), log.as_bytes())?;
    let _ = writeln!(
        report,
        "{} legs, {total} points, {wall:.3} s",
        survey.legs.len()
    );
    Ok(report)
}

fn read_cloud(path: &Path) -> Result<PointCloud, CliError> {
    read_xyz_file(path)
        .with_context(|| format!("reading {}", path.display()))
        .input()
}

fn merge_cmd(args: &MergeArgs) -> Result<String, CliError> {
    let clouds = args
        .inputs
        .iter()
        .map(|p| read_cloud(p))
        .collect::<Result<Vec<_>, _>>()?;
    let merged = merge(&clouds);
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_xyz_file(&args.out, &merged).input()?;
    Ok(format!(
        "merged {} clouds, {} points -> {}\n",
        clouds.len(),
        merged.len(),
        args.out.display()
    ))
}

fn blocks_cmd(args: &BlocksArgs) -> Result<String, CliError> {
    if args.stride > args.window {
        return Err(usage(format!(
            "--stride {} must not exceed --window {}",
            args.stride, args.window
        )));
    }
    let cloud = read_cloud(&args.input)?;
    let spec = BlockSpec {
        window_x: args.window,
        window_y: args.window,
        stride_x: args.stride,
        stride_y: args.stride,
        min_points: args.min_points as usize,
        sample_to: args.sample_to.map(|n| n as usize),
        seed: args.seed,
    };
    let blocks = partition_blocks(&cloud, &spec).input()?;
    let base = args.base.clone().unwrap_or_else(|| {
        args.input
            .file_stem()
            .map_or_else(|| "block".to_string(), |s| s.to_string_lossy().into_owned())
    });
    let manifest = write_blocks(&blocks, &args.out, &base).input()?;
    Ok(format!(
        "{} blocks written to {} ({}_manifest.csv)\n",
        manifest.len(),
        args.out.display(),
        base
    ))
}

fn fmt_m(v: f64) -> String {
    format!("{v:.6}")
}

fn stats_cmd(args: &StatsArgs) -> Result<String, CliError> {
    let cloud = read_cloud(&args.input)?;
    let st = stats(&cloud);
    let mut out = String::new();
    let _ = writeln!(out, "{:<16} {}", "points", st.count);
    if let Some(b) = st.bbox {
        let _ = writeln!(
            out,
            "{:<16} {} {} {}",
            "bbox min",
            fmt_m(b.min.x),
            fmt_m(b.min.y),
            fmt_m(b.min.z)
        );
        let _ = writeln!(
            out,
            "{:<16} {} {} {}",
            "bbox max",
            fmt_m(b.max.x),
            fmt_m(b.max.y),
            fmt_m(b.max.z)
        );
    }
    let spacing = if st.nn_spacing_defined {
        fmt_m(st.mean_nn_spacing)
    } else {
        format!("{} (undefined)", fmt_m(0.0))
    };
    let _ = writeln!(out, "{:<16} {}", "mean NN spacing", spacing);
    let _ = writeln!(out);
    let _ = writeln!(out, "{:>8} {:>12}", "label", "count");
    for (label, count) in &st.per_label {
        let _ = writeln!(out, "{label:>8} {count:>12}");
    }
    if let Some(path) = &args.csv {
        let mut csv = String::from("label,count\n");
        for (label, count) in &st.per_label {
            let _ = writeln!(csv, "{label},{count}");
        }
        let _ = writeln!(csv, "all,{}", st.count);
        write_file(path, csv.as_bytes())?;
    }
    Ok(out)
}

fn summary_row(name: &str, s: &DistanceSummary) -> String {
    format!(
        "{name:>8} {:>10} {:>12} {:>12} {:>12}",
        s.count,
        fmt_m(s.mean),
        fmt_m(s.rms),
        fmt_m(s.max)
    )
}

fn compare_cmd(args: &CompareArgs) -> Result<String, CliError> {
    let a = read_cloud(&args.a)?;
    let b = read_cloud(&args.b)?;
    let cmp = compare(&a, &b).input()?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>8} {:>10} {:>12} {:>12} {:>12}",
        "label", "points", "mean", "rms", "max"
    );
    for (label, s) in &cmp.per_label {
        let _ = writeln!(out, "{}", summary_row(&label.to_string(), s));
    }
    let _ = writeln!(out, "{}", summary_row("all", &cmp.overall));
    if let Some(path) = &args.csv {
        let mut csv = String::from("label,count,mean,rms,max\n");
        let rows = cmp
            .per_label
            .iter()
            .map(|(l, s)| (l.to_string(), s))
            .chain(std::iter::once(("all".to_string(), &cmp.overall)));
        for (label, s) in rows {
            let _ = writeln!(csv, "{label},{},{},{},{}", s.count, s.mean, s.rms, s.max);
        }
        write_file(path, csv.as_bytes())?;
    }
    Ok(out)
}
