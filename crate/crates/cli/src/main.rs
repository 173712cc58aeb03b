use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use sfsort::bench::ablation::{to_csv, to_table};
use sfsort::bench::{ablate, evaluate, generate, throughput, AblationMode, Boundary, Layout, Occlusion, SynthSpec};
use sfsort::mot_io::{
    frames_to_tracks, read_detections, read_ground_truth, read_keypoints, read_results, read_seqinfo,
    tracks_to_frames, write_results, LabeledBox, ReadOptions, SequencePaths,
};
use sfsort::postprocess::{compute_params, postprocess, simple_params, PostprocessMode};
use sfsort::scene_features::analyze_scene;
use sfsort::{default_config, track_sequence, Detection, Profile, SceneMetadata, TrackerConfig};

#[derive(Parser)]
#[command(name = "sfsort", version, about = "Online multi-object tracker for MOTChallenge-format data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track one sequence, or every sequence under a directory.
    Track(TrackArgs),
    /// Remove short tracks and fill short gaps in a results file.
    Postprocess(PostprocessArgs),
    /// Report camera-motion and depth features of a sequence.
    Scene(SceneArgs),
    /// Score a results file against ground truth.
    Eval(EvalArgs),
    /// Write a synthetic sequence with ground truth.
    Synth(SynthArgs),
    /// Compare tracker variants on a sequence with ground truth.
    Ablate(AblateArgs),
    /// Measure tracking throughput with detections held in memory.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Built-in hyperparameter profile.
    #[arg(long, value_enum, default_value_t = ProfileArg::Mot17)]
    profile: ProfileArg,
    /// Flat `key = value` file overriding the profile.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single override, `KEY=VALUE`; repeatable, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Mot17,
    Mot20,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<TrackerConfig> {
        let profile = match self.profile {
            ProfileArg::Mot17 => Profile::Mot17,
            ProfileArg::Mot20 => Profile::Mot20,
        };
        let mut cfg = default_config(profile);
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            cfg.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
        }
        for item in &self.overrides {
            let Some((key, value)) = item.split_once('=') else {
                bail!("--set expects KEY=VALUE, got `{item}`");
            };
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrackArgs {
    /// Detection file.
    #[arg(long, required_unless_present_any = ["sequences", "print_config"], conflicts_with = "sequences")]
    det: Option<PathBuf>,
    /// Sequence metadata (`seqinfo.ini`).
    #[arg(long, required_unless_present_any = ["sequences", "print_config"])]
    seqinfo: Option<PathBuf>,
    /// Output results file.
    #[arg(long, required_unless_present_any = ["sequences", "print_config"])]
    out: Option<PathBuf>,
    /// Directory of sequence directories, each with `seqinfo.ini` and `det/det.txt`.
    #[arg(long, requires = "out_dir")]
    sequences: Option<PathBuf>,
    /// Where to write `<name>.txt` per sequence with `--sequences`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct PostprocessArgs {
    /// Tracker results file.
    #[arg(long)]
    res: PathBuf,
    #[arg(long)]
    seqinfo: PathBuf,
    /// Detection file used for the depth feature; defaults to the result boxes.
    #[arg(long)]
    det: Option<PathBuf>,
    /// Keypoint matches; without them the camera counts as moving.
    #[arg(long)]
    keypoints: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Advanced)]
    mode: ModeArg,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Simple,
    Advanced,
}

#[derive(Args)]
struct SceneArgs {
    #[arg(long)]
    det: PathBuf,
    #[arg(long)]
    seqinfo: PathBuf,
    #[arg(long)]
    keypoints: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth file.
    #[arg(long)]
    gt: PathBuf,
    /// Results file.
    #[arg(long)]
    res: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
}

#[derive(Args)]
struct SynthArgs {
    /// Output sequence directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "synthetic")]
    name: String,
    #[arg(long, default_value_t = 20)]
    objects: usize,
    #[arg(long, default_value_t = 300)]
    frames: u32,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    #[arg(long, default_value_t = 1920.0)]
    width: f64,
    #[arg(long, default_value_t = 1080.0)]
    height: f64,
    /// Speed range in pixels per frame, `MIN,MAX`.
    #[arg(long, default_value = "0.5,2", value_parser = parse_range)]
    speed: (f64, f64),
    #[arg(long, default_value_t = 1.0)]
    jitter: f64,
    /// Length of one detection gap per object; 0 disables occlusions.
    #[arg(long, default_value_t = 0)]
    gap: u32,
    /// Expected false positives per frame.
    #[arg(long, default_value_t = 0.0)]
    fp_rate: f64,
    /// Camera pan per frame, `DX,DY`.
    #[arg(long, default_value = "0,0", value_parser = parse_range)]
    pan: (f64, f64),
    #[arg(long, value_enum, default_value_t = LayoutArg::Columns)]
    layout: LayoutArg,
    /// Remove objects that leave the frame instead of pinning them to the border.
    #[arg(long)]
    retire: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Scatter,
    Rows,
    Columns,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two comma-separated numbers, got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a number"));
    Ok((num(a)?, num(b)?))
}

#[derive(Args)]
struct AblateArgs {
    /// Sequence directory with ground truth.
    #[arg(long)]
    seq: PathBuf,
    /// Modes to run, comma-separated; defaults to all.
    #[arg(long, value_delimiter = ',')]
    modes: Vec<String>,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Sequence directory; a synthetic stream is used when absent.
    #[arg(long)]
    seq: Option<PathBuf>,
    /// Objects per frame of the synthetic stream.
    #[arg(long, default_value_t = 32)]
    objects: usize,
    #[arg(long, default_value_t = 1000)]
    frames: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[command(flatten)]
    config: ConfigArgs,
}

fn load_detections(det: &Path, seqinfo: &Path) -> Result<(SceneMetadata, Vec<Vec<Detection>>)> {
    let info = read_seqinfo(seqinfo)?;
    let mut frames = read_detections(det, ReadOptions::default())?;
    if let Some(len) = info.length {
        frames.resize_with(frames.len().max(len as usize), Vec::new);
    }
    Ok((info.meta, frames))
}

fn run_track(args: TrackArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    if args.print_config {
        print!("{}", cfg.to_text());
        return Ok(());
    }
    if let Some(root) = &args.sequences {
        let out_dir = args.out_dir.as_ref().expect("required by clap");
        fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        let mut dirs: Vec<PathBuf> = fs::read_dir(root)
            .with_context(|| format!("listing {}", root.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("seqinfo.ini").is_file())
            .collect();
        dirs.sort();
        if dirs.is_empty() {
            bail!("no sequence directories under {}", root.display());
        }
        let written: Vec<String> = dirs
            .par_iter()
            .map(|dir| -> Result<String> {
                let bundle = SequencePaths::new(dir).load(ReadOptions::default())?;
                let tracks = track_sequence(&cfg, &bundle.meta, &bundle.detections)?;
                let out = out_dir.join(format!("{}.txt", bundle.name));
                write_results(&out, &tracks)?;
                Ok(format!("{}: {} tracks -> {}", bundle.name, tracks.len(), out.display()))
            })
            .collect::<Result<_>>()?;
        for line in written {
            eprintln!("{line}");
        }
        return Ok(());
    }
    let (det, seqinfo, out) = (args.det.unwrap(), args.seqinfo.unwrap(), args.out.unwrap());
    let (meta, frames) = load_detections(&det, &seqinfo)?;
    let tracks = track_sequence(&cfg, &meta, &frames)?;
    write_results(&out, &tracks)?;
    eprintln!("{} frames, {} tracks -> {}", frames.len(), tracks.len(), out.display());
    Ok(())
}

fn results_as_detections(frames: &[Vec<LabeledBox>]) -> Vec<Vec<Detection>> {
    frames
        .iter()
        .map(|f| f.iter().map(|b| Detection { bbox: b.bbox, score: 1.0 }).collect())
        .collect()
}

fn run_postprocess(args: PostprocessArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let info = read_seqinfo(&args.seqinfo)?;
    let results = read_results(&args.res)?;
    let tracks = frames_to_tracks(&results);
    let mode = match args.mode {
        ModeArg::Simple => PostprocessMode::Simple,
        ModeArg::Advanced => PostprocessMode::Advanced,
    };
    let detections = match &args.det {
        Some(det) => load_detections(det, &args.seqinfo)?.1,
        None => results_as_detections(&results),
    };
    let keypoints = args.keypoints.as_ref().map(read_keypoints).transpose()?;
    let profile = analyze_scene(&cfg, &detections, keypoints.as_deref());
    let params = match mode {
        PostprocessMode::Simple => simple_params(&cfg, info.meta.frame_rate),
        PostprocessMode::Advanced => compute_params(&cfg, &profile, info.meta.frame_rate),
    };
    let before = tracks.len();
    let refined = postprocess(tracks, &cfg, &profile, info.meta.frame_rate, mode);
    write_results(&args.out, &refined)?;
    eprintln!(
        "{mode}: fixed camera {}, deep scene {}, n_min {}, n_dti {}; {} of {before} tracks kept -> {}",
        profile.fixed_camera,
        profile.deep_scene,
        params.n_min,
        params.n_dti,
        refined.len(),
        args.out.display()
    );
    Ok(())
}

fn run_scene(args: SceneArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let (_, frames) = load_detections(&args.det, &args.seqinfo)?;
    let keypoints = args.keypoints.as_ref().map(read_keypoints).transpose()?;
    let profile = analyze_scene(&cfg, &frames, keypoints.as_deref());
    let scores: Vec<String> = profile.depth_scores.iter().map(|s| format!("{s:.4}")).collect();
    println!("depth scores: [{}]", scores.join(", "));
    if profile.depth_scores.is_empty() {
        println!("mean depth score: n/a");
    } else {
        let mean = profile.depth_scores.iter().sum::<f64>() / profile.depth_scores.len() as f64;
        println!("mean depth score: {mean:.4}");
    }
    println!(
        "depth: {} (threshold {})",
        if profile.deep_scene { "deep" } else { "shallow" },
        cfg.depth_threshold
    );
    if keypoints.is_none() {
        println!("camera: moving (no keypoint data)");
    } else {
        let votes: Vec<&str> = profile.stationary_votes.iter().map(|&v| if v { "T" } else { "F" }).collect();
        println!(
            "camera: {} (votes {})",
            if profile.fixed_camera { "fixed" } else { "moving" },
            votes.join("")
        );
    }
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.iou) {
        bail!("--iou must lie in [0, 1]");
    }
    let gt = read_ground_truth(&args.gt)?;
    let res = read_results(&args.res)?;
    println!("{}", evaluate(&gt, &res, args.iou));
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let occlusions = if args.gap == 0 {
        Vec::new()
    } else {
        // Stagger one gap per object across the middle of the sequence.
        let span = args.frames.saturating_sub(2 * args.gap).max(1);
        (1..=args.objects as u64)
            .map(|id| Occlusion {
                start: args.gap + 1 + (id as u32 * span / (args.objects as u32 + 1)),
                duration: args.gap,
                ids: vec![id],
                score_dip: None,
            })
            .collect()
    };
    let spec = SynthSpec {
        n_objects: args.objects,
        n_frames: args.frames,
        width: args.width,
        height: args.height,
        frame_rate: args.fps,
        speed: args.speed,
        jitter: args.jitter,
        occlusions,
        false_positive_rate: args.fp_rate,
        camera_pan: args.pan,
        layout: match args.layout {
            LayoutArg::Scatter => Layout::Scatter,
            LayoutArg::Rows => Layout::Rows,
            LayoutArg::Columns => Layout::Columns,
        },
        boundary: if args.retire { Boundary::Retire } else { Boundary::Clamp },
        ..SynthSpec::default()
    };
    let bundle = generate(&spec, args.seed)?.into_bundle(&args.name);
    SequencePaths::new(&args.out).save(&bundle)?;
    eprintln!("{} frames, {} objects -> {}", args.frames, args.objects, args.out.display());
    Ok(())
}

fn run_ablate(args: AblateArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let bundle = SequencePaths::new(&args.seq).load(ReadOptions::default())?;
    let modes = if args.modes.is_empty() {
        AblationMode::all()
    } else {
        args.modes.iter().map(|m| AblationMode::parse(m.trim())).collect::<Result<_, _>>()?
    };
    let rows = ablate(&bundle, &cfg, &modes, args.iou)?;
    print!("{}", to_table(&rows));
    if let Some(path) = &args.csv {
        fs::write(path, to_csv(&rows)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let bundle = match &args.seq {
        Some(dir) => SequencePaths::new(dir).load(ReadOptions::default())?,
        None => {
            let spec = SynthSpec {
                n_objects: args.objects,
                n_frames: args.frames,
                jitter: 1.0,
                layout: Layout::Scatter,
                ..SynthSpec::default()
            };
            generate(&spec, args.seed)?.into_bundle("synthetic")
        }
    };
    let objects = bundle.detections.iter().map(Vec::len).sum::<usize>() as f64 / bundle.detections.len().max(1) as f64;
    match throughput(&bundle, &cfg, args.reps)? {
        Some(fps) => println!(
            "{}: {} frames, {objects:.1} objects/frame, {fps:.1} frames/s (median of {})",
            bundle.name,
            bundle.detections.len(),
            args.reps
        ),
        None => println!("{}: throughput n/a", bundle.name),
    }
    // Keeps the output identical across runs apart from timing.
    let tracks = track_sequence(&cfg, &bundle.meta, &bundle.detections)?;
    println!("tracks: {}, boxes: {}", tracks.len(), tracks_to_frames(&tracks).iter().map(Vec::len).sum::<usize>());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Track(a) => run_track(a),
        Command::Postprocess(a) => run_postprocess(a),
        Command::Scene(a) => run_scene(a),
        Command::Eval(a) => run_eval(a),
        Command::Synth(a) => run_synth(a),
        Command::Ablate(a) => run_ablate(a),
        Command::Bench(a) => run_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
