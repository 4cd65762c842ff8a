//! Command-line front end: argument parsing, dispatch and exit codes.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::events::{
    activation_mask, density_map, read_events, sample_window, voxelize, EventStream, EventVolume, Window,
    DEFAULT_BINS, DEFAULT_PATCH, DEFAULT_TAU,
};
use crate::features::{
    load_teacher_features, save_features, similarity_map, student_forward, teacher_forward, TeacherSpec,
    DEFAULT_FEATURE_DIM,
};
use crate::format::{sig9, Container, Tensor};
use crate::losses::{gradcheck, LossKind};
use crate::netpbm::Image8;
use crate::par::{self, Execution};
use crate::probe::{probe_student, stride_subsample, DEFAULT_ALPHA};
use crate::synth::{generate_dataset, load_manifest, Frame, SynthConfig, CLASS_COUNT};
use crate::trainer::{
    eval_structure_discrepancy, prepare_manifest, pretrain, Checkpoint, TrainConfig, TrainOptions,
};

pub const THREADS_ENV: &str = "EVENTDISTILL_THREADS";

/// Largest gradient-check error accepted by `gradcheck`.
pub const GRADCHECK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "eventdistill",
    version,
    about = "Structure-aware event-to-image distillation at desk scale"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset of frame pairs, events and labels.
    Synth(SynthArgs),
    /// Accumulate an event stream into a voxel grid (FTN1 [H, W, B]).
    Voxelize(VoxelizeArgs),
    /// Threshold patch event density into an activation mask (FTN1 [H', W']).
    Mask(MaskArgs),
    /// Compute synthetic teacher features for an image.
    Teacher(TeacherArgs),
    /// Encode an event stream with a trained student checkpoint.
    Encode(EncodeArgs),
    /// Render a cosine-similarity map of a feature grid as PGM.
    Simmap(SimmapArgs),
    /// Compare analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Pretrain the student against the teacher.
    Pretrain(PretrainArgs),
    /// Held-out structure discrepancy of a checkpoint.
    Eval(EvalArgs),
    /// Linear-probe token segmentation with frozen student features.
    Probe(ProbeArgs),
    /// Round-trip every EVT1/FTN1/CKP1/PPM/PGM file in a directory.
    FormatsCheck(FormatsCheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of scenes.
    #[arg(long)]
    pub scenes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    /// Log-intensity contrast threshold.
    #[arg(long, default_value_t = crate::synth::DEFAULT_CONTRAST)]
    pub contrast: f64,
    /// Time between the two frames, µs.
    #[arg(long, default_value_t = 10_000)]
    pub duration_us: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("window").args(["window_us", "count"]).multiple(false)))]
pub struct VoxelizeArgs {
    /// EVT1 or CSV (`x,y,p,t`) event file.
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Keep events with anchor <= t < anchor + window.
    #[arg(long)]
    pub window_us: Option<u64>,
    /// Keep the last N events with t <= anchor.
    #[arg(long)]
    pub count: Option<usize>,
    /// Window anchor, µs. Defaults to the first event for --window-us and
    /// the last event for --count.
    #[arg(long)]
    pub anchor: Option<u64>,
    /// Sensor width for CSV input (inferred when omitted).
    #[arg(long, requires = "height")]
    pub width: Option<usize>,
    #[arg(long, requires = "width")]
    pub height: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    /// Voxel grid written by `voxelize`.
    #[arg(long)]
    pub volume: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PATCH)]
    pub patch: usize,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TeacherArgs {
    /// PPM frame.
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FEATURE_DIM)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_PATCH)]
    pub patch: usize,
    /// Box-smoothing radius in tokens.
    #[arg(long, default_value_t = 1)]
    pub radius: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// EVT1 or CSV event file at the checkpoint resolution.
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimmapArgs {
    /// FTN1 feature grid [H', W', D].
    #[arg(long)]
    pub features: PathBuf,
    /// Anchor token as `row,col`.
    #[arg(long, value_parser = parse_anchor)]
    pub anchor: (usize, usize),
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// l1, intra, cross, combined, student or all.
    #[arg(long, default_value = "all")]
    pub loss: String,
    #[arg(long, default_value_t = 12)]
    pub tokens: usize,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-6)]
    pub h: f64,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").args(["config", "preset"]).multiple(false)))]
pub struct PretrainArgs {
    /// Dataset directory containing manifest.txt.
    #[arg(long, required_unless_present = "dump_config")]
    pub data: Option<PathBuf>,
    /// `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named preset: desk or paper.
    #[arg(long)]
    pub preset: Option<String>,
    /// Override one config key, e.g. `--set steps=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Print the resolved config and exit.
    #[arg(long)]
    pub dump_config: bool,
    #[arg(long, required_unless_present = "dump_config")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Held-out dataset directory.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Student checkpoint; optional with --random-init.
    #[arg(long, required_unless_present = "random_init")]
    pub ckpt: Option<PathBuf>,
    /// Labelled dataset for fitting the probe.
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluation dataset; defaults to the last quarter of --data.
    #[arg(long)]
    pub held_out: Option<PathBuf>,
    /// Fraction of the fitting set kept by stride sampling.
    #[arg(long, default_value_t = 1.0)]
    pub fraction: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = CLASS_COUNT)]
    pub classes: usize,
    /// Evaluate a freshly initialized student instead of the trained one.
    #[arg(long)]
    pub random_init: bool,
    /// Init seed for --random-init without a checkpoint.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FormatsCheckArgs {
    pub dir: PathBuf,
}

fn parse_anchor(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `row,col`, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.trim().parse::<usize>() {
            Ok(n) => {
                par::configure_threads(n);
            }
            Err(_) => {
                let _ = writeln!(err, "error: {THREADS_ENV} must be a non-negative integer");
                return 1;
            }
        }
    }
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Synth(a) => synth(a, out),
        Command::Voxelize(a) => voxelize_cmd(a, out),
        Command::Mask(a) => mask_cmd(a, out),
        Command::Teacher(a) => teacher_cmd(a, out),
        Command::Encode(a) => encode_cmd(a, out),
        Command::Simmap(a) => simmap_cmd(a, out),
        Command::Gradcheck(a) => gradcheck_cmd(a, out),
        Command::Pretrain(a) => pretrain_cmd(a, out),
        Command::Eval(a) => eval_cmd(a, out),
        Command::Probe(a) => probe_cmd(a, out),
        Command::FormatsCheck(a) => {
            let report = formats_check(&a.dir)?;
            for line in &report.lines {
                writeln!(out, "{line}").map_err(io_err)?;
            }
            Ok(if report.failures == 0 { 0 } else { 1 })
        }
    }
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = SynthConfig {
        width: a.width,
        height: a.height,
        contrast: a.contrast,
        duration_us: a.duration_us,
        ..SynthConfig::default()
    };
    let manifest = generate_dataset(a.scenes, a.seed, &a.out, &cfg)?;
    writeln!(out, "scenes\t{}", manifest.len()).map_err(io_err)?;
    Ok(0)
}

fn voxelize_cmd(a: VoxelizeArgs, out: &mut dyn Write) -> Result<i32> {
    let geometry = a.width.zip(a.height);
    let stream = read_events(&a.events, geometry)?;
    let first = stream.events().first().map_or(0, |e| e.t);
    let last = stream.events().last().map_or(0, |e| e.t);
    let stream = match (a.window_us, a.count) {
        (Some(dt), None) => sample_window(&stream, Window::Duration(dt), a.anchor.unwrap_or(first))?,
        (None, Some(n)) => sample_window(&stream, Window::Count(n), a.anchor.unwrap_or(last))?,
        _ => stream,
    };
    let volume = voxelize(&stream, a.bins)?;
    volume.to_tensor().save(&a.out)?;
    writeln!(out, "events\t{}", stream.len()).map_err(io_err)?;
    writeln!(out, "polarity_sum\t{}", stream.polarity_sum()).map_err(io_err)?;
    writeln!(out, "volume_sum\t{}", sig9(volume.sum())).map_err(io_err)?;
    Ok(0)
}

fn mask_cmd(a: MaskArgs, out: &mut dyn Write) -> Result<i32> {
    let volume = EventVolume::from_tensor(&Tensor::load(&a.volume)?)?;
    let mask = activation_mask(&density_map(&volume, a.patch)?, a.tau)?;
    mask.to_tensor().save(&a.out)?;
    writeln!(out, "active\t{}\t{}", mask.active_count(), mask.rows() * mask.cols()).map_err(io_err)?;
    Ok(0)
}

fn teacher_cmd(a: TeacherArgs, out: &mut dyn Write) -> Result<i32> {
    let frame = Frame::from_image(&Image8::load(&a.image)?, 0)?;
    let spec = TeacherSpec::new(a.dim, a.seed, a.radius)?;
    let grid = teacher_forward(&spec, &frame, a.patch)?;
    save_features(&grid, &a.out)?;
    writeln!(out, "tokens\t{}\t{}\t{}", grid.rows(), grid.cols(), grid.dim()).map_err(io_err)?;
    Ok(0)
}

fn encode_cmd(a: EncodeArgs, out: &mut dyn Write) -> Result<i32> {
    let ck = Checkpoint::load(&a.ckpt)?;
    let stream: EventStream = read_events(&a.events, Some((ck.config.width, ck.config.height)))?;
    let volume = voxelize(&stream, ck.params.bins)?.scaled(ck.config.event_scale);
    let grid = student_forward(&ck.params, &volume)?;
    save_features(&grid, &a.out)?;
    writeln!(out, "tokens\t{}\t{}\t{}", grid.rows(), grid.cols(), grid.dim()).map_err(io_err)?;
    Ok(0)
}

fn simmap_cmd(a: SimmapArgs, out: &mut dyn Write) -> Result<i32> {
    let grid = load_teacher_features(&a.features)?;
    let map = similarity_map(&grid, a.anchor)?;
    map.to_image().save(&a.out)?;
    writeln!(out, "anchor\t{}\t{}", a.anchor.0, a.anchor.1).map_err(io_err)?;
    Ok(0)
}

fn gradcheck_cmd(a: GradcheckArgs, out: &mut dyn Write) -> Result<i32> {
    let kinds: Vec<LossKind> = if a.loss == "all" {
        LossKind::ALL.to_vec()
    } else {
        vec![a.loss.parse()?]
    };
    let mut worst: f64 = 0.0;
    writeln!(out, "loss\tmax_rel_err\tchecked\tkinks").map_err(io_err)?;
    for kind in kinds {
        let r = gradcheck(kind, a.tokens, a.dim, a.seeds, a.h)?;
        worst = worst.max(r.max_rel_err);
        writeln!(out, "{}\t{}\t{}\t{}", kind, sig9(r.max_rel_err), r.checked, r.kink_count).map_err(io_err)?;
    }
    Ok(if worst < GRADCHECK_TOLERANCE { 0 } else { 1 })
}

fn resolve_config(a: &PretrainArgs) -> Result<TrainConfig> {
    let mut cfg = match (&a.config, &a.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            TrainConfig::parse(&text)?
        }
        (None, Some(name)) => TrainConfig::preset(name)?,
        (None, None) => TrainConfig::desk(),
    };
    for kv in &a.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn pretrain_cmd(a: PretrainArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = resolve_config(&a)?;
    if a.dump_config {
        write!(out, "{}", cfg.to_text()).map_err(io_err)?;
        return Ok(0);
    }
    let (data, ckpt) = match (&a.data, &a.out) {
        (Some(d), Some(o)) => (d, o),
        _ => return Err(Error::Parameter("--data and --out are required".into())),
    };
    let manifest = load_manifest(data)?;
    let samples = prepare_manifest(&manifest, &cfg, Execution::default())?;
    let opts = TrainOptions {
        checkpoint: Some(ckpt.clone()),
        ..TrainOptions::default()
    };
    let outcome = pretrain(&samples, &cfg, &opts)?;
    let (i, f) = (&outcome.initial, &outcome.final_report);
    writeln!(out, "steps\t{}", outcome.checkpoint.history.len()).map_err(io_err)?;
    writeln!(out, "stage\tl1\tintra\tcross\ttotal").map_err(io_err)?;
    for (name, r) in [("initial", i), ("final", f)] {
        writeln!(
            out,
            "{name}\t{}\t{}\t{}\t{}",
            sig9(r.l1),
            sig9(r.intra),
            sig9(r.cross),
            sig9(r.total)
        )
        .map_err(io_err)?;
    }
    Ok(0)
}

fn eval_cmd(a: EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let ck = Checkpoint::load(&a.ckpt)?;
    let samples = prepare_manifest(&load_manifest(&a.data)?, &ck.config, Execution::default())?;
    let d = eval_structure_discrepancy(&ck.params, &samples, Execution::default())?;
    writeln!(out, "gram_err\t{}", sig9(d.gram_err)).map_err(io_err)?;
    writeln!(out, "l1_err\t{}", sig9(d.l1_err)).map_err(io_err)?;
    Ok(0)
}

fn probe_cmd(a: ProbeArgs, out: &mut dyn Write) -> Result<i32> {
    let (cfg, trained) = match &a.ckpt {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            (ck.config, Some(ck.params))
        }
        None => (TrainConfig::desk(), None),
    };
    let params = match (a.random_init, trained) {
        (false, Some(p)) => p,
        (_, Some(_)) => cfg.init_student()?,
        (_, None) => TrainConfig { seed: a.seed, ..cfg.clone() }.init_student()?,
    };
    let manifest = load_manifest(&a.data)?;
    let (fit_set, eval_set) = match &a.held_out {
        Some(dir) => (manifest, load_manifest(dir)?),
        None => {
            let split = manifest.len() - manifest.len() / 4;
            (manifest.subset(0..split), manifest.subset(split..manifest.len()))
        }
    };
    if eval_set.is_empty() {
        return Err(Error::Parameter("no held-out scenes to evaluate".into()));
    }
    let fit_set = stride_subsample(&fit_set, a.fraction)?;
    let exec = Execution::default();
    let fit = prepare_manifest(&fit_set, &cfg, exec)?;
    let eval = prepare_manifest(&eval_set, &cfg, exec)?;
    let r = probe_student(&params, &fit, &eval, a.classes, a.alpha, exec)?;
    for (c, iou) in r.per_class_iou.iter().enumerate() {
        let v = iou.map_or("absent".to_string(), sig9);
        writeln!(out, "iou\t{c}\t{v}").map_err(io_err)?;
    }
    writeln!(out, "miou\t{}", sig9(r.miou)).map_err(io_err)?;
    writeln!(out, "acc\t{}", sig9(r.acc)).map_err(io_err)?;
    Ok(0)
}

/// Outcome of [`formats_check`]: one line per checked file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FormatsReport {
    pub lines: Vec<String>,
    pub failures: usize,
}

fn round_trip(path: &Path, ext: &str) -> Result<bool> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let again = match ext {
        "evt1" => EventStream::from_evt1_bytes(&bytes)?.to_evt1_bytes(),
        "ftn" => Tensor::from_bytes(&bytes)?.to_bytes(),
        "ckp1" => Container::from_bytes(&bytes)?.to_bytes()?,
        "ppm" | "pgm" => Image8::from_bytes(&bytes)?.to_bytes(),
        _ => unreachable!("filtered by extension"),
    };
    Ok(again == bytes)
}

/// Decodes and re-encodes every recognised file directly inside `dir` and
/// compares the bytes.
pub fn formats_check(dir: &Path) -> Result<FormatsReport> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_>>()?;
    paths.sort();
    let mut report = FormatsReport::default();
    for path in paths {
        let ext = match path.extension().and_then(|e| e.to_str()) {
            Some(e) if ["evt1", "ftn", "ckp1", "ppm", "pgm"].contains(&e) => e.to_string(),
            _ => continue,
        };
        let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        match round_trip(&path, &ext) {
            Ok(true) => report.lines.push(format!("ok\t{name}")),
            Ok(false) => {
                report.failures += 1;
                report.lines.push(format!("FAIL\t{name}\tre-encoded bytes differ"));
            }
            Err(e) => {
                report.failures += 1;
                report.lines.push(format!("FAIL\t{name}\t{e}"));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("eventdistill").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn help_lists_every_command() {
        let (code, out, _) = run_str(&["--help"]);
        assert_eq!(code, 0);
        for cmd in [
            "synth", "voxelize", "mask", "teacher", "encode", "simmap", "gradcheck", "pretrain", "eval", "probe",
            "formats-check",
        ] {
            assert!(out.contains(cmd), "{cmd} missing from help");
        }
    }

    #[test]
    fn unknown_command_and_flag_exit_1() {
        assert_eq!(run_str(&["frobnicate"]).0, 1);
        let (code, _, err) = run_str(&["gradcheck", "--bogus"]);
        assert_eq!(code, 1);
        assert!(err.contains("--bogus"));
    }

    #[test]
    fn conflicting_window_flags_name_both() {
        let (code, _, err) =
            run_str(&["voxelize", "--events", "e.evt1", "--window-us", "5", "--count", "3", "--out", "v.ftn"]);
        assert_eq!(code, 1);
        assert!(err.contains("--window-us") && err.contains("--count"), "{err}");
    }

    #[test]
    fn gradcheck_defaults_fill_in() {
        let cli = Cli::try_parse_from(["eventdistill", "gradcheck", "--loss", "all"]).unwrap();
        match cli.command {
            Command::Gradcheck(a) => {
                assert_eq!(a.loss, "all");
                assert_eq!((a.tokens, a.dim, a.seeds, a.h), (12, 8, 5, 1e-6));
            }
            other => panic!("parsed {other:?}"),
        }
    }

    #[test]
    fn paper_preset_dump() {
        let (code, out, _) = run_str(&["pretrain", "--preset", "paper", "--dump-config"]);
        assert_eq!(code, 0);
        let cfg = TrainConfig::parse(&out).unwrap();
        assert_eq!(cfg, TrainConfig::paper());
    }

    #[test]
    fn config_and_preset_conflict() {
        let (code, _, _) = run_str(&["pretrain", "--preset", "paper", "--config", "x.cfg", "--dump-config"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn missing_input_is_io_exit() {
        let (code, _, err) = run_str(&["mask", "--volume", "/nonexistent/v.ftn", "--out", "/tmp/m.ftn"]);
        assert_eq!(code, 2, "{err}");
    }

    #[test]
    fn anchor_parsing() {
        assert_eq!(parse_anchor("3,4"), Ok((3, 4)));
        assert!(parse_anchor("3").is_err());
        assert!(parse_anchor("a,4").is_err());
    }
}
