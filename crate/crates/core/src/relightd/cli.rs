//! `relightd` command line. Each verb wraps one engine call; results go to
//! files written atomically, and `--json` prints a summary on stdout.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{encode_image, parse_direction, ImageFormat, ServerConfig};
use crate::compositor::{
    animate_rotation, area_light_target, composite_values, crossfade_keyframes, relight_hdri, CalibrationStage,
    FrameParam, OlatStack, RelightMode, RelightOptions, RelitSequence,
};
use crate::dyngs::{plan_segments, plan_segments_by_length, PhaseSchedule};
use crate::envmap::{fit_sgs, hdri_to_olat_weights, EnvError, EnvironmentMap, FitOptions, OlatWeights, WeightMode};
use crate::lightmodel::{build_stage, LightSample, PanelLayout, StageGeometry};
use crate::noisekit::{gaussian_noise, noise_stats, pyramid_noise, PyramidParams};
use crate::radiometry::{calibrate_color, read_pfm_file, write_atomic, ColorChart, ScaleFactor3};
use crate::synthoracle::{make_olat_stack, Scene};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "relightd", version, about = "OLAT relighting engine and preview server")]
pub struct Cli {
    /// Print a machine-readable JSON summary on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a synthetic OLAT stack (PFM frames plus stack.json).
    Synth(SynthArgs),
    /// Weighted sum of OLAT frames.
    Composite(CompositeArgs),
    /// Relight under one directional or area light.
    AreaLight(AreaLightArgs),
    /// Relight under an HDR environment.
    RelightHdri(RelightArgs),
    /// Relight under an environment rotating about the vertical axis.
    Animate(AnimateArgs),
    /// Keep every step-th frame and blend the rest.
    Crossfade(CrossfadeArgs),
    /// Fit Spherical Gaussians to an environment.
    FitSg(FitSgArgs),
    /// Per-panel OLAT weights for an environment.
    Weights(WeightsArgs),
    /// Per-channel scale mapping an observed colour chart onto a reference.
    Calibrate(CalibrateArgs),
    /// Statistics of a Gaussian or pyramid noise field.
    NoiseStats(NoiseStatsArgs),
    /// Keyframes, segments and phase boundaries for a dynamic capture.
    PlanSegments(PlanArgs),
    /// Run the HTTP preview service.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LayoutChoice {
    Default,
    Refined,
}

impl LayoutChoice {
    fn geometry(self) -> StageGeometry {
        match self {
            Self::Default => StageGeometry::default(),
            Self::Refined => StageGeometry::default().refined(),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeChoice {
    Olat,
    Sg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum WeightModeChoice {
    EnergyPreserving,
    RegionMean,
}

impl From<WeightModeChoice> for WeightMode {
    fn from(m: WeightModeChoice) -> Self {
        match m {
            WeightModeChoice::EnergyPreserving => WeightMode::EnergyPreserving,
            WeightModeChoice::RegionMean => WeightMode::RegionMean,
        }
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Square image resolution.
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    #[arg(long, value_enum, default_value_t = LayoutChoice::Default)]
    pub layout: LayoutChoice,
    /// Drop the ground plane.
    #[arg(long)]
    pub no_ground: bool,
}

#[derive(Args, Debug)]
pub struct CompositeArgs {
    #[arg(long)]
    pub stack: PathBuf,
    /// JSON weights: `[{label, weight:[r,g,b]}, ...]` or `[[r,g,b], ...]`.
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AreaLightArgs {
    #[arg(long)]
    pub stack: PathBuf,
    /// Light direction `x,y,z`; normalised.
    #[arg(long, allow_hyphen_values = true)]
    pub dir: String,
    /// Size code in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    pub size: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RelightFlags {
    #[arg(long)]
    pub stack: PathBuf,
    #[arg(long)]
    pub env: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeChoice::Olat)]
    pub mode: ModeChoice,
    /// Lobe count for `--mode sg`.
    #[arg(long, default_value_t = 15)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = WeightModeChoice::EnergyPreserving)]
    pub weight_mode: WeightModeChoice,
    /// JSON `{r,g,b}` scale applied to the result.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Scale the weights instead of the composited image.
    #[arg(long)]
    pub calibrate_weights: bool,
}

#[derive(Args, Debug)]
pub struct RelightArgs {
    #[command(flatten)]
    pub flags: RelightFlags,
    /// Environment rotation about +z, radians.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub rot: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AnimateArgs {
    #[command(flatten)]
    pub flags: RelightFlags,
    #[arg(long)]
    pub frames: usize,
    /// Total rotation across the sequence, radians.
    #[arg(long, default_value_t = std::f64::consts::TAU, allow_hyphen_values = true)]
    pub delta: f64,
    /// Directory for frame_NNN.pfm and sequence.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct CrossfadeArgs {
    /// sequence.json written by `animate` or `crossfade`.
    #[arg(long)]
    pub sequence: PathBuf,
    #[arg(long)]
    pub step: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct FitSgArgs {
    #[arg(long)]
    pub env: PathBuf,
    #[arg(long, default_value_t = 15)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct WeightsArgs {
    #[arg(long)]
    pub env: PathBuf,
    #[arg(long, value_enum, default_value_t = LayoutChoice::Default)]
    pub layout: LayoutChoice,
    /// Use the panel directions of this stack instead of a built-in layout.
    #[arg(long, conflicts_with = "layout")]
    pub stack: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = WeightModeChoice::EnergyPreserving)]
    pub mode: WeightModeChoice,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub rot: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// JSON array of reference patches `[[r,g,b], ...]`.
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub observed: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct NoiseStatsArgs {
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Plain i.i.d. Gaussian instead of pyramid noise.
    #[arg(long)]
    pub gaussian: bool,
    #[arg(long, default_value_t = PyramidParams::default().levels)]
    pub levels: usize,
    #[arg(long, default_value_t = PyramidParams::default().discount)]
    pub discount: f64,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    #[arg(long)]
    pub frames: usize,
    /// Number of keyframes; defaults to about 20 frames per segment.
    #[arg(long)]
    pub keyframes: Option<usize>,
    #[arg(long, default_value_t = 20, conflicts_with = "keyframes")]
    pub per_segment: usize,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Overrides RELIGHTD_PORT.
    #[arg(long)]
    pub port: Option<u16>,
    /// Overrides RELIGHTD_WORKERS.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Request body limit in bytes.
    #[arg(long, default_value_t = super::server::DEFAULT_MAX_BODY)]
    pub max_body: usize,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Engine(Error),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => EXIT_VALIDATION,
            Self::Engine(e) if e.is_invalid_input() => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        }
    }

    fn code(&self) -> u32 {
        match self {
            Self::Engine(e) => e.code(),
            Self::Validation(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Validation(m) | Self::Runtime(m) => f.write_str(m),
            Self::Engine(e) => write!(f, "{e}"),
        }
    }
}

impl<E: Into<Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        Self::Engine(e.into())
    }
}

type CliResult<T = Value> = Result<T, CliError>;

fn existing(p: &Path) -> CliResult<&Path> {
    if p.exists() {
        Ok(p)
    } else {
        Err(CliError::Validation(format!("{} does not exist", p.display())))
    }
}

fn output_format(p: &Path) -> CliResult<ImageFormat> {
    p.extension()
        .and_then(|e| e.to_str())
        .and_then(|e| ImageFormat::parse(&e.to_ascii_lowercase()))
        .ok_or_else(|| CliError::Validation(format!("{}: output must end in .pfm or .png", p.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(p: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(existing(p)?).map_err(|e| Error::io(p.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json(p: &Path, v: &impl Serialize) -> CliResult<()> {
    write_atomic(p, serde_json::to_string_pretty(v)?.as_bytes())?;
    Ok(())
}

fn write_image(p: &Path, img: &crate::radiometry::LinearImage) -> CliResult<()> {
    let format = output_format(p)?;
    write_atomic(p, &encode_image(img, format)?)?;
    Ok(())
}

fn load_stack(p: &Path) -> CliResult<OlatStack> {
    Ok(OlatStack::load(existing(p)?)?)
}

fn load_env(p: &Path) -> CliResult<EnvironmentMap> {
    Ok(EnvironmentMap::new(read_pfm_file(existing(p)?)?)?)
}

fn relight_options(f: &RelightFlags) -> CliResult<RelightOptions> {
    let mut opts = RelightOptions::with_mode(match f.mode {
        ModeChoice::Olat => RelightMode::Olat,
        ModeChoice::Sg => RelightMode::Sg,
    });
    opts.weight_mode = f.weight_mode.into();
    opts.fit.k = f.k;
    if let Some(p) = &f.calibration {
        let s: ScaleFactor3 = read_json(p)?;
        s.validate()?;
        opts.calibration = Some(s);
    }
    if f.calibrate_weights {
        opts.calibration_stage = CalibrationStage::Pre;
    }
    Ok(opts)
}

fn synth(a: &SynthArgs) -> CliResult {
    if a.size == 0 {
        return Err(CliError::Validation("--size must be positive".into()));
    }
    let mut scene = Scene::default().with_resolution(a.size, a.size);
    if a.no_ground {
        scene.ground = None;
    }
    let layout = build_stage(&a.layout.geometry())?;
    let stack = make_olat_stack(&scene, &layout)?;
    let manifest = stack.save(&a.out)?;
    Ok(json!({"manifest": manifest, "frames": stack.len(), "width": a.size, "height": a.size}))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WeightsFile {
    Labelled(OlatWeights),
    Plain(Vec<[f64; 3]>),
}

fn composite_cmd(a: &CompositeArgs) -> CliResult {
    let weights = match read_json::<WeightsFile>(&a.weights)? {
        WeightsFile::Labelled(w) => w.values(),
        WeightsFile::Plain(v) => v,
    };
    let stack = load_stack(&a.stack)?;
    let img = composite_values(&stack, &weights)?;
    write_image(&a.out, &img)?;
    Ok(json!({"out": a.out, "width": img.width(), "height": img.height()}))
}

fn area_light(a: &AreaLightArgs) -> CliResult {
    let light = LightSample::new(parse_direction(&a.dir)?, a.size)?;
    let format = output_format(&a.out)?;
    let stack = load_stack(&a.stack)?;
    let img = area_light_target(&stack, &light);
    write_atomic(&a.out, &encode_image(&img, format)?)?;
    Ok(json!({"out": a.out, "sharpness": light.sharpness()}))
}

fn relight_cmd(a: &RelightArgs) -> CliResult {
    output_format(&a.out)?;
    if !a.rot.is_finite() {
        return Err(CliError::Validation("--rot must be finite".into()));
    }
    let opts = relight_options(&a.flags)?;
    let stack = load_stack(&a.flags.stack)?;
    let env = load_env(&a.flags.env)?.rotate(a.rot);
    let out = relight_hdri(&stack, &env, &opts)?;
    write_image(&a.out, &out.image)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    Ok(json!({
        "out": a.out,
        "warnings": out.warnings,
        "fit_relative_residual": out.fit.as_ref().map(|f| f.relative_residual),
    }))
}

#[derive(Serialize, Deserialize)]
struct SequenceFile {
    frames: Vec<PathBuf>,
    params: Vec<FrameParam>,
}

fn write_sequence(dir: &Path, seq: &RelitSequence) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut names = Vec::with_capacity(seq.len());
    for (i, f) in seq.frames().iter().enumerate() {
        let name = PathBuf::from(format!("frame_{i:03}.pfm"));
        write_image(&dir.join(&name), f)?;
        names.push(name);
    }
    let path = dir.join("sequence.json");
    write_json(
        &path,
        &SequenceFile {
            frames: names,
            params: seq.params().to_vec(),
        },
    )?;
    Ok(path)
}

fn animate(a: &AnimateArgs) -> CliResult {
    if a.frames == 0 {
        return Err(CliError::Validation("--frames must be positive".into()));
    }
    let opts = relight_options(&a.flags)?;
    let stack = load_stack(&a.flags.stack)?;
    let env = load_env(&a.flags.env)?;
    let seq = animate_rotation(&stack, &env, a.frames, a.delta, &opts)?;
    let path = write_sequence(&a.out_dir, &seq)?;
    Ok(json!({"sequence": path, "frames": seq.len()}))
}

fn crossfade(a: &CrossfadeArgs) -> CliResult {
    let file: SequenceFile = read_json(&a.sequence)?;
    let base = a.sequence.parent().unwrap_or(Path::new("."));
    let frames = file
        .frames
        .iter()
        .map(|p| Ok(read_pfm_file(existing(&base.join(p))?)?))
        .collect::<CliResult<Vec<_>>>()?;
    let seq = RelitSequence::new(frames, file.params)?;
    let out = crossfade_keyframes(&seq, a.step)?;
    let path = write_sequence(&a.out_dir, &out)?;
    Ok(json!({"sequence": path, "frames": out.len()}))
}

fn fit_sg(a: &FitSgArgs) -> CliResult {
    let env = load_env(&a.env)?;
    let opts = FitOptions {
        k: a.k,
        max_iters: a.max_iters,
        ..FitOptions::default()
    };
    let (fit, converged) = match fit_sgs(&env, &opts) {
        Ok(f) => (f, true),
        Err(EnvError::NonConvergence { fit }) => {
            eprintln!("warning: fit did not converge; writing the best lobes found");
            (*fit, false)
        }
        Err(e) => return Err(e.into()),
    };
    write_json(&a.out, &fit.set)?;
    Ok(json!({
        "out": a.out,
        "k": fit.set.len(),
        "converged": converged,
        "relative_residual": fit.relative_residual,
        "iterations": fit.iterations,
    }))
}

fn weights_cmd(a: &WeightsArgs) -> CliResult {
    let env = load_env(&a.env)?.rotate(a.rot);
    let layout: PanelLayout = match &a.stack {
        Some(p) => load_stack(p)?.layout(),
        None => build_stage(&a.layout.geometry())?,
    };
    let w = hdri_to_olat_weights(&env, &layout, a.mode.into())?;
    write_json(&a.out, &w)?;
    Ok(json!({"out": a.out, "panels": w.len(), "total": w.total()}))
}

fn calibrate(a: &CalibrateArgs) -> CliResult {
    let reference: ColorChart = read_json(&a.reference)?;
    let observed: ColorChart = read_json(&a.observed)?;
    let s = calibrate_color(&reference, &observed)?;
    if let Some(out) = &a.out {
        write_json(out, &s)?;
    }
    Ok(serde_json::to_value(s).expect("serialisable"))
}

fn noise_stats_cmd(a: &NoiseStatsArgs) -> CliResult {
    let field = if a.gaussian {
        gaussian_noise(a.width, a.height, a.channels, a.seed)?
    } else {
        pyramid_noise(a.width, a.height, a.channels, a.levels, a.discount, a.seed)?
    };
    Ok(serde_json::to_value(noise_stats(&field)).expect("serialisable"))
}

fn plan(a: &PlanArgs) -> CliResult {
    let phases = PhaseSchedule::default();
    let plan = match a.keyframes {
        Some(k) => plan_segments(a.frames, k, phases)?,
        None => plan_segments_by_length(a.frames, a.per_segment, phases)?,
    };
    Ok(serde_json::to_value(plan).expect("serialisable"))
}

fn serve_cmd(a: &ServeArgs) -> CliResult {
    let mut cfg = ServerConfig::from_env().map_err(CliError::Validation)?;
    if let Some(p) = a.port {
        cfg.port = p;
    }
    if let Some(w) = a.workers {
        if w == 0 {
            return Err(CliError::Validation("--workers must be positive".into()));
        }
        cfg.workers = w;
    }
    cfg.max_body = a.max_body;
    if let Some(p) = &a.calibration {
        let s: ScaleFactor3 = read_json(p)?;
        s.validate()?;
        cfg.calibration = Some(s);
    }
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    eprintln!("relightd listening on port {}", cfg.port);
    rt.block_on(super::serve(cfg)).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(json!({"status": "stopped"}))
}

/// Executes a parsed command and returns its JSON summary.
pub fn execute(cmd: &Command) -> Result<Value, CliError> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Composite(a) => composite_cmd(a),
        Command::AreaLight(a) => area_light(a),
        Command::RelightHdri(a) => relight_cmd(a),
        Command::Animate(a) => animate(a),
        Command::Crossfade(a) => crossfade(a),
        Command::FitSg(a) => fit_sg(a),
        Command::Weights(a) => weights_cmd(a),
        Command::Calibrate(a) => calibrate(a),
        Command::NoiseStats(a) => noise_stats_cmd(a),
        Command::PlanSegments(a) => plan(a),
        Command::Serve(a) => serve_cmd(a),
    }
}

/// Parses `args` (including the program name) and runs it. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(v) => {
            if cli.json {
                println!("{v}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            if cli.json {
                println!("{}", json!({"error": {"code": e.code(), "message": e.to_string()}}));
            }
            e.exit_code()
        }
    }
}
