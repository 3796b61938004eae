mod config;
mod output;

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use modalforce::contact::{
    contact_force_with, render_overlay, Aggregation, ContactForceSignal, OverlayStyle,
};
use modalforce::eval::{evaluate, project_force, CameraModel, ImageForce, ReferenceForceSeries};
use modalforce::flow::{
    apply_weighting, compute_flow, FlowConfig, FrameSequence, MotionTexture, WeightingMode,
};
use modalforce::solver::{estimate_force_texture, ftx1, ConstraintMode, CorrectionStrategy};
use modalforce::spectrum::{
    assemble_modal_matrix, mode_shapes, msh1, power_spectrum, select_band, select_top_band,
};
use modalforce::synth::{render_textured, simulate, write_dataset, ProceduralTexture, SynthConfig};
use modalforce::{Plane, RegionOfInterest};

use config::{pick, PipelineConfig};
use output::OutputGuard;

const DEFAULT_FPS: f64 = 30.0;
const DEFAULT_K: usize = 20;
const DEFAULT_STRIDE: usize = 4;
// Extra texture margin around the grid for rendered frames.
const TEXTURE_MARGIN: usize = 16;

#[derive(Parser, Debug)]
#[command(name = "modalforce", version, about = "Modal-basis contact force estimation from video")]
struct Cli {
    /// TOML config; command-line flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn a modal basis from baseline motion.
    Modes(ModesArgs),
    /// Recover force textures and the contact signal from interaction motion.
    Estimate(EstimateArgs),
    /// Score a predicted contact signal against a reference force.
    Eval(EvalArgs),
    /// Simulate a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone)]
struct MotionInput {
    /// Directory of PNG frames (flow is computed against the first frame).
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Directory of .flo displacement files.
    #[arg(long)]
    flow_dir: Option<PathBuf>,
    #[arg(long)]
    fps: Option<f64>,
    /// Organ mask PNG, nonzero = organ.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Region of interest as x,y,w,h.
    #[arg(long)]
    roi: Option<String>,
    /// Flow weighting: none, contrast or gaussian.
    #[arg(long)]
    weighting: Option<String>,
    /// Chain frame-to-frame flow instead of matching each frame against the first.
    #[arg(long)]
    accumulate: Option<bool>,
}

#[derive(Args, Debug)]
struct ModesArgs {
    #[command(flatten)]
    input: MotionInput,
    /// Number of modes.
    #[arg(long)]
    k: Option<usize>,
    /// Drop the DC bin (true/false).
    #[arg(long)]
    skip_dc: Option<bool>,
    /// Bin selection: first or top.
    #[arg(long)]
    band: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    input: MotionInput,
    /// MSH1 file written by `modes`.
    #[arg(long)]
    modes: Option<PathBuf>,
    /// accel, vel or disp.
    #[arg(long)]
    mode: Option<String>,
    /// identity or sinc2.
    #[arg(long)]
    correction: Option<String>,
    #[arg(long)]
    rtol: Option<f64>,
    /// area (divide by w·h) or mean (divide by active pixels).
    #[arg(long)]
    aggregation: Option<String>,
    /// Overlay arrow spacing in pixels.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Contact CSV (t,fu,fv,norm).
    #[arg(long)]
    prediction: Option<PathBuf>,
    /// Reference CSV: t,fx,fy,fz (needs --camera) or t,fu,fv,norm.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Camera model TOML.
    #[arg(long)]
    camera: Option<PathBuf>,
    #[arg(long)]
    max_lag: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// baseline or interaction.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write rendered textured frames.
    #[arg(long)]
    render: Option<bool>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Modes(a) => cmd_modes(&a, &cfg),
        Command::Estimate(a) => cmd_estimate(&a, &cfg),
        Command::Eval(a) => cmd_eval(&a, &cfg),
        Command::Synth(a) => cmd_synth(&a, &cfg),
    }
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| anyhow!("missing --{flag} (flag or config key)"))
}

fn load_mask(path: &Path) -> Result<Plane> {
    if !path.exists() {
        bail!("mask file not found: {}", path.display());
    }
    Plane::load_png(path).with_context(|| format!("loading mask {}", path.display()))
}

struct LoadedMotion {
    motion: MotionTexture,
    reference_frame: Option<Plane>,
    mask: Option<Plane>,
    roi: Option<RegionOfInterest>,
}

fn load_motion(input: &MotionInput, cfg: &PipelineConfig) -> Result<LoadedMotion> {
    let fps = pick(&input.fps, &cfg.fps).unwrap_or(DEFAULT_FPS);
    let mask = pick(&input.mask, &cfg.mask).map(|p| load_mask(&p)).transpose()?;
    let roi = pick(&input.roi, &cfg.roi)
        .map(|s| s.parse::<RegionOfInterest>())
        .transpose()
        .context("parsing --roi")?;
    let frames_dir = pick(&input.frames, &cfg.frames);
    let flow_dir = pick(&input.flow_dir, &cfg.flow_dir);
    let (motion, reference_frame) = match (frames_dir, flow_dir) {
        (Some(_), Some(_)) => bail!("give either --frames or --flow-dir, not both"),
        (None, None) => bail!("missing motion input: --frames or --flow-dir"),
        (None, Some(dir)) => {
            let motion = MotionTexture::load_dir(&dir, fps, 0)
                .with_context(|| format!("loading flow from {}", dir.display()))?;
            (motion, None)
        }
        (Some(dir), None) => {
            let frames = FrameSequence::load_dir(&dir, fps, 0)
                .with_context(|| format!("loading frames from {}", dir.display()))?;
            info!("computing flow for {} frames", frames.len());
            let flow_cfg = FlowConfig {
                accumulate: pick(&input.accumulate, &cfg.accumulate).unwrap_or(false),
                ..FlowConfig::default()
            };
            let est = compute_flow(&frames, &flow_cfg)?;
            if !est.degenerate_frames.is_empty() {
                warn!("{} constant-intensity frames", est.degenerate_frames.len());
            }
            (est.motion, Some(frames.reference().clone()))
        }
    };
    let weighting = pick(&input.weighting, &cfg.weighting).unwrap_or_else(|| "none".into());
    let motion = match weighting.as_str() {
        "none" => motion,
        other => {
            let mode: WeightingMode = other.parse()?;
            let reference = reference_frame
                .as_ref()
                .ok_or_else(|| anyhow!("--weighting {other} needs --frames"))?;
            let (w, h) = motion.dims();
            let organ = mask.clone().unwrap_or_else(|| Plane::filled(w, h, 1.0));
            apply_weighting(&motion, reference, mode, &organ)?
        }
    };
    if let Some(m) = &mask {
        if m.dims() != motion.dims() {
            bail!(
                "mask is {}x{} but the motion is {}x{}",
                m.width(),
                m.height(),
                motion.dims().0,
                motion.dims().1
            );
        }
    }
    Ok(LoadedMotion {
        motion,
        reference_frame,
        mask,
        roi,
    })
}

fn cmd_modes(args: &ModesArgs, cfg: &PipelineConfig) -> Result<()> {
    let out = require(pick(&args.out, &cfg.out), "out")?;
    let k = pick(&args.k, &cfg.k).unwrap_or(DEFAULT_K);
    let skip_dc = pick(&args.skip_dc, &cfg.skip_dc).unwrap_or(true);
    let band_kind = pick(&args.band, &cfg.band).unwrap_or_else(|| "first".into());
    let loaded = load_motion(&args.input, cfg)?;
    let (w, h) = loaded.motion.dims();

    let mut roi = match loaded.roi {
        Some(r) => r,
        None => RegionOfInterest::full(w, h)?,
    };
    roi.check_fits(w, h)?;
    let organ = match &loaded.mask {
        Some(m) => {
            roi = roi.masked_by(m)?;
            m.clone()
        }
        None => Plane::filled(w, h, 1.0),
    };

    let spec = mode_shapes(&loaded.motion)?;
    let power = power_spectrum(&spec, &organ)?;
    let band = match band_kind.as_str() {
        "first" => select_band(&spec, k, skip_dc)?,
        "top" => select_top_band(&spec, &power, k, skip_dc)?,
        other => bail!("unknown band selection {other:?} (expected first|top)"),
    };
    let modal = assemble_modal_matrix(&spec, &band, &roi)?;
    info!(
        "selected {} modes, {:.3}-{:.3} Hz",
        band.bins.len(),
        band.frequencies[0],
        band.frequencies[band.frequencies.len() - 1]
    );

    let mut guard = OutputGuard::new();
    guard.dir(&out)?;
    msh1::write_msh1(&modal, guard.file(out.join("modes.msh1")))?;
    power.write_csv(guard.file(out.join("spectrum.csv")), &band.bins)?;
    power.save_plot(guard.file(out.join("spectrum.png")), &band.bins)?;
    guard.commit();
    println!(
        "modes: K={} bins {}..={} ({:.4}-{:.4} Hz), N={} -> {}",
        band.bins.len(),
        band.bins[0],
        band.bins[band.bins.len() - 1],
        band.frequencies[0],
        band.frequencies[band.frequencies.len() - 1],
        modal.n_pixels(),
        out.display()
    );
    Ok(())
}

fn cmd_estimate(args: &EstimateArgs, cfg: &PipelineConfig) -> Result<()> {
    let out = require(pick(&args.out, &cfg.out), "out")?;
    let modes_path = require(pick(&args.modes, &cfg.modes), "modes")?;
    let mode: ConstraintMode = pick(&args.mode, &cfg.mode)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or_default();
    let correction: CorrectionStrategy = pick(&args.correction, &cfg.correction)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or_default();
    let rtol = pick(&args.rtol, &cfg.rtol).unwrap_or(modalforce::solver::DEFAULT_RTOL);
    let aggregation = match pick(&args.aggregation, &cfg.aggregation).as_deref() {
        None | Some("area") => Aggregation::RectangleArea,
        Some("mean") => Aggregation::ActiveMean,
        Some(other) => bail!("unknown aggregation {other:?} (expected area|mean)"),
    };
    let stride = pick(&args.stride, &cfg.stride).unwrap_or(DEFAULT_STRIDE);

    let loaded = load_motion(&args.input, cfg)?;
    let modal = msh1::read_msh1(&modes_path, loaded.mask.as_ref())
        .with_context(|| format!("reading modes {}", modes_path.display()))?;
    if let Some(requested) = &loaded.roi {
        if !requested.same_rect(modal.roi()) {
            bail!(
                "ROI mismatch: requested {requested} but {} was built on {}",
                modes_path.display(),
                modal.roi()
            );
        }
    }
    let roi = modal.roi().clone();
    let (w, h) = loaded.motion.dims();
    if !roi.fits(w, h) {
        bail!("modal ROI {roi} does not fit the {w}x{h} motion");
    }

    let texture = estimate_force_texture(&modal, &loaded.motion, mode, correction, rtol)?;
    let signal = contact_force_with(&texture, &roi, aggregation)?;

    let mut guard = OutputGuard::new();
    guard.dir(&out)?;
    ftx1::write_ftx1(&texture, guard.file(out.join("force.ftx1")))?;
    signal.write_csv(guard.file(out.join("contact.csv")))?;
    let overlay_dir = guard.dir(&out.join("overlays"))?;
    let background = loaded
        .reference_frame
        .unwrap_or_else(|| Plane::filled(w, h, 0.5));
    let style = OverlayStyle::default();
    for t in 0..texture.len() {
        let img = render_overlay(&background, &texture, t, &roi, stride, &style)?;
        let path = guard.file(overlay_dir.join(format!("frame_{t:04}.png")));
        img.save(&path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    guard.commit();
    let peak = signal
        .norm
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    println!(
        "estimate: {} frames, mode {mode}, correction {correction}, peak |F| at t={:.3}s -> {}",
        signal.len(),
        signal.time(peak.0),
        out.display()
    );
    Ok(())
}

fn load_reference(path: &Path, camera: Option<&Path>) -> Result<ImageForce> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading reference {}", path.display()))?;
    let header = text.lines().next().unwrap_or("").trim().to_string();
    match header.as_str() {
        "t,fx,fy,fz" => {
            let series = ReferenceForceSeries::parse_csv(&text, path)?;
            let cam = match camera {
                Some(c) => CameraModel::load(c)
                    .with_context(|| format!("loading camera {}", c.display()))?,
                None => bail!("reference {} holds 3D forces; --camera is required", path.display()),
            };
            Ok(ImageForce::from_projected(&project_force(&series, &cam)?))
        }
        "t,fu,fv,norm" => {
            let s = ContactForceSignal::parse_csv(&text, path)?;
            Ok(ImageForce { fu: s.fu, fv: s.fv })
        }
        other => bail!(
            "reference {} has header {other:?}; expected t,fx,fy,fz or t,fu,fv,norm",
            path.display()
        ),
    }
}

fn cmd_eval(args: &EvalArgs, cfg: &PipelineConfig) -> Result<()> {
    let out = require(pick(&args.out, &cfg.out), "out")?;
    let prediction = require(pick(&args.prediction, &cfg.prediction), "prediction")?;
    let reference = require(pick(&args.reference, &cfg.reference), "reference")?;
    let camera = pick(&args.camera, &cfg.camera);
    let max_lag = pick(&args.max_lag, &cfg.max_lag);

    let pred = ContactForceSignal::read_csv(&prediction)
        .with_context(|| format!("reading prediction {}", prediction.display()))?;
    let reference = load_reference(&reference, camera.as_deref())?;
    let report = evaluate(&pred, &reference, max_lag)?;

    let mut guard = OutputGuard::new();
    guard.dir(&out)?;
    report.write_csv(guard.file(out.join("metrics.csv")))?;
    guard.commit();
    print!("{}", report.to_csv());
    Ok(())
}

fn synth_config(args: &SynthArgs, cfg: &PipelineConfig) -> Result<SynthConfig> {
    let scenario = pick(&args.scenario, &cfg.scenario).unwrap_or_else(|| "interaction".into());
    let preset = match scenario.as_str() {
        "baseline" => SynthConfig::baseline(),
        "interaction" => SynthConfig::interaction(),
        other => bail!("unknown scenario {other:?} (expected baseline|interaction)"),
    };
    let mut table: toml::Table = toml::from_str(&preset.to_toml_string())?;
    if let Some(overrides) = &cfg.synth {
        for (key, value) in overrides {
            table.insert(key.clone(), value.clone());
        }
    }
    let mut config: SynthConfig = toml::Value::Table(table)
        .try_into()
        .context("invalid [synth] table")?;
    if let Some(seed) = pick(&args.seed, &cfg.seed) {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn cmd_synth(args: &SynthArgs, cfg: &PipelineConfig) -> Result<()> {
    let out = require(pick(&args.out, &cfg.out), "out")?;
    let render = pick(&args.render, &cfg.render).unwrap_or(false);
    let config = synth_config(args, cfg)?;
    let ds = simulate(&config)?;
    let frames = if render {
        let n = config.grid + 2 * TEXTURE_MARGIN;
        let texture = ProceduralTexture::new(config.seed).render(n, n);
        Some(render_textured(&ds, &texture)?)
    } else {
        None
    };

    let mut guard = OutputGuard::new();
    guard.dir(&out)?;
    guard.dir(&out.join("flow"))?;
    if frames.is_some() {
        guard.dir(&out.join("frames"))?;
    }
    for name in ["force.csv", "config.toml"] {
        let p = out.join(name);
        if !p.exists() {
            guard.file(p);
        }
    }
    let files = write_dataset(&ds, &out, frames.as_ref())?;
    guard.commit();
    println!(
        "synth: {} frames of a {}x{} grid (seed {}) -> {}",
        ds.displacements.len(),
        config.grid,
        config.grid,
        config.seed,
        files.flow_dir.parent().unwrap_or(&out).display()
    );
    Ok(())
}
