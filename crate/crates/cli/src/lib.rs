//! The `vedit` command line: run pipeline stages or whole sessions from
//! session directories and report results as JSON.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::{json, Value};
use vedit_core::align::{self, Alignment};
use vedit_core::geometry::io;
use vedit_core::pipeline::{
    self, db_json, AlignmentMode, ConditionPack, EditSession, PerturbMode, EDITED_DEPTH_PFM,
};
use vedit_core::synth::{build_session, Oracle, SceneSpec};
use vedit_core::{Error, ErrorKind, Image, Mask, Result};

#[derive(Debug, Parser)]
#[command(name = "vedit", version, about = "Depth-guided video edit propagation")]
pub struct Cli {
    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit (or check a manual) scale/shift between two depth maps.
    Align(AlignArgs),
    /// Propagate the edit mask of a session to every frame.
    Masks(StageArgs),
    /// Render the edited point cloud into every frame.
    Render(StageArgs),
    /// Run a whole session and write its condition pack.
    Run(RunArgs),
    /// Score a condition pack against an oracle or another pack.
    Eval(EvalArgs),
    /// Generate a session (plus oracle) from a synthetic scene.
    Synth(SynthArgs),
    /// Distort the edited depth of a session inside its mask.
    Perturb(PerturbArgs),
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Relative depth (PFM), used as is unless --normalize is given.
    #[arg(long)]
    pub d_hat: PathBuf,
    /// Scene depth (PFM).
    #[arg(long)]
    pub d_ori: PathBuf,
    /// Edit mask (PNG); its pixels are excluded from the fit.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, default_value_t = 0)]
    pub erode_radius: usize,
    #[arg(long, requires = "shift")]
    pub scale: Option<f64>,
    #[arg(long, requires = "scale")]
    pub shift: Option<f64>,
}

/// Settings that override a session's `session.json`.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub splat_radius: Option<u32>,
    #[arg(long)]
    pub erode_radius: Option<usize>,
    #[arg(long, requires = "shift")]
    pub scale: Option<f64>,
    #[arg(long, requires = "scale")]
    pub shift: Option<f64>,
}

impl Overrides {
    fn apply(&self, session: &mut EditSession) -> Result<()> {
        let c = &mut session.config;
        if let Some(e) = self.epsilon {
            c.epsilon = e;
        }
        if let Some(r) = self.splat_radius {
            c.splat_radius = r;
        }
        if let Some(r) = self.erode_radius {
            c.erode_radius = r;
        }
        if let (Some(scale), Some(shift)) = (self.scale, self.shift) {
            c.alignment = AlignmentMode::Manual { scale, shift };
        }
        c.validate()
    }
}

#[derive(Debug, Args)]
pub struct StageArgs {
    pub session: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub session: PathBuf,
    /// Pack directory to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the pack as a tar archive.
    #[arg(long)]
    pub archive: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Pack directory to score.
    pub pack: PathBuf,
    /// Oracle directory (as written by `synth`) or another pack directory.
    #[arg(long)]
    pub reference: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    InsertionOrbit,
    InsertionDolly,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene spec JSON.
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<Preset>,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 96)]
    pub height: usize,
    #[arg(long, default_value_t = 16)]
    pub frames: usize,
    /// Session directory to write; the oracle goes to its `oracle/`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Noise,
    Farther,
    Nearer,
}

impl From<ModeArg> for PerturbMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Noise => PerturbMode::Noise,
            ModeArg::Farther => PerturbMode::Farther,
            ModeArg::Nearer => PerturbMode::Nearer,
        }
    }
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    pub session: PathBuf,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Fraction of the masked depth range.
    #[arg(long)]
    pub magnitude: f64,
    /// Session directory to write.
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit status for a failure: 1 I/O, 2 validation or degenerate input,
/// 3 internal.
pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Io => 1,
        ErrorKind::Validation => 2,
        ErrorKind::Internal => 3,
    }
}

pub fn dispatch(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Align(a) => cmd_align(a),
        Command::Masks(a) => cmd_masks(a),
        Command::Render(a) => cmd_render(a),
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Perturb(a) => cmd_perturb(a, cli.seed),
    }
}

fn alignment_json(a: &Alignment, mode: &str) -> Value {
    json!({
        "scale": a.scale,
        "shift": a.shift,
        "residual_rmse": a.residual_rmse,
        "pixel_count": a.pixel_count,
        "mode": mode,
    })
}

pub fn cmd_align(a: &AlignArgs) -> Result<Value> {
    let d_ori = io::read_pfm(&a.d_ori)?;
    let mut d_hat = io::read_pfm(&a.d_hat)?;
    let mask = match &a.mask {
        Some(p) => io::read_png_mask(p)?,
        None => Mask::new(d_ori.width(), d_ori.height()),
    };
    if a.normalize {
        d_hat = align::normalize_depth(&d_hat)?;
    }
    let keep = align::unedited_region(&mask, a.erode_radius);
    Ok(match (a.scale, a.shift) {
        (Some(s), Some(t)) => alignment_json(
            &align::manual_alignment(&d_hat, &d_ori, &keep, s, t)?,
            "manual",
        ),
        _ => alignment_json(&align::solve_alignment(&d_hat, &d_ori, &keep)?, "auto"),
    })
}

fn load(session: &Path, overrides: &Overrides) -> Result<EditSession> {
    let mut s = EditSession::read_dir(session)?;
    overrides.apply(&mut s)?;
    Ok(s)
}

pub fn cmd_masks(a: &StageArgs) -> Result<Value> {
    let s = load(&a.session, &a.overrides)?;
    let scene = pipeline::edit_scene(&s)?;
    let (mesh, masks) = pipeline::propagate(&s, &scene)?;
    for (i, m) in masks.iter().enumerate() {
        io::write_png_mask(&a.out.join(format!("mask_{i:04}.png")), m)?;
    }
    io::write_bytes(&a.out.join("mask_mesh.obj"), mesh.to_obj().as_bytes())?;
    Ok(json!({
        "frames": masks.len(),
        "mask_pixels": masks.iter().map(Mask::count).collect::<Vec<_>>(),
        "mesh": {
            "vertices": mesh.vertices().len(),
            "triangles": mesh.triangles().len(),
            "spikes": mesh.spikes().len(),
        },
        "alignment": alignment_json(&scene.alignment, mode_name(&s)),
        "out": a.out,
    }))
}

pub fn cmd_render(a: &StageArgs) -> Result<Value> {
    let s = load(&a.session, &a.overrides)?;
    let scene = pipeline::edit_scene(&s)?;
    let frames =
        vedit_core::splat::render_sequence(&scene.cloud, &s.cameras, s.config.splat_radius);
    for (i, f) in frames.iter().enumerate() {
        io::write_png_rgb(&a.out.join(format!("pcr_{i:04}.png")), &f.color)?;
        io::write_pfm(&a.out.join(format!("depth_{i:04}.pfm")), &f.depth)?;
        io::write_png_mask(&a.out.join(format!("coverage_{i:04}.png")), &f.coverage)?;
    }
    Ok(json!({
        "frames": frames.len(),
        "points": scene.cloud.len(),
        "coverage": frames.iter().map(|f| f.coverage_fraction()).collect::<Vec<_>>(),
        "alignment": alignment_json(&scene.alignment, mode_name(&s)),
        "out": a.out,
    }))
}

fn mode_name(s: &EditSession) -> &'static str {
    match s.config.alignment {
        AlignmentMode::Auto => "auto",
        AlignmentMode::Manual { .. } => "manual",
    }
}

pub fn cmd_run(a: &RunArgs) -> Result<Value> {
    let s = load(&a.session, &a.overrides)?;
    let pack = pipeline::run_session(&s)?;
    pack.write_dir(&a.out)?;
    if let Some(path) = &a.archive {
        io::write_bytes(path, &pack.to_tar())?;
    }
    info!(
        "wrote pack with {} frames to {}",
        pack.frames.len(),
        a.out.display()
    );
    Ok(json!({
        "frames": pack.frames.len(),
        "digest": pack.digest(),
        "files": pack.manifest.files,
        "alignment": alignment_json(&pack.manifest.alignment, mode_name(&s)),
        "out": a.out,
    }))
}

/// What a pack is scored against.
struct Reference {
    guidance: Vec<Image>,
    masks: Vec<Mask>,
    edited_frames: Option<Vec<Image>>,
}

fn read_reference(dir: &Path) -> Result<Reference> {
    if dir.join(pipeline::MANIFEST_JSON).exists() {
        let pack = ConditionPack::read_dir(dir)?;
        return Ok(Reference {
            guidance: pack.point_renders(),
            masks: pack.masks(),
            edited_frames: None,
        });
    }
    let masks_dir = dir.join("masks");
    let frames = fs::read_dir(&masks_dir)
        .map_err(|e| Error::io(&masks_dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".png"))
        .count();
    if frames == 0 {
        return Err(Error::Validation(format!(
            "no frames in {}",
            masks_dir.display()
        )));
    }
    let oracle = Oracle::read_dir(dir, frames)?;
    Ok(Reference {
        guidance: oracle.guidance,
        masks: oracle.masks,
        edited_frames: Some(oracle.edited_frames),
    })
}

pub fn cmd_eval(a: &EvalArgs) -> Result<Value> {
    let pack = ConditionPack::read_dir(&a.pack)?;
    let reference = read_reference(&a.reference)?;
    if reference.masks.len() != pack.frames.len() {
        return Err(Error::Validation(format!(
            "pack has {} frames, reference has {}",
            pack.frames.len(),
            reference.masks.len()
        )));
    }
    let renders = pack.point_renders();
    let psnr = pipeline::masked_psnr(&renders, &reference.guidance, &reference.masks)?;
    let iou = pipeline::mask_iou(&pack.masks(), &reference.masks)?;
    let vs_edited = match &reference.edited_frames {
        Some(f) => db_json(pipeline::masked_psnr(&renders, f, &reference.masks)?),
        None => Value::Null,
    };
    Ok(json!({
        "frames": pack.frames.len(),
        "masked_psnr": db_json(psnr),
        "masked_psnr_vs_edited_frames": vs_edited,
        "mask_iou": iou,
        "alignment_residual": pack.manifest.alignment.residual_rmse,
    }))
}

pub fn cmd_synth(a: &SynthArgs) -> Result<Value> {
    let spec = match (&a.spec, a.preset) {
        (Some(path), _) => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_slice::<SceneSpec>(&bytes)
                .map_err(|e| Error::format(path, e.to_string()))?
        }
        (None, Some(Preset::InsertionOrbit)) => {
            SceneSpec::insertion_orbit(a.width, a.height, a.frames)
        }
        (None, Some(Preset::InsertionDolly)) => {
            SceneSpec::insertion_dolly(a.width, a.height, a.frames)
        }
        (None, None) => return Err(Error::Validation("need a spec file or --preset".into())),
    };
    let (session, oracle) = build_session(&spec)?;
    session.write_dir(&a.out)?;
    oracle.write_dir(&a.out.join("oracle"))?;
    let mut spec_json = serde_json::to_vec_pretty(&spec).expect("spec serializes");
    spec_json.push(b'\n');
    io::write_bytes(&a.out.join("oracle").join("scene.json"), &spec_json)?;
    Ok(json!({
        "frames": session.frames.len(),
        "width": session.width(),
        "height": session.height(),
        "mask_pixels": session.mask.count(),
        "out": a.out,
    }))
}

pub fn cmd_perturb(a: &PerturbArgs, seed: u64) -> Result<Value> {
    let mut s = EditSession::read_dir(&a.session)?;
    let before = s.edited_depth_raw.clone();
    s.edited_depth_raw =
        pipeline::perturb_depth(&before, &s.mask, a.mode.into(), a.magnitude, seed)?;
    s.write_dir(&a.out)?;
    let changed = (0..before.len())
        .filter(|&i| before.get_index(i) != s.edited_depth_raw.get_index(i))
        .count();
    Ok(json!({
        "mode": format!("{:?}", a.mode).to_lowercase(),
        "magnitude": a.magnitude,
        "seed": seed,
        "masked_range": before.range(Some(&s.mask)).map(|(lo, hi)| hi - lo),
        "changed_pixels": changed,
        "out": a.out.join(EDITED_DEPTH_PFM),
    }))
}
