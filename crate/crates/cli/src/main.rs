//! `weakseg` command-line tool.
//!
//! Exit codes: 0 success, 1 invalid arguments or data, 2 I/O or file format errors.

mod config;
mod dataset;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weakseg::augmentation::{augment_dataset, AugmentationPlan, NoiseKind};
use weakseg::imaging::{read_mask_pgm, read_pgm, read_volume, render_overlay, write_ppm, write_volume, BinaryMask2D, ScalarImage2D};
use weakseg::models::{check_gradients, load_checkpoint, AtrousMini, AtrousMiniConfig, FcnMini, FcnMiniConfig, Model};
use weakseg::train_eval::{evaluate, generate_phantoms, network_input, quantize_ct, resize_image, resize_mask, train, PhantomSpec, TrainConfig};
use weakseg::weak_label::{label_patient, patient_split, LabeledSlice, PatientDataset, ThresholdConfig};

#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Io(String),
    Format(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Io(_) | Failure::Format(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Invalid(m) | Failure::Io(m) | Failure::Format(m) => f.write_str(m),
        }
    }
}

impl From<weakseg::Error> for Failure {
    fn from(e: weakseg::Error) -> Self {
        match e {
            weakseg::Error::Io { .. } => Failure::Io(e.to_string()),
            weakseg::Error::Format(_) => Failure::Format(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(name = "weakseg", version, about = "Weak-label CT segmentation pipeline")]
struct Cli {
    /// Worker threads for augmentation, training and evaluation (0: all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Threshold PET volumes into masks, split patients and write slice pairs.
    #[command(args_override_self = true)]
    Prepare(PrepareArgs),
    /// Write augmented copies of a prepared slice directory.
    #[command(args_override_self = true)]
    Augment(AugmentArgs),
    /// Train a network on a slice directory and write a checkpoint.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Score a checkpoint on a slice directory and write a CSV report.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Render a CT slice with ground-truth contour and prediction.
    #[command(args_override_self = true)]
    Overlay(OverlayArgs),
    /// Finite-difference check of every layer's gradients.
    #[command(args_override_self = true)]
    Gradcheck(GradcheckArgs),
    /// Generate synthetic PET/CT phantom volumes and a manifest.
    #[command(args_override_self = true)]
    Phantom(PhantomArgs),
}

impl Cmd {
    fn config(&self) -> Option<&Path> {
        match self {
            Cmd::Prepare(a) => a.config.as_deref(),
            Cmd::Augment(a) => a.config.as_deref(),
            Cmd::Train(a) => a.config.as_deref(),
            Cmd::Eval(a) => a.config.as_deref(),
            Cmd::Overlay(a) => a.config.as_deref(),
            Cmd::Gradcheck(a) => a.config.as_deref(),
            Cmd::Phantom(a) => a.config.as_deref(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Cmd::Prepare(_) => "prepare",
            Cmd::Augment(_) => "augment",
            Cmd::Train(_) => "train",
            Cmd::Eval(_) => "eval",
            Cmd::Overlay(_) => "overlay",
            Cmd::Gradcheck(_) => "gradcheck",
            Cmd::Phantom(_) => "phantom",
        }
    }
}

#[derive(Args, Debug)]
struct PrepareArgs {
    /// `patient_id,ct_header,pet_header` per line; relative paths resolve against the manifest's directory.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// PET threshold as a fraction of each volume's maximum.
    #[arg(long, default_value_t = 0.2)]
    fraction: f64,
    #[arg(long, default_value_t = 21)]
    train_patients: usize,
    /// Seed of the patient shuffle.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Minimum foreground pixels for a slice to be kept.
    #[arg(long, default_value_t = 1)]
    min_fg: usize,
    /// CT window mapped to 0..255.
    #[arg(long, default_value_t = -160.0, allow_negative_numbers = true)]
    window_lo: f64,
    #[arg(long, default_value_t = 240.0, allow_negative_numbers = true)]
    window_hi: f64,
    /// Resample slices to this square size (0: keep).
    #[arg(long, default_value_t = 0)]
    size: usize,
    /// `key = value` defaults, overridden by flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NoiseArg {
    None,
    Gaussian,
    Uniform,
    SaltPepper,
}

impl From<NoiseArg> for NoiseKind {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::None => NoiseKind::None,
            NoiseArg::Gaussian => NoiseKind::Gaussian,
            NoiseArg::Uniform => NoiseKind::Uniform,
            NoiseArg::SaltPepper => NoiseKind::SaltPepper,
        }
    }
}

#[derive(Args, Debug)]
struct AugmentArgs {
    /// Prepared directory with `ct/` and `mask/`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 45.0)]
    max_rotation_deg: f64,
    #[arg(long, default_value_t = 4)]
    n_rotations: usize,
    #[arg(long, default_value_t = 0.1)]
    max_scale: f64,
    #[arg(long, default_value_t = 2)]
    n_scales_x: usize,
    #[arg(long, default_value_t = 2)]
    n_scales_y: usize,
    #[arg(long, default_value_t = 4)]
    n_noisy: usize,
    #[arg(long, default_value_t = 5.0)]
    gaussian_max_sigma: f64,
    #[arg(long, default_value_t = 5.0)]
    uniform_max_amp: f64,
    #[arg(long, default_value_t = 0.2)]
    saltpepper_max_density: f64,
    #[arg(long, value_enum, default_value_t = NoiseArg::None)]
    noise_kind: NoiseArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ArchArg {
    Fcn,
    Atrous,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ArchArg::Fcn)]
    arch: ArchArg,
    /// Input side length; slices of another size are resampled.
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 8)]
    base_channels: usize,
    /// Residual blocks per stage (atrous only).
    #[arg(long, default_value_t = 2)]
    blocks_per_stage: usize,
    /// Seed of the weight initialisation.
    #[arg(long, default_value_t = 0)]
    model_seed: u64,
}

impl ModelArgs {
    fn build(&self) -> Result<Model, Failure> {
        Ok(match self.arch {
            ArchArg::Fcn => Model::Fcn(FcnMini::new(
                FcnMiniConfig {
                    input_size: self.size,
                    base_channels: self.base_channels,
                    num_classes: 2,
                },
                self.model_seed,
            )?),
            ArchArg::Atrous => Model::Atrous(AtrousMini::new(
                AtrousMiniConfig {
                    input_size: self.size,
                    base_channels: self.base_channels,
                    blocks_per_stage: self.blocks_per_stage,
                    ..AtrousMiniConfig::default()
                },
                self.model_seed,
            )?),
        })
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    /// Seed of the sample order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write `<out stem>.iter<N>.<ext>` every N iterations (0: never).
    #[arg(long, default_value_t = 0)]
    checkpoint_every: usize,
    /// Cycle through the slices in file order instead of reshuffling each epoch.
    #[arg(long)]
    no_shuffle: bool,
    /// Write the per-iteration loss as CSV.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// CSV report path.
    #[arg(long)]
    out: PathBuf,
    /// Network input size (0: the size of the first slice).
    #[arg(long, default_value_t = 0)]
    size: usize,
    /// Also write predicted masks here as `<stem>.pgm`.
    #[arg(long)]
    pred_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OverlayArgs {
    #[arg(long)]
    ct: PathBuf,
    /// Ground-truth mask, drawn as a green contour.
    #[arg(long)]
    mask: PathBuf,
    /// Predicted mask, drawn in red.
    #[arg(long, conflicts_with = "model")]
    pred: Option<PathBuf>,
    /// Predict with this checkpoint instead of reading `--pred`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output PPM.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, value_enum, default_value_t = ArchArg::Fcn)]
    arch: ArchArg,
    /// Input side length (FCN: multiple of 32; atrous: multiple of 8).
    #[arg(long, default_value_t = 32)]
    size: usize,
    #[arg(long, default_value_t = 2)]
    base_channels: usize,
    #[arg(long, default_value_t = 1)]
    blocks_per_stage: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PhantomArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 29)]
    patients: usize,
    #[arg(long, default_value_t = 5)]
    slices: usize,
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    Cli::try_parse_from(argv)
}

fn run(argv: Vec<OsString>) -> Result<(), Failure> {
    let cli = match parse(argv.clone()) {
        Ok(cli) => cli,
        Err(e) => return Err(clap_failure(e)),
    };
    let cli = match cli.command.config() {
        Some(path) => {
            let merged = config::merge(&argv, &Cli::command(), cli.command.name(), path)?;
            parse(merged).map_err(clap_failure)?
        }
        None => cli,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if cli.threads > 0 {
        pool = pool.num_threads(cli.threads);
    }
    let pool = pool.build().map_err(|e| Failure::Invalid(e.to_string()))?;
    pool.install(|| match cli.command {
        Cmd::Prepare(a) => prepare(a),
        Cmd::Augment(a) => augment(a),
        Cmd::Train(a) => train_cmd(a),
        Cmd::Eval(a) => eval_cmd(a),
        Cmd::Overlay(a) => overlay(a),
        Cmd::Gradcheck(a) => gradcheck(a),
        Cmd::Phantom(a) => phantom(a),
    })
}

/// Help and version output exit immediately with status 0.
fn clap_failure(e: clap::Error) -> Failure {
    use clap::error::ErrorKind;
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            let _ = e.print();
            std::process::exit(if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 1 } else { 0 });
        }
        _ => Failure::Invalid(e.render().to_string().trim_end().to_string()),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.to_string().trim_start_matches("error: "));
            ExitCode::from(f.code())
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

struct ManifestEntry {
    id: String,
    ct: PathBuf,
    pet: PathBuf,
}

fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out: Vec<ManifestEntry> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [id, ct, pet] = fields[..] else {
            return Err(Failure::Format(format!(
                "{}:{}: expected `patient_id,ct_path,pet_path`",
                path.display(),
                n + 1
            )));
        };
        if out.iter().any(|e| e.id == id) {
            return Err(Failure::Invalid(format!("duplicate patient id `{id}` in manifest")));
        }
        out.push(ManifestEntry {
            id: id.to_string(),
            ct: base.join(ct),
            pet: base.join(pet),
        });
    }
    if out.is_empty() {
        return Err(Failure::Invalid(format!("{}: manifest lists no patients", path.display())));
    }
    Ok(out)
}

fn prepare(a: PrepareArgs) -> Result<(), Failure> {
    if !(a.window_lo < a.window_hi) {
        return Err(Failure::Invalid(format!("window {}..{} is empty", a.window_lo, a.window_hi)));
    }
    let threshold = ThresholdConfig::new(a.fraction)?;
    let manifest = read_manifest(&a.manifest)?;
    let ids: Vec<String> = manifest.iter().map(|e| e.id.clone()).collect();
    let (train_ids, _) = patient_split(&ids, a.train_patients, a.seed)?;

    let mut split = String::new();
    let mut counts = [0usize; 2];
    for part in ["train", "test"] {
        dataset::create_dirs(&a.out.join(part))?;
    }
    for entry in &manifest {
        let patient = PatientDataset::new(entry.id.clone(), read_volume(&entry.ct)?, read_volume(&entry.pet)?)?;
        let is_train = train_ids.contains(&entry.id);
        let part = if is_train { "train" } else { "test" };
        let _ = writeln!(split, "{},{part}", entry.id);
        for s in label_patient(&patient, threshold, a.min_fg)? {
            let mut ct = quantize_ct(&s.ct, a.window_lo, a.window_hi)?;
            let mut mask = s.mask.clone();
            if a.size > 0 {
                ct = resize_image(&ct, a.size)?;
                mask = resize_mask(&mask, a.size)?;
            }
            dataset::write_pair(&a.out.join(part), &s.id(), &ct, &mask)?;
            counts[usize::from(!is_train)] += 1;
        }
    }
    write_text(&a.out.join("split.csv"), &split)?;
    println!(
        "{} patients: {} train slices, {} test slices",
        manifest.len(),
        counts[0],
        counts[1]
    );
    Ok(())
}

fn augment(a: AugmentArgs) -> Result<(), Failure> {
    let plan = AugmentationPlan {
        max_rotation_deg: a.max_rotation_deg,
        n_rotations: a.n_rotations,
        max_scale: a.max_scale,
        n_scales_x: a.n_scales_x,
        n_scales_y: a.n_scales_y,
        n_noisy: a.n_noisy,
        gaussian_max_sigma: a.gaussian_max_sigma,
        uniform_max_amp: a.uniform_max_amp,
        saltpepper_max_density: a.saltpepper_max_density,
        noise_kind: a.noise_kind.into(),
        seed: a.seed,
    };
    plan.validate()?;
    let slices = dataset::load(&a.data)?;
    let out = augment_dataset(&slices, &plan)?;
    dataset::create_dirs(&a.out)?;
    for s in &out {
        dataset::write_pair(&a.out, &s.file_stem(), &s.slice.ct, &s.slice.mask)?;
    }
    println!(
        "{} slices x {} transforms = {} augmented slices",
        slices.len(),
        plan.expected_len(),
        out.len()
    );
    Ok(())
}

fn fit_to(slices: Vec<LabeledSlice>, size: usize) -> Result<Vec<LabeledSlice>, Failure> {
    slices
        .into_iter()
        .map(|s| {
            if s.ct.width() == size && s.ct.height() == size {
                return Ok(s);
            }
            let ct = resize_image(&s.ct, size)?;
            let mask = resize_mask(&s.mask, size)?;
            Ok(LabeledSlice::new(s.patient_id, s.slice_index, ct, mask)?)
        })
        .collect()
}

fn train_cmd(a: TrainArgs) -> Result<(), Failure> {
    let cfg = TrainConfig {
        iterations: a.iterations,
        lr: a.lr,
        seed: a.seed,
        shuffle: !a.no_shuffle,
        checkpoint_every: a.checkpoint_every,
    };
    cfg.validate()?;
    let mut model = a.model.build()?;
    let slices = fit_to(dataset::load(&a.data)?, a.model.size)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let report = train(&mut model, &slices, &cfg, Some(&a.out))?;
    if let Some(path) = &a.loss_csv {
        write_text(path, &report.to_csv())?;
    }
    let tail = &report.losses[report.losses.len().saturating_sub(100)..];
    println!(
        "trained {} parameters for {} iterations on {} slices in {:.1}s; mean loss of last {} iterations {:.6}",
        model.num_params(),
        cfg.iterations,
        slices.len(),
        report.wall_time.as_secs_f64(),
        tail.len(),
        tail.iter().sum::<f64>() / tail.len() as f64
    );
    Ok(())
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.1}"))
}

fn eval_cmd(a: EvalArgs) -> Result<(), Failure> {
    let slices = dataset::load(&a.data)?;
    let size = if a.size > 0 { a.size } else { slices[0].ct.width() };
    let slices = fit_to(slices, size)?;
    let (model, _) = load_checkpoint(&a.model, size)?;
    let ev = evaluate(&model, &slices)?;
    write_text(&a.out, &ev.csv)?;
    if let Some(dir) = &a.pred_dir {
        create_dir(dir)?;
        for s in &slices {
            let pred = model.predict(&network_input(&s.ct))?;
            weakseg::imaging::write_mask_pgm(&pred, dir.join(format!("{}.pgm", s.id())))?;
        }
    }
    let m = &ev.summary;
    println!(
        "{} slices: TPR {} TNR {} DSC {} HD {} ({} slices with undefined metrics)",
        m.n,
        fmt_pct(m.mean_tpr),
        fmt_pct(m.mean_tnr),
        fmt_pct(m.mean_dsc),
        fmt_pct(m.mean_hd),
        m.skipped
    );
    Ok(())
}

fn overlay(a: OverlayArgs) -> Result<(), Failure> {
    let ct = read_pgm(&a.ct)?;
    let gt = read_mask_pgm(&a.mask)?;
    let pred: Option<BinaryMask2D> = match (&a.pred, &a.model) {
        (Some(p), _) => Some(read_mask_pgm(p)?),
        (None, Some(m)) => {
            if ct.width() != ct.height() {
                return Err(Failure::Invalid(format!("prediction needs a square slice, got {}x{}", ct.width(), ct.height())));
            }
            let (model, _) = load_checkpoint(m, ct.width())?;
            Some(model.predict(&network_input(&ct))?)
        }
        (None, None) => None,
    };
    let img = render_overlay(&ct, &gt, pred.as_ref())?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_ppm(&img, &a.out)?;
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<(), Failure> {
    if !(a.eps > 0.0 && a.tol > 0.0) {
        return Err(Failure::Invalid("eps and tol must be positive".into()));
    }
    let spec = ModelArgs {
        arch: a.arch,
        size: a.size,
        base_channels: a.base_channels,
        blocks_per_stage: a.blocks_per_stage,
        model_seed: a.seed,
    };
    let mut model = spec.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    // Random biases keep ReLU inputs off the kink; random score weights let
    // the gradient reach the trunk.
    for l in model.layers_mut() {
        for b in &mut l.params.bias {
            *b = rng.random_range(-0.1..0.1);
        }
        if l.params.weights.data().iter().all(|&w| w == 0.0) {
            for w in l.params.weights.data_mut() {
                *w = rng.random_range(-1.0..1.0);
            }
        }
    }
    let n = a.size;
    let image = ScalarImage2D::from_values(n, n, (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect())?;
    let mask = BinaryMask2D::from_fn(n, n, |_, _| rng.random_bool(0.4))?;
    let report = check_gradients(&model, &image, &mask, a.eps)?;
    let mut failed = Vec::new();
    println!("layer,params,max_rel_error");
    for l in &report {
        println!("{},{},{:.3e}", l.name, l.num_params, l.max_rel_error);
        if !(l.max_rel_error <= a.tol) {
            failed.push(l.name.as_str());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invalid(format!("relative error above {:e} in {}", a.tol, failed.join(", "))))
    }
}

fn phantom(a: PhantomArgs) -> Result<(), Failure> {
    // ellipse geometry scales with the image, relative to the 64 pixel defaults
    let base = PhantomSpec::default();
    let f = a.size as f64 / base.image_size as f64;
    let spec = PhantomSpec {
        n_patients: a.patients,
        slices_per_patient: a.slices,
        image_size: a.size,
        center_jitter: base.center_jitter * f,
        semi_axis_range: (base.semi_axis_range.0 * f, base.semi_axis_range.1 * f),
        seed: a.seed,
        ..base
    };
    let phantoms = generate_phantoms(&spec)?;
    create_dir(&a.out)?;
    let mut manifest = String::new();
    for p in &phantoms {
        let id = &p.dataset.patient_id;
        let (ct, pet) = (format!("{id}_ct.mhd"), format!("{id}_pet.mhd"));
        write_volume(&p.dataset.ct, a.out.join(&ct))?;
        write_volume(&p.dataset.pet, a.out.join(&pet))?;
        let _ = writeln!(manifest, "{id},{ct},{pet}");
    }
    write_text(&a.out.join("manifest.txt"), &manifest)?;
    println!("{} phantom patients written to {}", phantoms.len(), a.out.display());
    Ok(())
}
