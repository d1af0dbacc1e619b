//! `advseg` command line: `generate`, `train`, `infer`, `evaluate`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
//! error, 3 non-finite loss during training. Every command prints its
//! resolved configuration as TOML before doing any work.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{resolve_seed, RunConfig};
use crate::error::{Error, Result};
use crate::inference::{predict_case, InferenceConfig};
use crate::metrics::{aggregate_report, evaluate_case, summary_path, ReportSummary};
use crate::trainer::{load_checkpoint, split_dataset, Trainer};
use crate::volume_io::{
    case_dirs, case_id_from_path, find_file, generate_phantom, load_case_image, load_dataset, load_labelmap, save_case,
    save_labelmap, save_raw_channels, Dataset, FileFormat, PhantomConfig, REGIONS,
};

#[derive(Parser, Debug)]
#[command(name = "advseg", version, about = "Adversarially regularized 3-D tumour segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Nifti,
    Raw,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write synthetic phantom cases.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        cases: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, value_enum, default_value_t = Format::Nifti)]
        format: Format,
    },
    /// Train from a TOML configuration.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<u64>,
        #[arg(long)]
        max_steps: Option<u64>,
        /// Output directory; overrides `train.checkpoint_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Case directory root; overrides `data.input_dir`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Predict label maps for every case directory under `--input`.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        probabilities: bool,
        /// Preprocessing and inference settings; the model section must
        /// match the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score predictions against ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Voxel spacing in mm as `d,h,w`.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0, 1.0])]
        spacing: Vec<f64>,
    },
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate { out, cases, size, seed, noise, format } => {
            let cfg = PhantomConfig { size, num_cases: cases, noise_sigma: noise, seed: resolve_seed(seed, None)? };
            cmd_generate(&cfg, &out, format)
        }
        Command::Train { config, resume, seed, epochs, max_steps, out, data } => {
            let mut cfg = match &config {
                Some(p) => RunConfig::from_file(p)?,
                None => RunConfig::default(),
            };
            cfg.train.seed = Some(resolve_seed(seed, cfg.train.seed)?);
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if max_steps.is_some() {
                cfg.train.max_steps = max_steps;
            }
            if let Some(o) = out {
                cfg.train.checkpoint_dir = o;
            }
            if data.is_some() {
                cfg.data.input_dir = data;
            }
            cmd_train(&cfg, resume.as_deref())
        }
        Command::Infer { checkpoint, input, output, probabilities, config } => {
            cmd_infer(&checkpoint, &input, &output, probabilities, config.as_deref())
        }
        Command::Evaluate { pred, gt, report, spacing } => {
            let spacing: [f64; 3] = spacing.try_into().map_err(|_| Error::Config("--spacing takes three values".into()))?;
            if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(Error::Config(format!("--spacing must be positive, got {spacing:?}")));
            }
            cmd_evaluate(&pred, &gt, &report, spacing).map(|_| ())
        }
    }
}

fn print_config<T: Serialize>(section: &str, value: &T) {
    let text = toml::to_string(value).unwrap_or_default();
    println!("# resolved configuration\n[{section}]\n{text}");
}

#[derive(Serialize)]
struct ManifestCase {
    case_id: String,
    dir: String,
    dims: [usize; 3],
    voxels_labelled: [usize; 3],
}

#[derive(Serialize)]
struct Manifest {
    phantom: PhantomConfig,
    cases: Vec<ManifestCase>,
}

pub fn cmd_generate(cfg: &PhantomConfig, out: &Path, format: Format) -> Result<()> {
    print_config("phantom", cfg);
    let ds = generate_phantom(cfg)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let format = match format {
        Format::Nifti => FileFormat::Nifti,
        Format::Raw => FileFormat::Raw,
    };
    let mut cases = Vec::new();
    for case in &ds.cases {
        let dir = save_case(case, out, format)?;
        let count = |ls: &[u8]| case.labels.data.iter().filter(|l| ls.contains(l)).count();
        cases.push(ManifestCase {
            case_id: case.id().to_string(),
            dir: dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            dims: case.image.dims(),
            voxels_labelled: [count(&[4]), count(&[1, 4]), count(&[1, 2, 4])],
        });
    }
    let manifest = Manifest { phantom: cfg.clone(), cases };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = out.join("manifest.json");
    fs::write(&path, format!("{json}\n")).map_err(|e| Error::io(&path, e))?;
    println!("{json}");
    Ok(())
}

fn training_data(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.data.input_dir {
        Some(dir) => load_dataset(dir),
        None => generate_phantom(&cfg.data.phantom),
    }
}

pub fn cmd_train(cfg: &RunConfig, resume: Option<&Path>) -> Result<()> {
    println!("# resolved configuration\n{}", cfg.to_toml_string());
    cfg.validate()?;
    let out = cfg.train.checkpoint_dir.clone();
    let mut trainer = match resume {
        Some(p) => Trainer::resume(cfg.clone(), p, Some(out.clone()))?,
        None => Trainer::new(cfg.clone(), cfg.train.seed.unwrap_or(0), Some(out.clone()))?,
    };
    let ds = training_data(cfg)?;
    let (train, val) = split_dataset(&ds, cfg.train.split_fraction, trainer.state.seed)?;
    println!("training on {} cases, validating on {}", train.len(), val.len());
    let report = trainer.fit(&train, &val, &mut |_| {})?;
    if !report.val_records.is_empty() {
        let path = out.join("val_metrics.csv");
        let summary = aggregate_report(&report.val_records, &path)?;
        print_summary(&summary);
    }
    println!(
        "finished at epoch {} step {}; best validation dice {}",
        trainer.state.epoch,
        trainer.state.global_step,
        trainer.state.best_val_dice.map(|d| format!("{d:.4}")).unwrap_or_else(|| "-".into())
    );
    Ok(())
}

pub fn cmd_infer(checkpoint: &Path, input: &Path, output: &Path, probabilities: bool, config: Option<&Path>) -> Result<()> {
    if !checkpoint.is_file() {
        return Err(Error::Config(format!("checkpoint {} not found", checkpoint.display())));
    }
    let (saved, state) = load_checkpoint(checkpoint)?;
    let cfg = match config {
        Some(p) => {
            let c = RunConfig::from_file(p)?;
            if c.model != saved.model {
                return Err(Error::Config(format!("{}: [model] does not match checkpoint {}", p.display(), checkpoint.display())));
            }
            c
        }
        None => saved,
    };
    let infer = InferenceConfig { emit_probabilities: probabilities || cfg.inference.emit_probabilities, ..cfg.inference.clone() };
    print_config("inference", &infer);
    infer.validate(&cfg.model)?;
    fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;
    for dir in case_dirs(input)? {
        let v = load_case_image(&dir)?;
        let (labels, prob) = predict_case(&cfg.model, &state.seg, &v, &cfg.preprocess, &infer)?;
        let id = &v.case_id;
        save_labelmap(&labels, &output.join(format!("{id}_pred.nii.gz")))?;
        if let Some(p) = prob {
            save_raw_channels(&p.data, v.spacing, &REGIONS, &output.join(format!("{id}_prob.f32")))?;
        }
        println!("{id}: wrote prediction");
    }
    Ok(())
}

fn is_label_file(p: &Path) -> bool {
    let s = p.to_string_lossy();
    [".nii.gz", ".nii", ".u8"].iter().any(|e| s.ends_with(e))
}

/// Label files under `dir`, keyed by case id: label files directly inside
/// it, or `<id>/<id>_seg` / `<id>/<id>_pred` inside case subdirectories.
pub fn collect_label_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for e in entries {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            let id = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            if let Some(f) = find_file(&p, &format!("{id}_seg")).or_else(|| find_file(&p, &format!("{id}_pred"))) {
                out.insert(id, f);
            }
        } else if is_label_file(&p) {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            if ["_flair", "_t1", "_t1ce", "_t2", "_image"].iter().any(|m| name.contains(&format!("{m}."))) {
                continue;
            }
            out.insert(case_id_from_path(&p), p);
        }
    }
    Ok(out)
}

pub fn cmd_evaluate(pred: &Path, gt: &Path, report: &Path, spacing: [f64; 3]) -> Result<ReportSummary> {
    #[derive(Serialize)]
    struct Resolved<'a> {
        pred: &'a Path,
        gt: &'a Path,
        report: &'a Path,
        summary: PathBuf,
        spacing: [f64; 3],
    }
    print_config("evaluate", &Resolved { pred, gt, report, summary: summary_path(report), spacing });
    let preds = collect_label_files(pred)?;
    let truths = collect_label_files(gt)?;
    let only_pred: Vec<&String> = preds.keys().filter(|k| !truths.contains_key(*k)).collect();
    let only_gt: Vec<&String> = truths.keys().filter(|k| !preds.contains_key(*k)).collect();
    if !only_pred.is_empty() || !only_gt.is_empty() || preds.is_empty() {
        return Err(Error::Config(format!(
            "unmatched case ids: without ground truth {only_pred:?}, without prediction {only_gt:?}"
        )));
    }
    let records = preds
        .iter()
        .map(|(id, p)| {
            let mut a = load_labelmap(p)?;
            let mut b = load_labelmap(&truths[id])?;
            a.case_id = id.clone();
            b.case_id = id.clone();
            evaluate_case(&a, &b, spacing)
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(parent) = report.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let summary = aggregate_report(&records, report)?;
    print_summary(&summary);
    Ok(summary)
}

fn print_summary(s: &ReportSummary) {
    let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    println!("{:<4} {:<12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>4}", "reg", "metric", "mean", "min", "q1", "median", "q3", "max", "n");
    for r in &s.rows {
        println!(
            "{:<4} {:<12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>4}",
            r.region,
            r.metric,
            f(r.mean),
            f(r.min),
            f(r.q1),
            f(r.median),
            f(r.q3),
            f(r.max),
            r.n
        );
    }
}
