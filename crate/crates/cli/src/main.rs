//! `jm3d` command-line entry points.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 numeric failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use jm3d::dataset::binio::write_features;
use jm3d::dataset::synth::{synth_generate, SynthConfig};
use jm3d::dataset::{load_dataset, Dataset};
use jm3d::evaluation::{
    image_query, modelnet_eval_sets, retrieval_top1, retrieve_by_image, to_jsonl, to_table, EvalSet,
    MetricRecord, ReportHeader,
};
use jm3d::training::{checkpoint, check_objective_gradients, run_ablation, train, AblationAxis, TrainConfig};
use jm3d::{Error, Result};

const GRAD_TOL: f64 = 1e-4;
const CHECKPOINT_FILE: &str = "model.ckpt";

#[derive(Parser, Debug)]
#[command(name = "jm3d", version, about = "Tri-modal point cloud, image and text alignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset and its manifest.
    GenData(GenDataArgs),
    /// Train the point encoder and alignment heads.
    Pretrain(PretrainArgs),
    /// Zero-shot classification accuracy of a checkpoint.
    EvalZeroshot(EvalArgs),
    /// Image-to-point-cloud retrieval with a checkpoint.
    Retrieve(RetrieveArgs),
    /// Finite-difference check of the training objective's gradients.
    Gradcheck(GradcheckArgs),
    /// Train and score every configuration along one ablation axis.
    Ablate(AblateArgs),
    /// Write point-cloud features of a dataset.
    ExportFeatures(ExportArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    parents: usize,
    #[arg(long, default_value_t = 3)]
    subs: usize,
    #[arg(long, default_value_t = 20)]
    per_sub: usize,
    #[arg(long, default_value_t = 256)]
    points: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed of the frozen text encoder the view features are anchored to.
    #[arg(long, default_value_t = 0)]
    text_seed: u64,
}

/// Training settings; explicit flags override `--config`, which overrides
/// the defaults.
#[derive(Args, Debug, Default)]
struct TrainFlags {
    /// TOML file with `key = value` lines named after the config fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    views: Option<usize>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lambda3: Option<f64>,
    #[arg(long)]
    no_jma: bool,
    #[arg(long)]
    no_htt: bool,
    #[arg(long)]
    no_cis: bool,
    #[arg(long)]
    no_embed: bool,
    #[arg(long)]
    seed: Option<u64>,
}

impl TrainFlags {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut c = match &self.config {
            Some(p) => TrainConfig::from_toml(&read_text(p)?)?,
            None => TrainConfig::default(),
        };
        macro_rules! set {
            ($flag:ident => $field:ident) => {
                if let Some(v) = self.$flag {
                    c.$field = v;
                }
            };
        }
        set!(epochs => epochs);
        set!(batch => batch_size);
        set!(lr => base_lr);
        set!(views => v_views);
        set!(omega => omega_deg);
        set!(lambda1 => lambda1);
        set!(lambda2 => lambda2);
        set!(lambda3 => lambda3);
        set!(seed => seed);
        if self.no_jma {
            c.jma_on = false;
        }
        if self.no_htt {
            c.htt_on = false;
        }
        if self.no_cis {
            c.cis_on = false;
        }
        if self.no_embed {
            c.embeddings_on = false;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args, Debug)]
struct PretrainArgs {
    /// Dataset directory or manifest file.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fraction of each class held out from training.
    #[arg(long, default_value_t = 0.2)]
    held_out: f64,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// all, medium, hard, custom:FILE, or dataset (the dataset's own classes).
    #[arg(long, default_value = "dataset")]
    set: String,
    #[arg(long, default_value_t = 5)]
    topk: usize,
    /// Evaluate the split held out at training time; 0 evaluates every sample.
    #[arg(long, default_value_t = 0.2)]
    held_out: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RetrieveArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Sample id whose view is used as the query.
    #[arg(long)]
    query: Option<String>,
    /// Index of the query view within each sample.
    #[arg(long, default_value_t = 0)]
    view: usize,
    #[arg(long, default_value_t = 5)]
    topk: usize,
    #[arg(long, default_value_t = 0.2)]
    held_out: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug)]
struct AblateArgs {
    /// cis, embeddings, within-view, htt, jma or all.
    #[arg(long)]
    axis: String,
    /// Dataset directory or manifest; a synthetic benchmark is generated in
    /// memory when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    data_seed: u64,
    /// Number of training seeds, starting at the configured seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 0.2)]
    held_out: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn header_line(header: &ReportHeader) -> String {
    serde_json::to_string(header).expect("header serializes")
}

/// Evaluation indices: the held-out part of the training split, or every
/// sample when `fraction` is 0.
fn eval_indices(dataset: &Dataset, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if fraction == 0.0 {
        return Ok((0..dataset.len()).collect());
    }
    Ok(dataset.stratified_split(fraction, seed)?.1)
}

fn gen_data(a: &GenDataArgs) -> Result<()> {
    let cfg = SynthConfig {
        parents: a.parents,
        subs: a.subs,
        per_sub: a.per_sub,
        points: a.points,
        dim: a.dim,
        text_seed: a.text_seed,
        ..SynthConfig::default()
    };
    let ds = synth_generate(&cfg, a.seed, &a.out)?;
    println!("{}", header_line(&ReportHeader::new(cfg.hash(), a.seed)));
    println!(
        "{}",
        json!({
            "record": "dataset",
            "samples": ds.len(),
            "parents": ds.tree.num_parents(),
            "leaves": ds.used_leaves().len(),
            "dim": ds.dim,
            "out": a.out.display().to_string(),
        })
    );
    Ok(())
}

fn pretrain(a: &PretrainArgs) -> Result<()> {
    let cfg = a.train.resolve()?;
    let ds = load_dataset(&a.data)?;
    let (tr, held) = ds.stratified_split(a.held_out, cfg.seed)?;
    create_dir(&a.out)?;
    let ckpt = a.out.join(CHECKPOINT_FILE);
    let header = header_line(&ReportHeader::new(cfg.hash(), cfg.seed));
    println!("{header}");
    let mut log = header.clone() + "\n";
    let out = train(&cfg, &ds, &tr, |r, model| {
        let line = json!({
            "record": "epoch",
            "epoch": r.epoch,
            "mean_loss": r.mean_loss,
            "steps": r.steps,
        })
        .to_string();
        println!("{line}");
        log.push_str(&line);
        log.push('\n');
        checkpoint::save(model, &ckpt)
    })?;
    write_file(&a.out.join("train_log.jsonl"), &log)?;
    write_file(&a.out.join("config.toml"), cfg.to_toml())?;
    let ids = |ix: &[usize]| ix.iter().map(|&i| ds.samples[i].id.clone()).collect::<Vec<_>>();
    let split = json!({ "held_out_fraction": a.held_out, "train": ids(&tr), "held_out": ids(&held) });
    write_file(&a.out.join("split.json"), serde_json::to_string_pretty(&split).expect("json"))?;
    println!(
        "{}",
        json!({
            "record": "summary",
            "epochs": out.epoch_losses.len(),
            "first_loss": out.epoch_losses.first(),
            "final_loss": out.epoch_losses.last(),
            "tau": out.model.heads.tau(&out.model.store),
            "train_samples": tr.len(),
            "held_out_samples": held.len(),
            "checkpoint": ckpt.display().to_string(),
        })
    );
    Ok(())
}

fn resolve_set(spec: &str, ds: &Dataset) -> Result<EvalSet> {
    let sets = modelnet_eval_sets();
    match spec {
        "all" => Ok(sets.all),
        "medium" => Ok(sets.medium),
        "hard" => Ok(sets.hard),
        "dataset" => EvalSet::new(
            "dataset",
            ds.used_leaves().into_iter().map(|l| ds.tree.leaves()[l].clone()).collect(),
        ),
        other => match other.strip_prefix("custom:") {
            Some(file) => {
                let path = Path::new(file);
                let name = path.file_stem().map_or("custom".into(), |s| s.to_string_lossy().into_owned());
                EvalSet::from_file(name, path)
            }
            None => Err(Error::Config(format!(
                "unknown set {other:?} (all, medium, hard, dataset, custom:FILE)"
            ))),
        },
    }
}

fn emit_report(header: &ReportHeader, records: &[MetricRecord], out: Option<&Path>) -> Result<()> {
    print!("{}", to_table(records));
    let jsonl = to_jsonl(header, records);
    print!("{jsonl}");
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join("report.jsonl"), &jsonl)?;
    }
    Ok(())
}

fn eval_zeroshot(a: &EvalArgs) -> Result<()> {
    let model = checkpoint::load(&a.checkpoint)?;
    let ds = load_dataset(&a.data)?;
    let set = resolve_set(&a.set, &ds)?;
    if a.topk == 0 {
        return Err(Error::Config("--topk must be positive".into()));
    }
    let mut ks = vec![1, a.topk.min(set.len())];
    ks.dedup();
    let idx = eval_indices(&ds, a.held_out, model.config.seed)?;
    let res = jm3d::evaluation::evaluate_zero_shot(&model, &ds, &idx, &set.classes, &ks)?;
    let records: Vec<MetricRecord> = res
        .accuracy
        .iter()
        .map(|&(k, accuracy)| MetricRecord {
            set: set.name.clone(),
            k,
            accuracy,
            n_samples: res.n_samples,
            seed: model.config.seed,
            checkpoint: a.checkpoint.display().to_string(),
        })
        .collect();
    let header = ReportHeader::new(model.config.hash(), model.config.seed);
    emit_report(&header, &records, a.out.as_deref())
}

fn retrieve(a: &RetrieveArgs) -> Result<()> {
    let model = checkpoint::load(&a.checkpoint)?;
    let ds = load_dataset(&a.data)?;
    let idx = eval_indices(&ds, a.held_out, model.config.seed)?;
    let top1 = retrieval_top1(&model, &ds, &idx, a.view)?;
    let records = vec![MetricRecord {
        set: "retrieval".into(),
        k: 1,
        accuracy: top1,
        n_samples: idx.len(),
        seed: model.config.seed,
        checkpoint: a.checkpoint.display().to_string(),
    }];
    let header = ReportHeader::new(model.config.hash(), model.config.seed);
    emit_report(&header, &records, a.out.as_deref())?;
    if let Some(q) = &a.query {
        let s = ds
            .samples
            .iter()
            .find(|s| &s.id == q)
            .ok_or_else(|| Error::Input(format!("no sample with id {q:?}")))?;
        let view = s
            .views
            .get(a.view)
            .ok_or_else(|| Error::Input(format!("sample {q:?} has no view {}", a.view)))?;
        let frozen = model.frozen()?;
        let query = image_query(&model, &frozen, view)?;
        let gallery: Vec<_> = idx.iter().map(|&i| &ds.samples[i]).collect();
        let feats = model.encode_samples(&gallery)?;
        let ids: Vec<String> = gallery.iter().map(|s| s.id.clone()).collect();
        let hits = retrieve_by_image(&query, &feats, &ids, a.topk.min(ids.len()))?;
        println!("{}", json!({ "record": "query", "id": q, "view": a.view, "matches": hits }));
    }
    Ok(())
}

fn gradcheck(a: &GradcheckArgs) -> Result<ExitCode> {
    let cfg = TrainConfig {
        seed: a.seed,
        ..TrainConfig::default()
    };
    println!("{}", header_line(&ReportHeader::new(cfg.hash(), a.seed)));
    let r = check_objective_gradients(a.seed)?;
    println!(
        "{}",
        json!({
            "record": "gradcheck",
            "max_rel_error": r.max_rel_error,
            "coordinates": r.coordinates,
            "tolerance": GRAD_TOL,
        })
    );
    println!("max relative error {:.3e} over {} coordinates", r.max_rel_error, r.coordinates);
    if r.max_rel_error < GRAD_TOL {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: gradient check exceeds tolerance {GRAD_TOL:e}");
        Ok(ExitCode::from(3))
    }
}

fn ablate(a: &AblateArgs) -> Result<()> {
    let axis: AblationAxis = a.axis.parse()?;
    let cfg = a.train.resolve()?;
    let ds = match &a.data {
        Some(p) => load_dataset(p)?,
        None => jm3d::dataset::synth::generate(&SynthConfig::default(), a.data_seed)?,
    };
    if a.seeds == 0 {
        return Err(Error::Config("--seeds must be positive".into()));
    }
    let seeds: Vec<u64> = (0..a.seeds).map(|i| cfg.seed + i).collect();
    let table = run_ablation(&cfg, &ds, axis, &seeds, a.held_out)?;
    let header = header_line(&ReportHeader::new(cfg.hash(), cfg.seed));
    let mut jsonl = header.clone() + "\n";
    for r in &table.rows {
        jsonl.push_str(
            &json!({
                "record": "ablation",
                "axis": axis.to_string(),
                "config": r.label,
                "top1": r.mean_top1(),
                "top5": r.mean_top5(),
                "final_loss": r.mean_final_loss(),
                "seeds": seeds,
            })
            .to_string(),
        );
        jsonl.push('\n');
    }
    print!("{table}");
    print!("{jsonl}");
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write_file(&dir.join("ablation.txt"), table.to_string())?;
        write_file(&dir.join("ablation.jsonl"), &jsonl)?;
    }
    Ok(())
}

fn export_features(a: &ExportArgs) -> Result<()> {
    let model = checkpoint::load(&a.checkpoint)?;
    let ds = load_dataset(&a.data)?;
    let samples: Vec<_> = ds.samples.iter().collect();
    let feats = model.encode_samples(&samples)?;
    create_dir(&a.out)?;
    let rows: Vec<Vec<f32>> = feats.iter().map(|f| f.iter().map(|&x| x as f32).collect()).collect();
    write_features(&a.out.join("features.bin"), &rows, model.dim)?;
    let ids: String = samples.iter().map(|s| format!("{}\n", s.id)).collect();
    write_file(&a.out.join("ids.txt"), ids)?;
    println!("{}", header_line(&ReportHeader::new(model.config.hash(), model.config.seed)));
    println!(
        "{}",
        json!({ "record": "features", "samples": rows.len(), "dim": model.dim, "out": a.out.display().to_string() })
    );
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::GenData(a) => gen_data(a)?,
        Command::Pretrain(a) => pretrain(a)?,
        Command::EvalZeroshot(a) => eval_zeroshot(a)?,
        Command::Retrieve(a) => retrieve(a)?,
        Command::Gradcheck(a) => return gradcheck(a),
        Command::Ablate(a) => ablate(a)?,
        Command::ExportFeatures(a) => export_features(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numeric(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

