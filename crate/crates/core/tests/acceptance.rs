//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use jm3d::alignment::{info_nce, jma_fuse, jma_weights};
use jm3d::autodiff::{ParamStore, Tensor};
use jm3d::dataset::{circular_dist, sample_window_indices, Dataset, PointCloud, ViewKind, ViewPayload, ViewRecord};
use jm3d::dataset::synth::{generate, SynthConfig};
use jm3d::encoders::{encode_point_cloud, PointEncoderParams};
use jm3d::evaluation::{evaluate_zero_shot, modelnet_eval_sets, to_jsonl, MetricRecord, ReportHeader};
use jm3d::rng::{normal_vec, seeded};
use jm3d::training::{
    ablation_rows, check_objective_gradients, checkpoint, train, AblationAxis, AblationRow, AblationTable,
    TrainConfig,
};
use rand::seq::SliceRandom;
use rand::Rng;

const GRAD_TOL: f64 = 1e-4;
const NCE_TOL: f64 = 1e-9;
const LN_N_TOL: f64 = 1e-12;
const WEIGHT_SUM_TOL: f64 = 1e-12;
const TOP1_MIN: f64 = 0.90;
const JMA_MARGIN: f64 = 0.02;
const DATA_SEED: u64 = 42;
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const HELD_OUT: f64 = 0.2;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Run {
    first_loss: f64,
    last_loss: f64,
    top1: f64,
    top5: f64,
    n_eval: usize,
    checkpoint: Vec<u8>,
    report: String,
    elapsed: Duration,
}

fn bench_dataset() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| {
        generate(
            &SynthConfig {
                parents: 4,
                subs: 3,
                per_sub: 20,
                points: 256,
                dim: 32,
                ..SynthConfig::default()
            },
            DATA_SEED,
        )
        .expect("benchmark data")
    })
}

fn bench_config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 50,
        batch_size: 16,
        seed,
        ..TrainConfig::default()
    }
}

fn run_once(cfg: &TrainConfig) -> Run {
    let ds = bench_dataset();
    let start = Instant::now();
    let (tr, te) = ds.stratified_split(HELD_OUT, cfg.seed).expect("split");
    let out = train(cfg, ds, &tr, |_, _| Ok(())).expect("training");
    let classes: Vec<String> = ds.used_leaves().into_iter().map(|l| ds.tree.leaves()[l].clone()).collect();
    let res = evaluate_zero_shot(&out.model, ds, &te, &classes, &[1, 5]).expect("evaluation");
    let records: Vec<MetricRecord> = res
        .accuracy
        .iter()
        .map(|&(k, accuracy)| MetricRecord {
            set: "synthetic".into(),
            k,
            accuracy,
            n_samples: res.n_samples,
            seed: cfg.seed,
            checkpoint: "model.ckpt".into(),
        })
        .collect();
    Run {
        first_loss: out.epoch_losses[0],
        last_loss: *out.epoch_losses.last().expect("epochs"),
        top1: res.accuracy[0].1,
        top5: res.accuracy[1].1,
        n_eval: res.n_samples,
        checkpoint: checkpoint::to_bytes(&out.model),
        report: to_jsonl(&ReportHeader::new(cfg.hash(), cfg.seed), &records),
        elapsed: start.elapsed(),
    }
}

fn full_runs() -> &'static Vec<Run> {
    static RUNS: OnceLock<Vec<Run>> = OnceLock::new();
    RUNS.get_or_init(|| SEEDS.iter().map(|&s| run_once(&bench_config(s))).collect())
}

fn crit_gradients() -> Outcome {
    let start = Instant::now();
    match check_objective_gradients(1) {
        Ok(r) => {
            let secs = start.elapsed().as_secs_f64();
            outcome(
                r.max_rel_error < GRAD_TOL && secs < 60.0,
                format!(
                    "max rel error {:.3e} over {} coordinates (tol {GRAD_TOL:e}), {secs:.2}s",
                    r.max_rel_error, r.coordinates
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn crit_loss_oracle() -> Outcome {
    let eye = Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
    let got = info_nce(&eye, &eye, 1.0).unwrap();
    let want = (1.0 + 1f64.exp()).ln() - 1.0;
    let e1 = (got - want).abs();
    let mut worst = 0.0f64;
    for n in [2usize, 3, 5, 8, 16] {
        let rows = vec![vec![0.6, 0.8, 0.0]; n];
        let t = Tensor::from_rows(&rows).unwrap();
        let l = info_nce(&t, &t, 0.07).unwrap();
        worst = worst.max((l - (n as f64).ln()).abs());
    }
    outcome(
        e1 < NCE_TOL && worst < LN_N_TOL,
        format!("identity case err {e1:.2e} (tol {NCE_TOL:e}); identical rows max err {worst:.2e} (tol {LN_N_TOL:e})"),
    )
}

fn crit_jma() -> Outcome {
    let mut rng = seeded(7);
    let (mut sum_err, mut perm_fail, mut single_fail) = (0.0f64, 0, 0);
    for _ in 0..1000 {
        let v = rng.random_range(1..=6);
        let d = rng.random_range(1..=12);
        let views: Vec<Vec<f64>> = (0..v).map(|_| normal_vec(&mut rng, d, 1.0)).collect();
        let text = normal_vec(&mut rng, d, 1.0);
        let w = jma_weights(&views, &text).unwrap();
        sum_err = sum_err.max((w.iter().sum::<f64>() - 1.0).abs());
        let fused = jma_fuse(&views, &text).unwrap();
        let mut shuffled = views.clone();
        shuffled.shuffle(&mut rng);
        let again = jma_fuse(&shuffled, &text).unwrap();
        if fused.iter().zip(&again).any(|(a, b)| a.to_bits() != b.to_bits()) {
            perm_fail += 1;
        }
        let one = jma_fuse(&views[..1], &text).unwrap();
        if one.iter().zip(&views[0]).any(|(a, b)| a.to_bits() != b.to_bits()) {
            single_fail += 1;
        }
    }
    outcome(
        sum_err < WEIGHT_SUM_TOL && perm_fail == 0 && single_fail == 0,
        format!("max |sum w - 1| {sum_err:.2e}; permutation mismatches {perm_fail}; V=1 mismatches {single_fail}"),
    )
}

fn crit_sampler() -> Outcome {
    let start = Instant::now();
    let views: Vec<ViewRecord> = (0..30)
        .map(|k| ViewRecord::new(12 * k, ViewKind::Rgb, ViewPayload::Feature(vec![1.0])).unwrap())
        .collect();
    let mut rng = seeded(11);
    let omega = 60.0;
    let (mut violations, mut draws) = (0, 0);
    for v in [2usize, 4] {
        for _ in 0..10_000 {
            let pick = sample_window_indices(&views, v, omega, &mut rng).unwrap();
            draws += 1;
            let distinct = pick.iter().collect::<std::collections::BTreeSet<_>>().len() == v;
            for a in &pick {
                for b in &pick {
                    let d = circular_dist(views[*a].angle_deg as f64, views[*b].angle_deg as f64);
                    if d >= omega {
                        violations += 1;
                    }
                }
            }
            if !distinct {
                violations += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        violations == 0 && secs < 5.0,
        format!("{draws} draws, {violations} violations, {secs:.2}s"),
    )
}

/// Reference class tables, one table row per line.
const ALL_TABLE: &str = r"airplane & bathtub & bed & bench & bookshelf
bottle & bowl & car & chair & cone
cup& curtain& desk& door& dresser
flower\_pot& glass\_box& guitar& keyboard& lamp
laptop& mantel& monitor& night\_stand& person
piano& plant& radio& range\_hood& sink
sofa& stairs& stool& table& tent
toilet& tv\_stand& vase& wardrobe& xbox";

const MEDIUM_TABLE: &str = r"cone& cup& curtain& door& dresser
glass\_box& mantel& monitor& night\_stand& person
plant& radio& range\_hood& sink& stairs
stool& tent& toilet& tv\_stand& vase
wardrobe& xbox";

const HARD_TABLE: &str = r"cone& curtain& door& dresser& glass\_box
mantel& night\_stand& person& plant& radio
range\_hood& sink& stairs& tent& toilet
tv\_stand& xbox";

fn parse_table(t: &str) -> Vec<String> {
    t.split(['&', '\n']).map(|c| c.trim().replace(r"\_", "_")).collect()
}

fn crit_sets() -> Outcome {
    let s = modelnet_eval_sets();
    let counts = (s.all.len(), s.medium.len(), s.hard.len());
    let verbatim = s.all.classes == parse_table(ALL_TABLE)
        && s.medium.classes == parse_table(MEDIUM_TABLE)
        && s.hard.classes == parse_table(HARD_TABLE);
    let nested = s.hard.classes.iter().all(|c| s.medium.contains(c))
        && s.medium.classes.iter().all(|c| s.all.contains(c));
    outcome(
        counts == (40, 22, 17) && verbatim && nested,
        format!("sizes {counts:?}, verbatim {verbatim}, nested {nested}"),
    )
}

fn crit_end_to_end() -> Outcome {
    let runs = full_runs();
    let total: Duration = runs.iter().map(|r| r.elapsed).sum();
    let good = runs
        .iter()
        .filter(|r| r.last_loss < r.first_loss && r.top1 >= TOP1_MIN)
        .count();
    let per: Vec<String> = runs
        .iter()
        .zip(SEEDS)
        .map(|(r, s)| format!("s{s}: loss {:.3}->{:.3} top1 {:.3} (n={})", r.first_loss, r.last_loss, r.top1, r.n_eval))
        .collect();
    outcome(
        good * 2 > runs.len() && total < Duration::from_secs(300),
        format!("{good}/{} seeds pass, {:.1}s total; {}", runs.len(), total.as_secs_f64(), per.join("; ")),
    )
}

fn crit_ablation() -> Outcome {
    let variants = ablation_rows(AblationAxis::Jma, &bench_config(0));
    let structural = variants.len() == 2 && variants[0].config.jma_on && !variants[1].config.jma_on;
    let axes_ok = ["cis", "embeddings", "within-view", "htt", "jma"]
        .iter()
        .all(|a| a.parse::<AblationAxis>().map(|ax| ablation_rows(ax, &TrainConfig::default()).len() >= 2).unwrap_or(false));
    let full = full_runs();
    let no_jma: Vec<Run> = SEEDS
        .iter()
        .map(|&s| run_once(&TrainConfig { seed: s, ..variants[1].config.clone() }))
        .collect();
    let row = |label: &str, runs: &[Run]| AblationRow {
        label: label.into(),
        top1: runs.iter().map(|r| r.top1).collect(),
        top5: runs.iter().map(|r| r.top5).collect(),
        final_loss: runs.iter().map(|r| r.last_loss).collect(),
    };
    let table = AblationTable {
        axis: AblationAxis::Jma,
        seeds: SEEDS.to_vec(),
        n_classes: bench_dataset().used_leaves().len(),
        rows: vec![row(&variants[0].label, full), row(&variants[1].label, &no_jma)],
    };
    print!("{table}");
    let (a, b) = (table.rows[0].mean_top1(), table.rows[1].mean_top1());
    outcome(
        structural && axes_ok && a >= b - JMA_MARGIN,
        format!("full mean top1 {a:.4} vs no-jma {b:.4} (margin {JMA_MARGIN}); table rows {}", table.rows.len()),
    )
}

fn crit_determinism() -> Outcome {
    let first = &full_runs()[0];
    let again = run_once(&bench_config(SEEDS[0]));
    let ck = first.checkpoint == again.checkpoint;
    let rep = first.report == again.report;
    outcome(
        ck && rep,
        format!("checkpoint {} bytes identical {ck}; report identical {rep}", again.checkpoint.len()),
    )
}

fn crit_point_permutation() -> Outcome {
    let mut rng = seeded(5);
    let mut store = ParamStore::new();
    let params = PointEncoderParams::register(&mut store, 32, 16, &mut rng).unwrap();
    let mut mismatches = 0;
    for _ in 0..50 {
        let n = rng.random_range(8..=128);
        let pts: Vec<[f64; 3]> = (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let base = encode_point_cloud(&PointCloud::new(pts.clone()).unwrap(), &params, &store).unwrap();
        for _ in 0..100 {
            let mut p = pts.clone();
            p.shuffle(&mut rng);
            let h = encode_point_cloud(&PointCloud::new(p).unwrap(), &params, &store).unwrap();
            if h.iter().zip(&base).any(|(a, b)| a.to_bits() != b.to_bits()) {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("5000 permutations, {mismatches} mismatches"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 gradient check of total loss", crit_gradients),
        ("2 contrastive loss oracle", crit_loss_oracle),
        ("3 fusion invariants", crit_jma),
        ("4 windowed view sampler", crit_sampler),
        ("5 evaluation sets", crit_sets),
        ("6 end-to-end training", crit_end_to_end),
        ("7 ablation harness", crit_ablation),
        ("8 determinism", crit_determinism),
        ("9 point encoder permutation invariance", crit_point_permutation),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("[{tag}] {name}: {} ({:.1}s)", o.detail, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
