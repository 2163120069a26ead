//! Model state and the optimization loop.

use rand::seq::SliceRandom;

use super::config::{TrainConfig, ViewPlan};
use super::optim::{adamw_step, cosine_lr, AdamHyper, AdamState};
use crate::alignment::{total_loss, AlignmentBatch, AlignmentHeads};
use crate::autodiff::{ParamStore, Tape, Tensor};
use crate::dataset::{
    downsample_points, sample_random_indices, sample_window_indices, Dataset, PointCloud, TripletSample,
};
use crate::encoders::point::encode_point_clouds;
use crate::encoders::{
    embed_view, FrozenEncoderSpec, ImageEncoder, PointEncoderParams, TextEncoder, ViewEmbeddingTables,
};
use crate::error::{Error, Result};
use crate::rng::{fnv1a, substream, Prng};

const INIT_STREAM: u64 = 0x1417;
const TRAIN_STREAM: u64 = 0x7a19;

/// The frozen image/text side, rebuilt deterministically from the config.
#[derive(Clone, Debug)]
pub struct FrozenEncoders {
    pub text: TextEncoder,
    pub image: ImageEncoder,
    pub tables: ViewEmbeddingTables,
}

impl FrozenEncoders {
    pub fn new(config: &TrainConfig, dim: usize) -> Result<Self> {
        Ok(Self {
            text: TextEncoder::new(FrozenEncoderSpec::new(config.text_seed, dim))?,
            image: ImageEncoder::new(FrozenEncoderSpec::new(config.image_seed, dim))?,
            tables: ViewEmbeddingTables::sinusoidal(dim, config.embed_scale)?,
        })
    }

    pub fn prompt(&self, template: &str, class: &str) -> Result<Vec<f64>> {
        self.text.encode(&template.replace("[CLASS]", class))
    }
}

/// Trainable state: point encoder, alignment heads and optimizer moments.
/// Frozen encoders are not part of the parameter store.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: TrainConfig,
    pub dim: usize,
    pub parents: Vec<String>,
    pub store: ParamStore,
    pub encoder: PointEncoderParams,
    pub heads: AlignmentHeads,
    pub adam: AdamState,
}

impl Model {
    pub fn init(config: &TrainConfig, dim: usize, parents: Vec<String>) -> Result<Self> {
        config.validate()?;
        let mut rng = substream(config.seed, INIT_STREAM);
        let mut store = ParamStore::new();
        let encoder = PointEncoderParams::register(&mut store, config.hidden, dim, &mut rng)?;
        let heads = AlignmentHeads::register(
            &mut store,
            dim,
            config.cls_hidden,
            parents.len(),
            config.tau_init,
            config.learn_temperature,
            &mut rng,
        )?;
        let adam = AdamState::new(&store);
        Ok(Self {
            config: config.clone(),
            dim,
            parents,
            store,
            encoder,
            heads,
            adam,
        })
    }

    pub fn frozen(&self) -> Result<FrozenEncoders> {
        FrozenEncoders::new(&self.config, self.dim)
    }

    pub fn parent_index(&self, name: &str) -> Result<usize> {
        self.parents
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::Label(format!("parent {name:?} unknown to the model")))
    }

    /// Unit-norm point features, one row per cloud.
    pub fn encode_clouds(&self, clouds: &[&PointCloud]) -> Result<Vec<Vec<f64>>> {
        encode_point_clouds(clouds, &self.encoder, &self.store, 64)
    }

    /// Point features of samples after the same preprocessing as training.
    pub fn encode_samples(&self, samples: &[&TripletSample]) -> Result<Vec<Vec<f64>>> {
        let clouds: Vec<PointCloud> = samples
            .iter()
            .map(|s| prepare_cloud(&self.config, s))
            .collect::<Result<_>>()?;
        self.encode_clouds(&clouds.iter().collect::<Vec<_>>())
    }
}

/// Normalized cloud, downsampled to `num_points` with a stream keyed by the
/// sample id.
pub fn prepare_cloud(config: &TrainConfig, sample: &TripletSample) -> Result<PointCloud> {
    if sample.cloud.len() > config.num_points {
        let mut rng = substream(config.seed, fnv1a(sample.id.as_bytes()));
        downsample_points(&sample.cloud, config.num_points, &mut rng)
    } else {
        Ok(sample.cloud.normalized())
    }
}

/// A sample with every frozen feature computed once.
#[derive(Clone, Debug)]
pub struct PreparedSample {
    pub cloud: PointCloud,
    /// One row per candidate view: embedded (or raw) frozen features.
    pub views: Vec<Vec<f64>>,
    pub text: Vec<f64>,
    pub parent: usize,
}

pub fn prepare_samples(model: &Model, frozen: &FrozenEncoders, dataset: &Dataset, indices: &[usize]) -> Result<Vec<PreparedSample>> {
    let cfg = &model.config;
    let plan = cfg.view_plan();
    indices
        .iter()
        .map(|&i| {
            let s = &dataset.samples[i];
            let (_, leaf) = crate::dataset::resolve_label(s, &dataset.tree)?;
            let class = if cfg.htt_on {
                dataset.tree.leaves()[leaf].as_str()
            } else {
                s.parent.as_str()
            };
            let views = s
                .views
                .iter()
                .map(|v| {
                    let f = frozen.image.encode(v)?;
                    if plan.embed {
                        embed_view(&f, v.angle_deg, &frozen.tables)
                    } else {
                        Ok(f)
                    }
                })
                .collect::<Result<_>>()?;
            Ok(PreparedSample {
                cloud: prepare_cloud(cfg, s)?,
                views,
                text: frozen.prompt(&cfg.template, class)?,
                parent: model.parent_index(&s.parent)?,
            })
        })
        .collect()
}

fn pick_views(sample: &TripletSample, plan: &ViewPlan, rng: &mut Prng) -> Result<Vec<usize>> {
    if plan.windowed {
        sample_window_indices(&sample.views, plan.v, plan.omega_deg, rng)
    } else {
        sample_random_indices(&sample.views, plan.v, rng)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub mean_loss: f64,
    pub steps: u64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub epoch_losses: Vec<f64>,
}

/// Trains on `dataset.samples[train_indices]`; `on_epoch` runs after every
/// epoch (checkpointing, logging).
pub fn train(
    config: &TrainConfig,
    dataset: &Dataset,
    train_indices: &[usize],
    mut on_epoch: impl FnMut(&EpochReport, &Model) -> Result<()>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let n = train_indices.len();
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 training samples, got {n}")));
    }
    if config.batch_size > n {
        return Err(Error::Config(format!(
            "batch_size {} exceeds the {n} training samples",
            config.batch_size
        )));
    }
    let mut model = Model::init(config, dataset.dim, dataset.tree.parents().to_vec())?;
    let frozen = model.frozen()?;
    let prepared = prepare_samples(&model, &frozen, dataset, train_indices)?;
    let plan = config.view_plan();
    let weights = config.loss_weights()?;
    let switches = config.loss_switches();
    let hyper = AdamHyper {
        beta1: config.beta1,
        beta2: config.beta2,
        eps: config.adam_eps,
        weight_decay: config.weight_decay,
    };

    let mut batches = n / config.batch_size;
    if n % config.batch_size >= 2 {
        batches += 1;
    }
    let total_steps = config.epochs * batches;
    let mut rng = substream(config.seed, TRAIN_STREAM);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for b in 0..batches {
            let chunk = &order[b * config.batch_size..((b + 1) * config.batch_size).min(n)];
            let mut views = Vec::with_capacity(chunk.len());
            let mut text = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let p = &prepared[i];
                let picked = pick_views(&dataset.samples[train_indices[i]], &plan, &mut rng)?;
                let rows: Vec<&[f64]> = picked.iter().map(|&k| p.views[k].as_slice()).collect();
                views.push(Tensor::from_rows(&rows)?);
                text.push(p.text.as_slice());
            }
            let batch = AlignmentBatch {
                clouds: chunk.iter().map(|&i| &prepared[i].cloud).collect(),
                views,
                text: Tensor::from_rows(&text)?,
                parents: chunk.iter().map(|&i| prepared[i].parent).collect(),
            };
            let mut tape = Tape::new();
            let terms = total_loss(
                &mut tape,
                &model.store,
                &model.encoder,
                &model.heads,
                &weights,
                &switches,
                &batch,
            )?;
            let loss = tape.value(terms.total).item();
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("loss became {loss} at epoch {epoch}, batch {b}")));
            }
            let grads = tape.backward(terms.total)?.for_store(&model.store);
            if grads.iter().any(|g| !g.all_finite()) {
                return Err(Error::Numeric(format!("non-finite gradient at epoch {epoch}, batch {b}")));
            }
            let lr = cosine_lr(model.adam.step as usize, total_steps, config.base_lr)?;
            adamw_step(&mut model.store, &grads, &mut model.adam, lr, &hyper)?;
            loss_sum += loss;
        }
        let report = EpochReport {
            epoch,
            mean_loss: loss_sum / batches as f64,
            steps: model.adam.step,
        };
        epoch_losses.push(report.mean_loss);
        on_epoch(&report, &model)?;
    }
    Ok(TrainOutcome { model, epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth::{generate, SynthConfig};

    fn tiny() -> (Dataset, TrainConfig) {
        let ds = generate(
            &SynthConfig {
                parents: 2,
                subs: 2,
                per_sub: 8,
                points: 64,
                dim: 16,
                ..SynthConfig::default()
            },
            1,
        )
        .unwrap();
        let cfg = TrainConfig {
            batch_size: 8,
            epochs: 2,
            hidden: 16,
            base_lr: 3e-3,
            ..TrainConfig::default()
        };
        (ds, cfg)
    }

    #[test]
    fn second_epoch_improves_for_most_seeds() {
        let (ds, cfg) = tiny();
        let all: Vec<usize> = (0..ds.len()).collect();
        let wins = (0..5)
            .filter(|&seed| {
                let c = TrainConfig { seed, ..cfg.clone() };
                let out = train(&c, &ds, &all, |_, _| Ok(())).unwrap();
                out.epoch_losses[1] < out.epoch_losses[0]
            })
            .count();
        assert!(wins >= 3, "{wins}/5");
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let (ds, cfg) = tiny();
        let all: Vec<usize> = (0..ds.len()).collect();
        let a = train(&cfg, &ds, &all, |_, _| Ok(())).unwrap();
        let b = train(&cfg, &ds, &all, |_, _| Ok(())).unwrap();
        assert_eq!(a.epoch_losses, b.epoch_losses);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn ablation_switches_run() {
        let (ds, cfg) = tiny();
        let all: Vec<usize> = (0..ds.len()).collect();
        for c in [
            TrainConfig { jma_on: false, ..cfg.clone() },
            TrainConfig { htt_on: false, ..cfg.clone() },
            TrainConfig { cis_on: false, ..cfg.clone() },
            TrainConfig { within_view_on: false, v_views: 4, ..cfg.clone() },
        ] {
            let out = train(&c, &ds, &all, |_, _| Ok(())).unwrap();
            assert!(out.epoch_losses.iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn frozen_state_is_not_trainable() {
        let (ds, cfg) = tiny();
        let m = Model::init(&cfg, ds.dim, ds.tree.parents().to_vec()).unwrap();
        assert!(m
            .store
            .entries()
            .iter()
            .all(|e| e.name.starts_with("point.") || e.name.starts_with("align.")));
    }

    #[test]
    fn oversized_batch_rejected() {
        let (ds, cfg) = tiny();
        let c = TrainConfig { batch_size: 100, ..cfg };
        let all: Vec<usize> = (0..ds.len()).collect();
        assert!(matches!(train(&c, &ds, &all, |_, _| Ok(())), Err(Error::Config(_))));
    }
}
