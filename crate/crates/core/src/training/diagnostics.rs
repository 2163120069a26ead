//! Finite-difference check of the full training objective.

use super::config::TrainConfig;
use super::trainer::{prepare_samples, Model};
use crate::alignment::{total_loss, AlignmentBatch};
use crate::autodiff::{grad_check_params, GradCheckReport, Tensor, DEFAULT_EPS};
use crate::dataset::sample_window_indices;
use crate::dataset::synth::{generate, SynthConfig};
use crate::error::Result;
use crate::rng::substream;

/// Gradient check of the total loss for every trainable parameter on a
/// batch of 4 synthetic samples with `D = 16` and 2 windowed views.
pub fn check_objective_gradients(seed: u64) -> Result<GradCheckReport> {
    let ds = generate(
        &SynthConfig {
            parents: 2,
            subs: 2,
            per_sub: 1,
            points: 24,
            dim: 16,
            ..SynthConfig::default()
        },
        seed,
    )?;
    let cfg = TrainConfig {
        batch_size: 4,
        hidden: 8,
        cls_hidden: 8,
        v_views: 2,
        seed,
        ..TrainConfig::default()
    };
    let model = Model::init(&cfg, ds.dim, ds.tree.parents().to_vec())?;
    let frozen = model.frozen()?;
    let idx: Vec<usize> = (0..ds.len()).collect();
    let prepared = prepare_samples(&model, &frozen, &ds, &idx)?;
    let mut rng = substream(seed, 0x9c);
    let mut views = Vec::new();
    for (s, p) in ds.samples.iter().zip(&prepared) {
        let pick = sample_window_indices(&s.views, cfg.v_views, cfg.omega_deg, &mut rng)?;
        let rows: Vec<&[f64]> = pick.iter().map(|&k| p.views[k].as_slice()).collect();
        views.push(Tensor::from_rows(&rows)?);
    }
    let text: Vec<&[f64]> = prepared.iter().map(|p| p.text.as_slice()).collect();
    let batch = AlignmentBatch {
        clouds: prepared.iter().map(|p| &p.cloud).collect(),
        views,
        text: Tensor::from_rows(&text)?,
        parents: prepared.iter().map(|p| p.parent).collect(),
    };
    let weights = cfg.loss_weights()?;
    let switches = cfg.loss_switches();
    grad_check_params(
        |tape, store| {
            Ok(total_loss(tape, store, &model.encoder, &model.heads, &weights, &switches, &batch)?.total)
        },
        &model.store,
        DEFAULT_EPS,
    )
}
