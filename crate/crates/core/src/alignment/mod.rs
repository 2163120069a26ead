//! Joint fusion of views and text, and every loss term of the objective.

pub mod heads;
pub mod jma;
pub mod losses;

pub use heads::AlignmentHeads;
pub use jma::{jma_fuse, jma_fuse_tape, jma_weights};
pub use losses::{
    contrastive_total, contrastive_total_tape, cross_entropy_tape, info_nce, info_nce_tape,
    info_nce_with_mode, parent_class_loss, parent_class_loss_tape, LossWeights, NceMode,
};

use crate::autodiff::{ParamStore, Tape, Tensor, Var};
use crate::dataset::PointCloud;
use crate::encoders::PointBackbone;
use crate::error::{Error, Result};

/// A batch ready for the loss: clouds, embedded view features per sample
/// (`V_i×D`), the contrastive text target per sample (`N×D`) and parent
/// indices.
#[derive(Clone, Debug)]
pub struct AlignmentBatch<'a> {
    pub clouds: Vec<&'a PointCloud>,
    pub views: Vec<Tensor>,
    pub text: Tensor,
    pub parents: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSwitches {
    /// Fuse views with text attention; otherwise average them.
    pub jma_on: bool,
    pub parent_cls_on: bool,
    /// Re-normalize the fused joint feature.
    pub normalize_joint: bool,
    pub mode: NceMode,
}

impl Default for LossSwitches {
    fn default() -> Self {
        Self {
            jma_on: true,
            parent_cls_on: true,
            normalize_joint: true,
            mode: NceMode::Symmetric,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    pub total: Var,
    pub contrastive: Var,
    pub parent: Option<Var>,
    pub h_c: Var,
    pub h_j: Var,
}

/// Joint features `N×D`: fused (or averaged) views per sample.
pub fn joint_features(tape: &mut Tape, batch: &AlignmentBatch, switches: &LossSwitches) -> Result<Var> {
    let d = batch.text.cols();
    let mut rows = Vec::with_capacity(batch.views.len());
    for (i, v) in batch.views.iter().enumerate() {
        let views = tape.constant(v.clone());
        let row = if switches.jma_on {
            let text = tape.constant(Tensor::vector(batch.text.row_slice(i).to_vec())?);
            jma_fuse_tape(tape, views, text)?.0
        } else {
            tape.mean_rows(views)?
        };
        if tape.value(row).cols() != d {
            return Err(Error::shape("joint_features", tape.value(row).shape(), &[d]));
        }
        rows.push(row);
    }
    let h = tape.concat_rows(&rows)?;
    Ok(if switches.normalize_joint {
        tape.l2_normalize(h)
    } else {
        h
    })
}

/// Contrastive objective plus (optionally) the parent classification loss.
pub fn total_loss(
    tape: &mut Tape,
    store: &ParamStore,
    backbone: &dyn PointBackbone,
    heads: &AlignmentHeads,
    weights: &LossWeights,
    switches: &LossSwitches,
    batch: &AlignmentBatch,
) -> Result<LossTerms> {
    let n = batch.clouds.len();
    if batch.views.len() != n || batch.text.rows() != n || batch.parents.len() != n {
        return Err(Error::Contract(format!(
            "batch parts disagree: {n} clouds, {} view sets, {} texts, {} labels",
            batch.views.len(),
            batch.text.rows(),
            batch.parents.len()
        )));
    }
    let h_c = backbone.forward(tape, store, &batch.clouds)?;
    let h_j = joint_features(tape, batch, switches)?;
    let h_ts = tape.constant(batch.text.clone());
    let inv_tau = heads.inv_tau(tape, store);
    let contrastive = contrastive_total_tape(tape, h_c, h_j, h_ts, weights, inv_tau, switches.mode)?;
    let (total, parent) = if switches.parent_cls_on {
        let p = parent_class_loss_tape(tape, store, heads, h_c, &batch.parents)?;
        (tape.add(contrastive, p)?, Some(p))
    } else {
        (contrastive, None)
    };
    Ok(LossTerms {
        total,
        contrastive,
        parent,
        h_c,
        h_j,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check_params;
    use crate::encoders::PointEncoderParams;
    use crate::rng::{normal, normal_vec, seeded};

    struct Fixture {
        store: ParamStore,
        enc: PointEncoderParams,
        heads: AlignmentHeads,
        clouds: Vec<PointCloud>,
        views: Vec<Tensor>,
        text: Tensor,
        parents: Vec<usize>,
    }

    fn fixture(seed: u64) -> Fixture {
        let (n, d, v) = (4, 6, 2);
        let mut rng = seeded(seed);
        let mut store = ParamStore::new();
        let enc = PointEncoderParams::register(&mut store, 5, d, &mut rng).unwrap();
        let heads = AlignmentHeads::register(&mut store, d, 4, 3, 0.5, true, &mut rng).unwrap();
        let clouds = (0..n)
            .map(|_| {
                PointCloud::new((0..5).map(|_| [normal(&mut rng), normal(&mut rng), normal(&mut rng)]).collect())
                    .unwrap()
            })
            .collect();
        let views = (0..n)
            .map(|_| Tensor::new(vec![v, d], normal_vec(&mut rng, v * d, 1.0)).unwrap())
            .collect();
        let mut t = normal_vec(&mut rng, n * d, 1.0);
        for r in t.chunks_mut(d) {
            crate::autodiff::kernels::normalize_in_place(r);
        }
        Fixture {
            store,
            enc,
            heads,
            clouds,
            views,
            text: Tensor::new(vec![n, d], t).unwrap(),
            parents: vec![0, 2, 1, 2],
        }
    }

    fn batch(f: &Fixture) -> AlignmentBatch<'_> {
        AlignmentBatch {
            clouds: f.clouds.iter().collect(),
            views: f.views.clone(),
            text: f.text.clone(),
            parents: f.parents.clone(),
        }
    }

    #[test]
    fn disabling_parent_loss_leaves_contrastive_only() {
        let f = fixture(1);
        let b = batch(&f);
        let w = LossWeights::default();
        let mut tape = Tape::new();
        let on = total_loss(&mut tape, &f.store, &f.enc, &f.heads, &w, &LossSwitches::default(), &b).unwrap();
        let off_sw = LossSwitches {
            parent_cls_on: false,
            ..LossSwitches::default()
        };
        let mut tape2 = Tape::new();
        let off = total_loss(&mut tape2, &f.store, &f.enc, &f.heads, &w, &off_sw, &b).unwrap();
        assert!(off.parent.is_none());
        assert_eq!(tape2.value(off.total).item(), tape.value(on.contrastive).item());
        let p = tape.value(on.parent.unwrap()).item();
        assert_eq!(tape.value(on.total).item(), tape.value(on.contrastive).item() + p);
    }

    #[test]
    fn full_objective_gradients_match_finite_differences() {
        let f = fixture(2);
        for jma_on in [true, false] {
            let sw = LossSwitches {
                jma_on,
                ..LossSwitches::default()
            };
            let report = grad_check_params(
                |tape, s| {
                    Ok(total_loss(tape, s, &f.enc, &f.heads, &LossWeights::default(), &sw, &batch(&f))?.total)
                },
                &f.store,
                1e-6,
            )
            .unwrap();
            assert!(report.max_rel_error < 1e-4, "jma {jma_on}: {report:?}");
        }
    }

    #[test]
    fn finite_on_random_batches() {
        for seed in 0..200 {
            let f = fixture(100 + seed);
            let mut tape = Tape::new();
            let t = total_loss(&mut tape, &f.store, &f.enc, &f.heads, &LossWeights::default(), &LossSwitches::default(), &batch(&f)).unwrap();
            assert!(tape.value(t.total).item().is_finite());
        }
    }
}
