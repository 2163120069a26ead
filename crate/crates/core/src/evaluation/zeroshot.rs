//! Zero-shot classification by prompt similarity.

use std::collections::BTreeSet;

use crate::autodiff::kernels::{dot, norm, DIV_EPS};
use crate::autodiff::Tensor;
use crate::dataset::{resolve_label, Dataset};
use crate::encoders::TextEncoder;
use crate::error::{Error, Result};
use crate::training::Model;

pub const CLASS_SLOT: &str = "[CLASS]";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate(String);

impl PromptTemplate {
    pub fn new(template: impl Into<String>) -> Result<Self> {
        let t = template.into();
        if t.matches(CLASS_SLOT).count() != 1 {
            return Err(Error::Input(format!("template {t:?} must contain exactly one {CLASS_SLOT}")));
        }
        Ok(Self(t))
    }

    pub fn instantiate(&self, class: &str) -> String {
        self.0.replace(CLASS_SLOT, class)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// One unit-norm text feature per class, `K×D`, in class order.
pub fn build_label_features(classes: &[String], template: &PromptTemplate, text: &TextEncoder) -> Result<Tensor> {
    if classes.len() < 2 {
        return Err(Error::Input(format!("need at least 2 classes, got {}", classes.len())));
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = classes.iter().find(|c| !seen.insert(c.as_str())) {
        return Err(Error::Input(format!("duplicate class {dup:?}")));
    }
    let rows = classes
        .iter()
        .map(|c| text.encode(&template.instantiate(c)))
        .collect::<Result<Vec<_>>>()?;
    Tensor::from_rows(&rows)
}

/// Indices of the `k` label rows most cosine-similar to `h`, best first;
/// ties go to the lower index.
pub fn zero_shot_topk(h: &[f64], labels: &Tensor, k: usize) -> Result<Vec<usize>> {
    if labels.rank() != 2 || labels.cols() != h.len() {
        return Err(Error::shape("zero_shot_topk", &[h.len()], labels.shape()));
    }
    let kk = labels.rows();
    if k == 0 || k > kk {
        return Err(Error::Contract(format!("k = {k} must be in 1..={kk}")));
    }
    let hn = norm(h).max(DIV_EPS);
    let scores: Vec<f64> = (0..kk)
        .map(|i| {
            let r = labels.row_slice(i);
            dot(h, r) / (hn * norm(r).max(DIV_EPS))
        })
        .collect();
    Ok(rank_desc(&scores, k))
}

pub(crate) fn rank_desc(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Fraction of samples whose gold index is among the first `k` ranks.
pub fn accuracy_topk(predictions: &[Vec<usize>], gold: &[usize], k: usize) -> Result<f64> {
    if predictions.len() != gold.len() {
        return Err(Error::shape("accuracy_topk", &[predictions.len()], &[gold.len()]));
    }
    if gold.is_empty() {
        return Err(Error::Input("no predictions to score".into()));
    }
    let hits = predictions
        .iter()
        .zip(gold)
        .filter(|(p, g)| p.iter().take(k).any(|x| x == *g))
        .count();
    Ok(hits as f64 / gold.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeroShotResult {
    /// `(k, accuracy)` for every requested `k`.
    pub accuracy: Vec<(usize, f64)>,
    pub n_samples: usize,
    /// Samples whose label is not in the class list.
    pub skipped: usize,
}

/// Zero-shot accuracy of `model` on `dataset.samples[indices]` against
/// `classes`. A sample's gold class is its subcategory leaf if listed,
/// otherwise its parent if listed; samples matching neither are skipped.
pub fn evaluate_zero_shot(
    model: &Model,
    dataset: &Dataset,
    indices: &[usize],
    classes: &[String],
    ks: &[usize],
) -> Result<ZeroShotResult> {
    let frozen = model.frozen()?;
    let template = PromptTemplate::new(model.config.template.clone())?;
    let labels = build_label_features(classes, &template, &frozen.text)?;
    let kmax = ks.iter().copied().max().unwrap_or(1).min(classes.len());

    let mut chosen = Vec::new();
    let mut gold = Vec::new();
    for &i in indices {
        let s = &dataset.samples[i];
        let (_, leaf) = resolve_label(s, &dataset.tree)?;
        let leaf_name = &dataset.tree.leaves()[leaf];
        let g = classes
            .iter()
            .position(|c| c == leaf_name)
            .or_else(|| classes.iter().position(|c| *c == s.parent));
        if let Some(g) = g {
            chosen.push(s);
            gold.push(g);
        }
    }
    if chosen.is_empty() {
        return Err(Error::Input(
            "no evaluated sample carries a label from the class list".into(),
        ));
    }
    let feats = model.encode_samples(&chosen)?;
    let preds = feats
        .iter()
        .map(|h| zero_shot_topk(h, &labels, kmax))
        .collect::<Result<Vec<_>>>()?;
    let accuracy = ks
        .iter()
        .map(|&k| Ok((k, accuracy_topk(&preds, &gold, k)?)))
        .collect::<Result<_>>()?;
    Ok(ZeroShotResult {
        accuracy,
        n_samples: chosen.len(),
        skipped: indices.len() - chosen.len(),
    })
}
