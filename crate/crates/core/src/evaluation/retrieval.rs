//! Image-to-point-cloud retrieval.

use crate::autodiff::kernels::{cosine, normalize_in_place};
use crate::dataset::{resolve_label, Dataset, ViewRecord};
use crate::encoders::embed_view;
use crate::error::{Error, Result};
use crate::training::{FrozenEncoders, Model};

/// Ids of the `k` clouds most cosine-similar to `query`; ties go to the
/// lexicographically smaller id.
pub fn retrieve_by_image(query: &[f64], cloud_feats: &[Vec<f64>], ids: &[String], k: usize) -> Result<Vec<String>> {
    if cloud_feats.len() != ids.len() {
        return Err(Error::shape("retrieve_by_image", &[cloud_feats.len()], &[ids.len()]));
    }
    if k == 0 || k > ids.len() {
        return Err(Error::Contract(format!("k = {k} must be in 1..={}", ids.len())));
    }
    if let Some(bad) = cloud_feats.iter().find(|f| f.len() != query.len()) {
        return Err(Error::shape("retrieve_by_image", &[query.len()], &[bad.len()]));
    }
    let scores: Vec<f64> = cloud_feats.iter().map(|f| cosine(query, f)).collect();
    let mut idx: Vec<usize> = (0..ids.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| ids[a].cmp(&ids[b])));
    Ok(idx.into_iter().take(k).map(|i| ids[i].clone()).collect())
}

/// A view in the joint space: frozen feature, view embedding when the
/// model was trained with it, unit norm.
pub fn image_query(model: &Model, frozen: &FrozenEncoders, view: &ViewRecord) -> Result<Vec<f64>> {
    let f = frozen.image.encode(view)?;
    let mut q = if model.config.view_plan().embed {
        embed_view(&f, view.angle_deg, &frozen.tables)?
    } else {
        f
    };
    normalize_in_place(&mut q);
    Ok(q)
}

/// Fraction of samples in `indices` whose view `view_index` retrieves, at
/// rank 1 among the same samples' clouds, a cloud with the same leaf label.
pub fn retrieval_top1(model: &Model, dataset: &Dataset, indices: &[usize], view_index: usize) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Input("no samples to retrieve from".into()));
    }
    let frozen = model.frozen()?;
    let samples: Vec<_> = indices.iter().map(|&i| &dataset.samples[i]).collect();
    let feats = model.encode_samples(&samples)?;
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let leaf_of = |id: &str| -> Result<usize> {
        let s = samples.iter().find(|s| s.id == id).expect("id from gallery");
        Ok(resolve_label(s, &dataset.tree)?.1)
    };
    let mut hits = 0;
    for s in &samples {
        let view = s
            .views
            .get(view_index)
            .ok_or_else(|| Error::Input(format!("sample {:?} has no view {view_index}", s.id)))?;
        let q = image_query(model, &frozen, view)?;
        let top = retrieve_by_image(&q, &feats, &ids, 1)?;
        if leaf_of(&top[0])? == resolve_label(s, &dataset.tree)?.1 {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn exact_match_ranks_first() {
        let feats = vec![vec![1.0, 0.0], vec![0.6, 0.8], vec![0.0, 1.0]];
        assert_eq!(retrieve_by_image(&[0.6, 0.8], &feats, &ids(3), 1).unwrap(), ["s1"]);
        let mut all = retrieve_by_image(&[0.6, 0.8], &feats, &ids(3), 3).unwrap();
        all.sort();
        assert_eq!(all, ids(3));
        assert!(retrieve_by_image(&[0.6, 0.8], &feats, &ids(3), 4).is_err());
    }

    #[test]
    fn ties_break_by_id() {
        let feats = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let names = vec!["b".to_string(), "a".to_string()];
        assert_eq!(retrieve_by_image(&[1.0, 0.0], &feats, &names, 2).unwrap(), ["a", "b"]);
    }
}
