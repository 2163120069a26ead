//! Triplet samples, category hierarchy, manifest I/O and the synthetic
//! generator.

pub mod binio;
pub mod cloud;
pub mod manifest;
pub mod synth;
pub mod tree;
pub mod views;

pub use cloud::{downsample_points, PointCloud};
pub use manifest::{load_dataset, load_manifest, write_dataset, DatasetManifest};
pub use synth::{generate, synth_generate, SynthConfig};
pub use tree::CategoryTree;
pub use views::{
    angle_bucket, circular_dist, sample_random_indices, sample_window_indices,
    sample_within_window, Raster, ViewKind, ViewPayload, ViewRecord, ANGLE_STEP_DEG,
    DEFAULT_OMEGA_DEG, NUM_ANGLE_BUCKETS,
};

use crate::error::{Error, Result};

/// One training unit: a point cloud, its candidate views, and a category pair.
#[derive(Clone, Debug, PartialEq)]
pub struct TripletSample {
    pub id: String,
    pub cloud: PointCloud,
    pub views: Vec<ViewRecord>,
    pub parent: String,
    pub sub: Option<String>,
}

/// `(parent_index, leaf_index)` of a sample in `tree`.
pub fn resolve_label(sample: &TripletSample, tree: &CategoryTree) -> Result<(usize, usize)> {
    tree.resolve(&sample.parent, sample.sub.as_deref())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub samples: Vec<TripletSample>,
    pub tree: CategoryTree,
}

impl Dataset {
    /// Checks sample invariants and builds the category tree.
    pub fn new(dim: usize, samples: Vec<TripletSample>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        let mut problems = Vec::new();
        for s in &samples {
            if s.views.is_empty() {
                problems.push(format!("sample {:?}: no views", s.id));
            }
            if s.parent.trim().is_empty() {
                problems.push(format!("sample {:?}: empty parent", s.id));
            }
            for (k, v) in s.views.iter().enumerate() {
                if let Some(ViewPayload::Feature(f)) = &v.payload {
                    if f.len() != dim {
                        problems.push(format!(
                            "sample {:?} view {k}: feature has {} values, expected {dim}",
                            s.id,
                            f.len()
                        ));
                    }
                }
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let tree = CategoryTree::build(
            samples
                .iter()
                .map(|s| (s.parent.as_str(), s.sub.as_deref())),
        )?;
        Ok(Self { dim, samples, tree })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Resolved `(parent, leaf)` per sample, in sample order.
    pub fn labels(&self) -> Result<Vec<(usize, usize)>> {
        self.samples
            .iter()
            .map(|s| resolve_label(s, &self.tree))
            .collect()
    }

    /// Leaf indices carried by at least one sample, ascending.
    pub fn used_leaves(&self) -> Vec<usize> {
        let mut used: Vec<usize> = self
            .labels()
            .expect("tree built from these samples")
            .into_iter()
            .map(|(_, l)| l)
            .collect();
        used.sort_unstable();
        used.dedup();
        used
    }

    /// Deterministic split holding out `fraction` of each leaf's samples.
    /// Returns `(train, held_out)` sample indices.
    pub fn stratified_split(&self, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::Config(format!("held-out fraction {fraction} not in [0, 1)")));
        }
        let labels = self.labels()?;
        let mut by_leaf: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, (_, l)) in labels.iter().enumerate() {
            by_leaf.entry(*l).or_default().push(i);
        }
        let mut rng = crate::rng::substream(seed, 0x5911);
        let (mut train, mut held) = (Vec::new(), Vec::new());
        for (_, mut idx) in by_leaf {
            rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut rng);
            let n_held = (idx.len() as f64 * fraction).round() as usize;
            let n_held = n_held.min(idx.len().saturating_sub(1));
            held.extend_from_slice(&idx[..n_held]);
            train.extend_from_slice(&idx[n_held..]);
        }
        train.sort_unstable();
        held.sort_unstable();
        Ok((train, held))
    }

    pub fn subset(&self, indices: &[usize]) -> Vec<&TripletSample> {
        indices.iter().map(|&i| &self.samples[i]).collect()
    }
}
