//! Angle and depth embedding tables added to frozen view features.

use std::f64::consts::FRAC_PI_4;

use crate::autodiff::kernels::layer_norm_rows;
use crate::autodiff::kernels::LAYER_NORM_EPS;
use crate::dataset::{angle_bucket, NUM_ANGLE_BUCKETS};
use crate::error::{Error, Result};

/// Fixed sinusoidal tables, `30×D` each, indexed by angle bucket.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewEmbeddingTables {
    dim: usize,
    degree: Vec<f64>,
    depth: Vec<f64>,
}

fn sinusoid(dim: usize, amplitude: f64, phase: f64) -> Vec<f64> {
    let mut t = Vec::with_capacity(NUM_ANGLE_BUCKETS * dim);
    for b in 0..NUM_ANGLE_BUCKETS {
        for j in 0..dim {
            let freq = 1.0 / 10000f64.powf((2 * (j / 2)) as f64 / dim as f64);
            let x = b as f64 * freq + phase;
            t.push(amplitude * if j % 2 == 0 { x.sin() } else { x.cos() });
        }
    }
    t
}

impl ViewEmbeddingTables {
    /// Transformer-style tables with amplitude `scale / sqrt(D)`; the depth
    /// table is shifted by a quarter-period phase.
    pub fn sinusoidal(dim: usize, scale: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!("view embedding needs dim >= 2, got {dim}")));
        }
        let amp = scale / (dim as f64).sqrt();
        Ok(Self {
            dim,
            degree: sinusoid(dim, amp, 0.0),
            depth: sinusoid(dim, amp, FRAC_PI_4),
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            degree: vec![0.0; NUM_ANGLE_BUCKETS * dim],
            depth: vec![0.0; NUM_ANGLE_BUCKETS * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree_row(&self, bucket: usize) -> &[f64] {
        &self.degree[bucket * self.dim..(bucket + 1) * self.dim]
    }

    pub fn depth_row(&self, bucket: usize) -> &[f64] {
        &self.depth[bucket * self.dim..(bucket + 1) * self.dim]
    }
}

/// `layer_norm(feature + degree[bucket] + depth[bucket])`.
pub fn embed_view(feature: &[f64], angle_deg: u32, tables: &ViewEmbeddingTables) -> Result<Vec<f64>> {
    let b = angle_bucket(angle_deg)?;
    if feature.len() != tables.dim {
        return Err(Error::shape("embed_view", &[feature.len()], &[tables.dim]));
    }
    if tables.dim < 2 {
        return Err(Error::Contract("layer norm needs at least 2 features".into()));
    }
    let x: Vec<f64> = feature
        .iter()
        .zip(tables.degree_row(b))
        .zip(tables.depth_row(b))
        .map(|((f, a), d)| f + a + d)
        .collect();
    Ok(layer_norm_rows(&x, tables.dim, LAYER_NORM_EPS))
}
