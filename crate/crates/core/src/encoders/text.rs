//! Hash-based frozen text encoder.

use super::FrozenEncoderSpec;
use crate::autodiff::kernels::{self, normalize_in_place};
use crate::error::{Error, Result};
use crate::rng::{fnv1a, normal_vec, substream};

const TABLE_STREAM: u64 = 0x7e47_0001;
const PROJ_STREAM: u64 = 0x7e47_0002;

/// Tokens are lowercase runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Tokens hash into a seeded Gaussian embedding table (rows materialized on
/// demand), are mean-pooled, projected by a fixed `D×D` matrix and
/// L2-normalized.
#[derive(Clone, Debug)]
pub struct TextEncoder {
    spec: FrozenEncoderSpec,
    proj: Vec<f64>,
}

impl TextEncoder {
    pub fn new(spec: FrozenEncoderSpec) -> Result<Self> {
        if spec.dim == 0 || spec.vocab == 0 {
            return Err(Error::Config("text encoder needs positive dim and vocab".into()));
        }
        let d = spec.dim;
        let proj = normal_vec(
            &mut substream(spec.seed, PROJ_STREAM),
            d * d,
            1.0 / (d as f64).sqrt(),
        );
        Ok(Self { spec, proj })
    }

    pub fn spec(&self) -> FrozenEncoderSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    fn bucket(&self, token: &str) -> u64 {
        (fnv1a(token.as_bytes()) ^ self.spec.seed) % self.spec.vocab as u64
    }

    fn table_row(&self, bucket: u64) -> Vec<f64> {
        let mut rng = substream(self.spec.seed ^ TABLE_STREAM, bucket);
        normal_vec(&mut rng, self.spec.dim, 1.0)
    }

    pub fn encode(&self, text: &str) -> Result<Vec<f64>> {
        if text.trim().is_empty() {
            return Err(Error::Input("cannot encode empty text".into()));
        }
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::Input(format!("no tokens in {text:?}")));
        }
        let d = self.spec.dim;
        let mut pooled = vec![0.0; d];
        for t in &tokens {
            for (p, v) in pooled.iter_mut().zip(self.table_row(self.bucket(t))) {
                *p += v;
            }
        }
        pooled.iter_mut().for_each(|p| *p /= tokens.len() as f64);
        let mut out = kernels::matmul(&pooled, &self.proj, 1, d, d);
        normalize_in_place(&mut out);
        Ok(out)
    }
}

pub fn encode_text_frozen(text: &str, spec: FrozenEncoderSpec) -> Result<Vec<f64>> {
    TextEncoder::new(spec)?.encode(text)
}
