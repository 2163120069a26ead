//! Frozen text and image encoder stubs, view embeddings, and the trainable
//! point-cloud encoder.

pub mod image;
pub mod point;
pub mod text;
pub mod view_embed;

pub use image::{encode_image_frozen, ImageEncoder, RASTER_SIDE};
pub use point::{encode_point_cloud, PointBackbone, PointEncoderParams};
pub use text::{encode_text_frozen, TextEncoder};
pub use view_embed::{embed_view, ViewEmbeddingTables};

use serde::{Deserialize, Serialize};

/// Construction parameters of a frozen encoder. Outputs depend only on this
/// spec and the input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrozenEncoderSpec {
    pub seed: u64,
    pub vocab: usize,
    pub dim: usize,
}

impl FrozenEncoderSpec {
    pub const DEFAULT_VOCAB: usize = 4096;

    pub fn new(seed: u64, dim: usize) -> Self {
        Self {
            seed,
            vocab: Self::DEFAULT_VOCAB,
            dim,
        }
    }
}
