//! Frozen image encoder stub.

use super::FrozenEncoderSpec;
use crate::autodiff::kernels::{self, normalize_in_place};
use crate::dataset::{Raster, ViewPayload, ViewRecord};
use crate::error::{Error, Result};
use crate::rng::{normal_vec, substream};

/// Rasters are reduced to `RASTER_SIDE × RASTER_SIDE` grayscale.
pub const RASTER_SIDE: usize = 16;
const PROJ_STREAM: u64 = 0x1a6e_0001;

#[derive(Clone, Debug)]
pub struct ImageEncoder {
    spec: FrozenEncoderSpec,
    proj: Vec<f64>,
}

impl ImageEncoder {
    pub fn new(spec: FrozenEncoderSpec) -> Result<Self> {
        if spec.dim == 0 {
            return Err(Error::Config("image encoder needs a positive dim".into()));
        }
        let n = RASTER_SIDE * RASTER_SIDE;
        let proj = normal_vec(
            &mut substream(spec.seed, PROJ_STREAM),
            n * spec.dim,
            1.0 / (n as f64).sqrt(),
        );
        Ok(Self { spec, proj })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    /// Precomputed features pass through normalized; rasters are
    /// downsampled, projected and normalized.
    pub fn encode(&self, view: &ViewRecord) -> Result<Vec<f64>> {
        match &view.payload {
            None => Err(Error::Input(format!(
                "view at {} degrees has no payload",
                view.angle_deg
            ))),
            Some(ViewPayload::Feature(f)) => {
                if f.len() != self.spec.dim {
                    return Err(Error::shape("encode_image", &[f.len()], &[self.spec.dim]));
                }
                let mut out = f.clone();
                normalize_in_place(&mut out);
                Ok(out)
            }
            Some(ViewPayload::Raster(r)) => {
                let gray = grayscale_thumbnail(r)?;
                let mut out = kernels::matmul(
                    &gray,
                    &self.proj,
                    1,
                    RASTER_SIDE * RASTER_SIDE,
                    self.spec.dim,
                );
                normalize_in_place(&mut out);
                Ok(out)
            }
        }
    }
}

pub fn encode_image_frozen(view: &ViewRecord, spec: FrozenEncoderSpec) -> Result<Vec<f64>> {
    ImageEncoder::new(spec)?.encode(view)
}

/// Area-averaged `16×16` grayscale in `[0, 1]`. Cells no source pixel falls
/// into (upsampling) take the nearest pixel.
pub fn grayscale_thumbnail(r: &Raster) -> Result<Vec<f64>> {
    let (h, w, c) = (r.height, r.width, r.channels);
    if h == 0 || w == 0 || c == 0 || r.data.len() != h * w * c {
        return Err(Error::Input(format!(
            "raster buffer of {} bytes does not match {h}×{w}×{c}",
            r.data.len()
        )));
    }
    let color = c.min(3);
    let gray = |y: usize, x: usize| {
        let px = &r.data[(y * w + x) * c..(y * w + x) * c + color];
        px.iter().map(|&v| v as f64).sum::<f64>() / (color as f64 * 255.0)
    };
    let s = RASTER_SIDE;
    let mut sum = vec![0.0; s * s];
    let mut count = vec![0usize; s * s];
    for y in 0..h {
        for x in 0..w {
            let cell = (y * s / h) * s + x * s / w;
            sum[cell] += gray(y, x);
            count[cell] += 1;
        }
    }
    Ok((0..s * s)
        .map(|cell| {
            if count[cell] > 0 {
                sum[cell] / count[cell] as f64
            } else {
                gray((cell / s) * h / s, (cell % s) * w / s)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::kernels::norm;
    use crate::dataset::ViewKind;

    fn raster_view(data: Vec<u8>, side: usize) -> ViewRecord {
        ViewRecord::new(
            24,
            ViewKind::Depth,
            ViewPayload::Raster(Raster {
                height: side,
                width: side,
                channels: 1,
                data,
            }),
        )
        .unwrap()
    }

    #[test]
    fn feature_passes_through_normalized() {
        let enc = ImageEncoder::new(FrozenEncoderSpec::new(0, 2)).unwrap();
        let v = ViewRecord::new(0, ViewKind::Rgb, ViewPayload::Feature(vec![3.0, 4.0])).unwrap();
        assert_eq!(enc.encode(&v).unwrap(), vec![0.6, 0.8]);
    }

    #[test]
    fn rasters_are_deterministic_and_zero_safe() {
        let enc = ImageEncoder::new(FrozenEncoderSpec::new(5, 8)).unwrap();
        let data: Vec<u8> = (0..32 * 32).map(|i| (i * 7 % 256) as u8).collect();
        let a = enc.encode(&raster_view(data.clone(), 32)).unwrap();
        assert_eq!(a, enc.encode(&raster_view(data, 32)).unwrap());
        assert!((norm(&a) - 1.0).abs() < 1e-12);
        let z = enc.encode(&raster_view(vec![0; 64], 8)).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_payload_rejected() {
        let enc = ImageEncoder::new(FrozenEncoderSpec::new(5, 8)).unwrap();
        let v = ViewRecord {
            angle_deg: 0,
            kind: ViewKind::Rgb,
            payload: None,
        };
        assert!(matches!(enc.encode(&v), Err(Error::Input(_))));
    }

    #[test]
    fn thumbnail_averages_blocks() {
        let mut data = vec![0u8; 32 * 32];
        data[0] = 255;
        let t = grayscale_thumbnail(&Raster {
            height: 32,
            width: 32,
            channels: 1,
            data,
        })
        .unwrap();
        assert!((t[0] - 0.25).abs() < 1e-15);
        assert!(t[1..].iter().all(|&v| v == 0.0));
    }
}
