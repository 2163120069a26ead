//! Training configuration.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alignment::{LossSwitches, LossWeights, NceMode};
use crate::dataset::synth::DEFAULT_TEMPLATE;
use crate::error::{Error, Result};

/// Every knob of a training run. Serialized as flat `key = value` TOML;
/// missing keys take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub base_lr: f64,
    pub epochs: usize,
    pub v_views: usize,
    pub omega_deg: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub cis_on: bool,
    pub htt_on: bool,
    pub jma_on: bool,
    pub embeddings_on: bool,
    pub within_view_on: bool,
    /// Parent classification loss; only active when `htt_on`.
    pub parent_cls_on: bool,
    pub tau_init: f64,
    pub learn_temperature: bool,
    pub nce_mode: NceMode,
    pub normalize_joint: bool,
    pub hidden: usize,
    pub cls_hidden: usize,
    pub embed_scale: f64,
    /// Points kept per cloud (clouds with fewer points are used whole).
    pub num_points: usize,
    pub text_seed: u64,
    pub image_seed: u64,
    pub template: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            base_lr: 1e-3,
            epochs: 250,
            v_views: 2,
            omega_deg: 60.0,
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            cis_on: true,
            htt_on: true,
            jma_on: true,
            embeddings_on: true,
            within_view_on: true,
            parent_cls_on: true,
            tau_init: 0.07,
            learn_temperature: true,
            nce_mode: NceMode::Symmetric,
            normalize_joint: true,
            hidden: 64,
            cls_hidden: 32,
            embed_scale: 0.25,
            num_points: 1024,
            text_seed: 0,
            image_seed: 1,
            template: DEFAULT_TEMPLATE.into(),
        }
    }
}

/// How views are picked for one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewPlan {
    pub v: usize,
    pub windowed: bool,
    pub embed: bool,
    pub omega_deg: f64,
}

impl TrainConfig {
    /// Every violated invariant, joined into one error.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("v_views", self.v_views),
            ("hidden", self.hidden),
            ("cls_hidden", self.cls_hidden),
            ("num_points", self.num_points),
        ] {
            if v == 0 {
                bad.push(format!("{name} must be positive"));
            }
        }
        if self.batch_size == 1 {
            bad.push("batch_size must be at least 2 for contrastive negatives".into());
        }
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.base_lr) {
            bad.push(format!("base_lr must be positive, got {}", self.base_lr));
        }
        if !(self.omega_deg > 0.0 && self.omega_deg <= 180.0) {
            bad.push(format!("omega_deg must be in (0, 180], got {}", self.omega_deg));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            bad.push(format!("weight_decay must be nonnegative, got {}", self.weight_decay));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                bad.push(format!("{name} must be in [0, 1), got {b}"));
            }
        }
        if !pos(self.adam_eps) {
            bad.push(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        if !pos(self.tau_init) {
            bad.push(format!("tau_init must be positive, got {}", self.tau_init));
        }
        if !(self.embed_scale >= 0.0 && self.embed_scale.is_finite()) {
            bad.push(format!("embed_scale must be nonnegative, got {}", self.embed_scale));
        }
        if self.template.matches("[CLASS]").count() != 1 {
            bad.push("template must contain exactly one [CLASS] slot".into());
        }
        if let Err(e) = self.loss_weights() {
            bad.push(e.to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    pub fn loss_weights(&self) -> Result<LossWeights> {
        LossWeights::new(self.lambda1, self.lambda2, self.lambda3)
    }

    /// With the image sequence off, one random view without embedding.
    pub fn view_plan(&self) -> ViewPlan {
        if self.cis_on {
            ViewPlan {
                v: self.v_views,
                windowed: self.within_view_on,
                embed: self.embeddings_on,
                omega_deg: self.omega_deg,
            }
        } else {
            ViewPlan {
                v: 1,
                windowed: false,
                embed: false,
                omega_deg: self.omega_deg,
            }
        }
    }

    pub fn loss_switches(&self) -> LossSwitches {
        LossSwitches {
            jma_on: self.jma_on,
            parent_cls_on: self.htt_on && self.parent_cls_on,
            normalize_joint: self.normalize_joint,
            mode: self.nce_mode,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Hex SHA-256 of the TOML echo.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_published_protocol() {
        let c = TrainConfig::default();
        assert_eq!((c.batch_size, c.epochs), (128, 250));
        assert_eq!(c.base_lr, 1e-3);
        assert_eq!(c.omega_deg, 60.0);
        assert_eq!((c.beta1, c.beta2, c.adam_eps, c.weight_decay), (0.9, 0.999, 1e-8, 0.01));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = TrainConfig {
            tau_init: 0.1,
            jma_on: false,
            ..TrainConfig::default()
        };
        assert_eq!(TrainConfig::from_toml(&c.to_toml()).unwrap(), c);
        let partial = TrainConfig::from_toml("epochs = 3\nbatch_size = 16\n").unwrap();
        assert_eq!(partial.epochs, 3);
        assert_eq!(partial.base_lr, 1e-3);
        assert!(TrainConfig::from_toml("bogus = 1").is_err());
        assert_ne!(c.hash(), TrainConfig::default().hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn all_violations_reported() {
        let c = TrainConfig {
            batch_size: 0,
            omega_deg: 0.0,
            lambda1: 0.0,
            lambda2: 0.0,
            lambda3: 0.0,
            ..TrainConfig::default()
        };
        let Err(Error::Config(msg)) = c.validate() else { panic!() };
        assert!(msg.contains("batch_size") && msg.contains("omega_deg") && msg.contains("loss weight"), "{msg}");
    }

    #[test]
    fn switches_follow_flags() {
        let off = TrainConfig {
            cis_on: false,
            ..TrainConfig::default()
        };
        assert_eq!(off.view_plan().v, 1);
        assert!(!off.view_plan().embed && !off.view_plan().windowed);
        let no_htt = TrainConfig {
            htt_on: false,
            ..TrainConfig::default()
        };
        assert!(!no_htt.loss_switches().parent_cls_on);
    }
}
