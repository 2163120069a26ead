//! Switch sweeps comparing zero-shot accuracy across configurations.

use std::fmt;
use std::str::FromStr;

use super::config::TrainConfig;
use super::trainer::train;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::evaluate_zero_shot;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AblationAxis {
    /// View count, sampling and embedding of the image sequence.
    Cis,
    Embeddings,
    WithinView,
    /// Text target granularity and parent classification.
    Htt,
    Jma,
    All,
}

impl FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cis" => Self::Cis,
            "embeddings" => Self::Embeddings,
            "within-view" => Self::WithinView,
            "htt" => Self::Htt,
            "jma" => Self::Jma,
            "all" => Self::All,
            other => {
                return Err(Error::Config(format!(
                    "unknown ablation axis {other:?} (cis, embeddings, within-view, htt, jma, all)"
                )))
            }
        })
    }
}

impl fmt::Display for AblationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cis => "cis",
            Self::Embeddings => "embeddings",
            Self::WithinView => "within-view",
            Self::Htt => "htt",
            Self::Jma => "jma",
            Self::All => "all",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationVariant {
    pub label: String,
    pub config: TrainConfig,
}

fn variant(label: &str, base: &TrainConfig, edit: impl FnOnce(&mut TrainConfig)) -> AblationVariant {
    let mut config = base.clone();
    edit(&mut config);
    AblationVariant {
        label: label.into(),
        config,
    }
}

/// The configurations compared along `axis`, derived from `base`.
pub fn ablation_rows(axis: AblationAxis, base: &TrainConfig) -> Vec<AblationVariant> {
    let seq = |v: usize, windowed: bool, embed: bool| {
        move |c: &mut TrainConfig| {
            c.cis_on = true;
            c.v_views = v;
            c.within_view_on = windowed;
            c.embeddings_on = embed;
        }
    };
    match axis {
        AblationAxis::Cis => vec![
            variant("views=1 random no-embed", base, seq(1, false, false)),
            variant("views=4 random no-embed", base, seq(4, false, false)),
            variant("views=4 random embed", base, seq(4, false, true)),
            variant("views=4 within-view embed", base, seq(4, true, true)),
            variant("views=2 within-view embed", base, seq(2, true, true)),
        ],
        AblationAxis::Embeddings => vec![
            variant("embed on", base, |c| c.embeddings_on = true),
            variant("embed off", base, |c| c.embeddings_on = false),
        ],
        AblationAxis::WithinView => vec![
            variant("within-view on", base, |c| c.within_view_on = true),
            variant("within-view off", base, |c| c.within_view_on = false),
        ],
        AblationAxis::Htt => vec![
            variant("parent text, no cls", base, |c| c.htt_on = false),
            variant("sub text, no cls", base, |c| {
                c.htt_on = true;
                c.parent_cls_on = false
            }),
            variant("sub text + parent cls", base, |c| {
                c.htt_on = true;
                c.parent_cls_on = true
            }),
        ],
        AblationAxis::Jma => vec![
            variant("jma on", base, |c| c.jma_on = true),
            variant("jma off", base, |c| c.jma_on = false),
        ],
        AblationAxis::All => {
            let mut rows = Vec::new();
            for a in [
                AblationAxis::Cis,
                AblationAxis::Embeddings,
                AblationAxis::WithinView,
                AblationAxis::Htt,
            ] {
                for mut v in ablation_rows(a, base) {
                    v.label = format!("{a}: {}", v.label);
                    rows.push(v);
                }
            }
            let sw = |cis: bool, htt: bool, jma: bool| {
                move |c: &mut TrainConfig| {
                    c.cis_on = cis;
                    c.htt_on = htt;
                    c.parent_cls_on = htt;
                    c.jma_on = jma;
                }
            };
            rows.push(variant("jma: cis off, htt off, jma off", base, sw(false, false, false)));
            rows.push(variant("jma: cis on, htt on, jma off", base, sw(true, true, false)));
            rows.push(variant("jma: cis on, htt on, jma on", base, sw(true, true, true)));
            rows
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub label: String,
    pub top1: Vec<f64>,
    pub top5: Vec<f64>,
    pub final_loss: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl AblationRow {
    pub fn mean_top1(&self) -> f64 {
        mean(&self.top1)
    }

    pub fn mean_top5(&self) -> f64 {
        mean(&self.top5)
    }

    pub fn mean_final_loss(&self) -> f64 {
        mean(&self.final_loss)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationTable {
    pub axis: AblationAxis,
    pub seeds: Vec<u64>,
    pub n_classes: usize,
    pub rows: Vec<AblationRow>,
}

impl fmt::Display for AblationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(6).max(6);
        writeln!(
            f,
            "axis {} | {} classes | seeds {:?}",
            self.axis, self.n_classes, self.seeds
        )?;
        writeln!(f, "{:<w$}  {:>7}  {:>7}  {:>10}", "config", "top-1", "top-5", "final loss")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<w$}  {:>6.2}%  {:>6.2}%  {:>10.4}",
                r.label,
                100.0 * r.mean_top1(),
                100.0 * r.mean_top5(),
                r.mean_final_loss()
            )?;
        }
        Ok(())
    }
}

/// Trains every variant of `axis` once per seed on a stratified split
/// holding out `held_out` of each class, and scores zero-shot accuracy on
/// the held-out part against all class prompts.
pub fn run_ablation(
    base: &TrainConfig,
    dataset: &Dataset,
    axis: AblationAxis,
    seeds: &[u64],
    held_out: f64,
) -> Result<AblationTable> {
    if seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one seed".into()));
    }
    let classes: Vec<String> = dataset
        .used_leaves()
        .into_iter()
        .map(|l| dataset.tree.leaves()[l].clone())
        .collect();
    let mut rows = Vec::new();
    for v in ablation_rows(axis, base) {
        let mut row = AblationRow {
            label: v.label.clone(),
            top1: Vec::new(),
            top5: Vec::new(),
            final_loss: Vec::new(),
        };
        for &seed in seeds {
            let cfg = TrainConfig { seed, ..v.config.clone() };
            let (tr, te) = dataset.stratified_split(held_out, seed)?;
            let out = train(&cfg, dataset, &tr, |_, _| Ok(()))?;
            let res = evaluate_zero_shot(&out.model, dataset, &te, &classes, &[1, 5.min(classes.len())])?;
            row.top1.push(res.accuracy[0].1);
            row.top5.push(res.accuracy[1].1);
            row.final_loss.push(*out.epoch_losses.last().expect("at least one epoch"));
        }
        rows.push(row);
    }
    Ok(AblationTable {
        axis,
        seeds: seeds.to_vec(),
        n_classes: classes.len(),
        rows,
    })
}
