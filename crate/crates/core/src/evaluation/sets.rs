//! Built-in ModelNet40 evaluation splits.

use std::collections::BTreeSet;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MODELNET40_ALL: [&str; 40] = [
    "airplane", "bathtub", "bed", "bench", "bookshelf", "bottle", "bowl", "car", "chair", "cone",
    "cup", "curtain", "desk", "door", "dresser", "flower_pot", "glass_box", "guitar", "keyboard",
    "lamp", "laptop", "mantel", "monitor", "night_stand", "person", "piano", "plant", "radio",
    "range_hood", "sink", "sofa", "stairs", "stool", "table", "tent", "toilet", "tv_stand", "vase",
    "wardrobe", "xbox",
];

/// Classes kept after removing those shared with the pre-training vocabulary.
pub const MODELNET40_MEDIUM: [&str; 22] = [
    "cone", "cup", "curtain", "door", "dresser", "glass_box", "mantel", "monitor", "night_stand",
    "person", "plant", "radio", "range_hood", "sink", "stairs", "stool", "tent", "toilet",
    "tv_stand", "vase", "wardrobe", "xbox",
];

/// Medium minus semantically close classes.
pub const MODELNET40_HARD: [&str; 17] = [
    "cone", "curtain", "door", "dresser", "glass_box", "mantel", "night_stand", "person", "plant",
    "radio", "range_hood", "sink", "stairs", "tent", "toilet", "tv_stand", "xbox",
];

/// SHA-256 of [`canonical_listing`] for the three lists above.
pub const MODELNET40_CHECKSUM: &str = "733f8a19df51009025d18889c70ce6ce41162d50282c0225218adc5b3db6f4c5";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalSet {
    pub name: String,
    pub classes: Vec<String>,
}

impl EvalSet {
    pub fn new(name: impl Into<String>, classes: Vec<String>) -> Result<Self> {
        let name = name.into();
        if classes.is_empty() {
            return Err(Error::Input(format!("evaluation set {name} has no classes")));
        }
        let mut seen = BTreeSet::new();
        for c in &classes {
            if c.trim().is_empty() {
                return Err(Error::Input(format!("evaluation set {name} has an empty class name")));
            }
            if !seen.insert(c.as_str()) {
                return Err(Error::Input(format!("evaluation set {name} repeats class {c:?}")));
            }
        }
        Ok(Self { name, classes })
    }

    /// One class per line; blank lines and `#` comments are ignored.
    pub fn from_file(name: impl Into<String>, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let classes = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect();
        Self::new(name, classes)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn contains(&self, class: &str) -> bool {
        self.classes.iter().any(|c| c == class)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelNetSets {
    pub all: EvalSet,
    pub medium: EvalSet,
    pub hard: EvalSet,
}

/// `name:class,class,...\n` per set, in All/Medium/Hard order.
pub fn canonical_listing(sets: &[(&str, &[&str])]) -> String {
    sets.iter()
        .map(|(n, c)| format!("{n}:{}\n", c.join(",")))
        .collect()
}

pub fn modelnet_checksum() -> String {
    let listing = canonical_listing(&[
        ("All", &MODELNET40_ALL),
        ("Medium", &MODELNET40_MEDIUM),
        ("Hard", &MODELNET40_HARD),
    ]);
    hex::encode(Sha256::digest(listing.as_bytes()))
}

pub fn modelnet_eval_sets() -> ModelNetSets {
    debug_assert_eq!(modelnet_checksum(), MODELNET40_CHECKSUM);
    let mk = |name: &str, c: &[&str]| {
        EvalSet::new(name, c.iter().map(|s| s.to_string()).collect()).expect("built-in set is valid")
    };
    ModelNetSets {
        all: mk("All", &MODELNET40_ALL),
        medium: mk("Medium", &MODELNET40_MEDIUM),
        hard: mk("Hard", &MODELNET40_HARD),
    }
}
