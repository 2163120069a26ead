//! Two-level category hierarchy: parent categories owning subcategory leaves.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Parent → subcategory tree with dense, lexicographically ordered indices.
///
/// Every parent owns a fallback leaf carrying the parent's own name, used
/// for samples whose subcategory is missing, so label resolution is total
/// over registered parents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CategoryTree {
    parents: Vec<String>,
    children: Vec<Vec<usize>>,
    leaves: Vec<String>,
    leaf_parent: Vec<usize>,
    parent_index: BTreeMap<String, usize>,
    leaf_index: BTreeMap<String, usize>,
}

impl CategoryTree {
    /// Builds the tree from `(parent, subcategory)` pairs. Order of the
    /// pairs does not matter.
    pub fn build<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, Option<&'a str>)>,
    {
        let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (parent, sub) in pairs {
            if parent.trim().is_empty() {
                return Err(Error::Label("empty parent category".into()));
            }
            let entry = map.entry(parent.to_string()).or_default();
            entry.insert(parent.to_string());
            if let Some(s) = sub {
                if s.trim().is_empty() {
                    return Err(Error::Label(format!("empty subcategory under {parent}")));
                }
                entry.insert(s.to_string());
            }
        }

        let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
        for (parent, subs) in &map {
            for s in subs {
                if let Some(prev) = owner.insert(s.as_str(), parent.as_str()) {
                    return Err(Error::Label(format!(
                        "subcategory {s:?} claimed by both {prev:?} and {parent:?}"
                    )));
                }
            }
        }

        let parents: Vec<String> = map.keys().cloned().collect();
        let mut leaves = Vec::new();
        let mut leaf_parent = Vec::new();
        let mut children = Vec::new();
        for (p, subs) in map.values().enumerate() {
            let mut mine = Vec::new();
            for s in subs {
                mine.push(leaves.len());
                leaves.push(s.clone());
                leaf_parent.push(p);
            }
            children.push(mine);
        }
        let parent_index = parents.iter().cloned().zip(0..).collect();
        let leaf_index = leaves.iter().cloned().zip(0..).collect();
        Ok(Self {
            parents,
            children,
            leaves,
            leaf_parent,
            parent_index,
            leaf_index,
        })
    }

    pub fn parents(&self) -> &[String] {
        &self.parents
    }

    pub fn leaves(&self) -> &[String] {
        &self.leaves
    }

    pub fn num_parents(&self) -> usize {
        self.parents.len()
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn parent_index(&self, name: &str) -> Option<usize> {
        self.parent_index.get(name).copied()
    }

    pub fn leaf_index(&self, name: &str) -> Option<usize> {
        self.leaf_index.get(name).copied()
    }

    pub fn parent_of_leaf(&self, leaf: usize) -> usize {
        self.leaf_parent[leaf]
    }

    /// Leaf indices under `parent`, fallback leaf included.
    pub fn children(&self, parent: usize) -> &[usize] {
        &self.children[parent]
    }

    pub fn fallback_leaf(&self, parent: usize) -> usize {
        self.leaf_index[&self.parents[parent]]
    }

    /// `(parent_index, leaf_index)` for a parent name and optional
    /// subcategory. Unregistered or missing subcategories resolve to the
    /// parent's fallback leaf.
    pub fn resolve(&self, parent: &str, sub: Option<&str>) -> Result<(usize, usize)> {
        let p = self
            .parent_index(parent)
            .ok_or_else(|| Error::Label(format!("unknown parent category {parent:?}")))?;
        let leaf = match sub.and_then(|s| self.leaf_index(s)) {
            Some(l) if self.leaf_parent[l] == p => l,
            Some(l) => {
                return Err(Error::Label(format!(
                    "subcategory {:?} belongs to {:?}, not {parent:?}",
                    self.leaves[l], self.parents[self.leaf_parent[l]]
                )))
            }
            None => self.fallback_leaf(p),
        };
        Ok((p, leaf))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_tree() -> CategoryTree {
        CategoryTree::build([
            ("bed", Some("bunk")),
            ("bottle", Some("jug")),
            ("bed", Some("cot")),
            ("airplane", Some("jet")),
            ("bottle", None),
        ])
        .unwrap()
    }

    #[test]
    fn indices_are_dense_and_lexicographic() {
        let t = sample_tree();
        assert_eq!(t.parents(), &["airplane", "bed", "bottle"]);
        assert_eq!(
            t.leaves(),
            &["airplane", "jet", "bed", "bunk", "cot", "bottle", "jug"]
        );
        let idx: BTreeSet<usize> = t.leaves().iter().map(|l| t.leaf_index(l).unwrap()).collect();
        assert_eq!(idx, (0..t.num_leaves()).collect());
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let a = sample_tree();
        let b = CategoryTree::build([
            ("bottle", None),
            ("airplane", Some("jet")),
            ("bed", Some("cot")),
            ("bottle", Some("jug")),
            ("bed", Some("bunk")),
        ])
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn resolve_examples() {
        let t = sample_tree();
        let (p, l) = t.resolve("bed", Some("bunk")).unwrap();
        assert_eq!(t.parents()[p], "bed");
        assert_eq!(t.leaves()[l], "bunk");

        let (p, l) = t.resolve("bottle", None).unwrap();
        assert_eq!(p, t.parent_index("bottle").unwrap());
        assert_eq!(l, t.fallback_leaf(p));
        assert_eq!(t.leaves()[l], "bottle");

        assert!(matches!(
            t.resolve("unknownthing", Some("x")),
            Err(Error::Label(_))
        ));
        // Unregistered subcategory falls back.
        let (_, l) = t.resolve("airplane", Some("glider")).unwrap();
        assert_eq!(t.leaves()[l], "airplane");
        // Registered under another parent.
        assert!(t.resolve("bed", Some("jet")).is_err());
    }

    #[test]
    fn subcategory_with_two_parents_rejected() {
        assert!(CategoryTree::build([("a", Some("x")), ("b", Some("x"))]).is_err());
        assert!(CategoryTree::build([("a", None), ("b", Some("a"))]).is_err());
    }
}
