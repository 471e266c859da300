//! Pattern enumeration tree with PrefixSpan-style pseudo-projection.
//!
//! Every node keeps, for each supporting instance, the position just past the
//! leftmost match of its pattern. Children are grown by scanning only those
//! suffixes, so a child's support is always a subset of its parent's.
//! Itemsets are handled by the same machinery: instances are sorted, so the
//! suffix after the last matched item holds exactly the ids that extend the
//! pattern canonically.

use std::collections::BTreeMap;

use crate::data::{Dataset, Pattern, StructureKind, SupportColumn};
use crate::error::{Error, Result};

/// Default ceiling on the number of patterns [`PatternTree::enumerate_all`]
/// will materialize.
pub const DEFAULT_ENUMERATION_CEILING: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct PatternNode {
    pub pattern: Pattern,
    /// Supporting rows, strictly increasing.
    pub rows: Vec<u32>,
    /// Continuation offset into each supporting instance, parallel to `rows`.
    positions: Vec<u32>,
}

impl PatternNode {
    pub fn depth(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_root(&self) -> bool {
        self.pattern.is_empty()
    }

    pub fn column(&self) -> SupportColumn {
        SupportColumn::new(self.pattern.clone(), self.rows.clone())
    }

    pub fn into_column(self) -> SupportColumn {
        SupportColumn::new(self.pattern, self.rows)
    }
}

/// Tree view over an immutable dataset. Cheap to create; traversals own their nodes.
#[derive(Debug, Clone, Copy)]
pub struct PatternTree<'a> {
    dataset: &'a Dataset,
    max_len: usize,
}

impl<'a> PatternTree<'a> {
    pub fn new(dataset: &'a Dataset, max_len: usize) -> Self {
        PatternTree { dataset, max_len }
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Node for the empty pattern, supported by every instance.
    pub fn root(&self) -> PatternNode {
        let n = self.dataset.n() as u32;
        PatternNode {
            pattern: Pattern::new(self.dataset.structure(), Vec::new()),
            rows: (0..n).collect(),
            positions: vec![0; n as usize],
        }
    }

    /// Children of `node` in ascending id order. Empty at the depth cap.
    pub fn expand(&self, node: &PatternNode) -> Vec<PatternNode> {
        if node.depth() >= self.max_len {
            return Vec::new();
        }
        let kind = self.dataset.structure();
        // id -> (rows, positions); BTreeMap keeps children sorted by id.
        let mut buckets: BTreeMap<u32, (Vec<u32>, Vec<u32>)> = BTreeMap::new();
        for (&row, &pos) in node.rows.iter().zip(&node.positions) {
            let items = &self.dataset.instance(row as usize).items;
            for (offset, &id) in items.iter().enumerate().skip(pos as usize) {
                let entry = buckets.entry(id).or_default();
                // Sequences may repeat a token; keep only its first occurrence.
                if kind == StructureKind::Sequence && entry.0.last() == Some(&row) {
                    continue;
                }
                entry.0.push(row);
                entry.1.push(offset as u32 + 1);
            }
        }
        let children: Vec<PatternNode> = buckets
            .into_iter()
            .map(|(id, (rows, positions))| {
                let mut elements = node.pattern.elements.clone();
                elements.push(id);
                PatternNode {
                    pattern: Pattern::new(kind, elements),
                    rows,
                    positions,
                }
            })
            .collect();
        debug_assert!(children.iter().all(|c| is_subset(&c.rows, &node.rows)));
        children
    }

    /// Every nonempty pattern with nonempty support, in depth-first preorder.
    pub fn enumerate_all(&self, ceiling: usize) -> Result<Vec<SupportColumn>> {
        let mut out = Vec::new();
        let mut stack = self.expand(&self.root());
        stack.reverse();
        while let Some(node) = stack.pop() {
            if out.len() >= ceiling {
                return Err(Error::CeilingExceeded { ceiling });
            }
            let mut kids = self.expand(&node);
            kids.reverse();
            stack.extend(kids);
            out.push(node.into_column());
        }
        Ok(out)
    }
}

fn is_subset(child: &[u32], parent: &[u32]) -> bool {
    let mut p = parent.iter();
    child.iter().all(|c| p.any(|x| x == c))
}
