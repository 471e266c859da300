//! Instances, datasets, patterns and their support columns.
//!
//! The on-disk format is one instance per line, `<label> <id> <id> ...`.
//! Lines starting with `#` and blank lines are skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StructureKind {
    Itemset,
    Sequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Regression,
    Classification,
}

/// One training input: its items (itemset) or tokens (sequence), and its label.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub items: Vec<u32>,
    pub label: f64,
}

/// Immutable, validated collection of instances sharing one structure kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    instances: Vec<Instance>,
    structure: StructureKind,
    task: TaskKind,
    alphabet_size: u32,
}

impl Dataset {
    /// Validates and wraps `instances`. The alphabet size is one past the
    /// largest id seen.
    pub fn new(instances: Vec<Instance>, structure: StructureKind, task: TaskKind) -> Result<Self> {
        if instances.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 instances, got {}",
                instances.len()
            )));
        }
        let mut alphabet_size = 0u32;
        for (i, inst) in instances.iter().enumerate() {
            check_label(inst.label, task).map_err(|m| Error::InvalidDataset(format!("instance {i}: {m}")))?;
            if structure == StructureKind::Itemset {
                check_itemset(&inst.items).map_err(|m| Error::InvalidDataset(format!("instance {i}: {m}")))?;
            }
            if let Some(&m) = inst.items.iter().max() {
                alphabet_size = alphabet_size.max(m + 1);
            }
        }
        if task == TaskKind::Classification {
            let pos = instances.iter().filter(|i| i.label > 0.0).count();
            if pos == 0 || pos == instances.len() {
                return Err(Error::InvalidDataset(
                    "classification needs both +1 and -1 labels".into(),
                ));
            }
        }
        Ok(Dataset {
            instances,
            structure,
            task,
            alphabet_size,
        })
    }

    pub fn n(&self) -> usize {
        self.instances.len()
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn instance(&self, i: usize) -> &Instance {
        &self.instances[i]
    }

    pub fn structure(&self) -> StructureKind {
        self.structure
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn alphabet_size(&self) -> u32 {
        self.alphabet_size
    }

    pub fn labels(&self) -> Vec<f64> {
        self.instances.iter().map(|i| i.label).collect()
    }

    /// Dataset restricted to `indices` (kept in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let instances = indices.iter().map(|&i| self.instances[i].clone()).collect();
        Dataset::new(instances, self.structure, self.task)
    }

    /// Parses the line format described in the module docs.
    pub fn parse(text: &str, structure: StructureKind, task: TaskKind) -> Result<Self> {
        let mut instances = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let label_tok = fields.next().expect("non-empty line has a field");
            let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad label {label_tok:?}"),
            })?;
            check_label(label, task).map_err(|message| Error::Parse { line, message })?;
            let items = fields
                .map(|tok| {
                    tok.parse::<u32>().map_err(|_| Error::Parse {
                        line,
                        message: format!("bad id {tok:?}"),
                    })
                })
                .collect::<Result<Vec<u32>>>()?;
            if structure == StructureKind::Itemset {
                check_itemset(&items).map_err(|message| Error::Parse { line, message })?;
            }
            instances.push(Instance { items, label });
        }
        Dataset::new(instances, structure, task)
    }

    pub fn load(path: &Path, structure: StructureKind, task: TaskKind) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Dataset::parse(&text, structure, task)
    }

    /// Inverse of [`Dataset::parse`] up to whitespace and label spelling.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for inst in &self.instances {
            match self.task {
                TaskKind::Classification if inst.label > 0.0 => out.push_str("+1"),
                TaskKind::Classification => out.push_str("-1"),
                TaskKind::Regression => write!(out, "{}", inst.label).unwrap(),
            }
            for id in &inst.items {
                write!(out, " {id}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Convenience wrapper matching the CLI's ingestion step.
pub fn load_dataset(path: &Path, structure: StructureKind, task: TaskKind) -> Result<Dataset> {
    Dataset::load(path, structure, task)
}

fn check_label(label: f64, task: TaskKind) -> std::result::Result<(), String> {
    if !label.is_finite() {
        return Err(format!("label {label} is not finite"));
    }
    if task == TaskKind::Classification && label != 1.0 && label != -1.0 {
        return Err(format!("label {label} not in {{-1,+1}}"));
    }
    Ok(())
}

fn check_itemset(items: &[u32]) -> std::result::Result<(), String> {
    for w in items.windows(2) {
        if w[0] == w[1] {
            return Err(format!("duplicate item {}", w[0]));
        }
        if w[0] > w[1] {
            return Err(format!("itemset not strictly increasing at {} > {}", w[0], w[1]));
        }
    }
    Ok(())
}

/// A nonempty itemset or subsequence used as a binary feature.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    pub kind: StructureKind,
    pub elements: Vec<u32>,
}

impl Pattern {
    pub fn new(kind: StructureKind, elements: Vec<u32>) -> Self {
        Pattern { kind, elements }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Naive matcher: subset test for itemsets, gapped subsequence test for
    /// sequences.
    pub fn occurs_in(&self, items: &[u32]) -> bool {
        match self.kind {
            StructureKind::Itemset => self.elements.iter().all(|e| items.binary_search(e).is_ok()),
            StructureKind::Sequence => {
                let mut it = items.iter();
                self.elements.iter().all(|e| it.any(|x| x == e))
            }
        }
    }

    /// Rows of `dataset` containing this pattern, by per-instance matching.
    pub fn support_in(&self, dataset: &Dataset) -> Vec<u32> {
        dataset
            .instances()
            .iter()
            .enumerate()
            .filter(|(_, inst)| self.occurs_in(&inst.items))
            .map(|(i, _)| i as u32)
            .collect()
    }
}

/// A pattern together with the strictly increasing list of rows containing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportColumn {
    pub pattern: Pattern,
    pub rows: Vec<u32>,
}

impl SupportColumn {
    pub fn new(pattern: Pattern, rows: Vec<u32>) -> Self {
        debug_assert!(rows.windows(2).all(|w| w[0] < w[1]));
        SupportColumn { pattern, rows }
    }

    /// Number of ones in the column, which is also its squared norm.
    pub fn count(&self) -> usize {
        self.rows.len()
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.rows.iter().map(|&i| v[i as usize]).sum()
    }

    /// Re-indexes rows through `map` (old row -> new row), dropping rows that
    /// map to `None`.
    pub fn remap(&self, map: &[Option<u32>]) -> SupportColumn {
        let rows = self.rows.iter().filter_map(|&i| map[i as usize]).collect();
        SupportColumn::new(self.pattern.clone(), rows)
    }
}

/// Regularization and solver controls for a single fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub lambda: f64,
    pub kappa: f64,
    /// Duality-gap tolerance.
    pub epsilon: f64,
    /// Epochs during which two references are both updated.
    pub dyn_m: usize,
    /// Number of every-other-epoch screening cycles before the slow cadence.
    pub dense_t: usize,
    pub max_len: usize,
    pub max_epochs: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lambda: 1.0,
            kappa: 0.0,
            epsilon: 1e-4,
            dyn_m: 1,
            dense_t: 5,
            max_len: 3,
            max_epochs: 100_000,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidHyperparams(m.to_string()));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be positive and finite");
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad("kappa must be non-negative and finite");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.max_len == 0 {
            return bad("max pattern length must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max epochs must be at least 1");
        }
        Ok(())
    }
}
