//! Random small datasets for tests, benchmarks and the acceptance suite.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{Dataset, Instance, Pattern, StructureKind, TaskKind};

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub structure: StructureKind,
    pub task: TaskKind,
    pub n: usize,
    pub alphabet: u32,
    pub max_instance_len: usize,
}

/// Draws instances uniformly, then labels them with a sparse planted model
/// over one or two short patterns plus noise.
pub fn random_dataset<R: Rng>(rng: &mut R, spec: &SynthSpec) -> Dataset {
    assert!(spec.n >= 2 && spec.alphabet >= 1);
    let symbols: Vec<u32> = (0..spec.alphabet).collect();
    let mut instances: Vec<Instance> = (0..spec.n)
        .map(|_| {
            let len = rng.gen_range(1..=spec.max_instance_len.max(1));
            let items = match spec.structure {
                StructureKind::Itemset => {
                    let mut items: Vec<u32> =
                        symbols.choose_multiple(rng, len.min(symbols.len())).copied().collect();
                    items.sort_unstable();
                    items
                }
                StructureKind::Sequence => (0..len).map(|_| rng.gen_range(0..spec.alphabet)).collect(),
            };
            Instance { items, label: 0.0 }
        })
        .collect();

    let planted: Vec<(Pattern, f64)> = (0..rng.gen_range(1..=2))
        .map(|_| {
            let len = rng.gen_range(1..=2usize);
            let mut elements: Vec<u32> = match spec.structure {
                StructureKind::Itemset => symbols.choose_multiple(rng, len.min(symbols.len())).copied().collect(),
                StructureKind::Sequence => (0..len).map(|_| rng.gen_range(0..spec.alphabet)).collect(),
            };
            if spec.structure == StructureKind::Itemset {
                elements.sort_unstable();
            }
            let w = rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (Pattern::new(spec.structure, elements), w)
        })
        .collect();

    for inst in &mut instances {
        let signal: f64 = planted
            .iter()
            .filter(|(p, _)| p.occurs_in(&inst.items))
            .map(|(_, w)| w)
            .sum();
        let noisy = signal + rng.gen_range(-0.5..0.5);
        inst.label = match spec.task {
            TaskKind::Regression => noisy,
            TaskKind::Classification => {
                if noisy >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        };
    }

    if spec.task == TaskKind::Classification {
        // Guarantee both classes, each at least twice when n allows.
        let need = if spec.n >= 4 { 2 } else { 1 };
        for target in [1.0, -1.0] {
            let mut have = instances.iter().filter(|i| i.label == target).count();
            let mut idx = 0;
            while have < need {
                if instances[idx].label != target {
                    instances[idx].label = target;
                    have += 1;
                }
                idx += 1;
            }
        }
    }

    Dataset::new(instances, spec.structure, spec.task).expect("synthetic dataset is valid")
}

/// All patterns of length 1..=`max_len` over `alphabet` symbols, without
/// looking at any data. Itemsets are sorted subsets; sequences are all words.
pub fn all_candidate_patterns(kind: StructureKind, alphabet: u32, max_len: usize) -> Vec<Pattern> {
    let mut out = Vec::new();
    let mut frontier: Vec<Vec<u32>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for prefix in &frontier {
            let start = match kind {
                StructureKind::Itemset => prefix.last().map_or(0, |&l| l + 1),
                StructureKind::Sequence => 0,
            };
            for id in start..alphabet {
                let mut p = prefix.clone();
                p.push(id);
                out.push(Pattern::new(kind, p.clone()));
                next.push(p);
            }
        }
        frontier = next;
    }
    out
}
