//! Regularization paths over `(lambda, kappa)` and cross-validation paths.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, Hyperparams, TaskKind};
use crate::error::{Error, Result};
use crate::objective::{centered_residual, Loss};
use crate::screening::find_max_abs_inner;
use crate::solution::{ReferenceSolution, SparseModel};
use crate::solver::{fit, FitReport};

/// Smallest `lambda` at which the zero coefficient vector is optimal.
pub fn lambda_max(dataset: &Dataset, loss: Loss, max_len: usize) -> f64 {
    let y = dataset.labels();
    let z = vec![loss.null_intercept(&y); y.len()];
    let c = centered_residual(loss, &y, &z);
    if c.iter().all(|v| v.abs() <= f64::EPSILON) {
        warn!("null-model residual vanishes; lambda_max is 0");
        return 0.0;
    }
    find_max_abs_inner(dataset, &c, max_len).0
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    /// Strictly decreasing, starting at `lambda_max`.
    pub lambdas: Vec<f64>,
    /// Strictly increasing, starting at 0.
    pub kappas: Vec<f64>,
}

impl PathGrid {
    pub fn cells(&self) -> usize {
        self.lambdas.len() * self.kappas.len()
    }
}

/// `count` log-spaced values from `lambda_max` down to `ratio * lambda_max`
/// (both inclusive), paired with the given ascending `kappas`.
pub fn make_grid(lambda_max: f64, count: usize, ratio: f64, kappas: &[f64]) -> Result<PathGrid> {
    if count < 2 {
        return Err(Error::InvalidGrid(format!("need at least 2 lambda values, got {count}")));
    }
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::InvalidGrid(format!("lambda_max must be positive, got {lambda_max}")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidGrid(format!("lambda ratio must lie in (0, 1), got {ratio}")));
    }
    validate_kappas(kappas)?;
    let step = ratio.ln() / (count - 1) as f64;
    let lambdas = (0..count).map(|k| lambda_max * (step * k as f64).exp()).collect();
    Ok(PathGrid {
        lambdas,
        kappas: kappas.to_vec(),
    })
}

fn validate_kappas(kappas: &[f64]) -> Result<()> {
    match kappas.first() {
        None => return Err(Error::InvalidGrid("empty kappa list".into())),
        Some(&k) if k != 0.0 => return Err(Error::InvalidGrid(format!("kappa list must start at 0, got {k}"))),
        _ => {}
    }
    if kappas.iter().any(|k| !k.is_finite()) {
        return Err(Error::InvalidGrid("kappa values must be finite".into()));
    }
    if kappas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("kappa list must be strictly ascending".into()));
    }
    Ok(())
}

/// Which neighbours warm-start a path cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMode {
    /// The previous lambda in the same kappa column, else the previous kappa.
    Single,
    /// Both the previous lambda and the previous kappa when they exist.
    Multi,
}

#[derive(Debug, Clone)]
pub struct PathCell {
    /// Zero-based lambda index.
    pub k: usize,
    /// Zero-based kappa index.
    pub kp: usize,
    pub lambda: f64,
    pub kappa: f64,
    pub solution: ReferenceSolution,
    pub report: FitReport,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct PathResult {
    pub grid: PathGrid,
    /// Cells in visit order.
    pub cells: Vec<PathCell>,
}

impl PathResult {
    pub fn get(&self, k: usize, kp: usize) -> Option<&PathCell> {
        self.cells.iter().find(|c| c.k == k && c.kp == kp)
    }
}

pub fn path_2d(dataset: &Dataset, loss: Loss, grid: &PathGrid, hp: &Hyperparams) -> Result<PathResult> {
    path_2d_with(dataset, loss, grid, hp, ReferenceMode::Multi)
}

/// Solves every grid cell, lambda outer and kappa inner.
pub fn path_2d_with(
    dataset: &Dataset,
    loss: Loss,
    grid: &PathGrid,
    hp: &Hyperparams,
    mode: ReferenceMode,
) -> Result<PathResult> {
    let width = grid.kappas.len();
    let mut cells: Vec<PathCell> = Vec::with_capacity(grid.cells());
    for (k, &lambda) in grid.lambdas.iter().enumerate() {
        for (kp, &kappa) in grid.kappas.iter().enumerate() {
            let up = (k > 0).then(|| &cells[(k - 1) * width + kp].solution);
            let left = (kp > 0).then(|| &cells[k * width + kp - 1].solution);
            let refs: Vec<&ReferenceSolution> = match mode {
                ReferenceMode::Multi => up.into_iter().chain(left).collect(),
                ReferenceMode::Single => up.or(left).into_iter().collect(),
            };
            let cell_hp = Hyperparams { lambda, kappa, ..hp.clone() };
            let start = Instant::now();
            let out = fit(dataset, loss, &cell_hp, &refs)?;
            let wall_time = start.elapsed();
            info!(
                "cell ({k},{kp}) lambda={lambda:.4e} kappa={kappa} refs={} epochs={} gap={:.2e}",
                out.report.reference_count, out.report.epochs, out.solution.gap
            );
            cells.push(PathCell {
                k,
                kp,
                lambda,
                kappa,
                solution: out.solution,
                report: out.report,
                wall_time,
            });
        }
    }
    Ok(PathResult {
        grid: grid.clone(),
        cells,
    })
}

/// Training index sets; the first is always the full dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    folds: Vec<Vec<usize>>,
    n: usize,
}

impl FoldPlan {
    /// Full data plus one fold per held-out instance.
    pub fn leave_one_out(n: usize) -> Self {
        let mut folds = vec![(0..n).collect::<Vec<_>>()];
        for held in 0..n {
            folds.push((0..n).filter(|&i| i != held).collect());
        }
        FoldPlan { folds, n }
    }

    /// Full data plus `k` folds from a seeded shuffle.
    pub fn k_fold(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 2 || k > n {
            return Err(Error::InvalidGrid(format!("fold count must lie in [2, {n}], got {k}")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut folds = vec![(0..n).collect::<Vec<_>>()];
        for f in 0..k {
            let mut train: Vec<usize> = order
                .iter()
                .enumerate()
                .filter(|(pos, _)| pos % k != f)
                .map(|(_, &i)| i)
                .collect();
            train.sort_unstable();
            folds.push(train);
        }
        Ok(FoldPlan { folds, n })
    }

    pub fn from_folds(n: usize, folds: Vec<Vec<usize>>) -> Result<Self> {
        let full: Vec<usize> = (0..n).collect();
        if folds.first() != Some(&full) {
            return Err(Error::InvalidGrid("first fold must be the full index set".into()));
        }
        for f in &folds[1..] {
            if f.len() >= n || f.windows(2).any(|w| w[1] <= w[0]) || f.iter().any(|&i| i >= n) {
                return Err(Error::InvalidGrid("folds after the first must be proper sorted subsets".into()));
            }
        }
        Ok(FoldPlan { folds, n })
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    pub fn train(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    pub fn held_out(&self, fold: usize) -> Vec<usize> {
        let train = &self.folds[fold];
        (0..self.n).filter(|i| train.binary_search(i).is_err()).collect()
    }
}

/// Held-out mean squared error (regression) or 0-1 error (classification).
pub fn validation_metric(dataset: &Dataset, model: &SparseModel, rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return f64::NAN;
    }
    let total: f64 = rows
        .iter()
        .map(|&i| {
            let inst = dataset.instance(i);
            let z = model.predict_items(&inst.items);
            match dataset.task() {
                TaskKind::Regression => (inst.label - z) * (inst.label - z),
                TaskKind::Classification => {
                    let predicted = if z >= 0.0 { 1.0 } else { -1.0 };
                    if predicted == inst.label {
                        0.0
                    } else {
                        1.0
                    }
                }
            }
        })
        .sum();
    total / rows.len() as f64
}

#[derive(Debug, Clone)]
pub struct CvRecord {
    /// Zero-based; fold 0 is the full dataset.
    pub fold: usize,
    pub lambda_index: usize,
    pub lambda: f64,
    pub kappa: f64,
    /// NaN for fold 0, which holds nothing out.
    pub metric: f64,
    pub solution: ReferenceSolution,
    pub report: FitReport,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    /// Fold-major order: all of fold 0, then fold 1, and so on.
    pub records: Vec<CvRecord>,
}

impl CvResult {
    pub fn validation_records(&self) -> impl Iterator<Item = &CvRecord> {
        self.records.iter().filter(|r| r.fold > 0)
    }
}

fn solve_fold(
    dataset: &Dataset,
    full: Option<(&Dataset, &[CvRecord])>,
    fold: usize,
    train: &[usize],
    loss: Loss,
    lambdas: &[f64],
    hp: &Hyperparams,
    held_out: &[usize],
) -> Result<Vec<CvRecord>> {
    let mut out: Vec<CvRecord> = Vec::with_capacity(lambdas.len());
    for (kp, &lambda) in lambdas.iter().enumerate() {
        let anchor = full.map(|(full_data, full_records)| full_records[kp].solution.restrict_to(full_data, train));
        let refs: Vec<&ReferenceSolution> = anchor
            .iter()
            .chain(kp.checked_sub(1).map(|p| &out[p].solution))
            .collect();
        let cell_hp = Hyperparams { lambda, ..hp.clone() };
        let fitted = fit(dataset, loss, &cell_hp, &refs)?;
        let metric = match full {
            Some((full_data, _)) => validation_metric(full_data, &fitted.solution.model, held_out),
            None => f64::NAN,
        };
        out.push(CvRecord {
            fold,
            lambda_index: kp,
            lambda,
            kappa: hp.kappa,
            metric,
            solution: fitted.solution,
            report: fitted.report,
        });
    }
    Ok(out)
}

/// Solves the full-data path first, then every fold over the same lambdas,
/// warm-started from the full-data solution at the same lambda and the
/// fold's own solution at the previous lambda. Folds after the first run on
/// up to `threads` workers.
pub fn cv_path(
    dataset: &Dataset,
    loss: Loss,
    plan: &FoldPlan,
    lambdas: &[f64],
    hp: &Hyperparams,
    threads: usize,
) -> Result<CvResult> {
    if plan.n != dataset.n() {
        return Err(Error::InvalidGrid(format!("fold plan covers {} rows, dataset has {}", plan.n, dataset.n())));
    }
    if lambdas.is_empty() || lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidGrid("lambda sequence must be non-empty and strictly decreasing".into()));
    }
    let full = solve_fold(dataset, None, 0, plan.train(0), loss, lambdas, hp, &[])?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidHyperparams(format!("thread pool: {e}")))?;
    let rest: Vec<Vec<CvRecord>> = pool.install(|| {
        (1..plan.len())
            .into_par_iter()
            .map(|fold| {
                let train = plan.train(fold);
                let reduced = dataset.subset(train)?;
                solve_fold(
                    &reduced,
                    Some((dataset, &full)),
                    fold,
                    train,
                    loss,
                    lambdas,
                    hp,
                    &plan.held_out(fold),
                )
            })
            .collect::<Result<_>>()
    })?;

    let mut records = full;
    records.extend(rest.into_iter().flatten());
    Ok(CvResult { records })
}

/// `(lambda, kappa)` with the lowest fold-averaged validation metric; ties go
/// to the larger lambda, then the smaller kappa.
pub fn select_hyperparams<'a>(records: impl IntoIterator<Item = &'a CvRecord>) -> Option<(f64, f64)> {
    let mut sums: BTreeMap<(u64, u64), (f64, f64, f64, usize)> = BTreeMap::new();
    for r in records {
        if r.metric.is_nan() {
            continue;
        }
        let e = sums
            .entry((r.lambda.to_bits(), r.kappa.to_bits()))
            .or_insert((r.lambda, r.kappa, 0.0, 0));
        e.2 += r.metric;
        e.3 += 1;
    }
    let mut best: Option<(f64, f64, f64)> = None;
    for (lambda, kappa, sum, count) in sums.into_values() {
        let avg = sum / count as f64;
        let better = match best {
            None => true,
            Some((bl, bk, ba)) => {
                avg < ba || (avg == ba && (lambda > bl || (lambda == bl && kappa < bk)))
            }
        };
        if better {
            best = Some((lambda, kappa, avg));
        }
    }
    best.map(|(l, k, _)| (l, k))
}
