//! Coordinate descent on a safe working set with dynamic screening.
//!
//! A fit starts from one or two reference solutions, prunes the pattern tree
//! with them, and then runs cyclic coordinate sweeps over the surviving
//! columns. Each sweep is one epoch. Screening is re-applied on a fixed
//! cadence with balls built from the current iterates. With two references
//! both iterates are advanced until epoch `M`, after which only the one with
//! the smaller duality gap is kept.

use std::collections::HashMap;

use log::debug;

use crate::data::{Dataset, Hyperparams, Pattern, SupportColumn};
use crate::error::{Error, Result};
use crate::objective::{dual_scale_restricted, make_reference, null_reference, sigmoid, Loss};
use crate::screening::{spp_traverse, ScreeningBall, ScreeningRule, TraversalStats};
use crate::solution::{ReferenceSolution, SparseModel, Term};

/// Optimization state over a fixed list of columns.
#[derive(Debug, Clone)]
pub struct SolveState {
    loss: Loss,
    lambda: f64,
    kappa: f64,
    y: Vec<f64>,
    columns: Vec<SupportColumn>,
    coef: Vec<f64>,
    intercept: f64,
    /// `X beta + 1 beta0`, maintained incrementally.
    margins: Vec<f64>,
}

impl SolveState {
    /// Starts from `init`, keeping only its coefficients on `columns`.
    pub fn new(
        dataset: &Dataset,
        loss: Loss,
        lambda: f64,
        kappa: f64,
        columns: Vec<SupportColumn>,
        init: &SparseModel,
    ) -> Self {
        let known: HashMap<&Pattern, f64> = init.terms.iter().map(|t| (&t.column.pattern, t.coef)).collect();
        let coef: Vec<f64> = columns
            .iter()
            .map(|c| known.get(&c.pattern).copied().unwrap_or(0.0))
            .collect();
        let mut state = SolveState {
            loss,
            lambda,
            kappa,
            y: dataset.labels(),
            columns,
            coef,
            intercept: init.intercept,
            margins: Vec::new(),
        };
        state.margins = state.recompute_margins();
        state
    }

    pub fn columns(&self) -> &[SupportColumn] {
        &self.columns
    }

    pub fn coef(&self) -> &[f64] {
        &self.coef
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn margins(&self) -> &[f64] {
        &self.margins
    }

    pub fn set_intercept(&mut self, b0: f64) {
        let shift = b0 - self.intercept;
        self.intercept = b0;
        self.margins.iter_mut().for_each(|z| *z += shift);
    }

    fn recompute_margins(&self) -> Vec<f64> {
        let mut z = vec![self.intercept; self.y.len()];
        for (col, &b) in self.columns.iter().zip(&self.coef) {
            if b != 0.0 {
                for &i in &col.rows {
                    z[i as usize] += b;
                }
            }
        }
        z
    }

    pub fn objective(&self) -> f64 {
        let l1: f64 = self.coef.iter().map(|b| b.abs()).sum();
        let l2: f64 = self.coef.iter().map(|b| b * b).sum();
        self.loss.value(&self.y, &self.margins) + self.lambda * (l1 + 0.5 * self.kappa * l2)
    }

    /// Proximal step on coordinate `j`. The squared loss uses its exact
    /// curvature `|x_j|^2`, which makes the step an exact minimization. The
    /// logistic loss first tries the local curvature `sum p_i (1 - p_i)` and
    /// falls back to the global bound `|x_j|^2 / 4` when that step would not
    /// decrease the objective.
    pub fn coordinate_update(&mut self, j: usize) {
        let rows = &self.columns[j].rows;
        if rows.is_empty() {
            return;
        }
        let old = self.coef[j];
        let (lambda, kappa) = (self.lambda, self.kappa);
        let prox = |curvature: f64, grad: f64| soft_threshold(curvature * old - grad, lambda) / (curvature + lambda * kappa);
        let bound = self.loss.curvature_bound() * rows.len() as f64;
        let new = match self.loss {
            Loss::Squared => {
                let grad: f64 = rows.iter().map(|&i| self.margins[i as usize] - self.y[i as usize]).sum();
                prox(bound, grad)
            }
            Loss::Logistic => {
                let (mut grad, mut local) = (0.0, 0.0);
                for &i in rows {
                    let (y, z) = (self.y[i as usize], self.margins[i as usize]);
                    let p = sigmoid(-y * z);
                    grad -= y * p;
                    local += p * (1.0 - p);
                }
                let trial = prox(local.min(bound), grad);
                if local < bound && trial != old && self.coordinate_change(j, old, trial) < 0.0 {
                    trial
                } else {
                    prox(bound, grad)
                }
            }
        };
        let step = new - old;
        if step != 0.0 {
            self.coef[j] = new;
            for &i in rows {
                self.margins[i as usize] += step;
            }
        }
    }

    /// Objective change from moving coefficient `j` from `old` to `new`.
    fn coordinate_change(&self, j: usize, old: f64, new: f64) -> f64 {
        let step = new - old;
        let loss: f64 = self.columns[j]
            .rows
            .iter()
            .map(|&i| {
                let (y, z) = (self.y[i as usize], self.margins[i as usize]);
                self.loss.value_i(y, z + step) - self.loss.value_i(y, z)
            })
            .sum();
        loss + self.lambda * (new.abs() - old.abs() + 0.5 * self.kappa * (new * new - old * old))
    }

    /// Squared loss: exact mean-residual intercept. Logistic: one Newton step,
    /// halved until the loss does not increase.
    pub fn intercept_update(&mut self) {
        let n = self.y.len() as f64;
        match self.loss {
            Loss::Squared => {
                let shift = self.y.iter().zip(&self.margins).map(|(y, z)| y - z).sum::<f64>() / n;
                self.set_intercept(self.intercept + shift);
            }
            Loss::Logistic => {
                let (mut g, mut h) = (0.0, 0.0);
                for (&y, &z) in self.y.iter().zip(&self.margins) {
                    let p = sigmoid(-y * z);
                    g += -y * p;
                    h += p * (1.0 - p);
                }
                if g == 0.0 || h <= 0.0 {
                    return;
                }
                let before = self.loss.value(&self.y, &self.margins);
                let mut step = -g / h;
                for _ in 0..60 {
                    let (mut after, mut slope) = (0.0, 0.0);
                    for (&y, &z) in self.y.iter().zip(&self.margins) {
                        after += self.loss.value_i(y, z + step);
                        slope += self.loss.grad_i(y, z + step);
                    }
                    // A slope that keeps its sign means the loss fell along the
                    // whole step, even when the drop is below rounding.
                    if after <= before || slope * g >= 0.0 {
                        self.set_intercept(self.intercept + step);
                        return;
                    }
                    step *= 0.5;
                }
            }
        }
    }

    /// Damped Newton step on the intercept and the nonzero coefficients with
    /// their signs held fixed. Coefficients that would cross zero are set to
    /// zero. The step is halved until the objective does not increase and is
    /// dropped entirely if that never happens. Returns whether it moved.
    pub fn support_newton_step(&mut self) -> bool {
        let support: Vec<usize> = (0..self.coef.len()).filter(|&j| self.coef[j] != 0.0).collect();
        if support.is_empty() || support.len() > NEWTON_SUPPORT_LIMIT {
            return false;
        }
        let n = self.y.len();
        let dim = support.len() + 1;
        let (grad_i, weight_i): (Vec<f64>, Vec<f64>) = self
            .y
            .iter()
            .zip(&self.margins)
            .map(|(&y, &z)| (self.loss.grad_i(y, z), self.loss.hess_i(y, z)))
            .unzip();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (k, &j) in support.iter().enumerate() {
            for &i in &self.columns[j].rows {
                members[i as usize].push(k + 1);
            }
        }
        let mut grad = nalgebra::DVector::<f64>::zeros(dim);
        let mut hess = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        for i in 0..n {
            let (g, w) = (grad_i[i], weight_i[i]);
            grad[0] += g;
            hess[(0, 0)] += w;
            for (a, &p) in members[i].iter().enumerate() {
                grad[p] += g;
                hess[(0, p)] += w;
                hess[(p, 0)] += w;
                for &q in &members[i][a..] {
                    hess[(p, q)] += w;
                    if p != q {
                        hess[(q, p)] += w;
                    }
                }
            }
        }
        for (k, &j) in support.iter().enumerate() {
            let b = self.coef[j];
            grad[k + 1] += self.lambda * (b.signum() + self.kappa * b);
            hess[(k + 1, k + 1)] += self.lambda * self.kappa;
        }
        let ridge = 1e-12 * (1.0 + hess.diagonal().amax());
        for p in 0..dim {
            hess[(p, p)] += ridge;
        }
        let Some(chol) = hess.cholesky() else {
            return false;
        };
        let direction = -chol.solve(&grad);
        if grad.dot(&direction) >= 0.0 {
            return false;
        }

        let before = self.objective();
        let mut trial = self.clone();
        let mut t = 1.0;
        for _ in 0..30 {
            trial.coef.clone_from(&self.coef);
            trial.intercept = self.intercept + t * direction[0];
            for (k, &j) in support.iter().enumerate() {
                let b = self.coef[j];
                let moved = b + t * direction[k + 1];
                trial.coef[j] = if moved * b > 0.0 { moved } else { 0.0 };
            }
            trial.margins = trial.recompute_margins();
            if trial.objective() <= before {
                *self = trial;
                return true;
            }
            t *= 0.5;
        }
        false
    }

    /// One epoch: every coordinate in column order, then the intercept.
    pub fn sweep(&mut self) {
        for j in 0..self.columns.len() {
            self.coordinate_update(j);
        }
        self.intercept_update();
    }

    /// Drops columns with `keep[j] == false`, zeroing their coefficients first.
    pub fn retain_columns(&mut self, keep: &[bool]) {
        for (j, &k) in keep.iter().enumerate() {
            let b = self.coef[j];
            if !k && b != 0.0 {
                for &i in &self.columns[j].rows {
                    self.margins[i as usize] -= b;
                }
            }
        }
        let mut it = keep.iter();
        self.columns.retain(|_| *it.next().unwrap());
        let mut it = keep.iter();
        self.coef.retain(|_| *it.next().unwrap());
    }

    pub fn model(&self) -> SparseModel {
        let terms = self
            .columns
            .iter()
            .zip(&self.coef)
            .filter(|(_, &b)| b != 0.0)
            .map(|(c, &b)| Term {
                column: c.clone(),
                coef: b,
            })
            .collect();
        let mut m = SparseModel {
            terms,
            intercept: self.intercept,
        };
        m.canonicalize();
        m
    }

    /// Gap of the problem restricted to the current columns.
    fn restricted_bound(&self) -> (Vec<f64>, f64, f64) {
        let dual = dual_scale_restricted(self.loss, &self.y, &self.margins, &self.columns, self.lambda, self.kappa);
        let p = self.objective();
        let d = self.loss.neg_conjugate(&self.y, dual.alpha()) - dual.conjugate_penalty();
        (dual.into_alpha(), p, p - d)
    }

    #[cfg(debug_assertions)]
    fn check_margins(&self) {
        let fresh = self.recompute_margins();
        for (a, b) in fresh.iter().zip(&self.margins) {
            debug_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "margin cache drifted: {a} vs {b}");
        }
    }
}

/// Largest support handled by the dense Newton refinement.
const NEWTON_SUPPORT_LIMIT: usize = 256;

#[inline]
fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Screening happens every other epoch for the first `dense_t` cycles, then
/// every tenth epoch.
pub fn screening_due(epoch: usize, dense_t: usize) -> bool {
    if epoch <= 2 * dense_t {
        epoch % 2 == 0
    } else {
        epoch % 10 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub epoch: usize,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub active: usize,
}

#[derive(Debug, Clone, Default)]
pub struct FitReport {
    /// References supplied to the initial pruning pass.
    pub reference_count: usize,
    /// A reference already met the tolerance, so no traversal or update ran.
    pub early_exit: bool,
    pub epochs: usize,
    pub traversal: TraversalStats,
    /// Patterns that survived the initial pruning pass.
    pub initial_active: Vec<Pattern>,
    /// Patterns removed by screening during optimization.
    pub dynamic_removed: Vec<Pattern>,
    pub final_active: usize,
    /// Best-iterate trace, one record per epoch.
    pub trace: Vec<TraceRecord>,
    pub full_certifications: usize,
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub solution: ReferenceSolution,
    pub report: FitReport,
}

/// Solves the Elastic-Net problem at `(hp.lambda, hp.kappa)` warm-started from
/// `refs` (zero, one or two solutions; none means the null model).
pub fn fit(dataset: &Dataset, loss: Loss, hp: &Hyperparams, refs: &[&ReferenceSolution]) -> Result<FitOutput> {
    hp.validate()?;
    if refs.len() > 2 {
        return Err(Error::InvalidHyperparams(format!("at most two references, got {}", refs.len())));
    }
    let (lambda, kappa) = (hp.lambda, hp.kappa);
    let gamma = loss.gamma();

    let mut scaled: Vec<ReferenceSolution> = if refs.is_empty() {
        vec![null_reference(dataset, loss, lambda, kappa, hp.max_len)?]
    } else {
        refs.iter()
            .map(|r| make_reference(dataset, loss, r.model.clone(), lambda, kappa, hp.max_len))
            .collect::<Result<_>>()?
    };
    let mut report = FitReport {
        reference_count: scaled.len(),
        ..Default::default()
    };

    let best_ref = argmin_gap(scaled.iter().map(|r| r.gap));
    if scaled[best_ref].gap < hp.epsilon {
        let solution = scaled.swap_remove(best_ref);
        report.early_exit = true;
        report.trace.push(TraceRecord {
            epoch: 0,
            primal: solution.primal,
            dual: solution.dual,
            gap: solution.gap,
            active: solution.model.nonzeros(),
        });
        return Ok(FitOutput { solution, report });
    }

    let ref_views: Vec<&ReferenceSolution> = scaled.iter().collect();
    let rule = ScreeningRule::from_references(&ref_views, gamma);
    let active = spp_traverse(dataset, lambda, &rule, hp.max_len);
    report.traversal = active.stats;
    report.initial_active = active.columns.iter().map(|c| c.pattern.clone()).collect();
    debug!(
        "lambda={lambda:.4e} kappa={kappa} refs={} active={} visited={} pruned={}",
        scaled.len(),
        active.columns.len(),
        active.stats.visited,
        active.stats.pruned
    );

    if scaled.len() == 2 && hp.dyn_m == 0 {
        scaled = vec![scaled.swap_remove(best_ref)];
    }
    let mut iterates: Vec<SolveState> = scaled
        .iter()
        .map(|r| SolveState::new(dataset, loss, lambda, kappa, active.columns.clone(), &r.model))
        .collect();
    drop(scaled);

    let mut certify_below = hp.epsilon;
    let mut last_gaps = vec![f64::INFINITY; iterates.len()];
    for epoch in 1..=hp.max_epochs {
        let mut bounds = Vec::with_capacity(iterates.len());
        for it in &mut iterates {
            #[cfg(debug_assertions)]
            let before = it.objective();
            it.sweep();
            if loss == Loss::Logistic {
                it.support_newton_step();
            }
            #[cfg(debug_assertions)]
            {
                let after = it.objective();
                debug_assert!(after <= before + 1e-10 * (1.0 + before.abs()), "objective increased: {before} -> {after}");
                it.check_margins();
            }
            bounds.push(it.restricted_bound());
        }
        last_gaps = bounds.iter().map(|b| b.2).collect();
        let best = argmin_gap(last_gaps.iter().copied());
        let (_, best_p, best_gap) = &bounds[best];
        report.epochs = epoch;
        report.trace.push(TraceRecord {
            epoch,
            primal: *best_p,
            dual: best_p - best_gap,
            gap: *best_gap,
            active: iterates[best].columns.len(),
        });

        if *best_gap < certify_below {
            report.full_certifications += 1;
            let solution = make_reference(dataset, loss, iterates[best].model(), lambda, kappa, hp.max_len)?;
            if solution.gap < hp.epsilon {
                report.final_active = iterates[best].columns.len();
                return Ok(FitOutput { solution, report });
            }
            debug!("full gap {:.3e} above tolerance; tightening", solution.gap);
            certify_below *= 0.5;
        }

        if screening_due(epoch, hp.dense_t) {
            for it in &mut iterates {
                it.margins = it.recompute_margins();
            }
            let balls: Vec<ScreeningBall> = bounds
                .into_iter()
                .map(|(alpha, _, gap)| ScreeningBall::from_gap(alpha, gap, gamma))
                .collect();
            let rule = match balls.len() {
                1 => ScreeningRule::single(balls.into_iter().next().unwrap()),
                _ => {
                    let mut it = balls.into_iter();
                    ScreeningRule::pair(it.next().unwrap(), it.next().unwrap())
                }
            };
            let keep: Vec<bool> = iterates[0]
                .columns
                .iter()
                .map(|c| !(rule.screening_score(&c.rows) < lambda))
                .collect();
            if keep.iter().any(|k| !k) {
                for (c, _) in iterates[0].columns.iter().zip(&keep).filter(|(_, k)| !**k) {
                    report.dynamic_removed.push(c.pattern.clone());
                }
                for it in &mut iterates {
                    it.retain_columns(&keep);
                }
            }
        }

        if iterates.len() == 2 && epoch >= hp.dyn_m {
            iterates = vec![iterates.swap_remove(best)];
            last_gaps = vec![last_gaps[best]];
        }
    }

    let best = argmin_gap(last_gaps.iter().copied());
    let best_solution = make_reference(dataset, loss, iterates[best].model(), lambda, kappa, hp.max_len)?;
    Err(Error::IterationCap {
        epochs: hp.max_epochs,
        gap: best_solution.gap,
        best: Box::new(best_solution),
    })
}

fn argmin_gap(gaps: impl Iterator<Item = f64>) -> usize {
    gaps.enumerate()
        .fold((0, f64::INFINITY), |(bi, bg), (i, g)| if g < bg { (i, g) } else { (bi, bg) })
        .0
}
