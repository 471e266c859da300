//! Brute-force references for testing.
//!
//! Nothing here is used by the production solver. The dense solver builds
//! every pattern column with the naive matcher, runs plain cyclic coordinate
//! descent over all of them without any screening, and certifies its own
//! duality gap. It shares only the per-instance loss value and the loss
//! conjugate with the rest of the crate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Pattern};
use crate::error::{Error, Result};
use crate::objective::Loss;
use crate::synth::all_candidate_patterns;

pub const DENSE_COLUMN_GUARD: usize = 1_000_000;

/// Full 0/1 design over every pattern with nonzero support.
#[derive(Debug, Clone)]
pub struct DenseProblem {
    pub patterns: Vec<Pattern>,
    /// Column-major, `columns[j][i]` is 0.0 or 1.0.
    pub columns: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub loss: Loss,
    pub lambda: f64,
    pub kappa: f64,
}

impl DenseProblem {
    pub fn new(dataset: &Dataset, loss: Loss, max_len: usize, lambda: f64, kappa: f64) -> Result<Self> {
        let candidates = all_candidate_patterns(dataset.structure(), dataset.alphabet_size(), max_len);
        if candidates.len() > DENSE_COLUMN_GUARD {
            return Err(Error::CeilingExceeded {
                ceiling: DENSE_COLUMN_GUARD,
            });
        }
        let mut patterns = Vec::new();
        let mut columns = Vec::new();
        for p in candidates {
            let col: Vec<f64> = dataset
                .instances()
                .iter()
                .map(|inst| if p.occurs_in(&inst.items) { 1.0 } else { 0.0 })
                .collect();
            if col.iter().any(|&v| v != 0.0) {
                patterns.push(p);
                columns.push(col);
            }
        }
        Ok(DenseProblem {
            patterns,
            columns,
            y: dataset.labels(),
            loss,
            lambda,
            kappa,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn with_hyperparams(&self, lambda: f64, kappa: f64) -> Self {
        DenseProblem {
            lambda,
            kappa,
            ..self.clone()
        }
    }

    fn margins(&self, coef: &[f64], intercept: f64) -> Vec<f64> {
        let mut z = vec![intercept; self.n()];
        for (col, &b) in self.columns.iter().zip(coef) {
            if b != 0.0 {
                for (zi, &x) in z.iter_mut().zip(col) {
                    *zi += b * x;
                }
            }
        }
        z
    }

    /// Derivative of the per-instance loss with respect to the margin.
    fn dloss(&self, y: f64, z: f64) -> f64 {
        match self.loss {
            Loss::Squared => z - y,
            Loss::Logistic => {
                let t = y * z;
                // -y / (1 + exp(y z)), written to avoid overflow.
                if t >= 0.0 {
                    let e = (-t).exp();
                    -y * e / (1.0 + e)
                } else {
                    -y / (1.0 + t.exp())
                }
            }
        }
    }

    fn d2loss(&self, y: f64, z: f64) -> f64 {
        match self.loss {
            Loss::Squared => 1.0,
            Loss::Logistic => {
                let g = self.dloss(y, z).abs();
                g * (1.0 - g)
            }
        }
    }

    pub fn primal(&self, coef: &[f64], intercept: f64) -> f64 {
        let z = self.margins(coef, intercept);
        let loss: f64 = self.y.iter().zip(&z).map(|(&y, &zi)| self.loss.value_i(y, zi)).sum();
        let l1: f64 = coef.iter().map(|b| b.abs()).sum();
        let l2: f64 = coef.iter().map(|b| b * b).sum();
        loss + self.lambda * (l1 + 0.5 * self.kappa * l2)
    }

    /// `-L*(-alpha) - Omega*(X^T alpha)` over every dense column; `-inf` when
    /// the vector is infeasible.
    pub fn dual(&self, alpha: &[f64]) -> f64 {
        let sum: f64 = alpha.iter().sum();
        if sum.abs() > 1e-9 * self.n() as f64 {
            return f64::NEG_INFINITY;
        }
        let mut penalty = 0.0;
        for col in &self.columns {
            let v: f64 = col.iter().zip(alpha).map(|(x, a)| x * a).sum::<f64>().abs();
            if v > self.lambda {
                if self.kappa == 0.0 {
                    if v > self.lambda * (1.0 + 1e-9) {
                        return f64::NEG_INFINITY;
                    }
                } else {
                    penalty += (v - self.lambda).powi(2) / (2.0 * self.lambda * self.kappa);
                }
            }
        }
        self.loss.neg_conjugate(&self.y, alpha) - penalty
    }

    /// Best dual point derived from the primal iterate: the centered negative
    /// gradient, either as is or shrunk into the box.
    pub fn dual_point(&self, coef: &[f64], intercept: f64) -> (Vec<f64>, f64) {
        let z = self.margins(coef, intercept);
        let mut c: Vec<f64> = self.y.iter().zip(&z).map(|(&y, &zi)| -self.dloss(y, zi)).collect();
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        c.iter_mut().for_each(|v| *v -= mean);
        let top = self
            .columns
            .iter()
            .map(|col| col.iter().zip(&c).map(|(x, a)| x * a).sum::<f64>().abs())
            .fold(0.0, f64::max);
        let shrink = if top > self.lambda { self.lambda / top } else { 1.0 };
        let shrunk: Vec<f64> = c.iter().map(|v| v * shrink).collect();
        let d_shrunk = self.dual(&shrunk);
        if self.kappa > 0.0 {
            let d_raw = self.dual(&c);
            if d_raw > d_shrunk {
                return (c, d_raw);
            }
        }
        (shrunk, d_shrunk)
    }
}

#[derive(Debug, Clone)]
pub struct DenseSolution {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub alpha: Vec<f64>,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub epochs: usize,
}

impl DenseSolution {
    pub fn coef_of(&self, problem: &DenseProblem, pattern: &Pattern) -> f64 {
        problem
            .patterns
            .iter()
            .position(|p| p == pattern)
            .map_or(0.0, |j| self.coef[j])
    }

    pub fn support<'a>(&self, problem: &'a DenseProblem, tol: f64) -> Vec<&'a Pattern> {
        problem
            .patterns
            .iter()
            .zip(&self.coef)
            .filter(|(_, b)| b.abs() > tol)
            .map(|(p, _)| p)
            .collect()
    }
}

const DENSE_EPOCH_CAP: usize = 2_000_000;

/// Cyclic coordinate descent over every column until the gap is at most
/// `epsilon`. Between full sweeps the nonzero coordinates are cycled a few
/// extra times; every coordinate is still visited in each full sweep.
pub fn dense_fit(problem: &DenseProblem, epsilon: f64) -> Result<DenseSolution> {
    let d = problem.columns.len();
    let mut coef = vec![0.0; d];
    let mut intercept = 0.0;
    let mut z = vec![0.0; problem.n()];
    for _ in 0..100 {
        intercept_step(problem, &mut z, &mut intercept);
    }
    let mut epochs = 0;
    loop {
        for j in 0..d {
            coordinate_step(problem, j, &mut coef, &mut z);
        }
        intercept_step(problem, &mut z, &mut intercept);
        epochs += 1;

        let primal = problem.primal(&coef, intercept);
        let (alpha, dual) = problem.dual_point(&coef, intercept);
        let gap = primal - dual;
        if gap <= epsilon {
            return Ok(DenseSolution {
                coef,
                intercept,
                alpha,
                primal,
                dual,
                gap,
                epochs,
            });
        }
        if epochs >= DENSE_EPOCH_CAP {
            return Err(Error::IterationCap {
                epochs,
                gap,
                best: Box::new(crate::solution::ReferenceSolution {
                    model: crate::solution::SparseModel::null(intercept),
                    alpha,
                    lambda: problem.lambda,
                    kappa: problem.kappa,
                    primal,
                    dual,
                    gap,
                }),
            });
        }
        support_newton(problem, &mut coef, &mut intercept);
        z = problem.margins(&coef, intercept);
        let nonzero: Vec<usize> = (0..d).filter(|&j| coef[j] != 0.0).collect();
        for _ in 0..20 {
            for &j in &nonzero {
                coordinate_step(problem, j, &mut coef, &mut z);
            }
            intercept_step(problem, &mut z, &mut intercept);
        }
    }
}

/// Damped Newton step over the intercept and the nonzero coefficients on
/// the dense design, signs held fixed and zero crossings clamped to zero.
fn support_newton(problem: &DenseProblem, coef: &mut [f64], intercept: &mut f64) {
    let support: Vec<usize> = (0..coef.len()).filter(|&j| coef[j] != 0.0).collect();
    if support.is_empty() {
        return;
    }
    let n = problem.n();
    let z = problem.margins(coef, *intercept);
    // Design with a leading column of ones for the intercept.
    let design = nalgebra::DMatrix::from_fn(n, support.len() + 1, |i, k| if k == 0 { 1.0 } else { problem.columns[support[k - 1]][i] });
    let g_rows = nalgebra::DVector::from_fn(n, |i, _| problem.dloss(problem.y[i], z[i]));
    let w_rows = nalgebra::DVector::from_fn(n, |i, _| problem.d2loss(problem.y[i], z[i]));
    let mut grad = design.transpose() * &g_rows;
    let mut hess = design.transpose() * nalgebra::DMatrix::from_diagonal(&w_rows) * &design;
    for (k, &j) in support.iter().enumerate() {
        grad[k + 1] += problem.lambda * (coef[j].signum() + problem.kappa * coef[j]);
        hess[(k + 1, k + 1)] += problem.lambda * problem.kappa;
    }
    let ridge = 1e-12 * (1.0 + hess.diagonal().amax());
    hess += nalgebra::DMatrix::identity(hess.nrows(), hess.ncols()) * ridge;
    let Some(chol) = hess.cholesky() else {
        return;
    };
    let step = -chol.solve(&grad);
    let before = problem.primal(coef, *intercept);
    let mut t = 1.0;
    let mut trial = coef.to_vec();
    for _ in 0..30 {
        for (k, &j) in support.iter().enumerate() {
            let moved = coef[j] + t * step[k + 1];
            trial[j] = if moved * coef[j] > 0.0 { moved } else { 0.0 };
        }
        let b0 = *intercept + t * step[0];
        if problem.primal(&trial, b0) <= before {
            coef.copy_from_slice(&trial);
            *intercept = b0;
            return;
        }
        t *= 0.5;
    }
}

fn coordinate_objective(problem: &DenseProblem, j: usize, z: &[f64], b_old: f64, b: f64) -> f64 {
    let shift = b - b_old;
    let loss: f64 = problem.columns[j]
        .iter()
        .zip(z)
        .zip(&problem.y)
        .filter(|((&x, _), _)| x != 0.0)
        .map(|((_, &zi), &y)| problem.loss.value_i(y, zi + shift))
        .sum();
    loss + problem.lambda * (b.abs() + 0.5 * problem.kappa * b * b)
}

fn coordinate_step(problem: &DenseProblem, j: usize, coef: &mut [f64], z: &mut [f64]) {
    let col = &problem.columns[j];
    let (mut g, mut h, mut count) = (0.0, 0.0, 0.0);
    for ((&x, &zi), &y) in col.iter().zip(z.iter()).zip(&problem.y) {
        if x != 0.0 {
            g += problem.dloss(y, zi);
            h += problem.d2loss(y, zi);
            count += 1.0;
        }
    }
    let b = coef[j];
    let lam = problem.lambda;
    let soft = |a: f64| {
        if a > lam {
            a - lam
        } else if a < -lam {
            a + lam
        } else {
            0.0
        }
    };
    let ceiling = match problem.loss {
        Loss::Squared => count,
        Loss::Logistic => count / 4.0,
    };
    let mut curv = h.max(1e-12).min(ceiling);
    let start = coordinate_objective(problem, j, z, b, b);
    let new = loop {
        let cand = soft(curv * b - g) / (curv + lam * problem.kappa);
        if curv >= ceiling || coordinate_objective(problem, j, z, b, cand) <= start {
            break cand;
        }
        curv = (curv * 2.0).min(ceiling);
    };
    let shift = new - b;
    if shift != 0.0 {
        coef[j] = new;
        for (zi, &x) in z.iter_mut().zip(col) {
            *zi += shift * x;
        }
    }
}

fn intercept_step(problem: &DenseProblem, z: &mut [f64], intercept: &mut f64) {
    let (mut g, mut h) = (0.0, 0.0);
    for (&zi, &y) in z.iter().zip(&problem.y) {
        g += problem.dloss(y, zi);
        h += problem.d2loss(y, zi);
    }
    if g == 0.0 || h <= 0.0 {
        return;
    }
    let value = |shift: f64| -> f64 { z.iter().zip(&problem.y).map(|(&zi, &y)| problem.loss.value_i(y, zi + shift)).sum() };
    let slope = |shift: f64| -> f64 { z.iter().zip(&problem.y).map(|(&zi, &y)| problem.dloss(y, zi + shift)).sum() };
    let base = value(0.0);
    let mut step = -g / h;
    for _ in 0..60 {
        if value(step) <= base || slope(step) * g >= 0.0 {
            *intercept += step;
            z.iter_mut().for_each(|zi| *zi += step);
            return;
        }
        step *= 0.5;
    }
}

/// Maximizes `x^T alpha` over the intersection of the given balls and the
/// hyperplane `sum(alpha) = 0` by projected gradient ascent from random
/// starting points.
pub fn constrained_max_oracle(x: &[f64], balls: &[(Vec<f64>, f64)], seed: u64) -> Result<f64> {
    let n = x.len();
    if n > 10 || n < 2 {
        return Err(Error::InvalidHyperparams(format!("oracle dimension must lie in [2, 10], got {n}")));
    }
    if balls.is_empty() || balls.len() > 2 || balls.iter().any(|(c, _)| c.len() != n) {
        return Err(Error::InvalidHyperparams("oracle takes one or two balls of matching dimension".into()));
    }
    // Each ball cut by the hyperplane is a ball inside the hyperplane.
    let mut sections: Vec<(Vec<f64>, f64)> = Vec::new();
    for (c, r) in balls {
        let m = c.iter().sum::<f64>() / n as f64;
        let pc: Vec<f64> = c.iter().map(|v| v - m).collect();
        let off_sq = m * m * n as f64;
        let rr = r * r - off_sq;
        if rr < 0.0 {
            return Err(Error::InvalidHyperparams("ball misses the hyperplane".into()));
        }
        sections.push((pc, rr.sqrt()));
    }
    if sections.len() == 2 {
        let dist = norm(&sub(&sections[1].0, &sections[0].0));
        if dist > sections[0].1 + sections[1].1 {
            return Err(Error::InvalidHyperparams("empty ball intersection".into()));
        }
    }

    let xm = x.iter().sum::<f64>() / n as f64;
    let dir: Vec<f64> = x.iter().map(|v| v - xm).collect();
    let dir_norm = norm(&dir);
    let scale = sections.iter().map(|s| s.1).fold(0.0, f64::max).max(1e-12);
    let project = |p: &[f64]| project_sections(p, &sections);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..100 {
        let mut a: Vec<f64> = sections[0]
            .0
            .iter()
            .map(|c| c + rng.gen_range(-2.0..2.0) * scale)
            .collect();
        let m = a.iter().sum::<f64>() / n as f64;
        a.iter_mut().for_each(|v| *v -= m);
        a = project(&a);
        if dir_norm > 0.0 {
            let mut eta = 1e-3 * scale / dir_norm;
            for it in 0..400 {
                let p: Vec<f64> = a.iter().zip(&dir).map(|(ai, di)| ai + eta * di).collect();
                a = project(&p);
                if it < 200 {
                    eta *= 1.05;
                }
            }
        }
        let value: f64 = x.iter().zip(&a).map(|(xi, ai)| xi * ai).sum();
        best = best.max(value);
    }
    Ok(best)
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn project_ball(p: &[f64], c: &[f64], r: f64) -> Vec<f64> {
    let d = sub(p, c);
    let len = norm(&d);
    if len <= r {
        p.to_vec()
    } else {
        c.iter().zip(&d).map(|(ci, di)| ci + di * r / len).collect()
    }
}

fn inside(p: &[f64], c: &[f64], r: f64) -> bool {
    norm(&sub(p, c)) <= r * (1.0 + 1e-12) + 1e-15
}

/// Euclidean projection onto one ball, or onto the intersection of two balls,
/// for points and centers lying in the same hyperplane.
fn project_sections(p: &[f64], sections: &[(Vec<f64>, f64)]) -> Vec<f64> {
    let (c1, r1) = (&sections[0].0, sections[0].1);
    let q1 = project_ball(p, c1, r1);
    if sections.len() == 1 {
        return q1;
    }
    let (c2, r2) = (&sections[1].0, sections[1].1);
    if inside(&q1, c2, r2) {
        return q1;
    }
    let q2 = project_ball(p, c2, r2);
    if inside(&q2, c1, r1) {
        return q2;
    }
    // Both spheres are active: the answer lies on their common circle.
    let axis = sub(c2, c1);
    let delta = norm(&axis);
    let u: Vec<f64> = axis.iter().map(|v| v / delta).collect();
    let d1 = (r1 * r1 - r2 * r2 + delta * delta) / (2.0 * delta);
    let rho = (r1 * r1 - d1 * d1).max(0.0).sqrt();
    let m: Vec<f64> = c1.iter().zip(&u).map(|(c, ui)| c + d1 * ui).collect();
    let pm = sub(p, &m);
    let along: f64 = pm.iter().zip(&u).map(|(a, b)| a * b).sum();
    let mut w: Vec<f64> = pm.iter().zip(&u).map(|(a, ui)| a - along * ui).collect();
    let wn = norm(&w);
    if wn == 0.0 {
        // Any in-plane direction orthogonal to the axis.
        let n = p.len();
        for k in 0..n {
            let mut e: Vec<f64> = vec![-1.0 / n as f64; n];
            e[k] += 1.0;
            let a: f64 = e.iter().zip(&u).map(|(x, y)| x * y).sum();
            w = e.iter().zip(&u).map(|(x, ui)| x - a * ui).collect();
            if norm(&w) > 1e-6 {
                break;
            }
        }
    }
    let wn = norm(&w);
    m.iter().zip(&w).map(|(mi, wi)| mi + rho * wi / wn).collect()
}
