//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if a hard criterion fails.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use spp_core::oracle::{constrained_max_oracle, dense_fit, DenseProblem};
use spp_core::screening::Intersection;
use spp_core::synth::{random_dataset, SynthSpec};
use spp_core::tree::DEFAULT_ENUMERATION_CEILING;
use spp_core::*;

const SUITE_SIZE: u64 = 100;
const EPS: f64 = 1e-4;
/// Solver tolerance of the equivalence sweep.
const TIGHT_EPS: f64 = 1e-9;
const ORACLE_GAP: f64 = 1e-10;
const NONZERO_TOL: f64 = 1e-6;
const EQUIV_TOL: f64 = 1e-3;
const KAPPAS: [f64; 3] = [0.0, 0.1, 10.0];
const MAX_LEN: usize = 3;

struct Line {
    id: u8,
    title: &'static str,
    pass: bool,
    hard: bool,
    detail: String,
}

impl Line {
    fn print(&self) {
        let tag = match (self.pass, self.hard) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        println!("criterion {} {tag}: {} | {}", self.id, self.title, self.detail);
    }
}

fn hp() -> Hyperparams {
    Hyperparams {
        epsilon: EPS,
        max_len: MAX_LEN,
        ..Default::default()
    }
}

fn tight_hp() -> Hyperparams {
    Hyperparams {
        epsilon: TIGHT_EPS,
        ..hp()
    }
}

/// Whether the Lasso optimum may be non-unique: the columns whose
/// correlation with the optimal dual sits on the boundary, together with the
/// intercept column, are linearly dependent.
fn rank_deficient_equicorrelation(problem: &DenseProblem, alpha: &[f64]) -> bool {
    let boundary: Vec<&Vec<f64>> = problem
        .columns
        .iter()
        .filter(|col| {
            let v: f64 = col.iter().zip(alpha).map(|(x, a)| x * a).sum();
            v.abs() >= problem.lambda * (1.0 - 1e-7)
        })
        .collect();
    let n = problem.n();
    let m = nalgebra::DMatrix::from_fn(n, boundary.len() + 1, |i, k| if k == 0 { 1.0 } else { boundary[k - 1][i] });
    m.rank(1e-9) < boundary.len() + 1
}

fn pattern_index(dense: &DenseProblem) -> HashMap<Pattern, usize> {
    dense.patterns.iter().cloned().enumerate().map(|(j, p)| (p, j)).collect()
}

fn dense_coefs(index: &HashMap<Pattern, usize>, d: usize, model: &SparseModel) -> Vec<f64> {
    let mut coef = vec![0.0; d];
    for t in &model.terms {
        coef[index[&t.column.pattern]] = t.coef;
    }
    coef
}

/// `P - D` recomputed from scratch on the dense design.
fn recomputed_gap(dense: &DenseProblem, index: &HashMap<Pattern, usize>, sol: &ReferenceSolution) -> f64 {
    let problem = dense.with_hyperparams(sol.lambda, sol.kappa);
    let coef = dense_coefs(index, problem.patterns.len(), &sol.model);
    problem.primal(&coef, sol.model.intercept) - problem.dual(&sol.alpha)
}

#[derive(Default)]
struct CaseResult {
    label: String,
    cells: usize,
    static_violations: Vec<String>,
    dynamic_violations: Vec<String>,
    equiv_violations: Vec<String>,
    equiv_checked: usize,
    /// Violations on cells whose oracle optimum is not unique.
    equiv_nonunique: usize,
    equiv_nonunique_cells: usize,
    max_coef_diff: f64,
    max_coef_diff_unique: f64,
    max_intercept_diff: f64,
    conv_violations: Vec<String>,
    conv_checked: usize,
    max_recomputed_gap: f64,
    lmax_violations: Vec<String>,
    dynamic_removed: usize,
    static_removed: usize,
}

fn suite_dataset(idx: u64) -> (Dataset, Loss, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(10_000 + idx);
    let structure = if idx % 2 == 0 { StructureKind::Itemset } else { StructureKind::Sequence };
    let task = if (idx / 2) % 2 == 0 { TaskKind::Regression } else { TaskKind::Classification };
    let loss = Loss::for_task(task);
    loop {
        let spec = SynthSpec {
            structure,
            task,
            n: rng.gen_range(10..=30),
            alphabet: rng.gen_range(3..=6),
            max_instance_len: rng.gen_range(3..=5),
        };
        let d = random_dataset(&mut rng, &spec);
        let lmax = lambda_max(&d, loss, MAX_LEN);
        if lmax > 0.0 {
            return (d, loss, lmax);
        }
    }
}

fn run_case(idx: u64) -> CaseResult {
    let (d, loss, lmax) = suite_dataset(idx);
    let mut out = CaseResult {
        label: format!("case {idx} ({:?}/{:?}, n={})", d.structure(), loss, d.n()),
        ..Default::default()
    };
    let grid = make_grid(lmax, 10, 0.01, &KAPPAS).unwrap();
    let multi = path_2d(&d, loss, &grid, &hp()).unwrap();
    let single = path_2d_with(&d, loss, &grid, &hp(), ReferenceMode::Single).unwrap();
    let multi_tight = path_2d(&d, loss, &grid, &tight_hp()).unwrap();
    let single_tight = path_2d_with(&d, loss, &grid, &tight_hp(), ReferenceMode::Single).unwrap();
    let dense = DenseProblem::new(&d, loss, MAX_LEN, lmax, 0.0).unwrap();
    let index = pattern_index(&dense);
    for k in 0..grid.lambdas.len() {
        for kp in 0..grid.kappas.len() {
            let (lambda, kappa) = (grid.lambdas[k], grid.kappas[kp]);
            let problem = dense.with_hyperparams(lambda, kappa);
            let oracle = dense_fit(&problem, ORACLE_GAP).unwrap();
            let oracle_support = oracle.support(&problem, NONZERO_TOL);
            let oracle_z = {
                let mut z = vec![oracle.intercept; d.n()];
                for (col, &b) in problem.columns.iter().zip(&oracle.coef) {
                    for (zi, x) in z.iter_mut().zip(col) {
                        *zi += b * x;
                    }
                }
                z
            };
            let nonunique = kappa == 0.0 && rank_deficient_equicorrelation(&problem, &oracle.alpha);
            let runs = [("multi", &multi, false), ("single", &single, false), ("multi tight", &multi_tight, true), ("single tight", &single_tight, true)];
            for (mode, path, tight) in runs {
                let cell = path.get(k, kp).unwrap();
                let where_ = format!("{} {mode} cell ({k},{kp})", out.label);
                out.cells += 1;

                if !cell.report.early_exit {
                    let kept: std::collections::HashSet<&Pattern> = cell.report.initial_active.iter().collect();
                    let removed: std::collections::HashSet<&Pattern> = cell.report.dynamic_removed.iter().collect();
                    out.dynamic_removed += removed.len();
                    out.static_removed += dense.patterns.len().saturating_sub(kept.len());
                    for p in &oracle_support {
                        if !kept.contains(p) {
                            out.static_violations.push(format!("{where_}: {p:?}"));
                        }
                        if removed.contains(p) {
                            out.dynamic_violations.push(format!("{where_}: {p:?}"));
                        }
                    }
                }

                let gap = recomputed_gap(&dense, &index, &cell.solution);
                out.conv_checked += 1;
                out.max_recomputed_gap = out.max_recomputed_gap.max(gap);
                let p_again = problem.primal(
                    &dense_coefs(&index, problem.patterns.len(), &cell.solution.model),
                    cell.solution.model.intercept,
                );
                let bound = if tight { TIGHT_EPS } else { EPS };
                if !(gap < bound) || (p_again - cell.solution.primal).abs() > 1e-9 * (1.0 + p_again.abs()) {
                    out.conv_violations.push(format!("{where_}: recomputed gap {gap:e}"));
                }

                if !tight {
                    continue;
                }
                out.equiv_checked += 1;
                let mut worst = 0.0f64;
                for (p, &j) in &index {
                    let a = cell.solution.model.coef(p);
                    let b = oracle.coef[j];
                    if a != 0.0 || b.abs() > NONZERO_TOL {
                        worst = worst.max((a - b).abs());
                    }
                }
                let b0 = (cell.solution.model.intercept - oracle.intercept).abs();
                out.max_coef_diff = out.max_coef_diff.max(worst);
                out.max_intercept_diff = out.max_intercept_diff.max(b0);
                if nonunique {
                    out.equiv_nonunique_cells += 1;
                } else {
                    out.max_coef_diff_unique = out.max_coef_diff_unique.max(worst.max(b0));
                }
                if worst > EQUIV_TOL || b0 > EQUIV_TOL {
                    let z = cell.solution.model.margins(d.n());
                    let margin_diff = z.iter().zip(&oracle_z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    if nonunique {
                        out.equiv_nonunique += 1;
                    }
                    out.equiv_violations.push(format!(
                        "{where_}: coef diff {worst:.3e}, intercept diff {b0:.3e}, margin diff {margin_diff:.3e}, gap {gap:.1e}, kappa {kappa}, rank-deficient {nonunique}"
                    ));
                }
            }
        }
    }

    // lambda_max certificate and the first step below it.
    for &kappa in &KAPPAS {
        let at = fit(&d, loss, &Hyperparams { lambda: lmax, kappa, ..hp() }, &[]).unwrap();
        if at.solution.model.nonzeros() != 0 || at.solution.gap.abs() > 1e-12 || at.report.epochs != 0 {
            out.lmax_violations.push(format!(
                "{}: at lambda_max kappa {kappa}: nonzeros {}, gap {:e}, epochs {}",
                out.label,
                at.solution.model.nonzeros(),
                at.solution.gap,
                at.report.epochs
            ));
        }
        let below = 0.999 * lmax;
        let near = fit(&d, loss, &Hyperparams { lambda: below, kappa, epsilon: 1e-11, ..hp() }, &[]).unwrap();
        if near.solution.model.nonzeros() == 0 {
            let oracle = dense_fit(&dense.with_hyperparams(below, kappa), 1e-12).unwrap();
            if oracle.coef.iter().any(|b| b.abs() > NONZERO_TOL) {
                out.lmax_violations.push(format!(
                    "{}: zero model at 0.999 lambda_max kappa {kappa} but oracle has nonzeros",
                    out.label
                ));
            }
        }
    }
    out
}

fn criterion_3() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let quota: HashMap<Branch, usize> =
        [(Branch::First, 300), (Branch::Second, 300), (Branch::Rim, 300), (Branch::Degenerate, 100)].into();
    let mut counts: HashMap<Branch, usize> = HashMap::new();
    let (mut worst, mut dominance_fail, mut mismatches, mut total) = (0.0f64, 0usize, 0usize, 0usize);
    let mut attempts = 0usize;
    while total < 1000 && attempts < 2_000_000 {
        attempts += 1;
        let n = rng.gen_range(2..=10);
        let centered = |rng: &mut ChaCha8Rng, scale: f64| -> Vec<f64> {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
            let m = v.iter().sum::<f64>() / n as f64;
            v.iter_mut().for_each(|x| *x -= m);
            v
        };
        let c1 = centered(&mut rng, 1.0);
        let spread = rng.gen_range(0.05..1.0);
        let shift = centered(&mut rng, spread);
        let c2: Vec<f64> = c1.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let dist = shift.iter().map(|v| v * v).sum::<f64>().sqrt();
        let r1 = rng.gen_range(0.05..2.0) * dist.max(0.1);
        let r2 = rng.gen_range(0.05..2.0) * dist.max(0.1);
        if r1 + r2 <= dist * (1.0 + 1e-6) {
            continue;
        }
        let s = rng.gen_range(1..=n);
        let mut rows: Vec<u32> = (0..n as u32).collect();
        rows.sort_by_key(|_| rng.gen::<u32>());
        rows.truncate(s);
        rows.sort_unstable();

        let b1 = ScreeningBall::new(c1.clone(), r1 * r1);
        let b2 = ScreeningBall::new(c2.clone(), r2 * r2);
        let (u1, u2) = (b1.screening_score(&rows), b2.screening_score(&rows));
        let pair = BallPair::new(b1, b2);
        let score = pair.multi_screening(&rows);
        if counts.get(&score.plus).copied().unwrap_or(0) >= quota[&score.plus] {
            continue;
        }
        *counts.entry(score.plus).or_default() += 1;
        total += 1;

        let x: Vec<f64> = (0..n).map(|i| if rows.contains(&(i as u32)) { 1.0 } else { 0.0 }).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let balls = vec![(c1, r1), (c2, r2)];
        let want = constrained_max_oracle(&x, &balls, total as u64)
            .unwrap()
            .max(constrained_max_oracle(&neg, &balls, total as u64 + 7).unwrap());
        let err = (score.value - want).abs();
        worst = worst.max(err);
        if err > 1e-6 {
            mismatches += 1;
        }
        if score.value > u1.min(u2) + 1e-9 {
            dominance_fail += 1;
        }
    }
    let spans = [Branch::First, Branch::Second, Branch::Rim]
        .iter()
        .all(|b| counts.get(b).copied().unwrap_or(0) >= 50);
    Line {
        id: 3,
        title: "two-ball score equals constrained maximum",
        pass: total == 1000 && mismatches == 0 && dominance_fail == 0 && spans,
        hard: true,
        detail: format!(
            "{total} configs, branches first/second/rim/degenerate = {}/{}/{}/{}, max |err| = {worst:.2e}, mismatches {mismatches}, dominance failures {dominance_fail}",
            counts.get(&Branch::First).unwrap_or(&0),
            counts.get(&Branch::Second).unwrap_or(&0),
            counts.get(&Branch::Rim).unwrap_or(&0),
            counts.get(&Branch::Degenerate).unwrap_or(&0),
        ),
    }
}

fn criterion_4() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst, mut pairs) = (0.0f64, 0usize);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    while pairs < 1000 {
        let n = rng.gen_range(2..=10);
        let c1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dist = dot(&sub(&c2, &c1), &sub(&c2, &c1)).sqrt();
        let r1 = rng.gen_range(0.05..2.0);
        let r2 = rng.gen_range(0.05..2.0);
        if !(r1 + r2 > dist && r1 < r2 + dist && r2 < r1 + dist) {
            continue;
        }
        let b1 = ScreeningBall::new(c1.clone(), r1 * r1);
        let b2 = ScreeningBall::new(c2.clone(), r2 * r2);
        let Intersection::Lens(lens) = ball_intersection(&b1, &b2) else {
            continue;
        };
        pairs += 1;
        // A random plane through the axis; bisect for the sphere crossing.
        let u: Vec<f64> = sub(&c2, &c1).iter().map(|v| v / dist).collect();
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = dot(&v, &u);
        v.iter_mut().zip(&u).for_each(|(vi, ui)| *vi -= a * ui);
        let vn = dot(&v, &v).sqrt();
        if n >= 2 && vn > 1e-9 {
            v.iter_mut().for_each(|vi| *vi /= vn);
        }
        let point = |theta: f64| -> Vec<f64> {
            (0..n)
                .map(|i| c1[i] + r1 * (theta.cos() * u[i] + theta.sin() * v[i]))
                .collect::<Vec<_>>()
        };
        let f = |theta: f64| {
            let p = point(theta);
            let d = sub(&p, &c2);
            dot(&d, &d) - r2 * r2
        };
        let (mut lo, mut hi) = (0.0, PI);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = point(0.5 * (lo + hi));
        let off = sub(&p, &lens.center);
        let sphere = (dot(&off, &off) - lens.radius * lens.radius).abs();
        let plane = dot(&off, &lens.delta).abs();
        worst = worst.max(sphere).max(plane);
    }
    let sym = ball_intersection(
        &ScreeningBall::new(vec![0.0, 0.0], 2.0),
        &ScreeningBall::new(vec![2.0, 0.0], 2.0),
    );
    let sym_ok = matches!(&sym, Intersection::Lens(l) if l.t == 0.5 && l.radius == 1.0 && l.center == vec![1.0, 0.0]);
    Line {
        id: 4,
        title: "sphere intersection geometry",
        pass: worst <= 1e-9 && sym_ok,
        hard: true,
        detail: format!("{pairs} pairs, max residual {worst:.2e}, symmetric fixture exact: {sym_ok}"),
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

struct StructureRun {
    line: Line,
    conv_checked: usize,
    conv_violations: Vec<String>,
    max_gap: f64,
}

fn criterion_7() -> StructureRun {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let d = random_dataset(
        &mut rng,
        &SynthSpec {
            structure: StructureKind::Sequence,
            task: TaskKind::Regression,
            n: 20,
            alphabet: 5,
            max_instance_len: 5,
        },
    );
    let loss = Loss::Squared;
    let lmax = lambda_max(&d, loss, MAX_LEN);
    let grid = make_grid(lmax, 5, 0.01, &[0.0, 0.01, 0.1, 1.0, 10.0, 100.0]).unwrap();
    let res = path_2d(&d, loss, &grid, &hp()).unwrap();
    let mut problems = Vec::new();
    let order: Vec<(usize, usize)> = res.cells.iter().map(|c| (c.k, c.kp)).collect();
    let want_order: Vec<(usize, usize)> = (0..5).flat_map(|k| (0..6).map(move |kp| (k, kp))).collect();
    let refs_ok = res
        .cells
        .iter()
        .all(|c| c.report.reference_count == (usize::from(c.k > 0) + usize::from(c.kp > 0)).max(1));
    let counts: Vec<String> = res.cells.iter().map(|c| c.report.reference_count.to_string()).collect();
    println!("  path visit order: {order:?}");
    println!("  path reference counts: {}", counts.join(""));

    let dense = DenseProblem::new(&d, loss, MAX_LEN, lmax, 0.0).unwrap();
    let index = pattern_index(&dense);
    let (mut checked, mut violations, mut max_gap) = (0, Vec::new(), 0.0f64);
    for c in &res.cells {
        let g = recomputed_gap(&dense, &index, &c.solution);
        checked += 1;
        max_gap = max_gap.max(g);
        if !(g < EPS) {
            violations.push(format!("path cell ({},{}): {g:e}", c.k, c.kp));
        }
    }

    let dc = random_dataset(
        &mut rng,
        &SynthSpec {
            structure: StructureKind::Itemset,
            task: TaskKind::Classification,
            n: 10,
            alphabet: 4,
            max_instance_len: 3,
        },
    );
    let closs = Loss::Logistic;
    let cgrid = make_grid(lambda_max(&dc, closs, MAX_LEN), 4, 0.05, &[0.0]).unwrap();
    let plan = FoldPlan::leave_one_out(dc.n());
    let cv = cv_path(&dc, closs, &plan, &cgrid.lambdas, &Hyperparams { kappa: 0.1, ..hp() }, 2).unwrap();
    let fold_order: Vec<usize> = cv.records.iter().map(|r| r.fold).collect();
    let fold_first = fold_order.windows(2).all(|w| w[0] <= w[1]) && fold_order[0] == 0;
    let cv_refs_ok = cv.records.iter().all(|r| {
        let want = if r.fold == 0 || r.lambda_index == 0 { 1 } else { 2 };
        r.report.reference_count == want
    });
    let per_lambda_ok = (0..cgrid.lambdas.len()).all(|k| {
        cv.validation_records()
            .filter(|r| r.lambda_index == k && r.metric.is_finite())
            .count()
            == 10
    });
    println!(
        "  cv fold order: {:?}",
        cv.records.iter().map(|r| (r.fold, r.lambda_index)).collect::<Vec<_>>()
    );
    println!(
        "  cv reference counts: {}",
        cv.records.iter().map(|r| r.report.reference_count.to_string()).collect::<String>()
    );
    for r in &cv.records {
        let sub_data = dc.subset(plan.train(r.fold)).unwrap();
        let key = r.fold;
        if problems.len() <= key {
            problems.push(DenseProblem::new(&sub_data, closs, MAX_LEN, 1.0, 0.0).unwrap());
        }
        let dp = &problems[key];
        let g = recomputed_gap(dp, &pattern_index(dp), &r.solution);
        checked += 1;
        max_gap = max_gap.max(g);
        if !(g < EPS) {
            violations.push(format!("cv fold {} lambda {}: {g:e}", r.fold, r.lambda_index));
        }
    }

    let pass = order == want_order && refs_ok && fold_first && cv_refs_ok && per_lambda_ok;
    StructureRun {
        line: Line {
            id: 7,
            title: "path and cv structure",
            pass,
            hard: true,
            detail: format!(
                "{} path cells in lambda-outer order: {}, path ref counts ok: {refs_ok}, cv records {} fold-major from full data: {fold_first}, cv ref counts ok: {cv_refs_ok}, 10 fold metrics per lambda: {per_lambda_ok}",
                res.cells.len(),
                order == want_order,
                cv.records.len()
            ),
        },
        conv_checked: checked,
        conv_violations: violations,
        max_gap,
    }
}

fn criterion_8() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, structure, task) in [
        ("itemset/squared", StructureKind::Itemset, TaskKind::Regression),
        ("sequence/logistic", StructureKind::Sequence, TaskKind::Classification),
    ] {
        let d = random_dataset(
            &mut rng,
            &SynthSpec {
                structure,
                task,
                n: 120,
                alphabet: 14,
                max_instance_len: 7,
            },
        );
        let loss = Loss::for_task(task);
        let max_len = 4;
        let total = tree::PatternTree::new(&d, max_len)
            .enumerate_all(DEFAULT_ENUMERATION_CEILING)
            .unwrap()
            .len();
        let grid = make_grid(lambda_max(&d, loss, max_len), 10, 0.01, &[0.0, 0.1, 1.0, 10.0]).unwrap();
        let params = Hyperparams { max_len, ..hp() };
        let multi = path_2d(&d, loss, &grid, &params).unwrap();
        let single = path_2d_with(&d, loss, &grid, &params, ReferenceMode::Single).unwrap();
        let mean_visited = |r: &PathResult, two_only: bool| {
            let cells: Vec<&PathCell> = r
                .cells
                .iter()
                .filter(|c| !two_only || (c.k > 0 && c.kp > 0))
                .collect();
            cells.iter().map(|c| c.report.traversal.visited as f64).sum::<f64>() / cells.len() as f64
        };
        let (m2, m1) = (mean_visited(&multi, true), mean_visited(&single, true));
        let sparse: Vec<&PathCell> = multi.cells.iter().filter(|c| c.k < grid.lambdas.len() / 3).collect();
        let sparse_mean = sparse.iter().map(|c| c.report.traversal.visited as f64).sum::<f64>() / sparse.len() as f64;
        let frac = sparse_mean / total as f64;
        let this_ok = m2 <= m1 && frac <= 0.05;
        ok &= this_ok;
        notes.push(format!(
            "{name}: tree {total} nodes, mean visited two-ref {m2:.1} vs one-ref {m1:.1}, sparsest third {:.2}% of tree",
            100.0 * frac
        ));
        if !this_ok {
            eprintln!("warning: screening effectiveness trend not met for {name}");
            for c in &multi.cells {
                eprintln!(
                    "  cell ({},{}) visited {} pruned {} active {} epochs {}",
                    c.k,
                    c.kp,
                    c.report.traversal.visited,
                    c.report.traversal.pruned,
                    c.report.initial_active.len(),
                    c.report.epochs
                );
            }
        }
    }
    Line {
        id: 8,
        title: "screening effectiveness trend (reported)",
        pass: ok,
        hard: false,
        detail: notes.join("; "),
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..300 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    f(0.5 * (lo + hi))
}

fn criterion_9() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut lipschitz_fail = 0;
    let mut curvature_fail = 0;
    for loss in [Loss::Squared, Loss::Logistic] {
        let gamma = loss.gamma();
        for _ in 0..2000 {
            let y = match loss {
                Loss::Squared => rng.gen_range(-3.0..3.0),
                Loss::Logistic => if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
            };
            let z = rng.gen_range(-8.0..8.0);
            let h = rng.gen_range(-2.0..2.0);
            let dg = (loss.grad_i(y, z + h) - loss.grad_i(y, z)).abs();
            if dg > gamma * h.abs() * (1.0 + 1e-12) + 1e-15 {
                lipschitz_fail += 1;
            }
            let e = 1e-4;
            let fd = (loss.value_i(y, z + e) - 2.0 * loss.value_i(y, z) + loss.value_i(y, z - e)) / (e * e);
            if fd > gamma + 1e-5 {
                curvature_fail += 1;
            }
        }
    }
    let mut worst = 0.0f64;
    for trial in 0..200 {
        let n = rng.gen_range(2..=4);
        let loss = if trial % 2 == 0 { Loss::Squared } else { Loss::Logistic };
        let task = if loss == Loss::Squared { TaskKind::Regression } else { TaskKind::Classification };
        let mut instances: Vec<Instance> = (0..n)
            .map(|i| Instance {
                items: vec![i as u32],
                label: match loss {
                    Loss::Squared => rng.gen_range(-2.0..2.0),
                    Loss::Logistic => if i % 2 == 0 { 1.0 } else { -1.0 },
                },
            })
            .collect();
        instances.rotate_left(rng.gen_range(0..n));
        let d = Dataset::new(instances, StructureKind::Itemset, task).unwrap();
        let y = d.labels();
        let mut alpha: Vec<f64> = match loss {
            Loss::Squared => (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            Loss::Logistic => y.iter().map(|&yi| yi * rng.gen_range(0.02..0.98)).collect(),
        };
        if loss == Loss::Squared {
            let m = alpha.iter().sum::<f64>() / n as f64;
            alpha.iter_mut().for_each(|a| *a -= m);
        }
        // -L*(-alpha) = sum_i min_u (alpha_i u + loss_i(u))
        let numeric: f64 = (0..n)
            .map(|i| golden_min(|u| alpha[i] * u + loss.value_i(y[i], u), -60.0, 60.0))
            .sum();
        let exact = loss.neg_conjugate(&y, &alpha);
        worst = worst.max((numeric - exact).abs());
        if loss == Loss::Squared {
            let certified = ScaledDual::certify(&d, alpha.clone(), 1e3, MAX_LEN).unwrap();
            worst = worst.max((dual_value(&d, loss, &certified) - numeric).abs());
        }
    }
    Line {
        id: 9,
        title: "numeric foundations",
        pass: lipschitz_fail == 0 && curvature_fail == 0 && worst <= 1e-6,
        hard: true,
        detail: format!(
            "gradient Lipschitz failures {lipschitz_fail}, curvature failures {curvature_fail}, max conjugate error {worst:.2e}"
        ),
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let cases: Vec<CaseResult> = (0..SUITE_SIZE).into_par_iter().map(run_case).collect();
    let suite_time = started.elapsed();

    let sum = |f: &dyn Fn(&CaseResult) -> usize| cases.iter().map(f).sum::<usize>();
    let cells = sum(&|c| c.cells);
    let static_v = sum(&|c| c.static_violations.len());
    let dynamic_v = sum(&|c| c.dynamic_violations.len());
    for c in &cases {
        for v in c.static_violations.iter().chain(&c.dynamic_violations).take(5) {
            eprintln!("safety violation: {v}");
        }
    }
    let mut lines = vec![Line {
        id: 1,
        title: "safety of static and dynamic screening",
        pass: static_v == 0 && dynamic_v == 0,
        hard: true,
        detail: format!(
            "{} datasets, {cells} fits, {} static and {} dynamic removals checked, violations static {static_v} dynamic {dynamic_v}, {:.0}s",
            cases.len(),
            sum(&|c| c.static_removed),
            sum(&|c| c.dynamic_removed),
            suite_time.as_secs_f64()
        ),
    }];

    let equiv_v = sum(&|c| c.equiv_violations.len());
    let equiv_n = sum(&|c| c.equiv_checked);
    let nonunique = sum(&|c| c.equiv_nonunique);
    let nonunique_cells = sum(&|c| c.equiv_nonunique_cells);
    let max_coef = cases.iter().map(|c| c.max_coef_diff).fold(0.0, f64::max);
    let max_unique = cases.iter().map(|c| c.max_coef_diff_unique).fold(0.0, f64::max);
    let max_b0 = cases.iter().map(|c| c.max_intercept_diff).fold(0.0, f64::max);
    for v in cases.iter().flat_map(|c| c.equiv_violations.iter()).take(20) {
        eprintln!("equivalence violation: {v}");
    }
    lines.push(Line {
        id: 2,
        title: "coefficients match dense oracle",
        pass: equiv_v == 0,
        hard: true,
        detail: format!(
            "{equiv_n} fits at gap {TIGHT_EPS:.0e}, max coef diff {max_coef:.2e}, max intercept diff {max_b0:.2e}, violations {equiv_v}; \
             {nonunique_cells} fits have a rank-deficient equicorrelation set (optimum not unique) and carry {nonunique} of the violations; \
             max diff on the remaining fits {max_unique:.2e}"
        ),
    });

    lines.push(criterion_3());
    lines.push(criterion_4());

    let lmax_v: Vec<&String> = cases.iter().flat_map(|c| c.lmax_violations.iter()).collect();
    for v in lmax_v.iter().take(10) {
        eprintln!("lambda_max violation: {v}");
    }
    lines.push(Line {
        id: 5,
        title: "lambda_max certificate",
        pass: lmax_v.is_empty(),
        hard: true,
        detail: format!("{} datasets x {} kappas, violations {}", cases.len(), KAPPAS.len(), lmax_v.len()),
    });

    let structure = criterion_7();
    let conv_v = sum(&|c| c.conv_violations.len()) + structure.conv_violations.len();
    let conv_n = sum(&|c| c.conv_checked) + structure.conv_checked;
    let conv_max = cases
        .iter()
        .map(|c| c.max_recomputed_gap)
        .fold(structure.max_gap, f64::max);
    for v in cases
        .iter()
        .flat_map(|c| c.conv_violations.iter())
        .chain(&structure.conv_violations)
        .take(10)
    {
        eprintln!("convergence violation: {v}");
    }
    lines.push(Line {
        id: 6,
        title: "returned solutions certify the gap",
        pass: conv_v == 0,
        hard: true,
        detail: format!("{conv_n} solutions recomputed, max gap {conv_max:.2e}, violations {conv_v}"),
    });
    lines.push(structure.line);
    lines.push(criterion_8());
    lines.push(criterion_9());

    lines.sort_by_key(|l| l.id);
    println!();
    for l in &lines {
        l.print();
    }
    println!("total time {:.0}s", started.elapsed().as_secs_f64());
    if lines.iter().any(|l| l.hard && !l.pass) {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
