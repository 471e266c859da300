//! Safe screening and safe pattern pruning.
//!
//! A reference primal-dual pair with gap `G` pins the dual optimum inside a
//! ball of radius `sqrt(2 gamma G)` around its dual vector, intersected with
//! the hyperplane `sum(alpha) = 0`. Bounding `|x_j^T alpha|` over that region
//! gives the screening score `u_j`; bounding it for every superpattern of `j`
//! at once gives the pruning score `v_j`. With two references the region is
//! the lens between both balls, which has a closed-form maximum.

use log::{debug, warn};

use crate::data::{Dataset, Pattern, SupportColumn};
use crate::solution::ReferenceSolution;
use crate::tree::{PatternNode, PatternTree};

/// Center distance below which two balls are treated as concentric.
const CONCENTRIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningBall {
    pub center: Vec<f64>,
    /// Squared radius, `2 gamma gap`.
    pub radius_sq: f64,
}

impl ScreeningBall {
    pub fn new(center: Vec<f64>, radius_sq: f64) -> Self {
        ScreeningBall {
            center,
            radius_sq: radius_sq.max(0.0),
        }
    }

    pub fn from_gap(center: Vec<f64>, gap: f64, gamma: f64) -> Self {
        ScreeningBall::new(center, 2.0 * gamma * gap.max(0.0))
    }

    pub fn from_reference(r: &ReferenceSolution, gamma: f64) -> Self {
        ScreeningBall::from_gap(r.alpha.clone(), r.gap, gamma)
    }

    pub fn radius(&self) -> f64 {
        self.radius_sq.sqrt()
    }

    pub fn n(&self) -> usize {
        self.center.len()
    }

    /// Positive and negative parts of `x^T center` over `rows`.
    fn split_sums(&self, rows: &[u32]) -> (f64, f64) {
        let mut pos = 0.0;
        let mut neg = 0.0;
        for &i in rows {
            let a = self.center[i as usize];
            if a > 0.0 {
                pos += a;
            } else {
                neg += a;
            }
        }
        (pos, neg)
    }

    /// `u_j = |x^T c| + r ||x - mean(x) 1||`.
    pub fn screening_score(&self, rows: &[u32]) -> f64 {
        let (pos, neg) = self.split_sums(rows);
        (pos + neg).abs() + self.spread(centered_norm(rows.len(), self.n()))
    }

    /// `v_j = max(sum_{c>0} x c, -sum_{c<0} x c) + r ||x||`.
    pub fn pruning_score(&self, rows: &[u32]) -> f64 {
        let (pos, neg) = self.split_sums(rows);
        pos.max(-neg) + self.spread((rows.len() as f64).sqrt())
    }

    /// `r * norm`, zero for a zero norm even when the radius is infinite.
    fn spread(&self, norm: f64) -> f64 {
        if norm == 0.0 {
            0.0
        } else {
            self.radius() * norm
        }
    }
}

/// `||x - Pi_1(x)||` for a 0/1 column with `count` ones out of `n`.
#[inline]
fn centered_norm(count: usize, n: usize) -> f64 {
    let s = count as f64;
    (s - s * s / n as f64).max(0.0).sqrt()
}

pub fn screening_score(column: &SupportColumn, reference: &ReferenceSolution, gamma: f64) -> f64 {
    ScreeningBall::from_reference(reference, gamma).screening_score(&column.rows)
}

pub fn pruning_score(column: &SupportColumn, reference: &ReferenceSolution, gamma: f64) -> f64 {
    ScreeningBall::from_reference(reference, gamma).pruning_score(&column.rows)
}

/// Geometry of two intersecting spheres: their common points lie on the
/// sphere of radius `radius` about `center` inside the hyperplane through
/// `center` orthogonal to `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallIntersection {
    /// `c1 - c2`
    pub delta: Vec<f64>,
    pub delta_norm_sq: f64,
    pub t: f64,
    /// `t c1 + (1 - t) c2`
    pub center: Vec<f64>,
    pub radius: f64,
    /// Cone threshold for the first ball's maximizer being inside the second.
    pub c1_threshold: f64,
    /// Cone threshold for the second ball's maximizer being inside the first.
    pub c2_threshold: f64,
}

/// Why two balls do not form a proper lens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degenerate {
    IdenticalCenters,
    /// Ball `inner` (0 or 1) lies inside the other.
    Contained { inner: usize },
    /// No common point; only possible through round-off when both balls hold
    /// the dual optimum.
    Disjoint,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Intersection {
    Lens(BallIntersection),
    Fallback(Degenerate),
}

pub fn ball_intersection(b1: &ScreeningBall, b2: &ScreeningBall) -> Intersection {
    let delta: Vec<f64> = b1.center.iter().zip(&b2.center).map(|(a, b)| a - b).collect();
    let delta_norm_sq: f64 = delta.iter().map(|d| d * d).sum();
    let dist = delta_norm_sq.sqrt();
    let (r1, r2) = (b1.radius(), b2.radius());
    if dist <= CONCENTRIC_TOL {
        return Intersection::Fallback(Degenerate::IdenticalCenters);
    }
    if r2 >= r1 + dist {
        return Intersection::Fallback(Degenerate::Contained { inner: 0 });
    }
    if r1 >= r2 + dist {
        return Intersection::Fallback(Degenerate::Contained { inner: 1 });
    }
    if r1 + r2 < dist {
        warn!("screening balls do not intersect (r1 + r2 = {:e}, distance {:e}); using the smaller", r1 + r2, dist);
        return Intersection::Fallback(Degenerate::Disjoint);
    }
    let t = 0.5 * (1.0 + (b2.radius_sq - b1.radius_sq) / delta_norm_sq);
    let center = b1.center.iter().zip(&b2.center).map(|(a, b)| t * a + (1.0 - t) * b).collect();
    let radius = (b2.radius_sq - t * t * delta_norm_sq).max(0.0).sqrt();
    let c1_threshold = (b2.radius_sq - b1.radius_sq - delta_norm_sq) / (2.0 * r1);
    let c2_threshold = (b2.radius_sq - b1.radius_sq + delta_norm_sq) / (2.0 * r2);
    Intersection::Lens(BallIntersection {
        delta,
        delta_norm_sq,
        t,
        center,
        radius,
        c1_threshold,
        c2_threshold,
    })
}

/// Which closed-form case produced one side of the two-ball score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// The first ball's maximizer lies inside the second.
    First,
    /// The second ball's maximizer lies inside the first.
    Second,
    /// The maximizer lies on the intersection of both spheres.
    Rim,
    /// No proper lens; the smaller single-ball score is used.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiScore {
    pub value: f64,
    pub plus: Branch,
    pub minus: Branch,
}

/// Pair of balls with their intersection precomputed.
#[derive(Debug, Clone)]
pub struct BallPair {
    pub first: ScreeningBall,
    pub second: ScreeningBall,
    pub intersection: Intersection,
    sum_first: f64,
    sum_second: f64,
}

impl BallPair {
    pub fn new(first: ScreeningBall, second: ScreeningBall) -> Self {
        assert_eq!(first.n(), second.n(), "balls live in different dimensions");
        let intersection = ball_intersection(&first, &second);
        let sum_first = first.center.iter().sum();
        let sum_second = second.center.iter().sum();
        BallPair {
            first,
            second,
            intersection,
            sum_first,
            sum_second,
        }
    }

    pub fn multi_screening(&self, rows: &[u32]) -> MultiScore {
        let lens = match &self.intersection {
            Intersection::Lens(lens) => lens,
            Intersection::Fallback(_) => {
                let value = self.first.screening_score(rows).min(self.second.screening_score(rows));
                return MultiScore {
                    value,
                    plus: Branch::Degenerate,
                    minus: Branch::Degenerate,
                };
            }
        };
        let n = self.first.n() as f64;
        let s = rows.len() as f64;
        let (mut a1, mut a2) = (0.0, 0.0);
        for &i in rows {
            a1 += self.first.center[i as usize];
            a2 += self.second.center[i as usize];
        }
        let xc_norm = centered_norm(rows.len(), self.first.n());
        // (x - Pi_1 x)^T delta, exact even if the centers drift off the hyperplane.
        let xc_delta = (a1 - a2) - s / n * (self.sum_first - self.sum_second);
        let rim_norm = (xc_norm * xc_norm - xc_delta * xc_delta / lens.delta_norm_sq).max(0.0).sqrt();
        let a_mid = lens.t * a1 + (1.0 - lens.t) * a2;
        let (r1, r2) = (self.first.radius(), self.second.radius());

        let side = |sign: f64| -> (f64, Branch) {
            if xc_norm == 0.0 {
                debug!("column parallel to the all-ones vector; using the rim case");
                return (sign * a_mid, Branch::Rim);
            }
            let ratio = sign * xc_delta / xc_norm;
            if ratio <= lens.c1_threshold {
                (sign * a1 + r1 * xc_norm, Branch::First)
            } else if ratio >= lens.c2_threshold {
                (sign * a2 + r2 * xc_norm, Branch::Second)
            } else {
                (sign * a_mid + lens.radius * rim_norm, Branch::Rim)
            }
        };
        let (up, plus) = side(1.0);
        let (down, minus) = side(-1.0);
        MultiScore {
            value: up.max(down),
            plus,
            minus,
        }
    }

    pub fn multi_pruning(&self, rows: &[u32]) -> f64 {
        self.first.pruning_score(rows).min(self.second.pruning_score(rows))
    }
}

pub fn multi_screening_score(
    column: &SupportColumn,
    r1: &ReferenceSolution,
    r2: &ReferenceSolution,
    gamma: f64,
) -> f64 {
    BallPair::new(ScreeningBall::from_reference(r1, gamma), ScreeningBall::from_reference(r2, gamma))
        .multi_screening(&column.rows)
        .value
}

pub fn multi_pruning_score(column: &SupportColumn, r1: &ReferenceSolution, r2: &ReferenceSolution, gamma: f64) -> f64 {
    BallPair::new(ScreeningBall::from_reference(r1, gamma), ScreeningBall::from_reference(r2, gamma))
        .multi_pruning(&column.rows)
}

/// Screening with one or two reference balls.
#[derive(Debug, Clone)]
pub enum ScreeningRule {
    Single(ScreeningBall),
    Pair(Box<BallPair>),
}

impl ScreeningRule {
    pub fn single(ball: ScreeningBall) -> Self {
        ScreeningRule::Single(ball)
    }

    pub fn pair(first: ScreeningBall, second: ScreeningBall) -> Self {
        ScreeningRule::Pair(Box::new(BallPair::new(first, second)))
    }

    /// Builds the rule from one or two dual-scaled references.
    pub fn from_references(refs: &[&ReferenceSolution], gamma: f64) -> Self {
        match refs {
            [r] => ScreeningRule::single(ScreeningBall::from_reference(r, gamma)),
            [a, b] => ScreeningRule::pair(
                ScreeningBall::from_reference(a, gamma),
                ScreeningBall::from_reference(b, gamma),
            ),
            _ => panic!("screening takes one or two references, got {}", refs.len()),
        }
    }

    pub fn reference_count(&self) -> usize {
        match self {
            ScreeningRule::Single(_) => 1,
            ScreeningRule::Pair(_) => 2,
        }
    }

    pub fn screening_score(&self, rows: &[u32]) -> f64 {
        match self {
            ScreeningRule::Single(b) => b.screening_score(rows),
            ScreeningRule::Pair(p) => p.multi_screening(rows).value,
        }
    }

    pub fn pruning_score(&self, rows: &[u32]) -> f64 {
        match self {
            ScreeningRule::Single(b) => b.pruning_score(rows),
            ScreeningRule::Pair(p) => p.multi_pruning(rows),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraversalStats {
    /// Tree nodes whose scores were evaluated.
    pub visited: usize,
    /// Subtree roots cut by the pruning score.
    pub pruned: usize,
    /// Visited nodes kept for descent but rejected by the screening score.
    pub screened: usize,
}

impl std::ops::AddAssign for TraversalStats {
    fn add_assign(&mut self, rhs: Self) {
        self.visited += rhs.visited;
        self.pruned += rhs.pruned;
        self.screened += rhs.screened;
    }
}

#[derive(Debug, Clone, Default)]
pub struct ActiveSet {
    /// Surviving patterns in discovery order.
    pub columns: Vec<SupportColumn>,
    pub stats: TraversalStats,
}

/// Depth-first safe pattern pruning. A node whose pruning score is below
/// `lambda` is cut with its subtree; otherwise it is kept as a candidate when
/// its screening score is at least `lambda`, and its children are explored.
pub fn spp_traverse(dataset: &Dataset, lambda: f64, rule: &ScreeningRule, max_len: usize) -> ActiveSet {
    let tree = PatternTree::new(dataset, max_len);
    let mut out = ActiveSet::default();
    let mut stack: Vec<(PatternNode, f64)> = vec![(tree.root(), f64::INFINITY)];
    while let Some((node, parent_score)) = stack.pop() {
        for child in tree.expand(&node) {
            out.stats.visited += 1;
            let v = rule.pruning_score(&child.rows);
            debug_assert!(
                v <= parent_score * (1.0 + 1e-12) + 1e-12,
                "pruning score grew down the tree: {v} > {parent_score}"
            );
            if v < lambda {
                out.stats.pruned += 1;
                continue;
            }
            if !(rule.screening_score(&child.rows) < lambda) {
                out.columns.push(child.column());
            } else {
                out.stats.screened += 1;
            }
            stack.push((child, v));
        }
    }
    out
}

/// Returns `(max, excess)` where `max` is the largest `|x_j^T alpha|` if it
/// exceeds `lambda` (else `lambda`) and `excess = sum_j (|x_j^T alpha| - lambda)_+^2`
/// over every pattern up to `max_len`.
pub fn inner_excess(dataset: &Dataset, alpha: &[f64], max_len: usize, lambda: f64) -> (f64, f64) {
    let tree = PatternTree::new(dataset, max_len);
    let (mut max, mut excess) = (lambda, 0.0);
    let mut stack = vec![tree.root()];
    while let Some(node) = stack.pop() {
        for child in tree.expand(&node) {
            let (mut pos, mut neg) = (0.0, 0.0);
            for &i in &child.rows {
                let a = alpha[i as usize];
                if a > 0.0 {
                    pos += a;
                } else {
                    neg += a;
                }
            }
            let value = (pos + neg).abs();
            if value > lambda {
                excess += (value - lambda) * (value - lambda);
                max = max.max(value);
            }
            if pos.max(-neg) > lambda {
                stack.push(child);
            }
        }
    }
    (max, excess)
}

/// Exact `max_j |x_j^T alpha|` over all patterns up to `max_len`.
pub fn find_max_abs_inner(dataset: &Dataset, alpha: &[f64], max_len: usize) -> (f64, Option<Pattern>) {
    max_abs_inner_above(dataset, alpha, max_len, 0.0)
}

/// Like [`find_max_abs_inner`] but only resolves values above `floor`:
/// returns `(floor, None)` when no pattern exceeds it.
pub fn max_abs_inner_above(dataset: &Dataset, alpha: &[f64], max_len: usize, floor: f64) -> (f64, Option<Pattern>) {
    let tree = PatternTree::new(dataset, max_len);
    let mut best = floor;
    let mut arg = None;
    let mut stack: Vec<(PatternNode, f64)> = vec![(tree.root(), f64::INFINITY)];
    while let Some((node, bound)) = stack.pop() {
        if bound <= best {
            continue;
        }
        let mut kids: Vec<(PatternNode, f64)> = Vec::new();
        for child in tree.expand(&node) {
            let (mut pos, mut neg) = (0.0, 0.0);
            for &i in &child.rows {
                let a = alpha[i as usize];
                if a > 0.0 {
                    pos += a;
                } else {
                    neg += a;
                }
            }
            let value = (pos + neg).abs();
            if value > best {
                best = value;
                arg = Some(child.pattern.clone());
            }
            let child_bound = pos.max(-neg);
            if child_bound > best {
                kids.push((child, child_bound));
            }
        }
        // Highest bound ends on top of the stack.
        kids.sort_by(|a, b| a.1.total_cmp(&b.1));
        stack.extend(kids);
    }
    (best, arg)
}
