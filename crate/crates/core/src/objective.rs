//! Losses, primal and dual objective values, and dual vectors.
//!
//! The primal is `L(X beta + 1 beta0) + lambda (|beta|_1 + kappa/2 |beta|_2^2)`
//! with an unnormalized loss. The dual is
//! `D(alpha) = -L*(-alpha) - Omega*(X^T alpha)` over `sum(alpha) = 0`.

use crate::data::{Dataset, SupportColumn, TaskKind};
use crate::error::{Error, Result};
use crate::screening::{inner_excess, max_abs_inner_above};
use crate::solution::{ReferenceSolution, SparseModel};

/// Slack on the dual domain `alpha_i y_i in [0, 1]` of the logistic loss.
const LOGISTIC_DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Loss {
    /// `1/2 sum (y_i - z_i)^2`
    Squared,
    /// `sum log(1 + exp(-y_i z_i))` with labels in {-1, +1}
    Logistic,
}

impl Loss {
    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::Regression => Loss::Squared,
            TaskKind::Classification => Loss::Logistic,
        }
    }

    /// Lipschitz constant of the loss gradient.
    pub fn gamma(self) -> f64 {
        match self {
            Loss::Squared => 1.0,
            Loss::Logistic => 0.25,
        }
    }

    pub fn value(self, y: &[f64], z: &[f64]) -> f64 {
        y.iter().zip(z).map(|(&yi, &zi)| self.value_i(yi, zi)).sum()
    }

    #[inline]
    pub fn value_i(self, y: f64, z: f64) -> f64 {
        match self {
            Loss::Squared => 0.5 * (y - z) * (y - z),
            Loss::Logistic => softplus(-y * z),
        }
    }

    /// Derivative of the per-instance loss in the margin.
    #[inline]
    pub fn grad_i(self, y: f64, z: f64) -> f64 {
        match self {
            Loss::Squared => z - y,
            Loss::Logistic => -y * sigmoid(-y * z),
        }
    }

    /// Second derivative of the per-instance loss in the margin.
    #[inline]
    pub fn hess_i(self, y: f64, z: f64) -> f64 {
        match self {
            Loss::Squared => 1.0,
            Loss::Logistic => {
                let p = sigmoid(-y * z);
                p * (1.0 - p)
            }
        }
    }

    /// Curvature bound on the per-instance loss (equals `gamma`).
    #[inline]
    pub fn curvature_bound(self) -> f64 {
        self.gamma()
    }

    /// `-L*(-alpha)`, the dual objective without the penalty term.
    /// Returns `-inf` outside the conjugate's domain.
    pub fn neg_conjugate(self, y: &[f64], alpha: &[f64]) -> f64 {
        match self {
            Loss::Squared => y
                .iter()
                .zip(alpha)
                .map(|(&yi, &ai)| yi * ai - 0.5 * ai * ai)
                .sum(),
            Loss::Logistic => {
                let mut total = 0.0;
                for (&yi, &ai) in y.iter().zip(alpha) {
                    let m = ai * yi;
                    if !(-LOGISTIC_DOMAIN_SLACK..=1.0 + LOGISTIC_DOMAIN_SLACK).contains(&m) {
                        return f64::NEG_INFINITY;
                    }
                    let m = m.clamp(0.0, 1.0);
                    total -= xlogx(m) + xlogx(1.0 - m);
                }
                total
            }
        }
    }

    /// Optimal intercept of the model with no pattern terms.
    pub fn null_intercept(self, y: &[f64]) -> f64 {
        match self {
            Loss::Squared => mean(y),
            Loss::Logistic => {
                let pos = y.iter().filter(|&&v| v > 0.0).count() as f64;
                let neg = y.len() as f64 - pos;
                (pos / neg).ln()
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[inline]
fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Elastic-Net penalty `lambda (|b|_1 + kappa/2 |b|_2^2)`.
pub fn penalty(model: &SparseModel, lambda: f64, kappa: f64) -> f64 {
    lambda * (model.l1_norm() + 0.5 * kappa * model.l2_norm_sq())
}

pub fn primal_value(dataset: &Dataset, loss: Loss, model: &SparseModel, lambda: f64, kappa: f64) -> Result<f64> {
    let z = model.margins(dataset.n());
    let p = loss.value(&dataset.labels(), &z) + penalty(model, lambda, kappa);
    if p.is_finite() {
        Ok(p)
    } else {
        Err(Error::ObjectiveOverflow)
    }
}

/// A centered dual vector together with its penalty-conjugate term.
///
/// With `kappa = 0` the conjugate of the penalty is the indicator of
/// `|x_j^T alpha| <= lambda`, so the centered residual is shrunk until every
/// pattern satisfies it. With `kappa > 0` the conjugate is the finite sum
/// `sum_j (|x_j^T alpha| - lambda)_+^2 / (2 lambda kappa)`; both the shrunk and
/// the unshrunk residual are then valid and the one with the larger dual
/// objective is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledDual {
    alpha: Vec<f64>,
    lambda: f64,
    kappa: f64,
    /// Largest pattern inner product of the centered residual, resolved
    /// exactly only above `lambda`.
    max_inner: f64,
    scale: f64,
    conjugate_penalty: f64,
}

impl ScaledDual {
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn into_alpha(self) -> Vec<f64> {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn max_inner(&self) -> f64 {
        self.max_inner
    }

    /// `Omega*(X^T alpha)`; zero whenever the vector was shrunk into the box.
    pub fn conjugate_penalty(&self) -> f64 {
        self.conjugate_penalty
    }

    /// Checks an externally supplied vector against the full pattern tree
    /// under the pure-lasso box constraint.
    pub fn certify(dataset: &Dataset, alpha: Vec<f64>, lambda: f64, max_len: usize) -> Result<Self> {
        let (max_inner, _) = max_abs_inner_above(dataset, &alpha, max_len, 0.0);
        if max_inner > lambda * (1.0 + 1e-9) {
            return Err(Error::UnscaledDual { max_inner, lambda });
        }
        Ok(ScaledDual {
            alpha,
            lambda,
            kappa: 0.0,
            max_inner,
            scale: 1.0,
            conjugate_penalty: 0.0,
        })
    }

    fn choose(loss: Loss, y: &[f64], centered: Vec<f64>, lambda: f64, kappa: f64, max_inner: f64, excess_sq: f64) -> Self {
        let scale = if max_inner > lambda { lambda / max_inner } else { 1.0 };
        if scale < 1.0 && kappa > 0.0 {
            let penalty = excess_sq / (2.0 * lambda * kappa);
            let unshrunk = loss.neg_conjugate(y, &centered) - penalty;
            let shrunk: Vec<f64> = centered.iter().map(|c| c * scale).collect();
            if unshrunk >= loss.neg_conjugate(y, &shrunk) {
                return ScaledDual {
                    alpha: centered,
                    lambda,
                    kappa,
                    max_inner,
                    scale: 1.0,
                    conjugate_penalty: penalty,
                };
            }
            return ScaledDual {
                alpha: shrunk,
                lambda,
                kappa,
                max_inner,
                scale,
                conjugate_penalty: 0.0,
            };
        }
        let alpha = if scale == 1.0 {
            centered
        } else {
            centered.into_iter().map(|c| c * scale).collect()
        };
        ScaledDual {
            alpha,
            lambda,
            kappa,
            max_inner,
            scale,
            conjugate_penalty: 0.0,
        }
    }
}

/// Negative loss gradient at `z`, centered to sum to zero.
pub fn centered_residual(loss: Loss, y: &[f64], z: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = y.iter().zip(z).map(|(&yi, &zi)| -loss.grad_i(yi, zi)).collect();
    let m = mean(&c);
    for v in &mut c {
        *v -= m;
    }
    c
}

/// Dual vector over the whole pattern space of length `<= max_len`.
pub fn dual_scale(
    dataset: &Dataset,
    loss: Loss,
    model: &SparseModel,
    lambda: f64,
    kappa: f64,
    max_len: usize,
) -> ScaledDual {
    let y = dataset.labels();
    let z = model.margins(dataset.n());
    let c = centered_residual(loss, &y, &z);
    let (max_inner, excess_sq) = if kappa > 0.0 {
        inner_excess(dataset, &c, max_len, lambda)
    } else {
        // Only the maximum above lambda matters for the scale factor.
        (max_abs_inner_above(dataset, &c, max_len, lambda).0, 0.0)
    };
    ScaledDual::choose(loss, &y, c, lambda, kappa, max_inner, excess_sq)
}

/// Dual vector for the problem restricted to `columns`, which shares its
/// optimum with the full problem whenever the columns contain the active set.
pub fn dual_scale_restricted(
    loss: Loss,
    y: &[f64],
    z: &[f64],
    columns: &[SupportColumn],
    lambda: f64,
    kappa: f64,
) -> ScaledDual {
    let c = centered_residual(loss, y, z);
    let (mut max_inner, mut excess_sq) = (0.0f64, 0.0);
    for col in columns {
        let v = col.dot(&c).abs();
        max_inner = max_inner.max(v);
        if v > lambda {
            excess_sq += (v - lambda) * (v - lambda);
        }
    }
    ScaledDual::choose(loss, y, c, lambda, kappa, max_inner, excess_sq)
}

/// `D(alpha) = -L*(-alpha) - Omega*(X^T alpha)`.
pub fn dual_value(dataset: &Dataset, loss: Loss, dual: &ScaledDual) -> f64 {
    loss.neg_conjugate(&dataset.labels(), dual.alpha()) - dual.conjugate_penalty()
}

/// `P - D`, cached into the solution.
pub fn duality_gap(reference: &mut ReferenceSolution) -> f64 {
    reference.gap = reference.primal - reference.dual;
    debug_assert!(
        reference.gap >= -1e-12 * (1.0 + reference.primal.abs()) || reference.gap.is_nan(),
        "negative gap {}",
        reference.gap
    );
    reference.gap
}

/// Builds the dual vector for `model` at `(lambda, kappa)` and packages the
/// primal-dual triple.
pub fn make_reference(
    dataset: &Dataset,
    loss: Loss,
    model: SparseModel,
    lambda: f64,
    kappa: f64,
    max_len: usize,
) -> Result<ReferenceSolution> {
    let dual = dual_scale(dataset, loss, &model, lambda, kappa, max_len);
    let primal = primal_value(dataset, loss, &model, lambda, kappa)?;
    let dual_obj = dual_value(dataset, loss, &dual);
    let mut r = ReferenceSolution {
        model,
        alpha: dual.into_alpha(),
        lambda,
        kappa,
        primal,
        dual: dual_obj,
        gap: f64::INFINITY,
    };
    duality_gap(&mut r);
    Ok(r)
}

/// The zero-coefficient model with its optimal intercept.
pub fn null_reference(dataset: &Dataset, loss: Loss, lambda: f64, kappa: f64, max_len: usize) -> Result<ReferenceSolution> {
    let model = SparseModel::null(loss.null_intercept(&dataset.labels()));
    make_reference(dataset, loss, model, lambda, kappa, max_len)
}
