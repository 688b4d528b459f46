//! Training objectives and their exact gradients.

use crate::error::{Error, Result};
use crate::numeric::{sigmoid, softplus};

use super::model::StudentModel;

/// Probability floor used inside logarithms only.
pub const LOG_CLAMP: f64 = 1e-12;

/// One segment with a (soft or hard) positive-class target.
#[derive(Clone, Debug, PartialEq)]
pub struct PointExample {
    pub features: Vec<f64>,
    pub target: f64,
}

/// A segment pair with the preferred segment first.
#[derive(Clone, Debug, PartialEq)]
pub struct PairExample {
    pub preferred: Vec<f64>,
    pub other: Vec<f64>,
    pub delta_s: f64,
}

/// Cross-entropy of `σ(logit)` against a soft target, accumulated into `grad`.
pub(crate) fn pointwise_into(model: &StudentModel, x: &[f64], target: f64, scale: f64, grad: &mut [f64]) -> f64 {
    let z = model.logit(x);
    let p = sigmoid(z);
    let pc = p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
    let loss = -target * pc.ln() - (1.0 - target) * (1.0 - pc).ln();
    model.accumulate_logit_grad(x, scale * (p - target), grad);
    loss
}

/// `−log σ(Δf − α·ΔS)`, accumulated into `grad`.
pub(crate) fn pairwise_into(model: &StudentModel, pair: &PairExample, alpha: f64, scale: f64, grad: &mut [f64]) -> f64 {
    let za = model.logit(&pair.preferred);
    let zb = model.logit(&pair.other);
    let u = za - zb - alpha * pair.delta_s;
    let q = sigmoid(u);
    let back = -(1.0 - q) * scale;
    model.accumulate_logit_grad(&pair.preferred, back, grad);
    model.accumulate_logit_grad(&pair.other, -back, grad);
    softplus(-u)
}

/// Soft-target cross-entropy and its gradient.
///
/// For the linear model the gradient is `(σ(θ·x̃) − target)·x̃` with `x̃ = [x; 1]`.
pub fn pointwise_loss_grad(model: &StudentModel, x: &[f64], target: f64) -> Result<(f64, Vec<f64>)> {
    if x.len() != model.d {
        return Err(Error::DimensionMismatch {
            expected: model.d,
            found: x.len(),
        });
    }
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::param("target", format!("{target} is not in [0, 1]")));
    }
    let mut grad = vec![0.0; model.parameter_count()];
    let loss = pointwise_into(model, x, target, 1.0, &mut grad);
    Ok((loss, grad))
}

/// Preference probability `σ(Δf − α·ΔS)` for logit difference `Δf`.
pub fn preference_probability(delta_f: f64, alpha: f64, delta_s: f64) -> f64 {
    sigmoid(delta_f - alpha * delta_s)
}

/// Pairwise ranking loss with adaptive margin and its gradient.
pub fn pairwise_loss_grad(model: &StudentModel, pair: &PairExample, alpha: f64) -> Result<(f64, Vec<f64>)> {
    for x in [&pair.preferred, &pair.other] {
        if x.len() != model.d {
            return Err(Error::DimensionMismatch {
                expected: model.d,
                found: x.len(),
            });
        }
    }
    let mut grad = vec![0.0; model.parameter_count()];
    let loss = pairwise_into(model, pair, alpha, 1.0, &mut grad);
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::student::model::Architecture;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn symmetric_target_at_zero() {
        let m = StudentModel::zeros(Architecture::Linear, 3);
        let (loss, grad) = pointwise_loss_grad(&m, &[1.0, -2.0, 0.5], 0.5).unwrap();
        assert!((loss - LN2).abs() < 1e-15);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn linear_pointwise_closed_form() {
        let m = StudentModel::from_parts(Architecture::Linear, 2, vec![0.3, -1.2, 0.4]).unwrap();
        let x = [0.7, 0.2];
        let (_, grad) = pointwise_loss_grad(&m, &x, 0.9).unwrap();
        let f = sigmoid(0.3 * 0.7 - 1.2 * 0.2 + 0.4);
        let expected = [(f - 0.9) * 0.7, (f - 0.9) * 0.2, f - 0.9];
        for (g, e) in grad.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn pointwise_clamp_keeps_loss_finite_and_gradient_exact() {
        let m = StudentModel::from_parts(Architecture::Linear, 1, vec![100.0, 0.0]).unwrap();
        let (loss, grad) = pointwise_loss_grad(&m, &[10.0], 0.0).unwrap();
        assert!(loss.is_finite());
        assert!((loss - -(LOG_CLAMP).ln()).abs() < 1e-3);
        // σ(1000) rounds to 1 so the factor is exactly 1 - 0
        assert_eq!(grad, vec![10.0, 1.0]);
        assert!(pointwise_loss_grad(&m, &[1.0], 1.5).is_err());
    }

    fn pair_with_logits(za: f64, zb: f64, delta_s: f64) -> (StudentModel, PairExample) {
        // linear, d = 1, weights 1 and bias 0: logit equals the feature
        let m = StudentModel::from_parts(Architecture::Linear, 1, vec![1.0, 0.0]).unwrap();
        (
            m,
            PairExample {
                preferred: vec![za],
                other: vec![zb],
                delta_s,
            },
        )
    }

    #[test]
    fn balanced_margin_gives_ln2() {
        let (m, pair) = pair_with_logits(0.7, 0.5, 0.4);
        let (loss, _) = pairwise_loss_grad(&m, &pair, 0.5).unwrap();
        assert!((loss - LN2).abs() < 1e-12);
    }

    #[test]
    fn scalar_margin_case() {
        let q = preference_probability(1.0, 0.5, 0.4);
        assert!((q - 0.689974).abs() < 1e-6);
        let (m, pair) = pair_with_logits(1.5, 0.5, 0.4);
        let (loss, grad) = pairwise_loss_grad(&m, &pair, 0.5).unwrap();
        assert!((loss - 0.371101).abs() < 1e-6);
        assert!((loss + q.ln()).abs() < 1e-12);
        // ∇ = −(1 − q)(x_a − x_b) on the weight, 0 on the bias
        assert!((grad[0] + (1.0 - q) * 1.0).abs() < 1e-12);
        assert!(grad[1].abs() < 1e-15);
    }

    #[test]
    fn margin_is_monotone() {
        let mut last = 0.0;
        for step in 0..20 {
            let margin = step as f64 * 0.05;
            let loss = softplus(-(0.3 - margin));
            assert!(loss >= last);
            last = loss;
        }
    }
}
