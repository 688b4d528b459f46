//! Central finite-difference check of the analytic loss gradients.

use rand::Rng;

use crate::rng;

use super::loss::{pairwise_loss_grad, pointwise_loss_grad, PairExample};
use super::model::{Architecture, StudentModel};
use super::train::LossKind;

pub const FD_STEP: f64 = 1e-5;

/// Deliberate corruption of the analytic gradient, used to show the check
/// can fail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GradientMutation {
    #[default]
    None,
    FlipSign,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDifferenceReport {
    pub architecture: Architecture,
    pub loss: LossKind,
    pub instances: usize,
    /// Worst `‖analytic − numeric‖∞ / max(‖analytic‖∞, ‖numeric‖∞)` over instances.
    pub max_relative_error: f64,
    pub worst_instance: usize,
    /// Component with the largest absolute discrepancy in the worst instance.
    pub worst_component: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

fn random_instance(architecture: Architecture, d: usize, rng: &mut impl Rng) -> (StudentModel, PairExample, f64, f64) {
    let mut model = StudentModel::zeros(architecture, d);
    for t in &mut model.theta {
        *t = 0.7 * rng::normal(rng);
    }
    let pair = PairExample {
        preferred: rng::normal_vec(rng, d),
        other: rng::normal_vec(rng, d),
        delta_s: rng.random::<f64>(),
    };
    let target: f64 = rng.random();
    let alpha: f64 = rng.random();
    (model, pair, target, alpha)
}

fn loss_and_grad(model: &StudentModel, loss: LossKind, pair: &PairExample, target: f64, alpha: f64) -> (f64, Vec<f64>) {
    match loss {
        LossKind::Pointwise => pointwise_loss_grad(model, &pair.preferred, target),
        LossKind::Pairwise => pairwise_loss_grad(model, pair, alpha),
    }
    .expect("instance dimensions are consistent")
}

/// Compare analytic and central-difference gradients on random instances.
pub fn finite_difference_check(
    architecture: Architecture,
    loss: LossKind,
    d: usize,
    instances: usize,
    seed: u64,
    mutation: GradientMutation,
) -> FiniteDifferenceReport {
    let scope = format!("{architecture:?}/{loss:?}");
    let mut rng = rng::scoped(seed, "gradcheck", &scope);
    let mut report = FiniteDifferenceReport {
        architecture,
        loss,
        instances,
        max_relative_error: 0.0,
        worst_instance: 0,
        worst_component: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    for instance in 0..instances {
        let (mut model, pair, target, alpha) = random_instance(architecture, d, &mut rng);
        let (_, mut analytic) = loss_and_grad(&model, loss, &pair, target, alpha);
        if mutation == GradientMutation::FlipSign {
            analytic.iter_mut().for_each(|g| *g = -*g);
        }
        let numeric: Vec<f64> = (0..model.theta.len())
            .map(|j| {
                let original = model.theta[j];
                model.theta[j] = original + FD_STEP;
                let (up, _) = loss_and_grad(&model, loss, &pair, target, alpha);
                model.theta[j] = original - FD_STEP;
                let (down, _) = loss_and_grad(&model, loss, &pair, target, alpha);
                model.theta[j] = original;
                (up - down) / (2.0 * FD_STEP)
            })
            .collect();
        let scale = analytic
            .iter()
            .chain(&numeric)
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let (component, diff) = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).abs())
            .enumerate()
            .fold((0, 0.0), |best, (i, v)| if v > best.1 { (i, v) } else { best });
        let relative = diff / scale;
        if relative > report.max_relative_error || instance == 0 {
            report.max_relative_error = relative;
            report.worst_instance = instance;
            report.worst_component = component;
            report.worst_analytic = analytic[component];
            report.worst_numeric = numeric[component];
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_matches_numeric() {
        for arch in [Architecture::Linear, Architecture::Mlp1 { hidden: 5 }] {
            for loss in [LossKind::Pointwise, LossKind::Pairwise] {
                let r = finite_difference_check(arch, loss, 4, 50, 3, GradientMutation::None);
                assert!(r.max_relative_error < 1e-5, "{r:?}");
            }
        }
    }

    #[test]
    fn flipped_gradient_is_caught() {
        let r = finite_difference_check(
            Architecture::Linear,
            LossKind::Pairwise,
            4,
            10,
            3,
            GradientMutation::FlipSign,
        );
        assert!(r.max_relative_error > 1.0, "{r:?}");
    }
}
