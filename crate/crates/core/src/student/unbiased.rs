//! Monte-Carlo check that calibrated soft labels give unbiased gradients.
//!
//! For a linear logistic model, the soft-label cross-entropy gradient is
//! `(σ(θ·x̃) − ŷ)·x̃`. When `Pr(y = 1 | ŷ) = ŷ`, its expectation equals the
//! gold-label gradient's. We draw `p ~ U(0, 1)`, set `ŷ = p`, draw
//! `y ~ Bernoulli(p)`, and z-test the two mean gradients componentwise.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{dot, sigmoid};
use crate::rng;

pub const MIN_DRAWS: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct UnbiasedReport {
    /// One z-score per parameter (weights, then bias).
    pub z: Vec<f64>,
    pub worst_component: usize,
    pub max_abs_z: f64,
}

/// Calibrated soft labels (`ŷ = p`).
pub fn unbiased_gradient_check(d: usize, n_draws: usize, seed: u64) -> Result<UnbiasedReport> {
    gradient_bias_check(d, n_draws, seed, 0.0)
}

/// Soft labels shifted to `ŷ = clamp(p + shift, 0, 1)`; `shift = 0` is calibrated.
pub fn gradient_bias_check(d: usize, n_draws: usize, seed: u64, shift: f64) -> Result<UnbiasedReport> {
    if n_draws < MIN_DRAWS {
        return Err(Error::InsufficientSamples {
            found: n_draws,
            required: MIN_DRAWS,
        });
    }
    if d == 0 {
        return Err(Error::param("d", "must be at least 1"));
    }
    let mut rng = rng::scoped(seed, "unbiased", "");
    let theta = rng::normal_vec(&mut rng, d + 1);
    let dims = d + 1;
    let (mut sum_s, mut sq_s) = (vec![0.0; dims], vec![0.0; dims]);
    let (mut sum_h, mut sq_h) = (vec![0.0; dims], vec![0.0; dims]);
    let mut x = vec![1.0; dims];
    for _ in 0..n_draws {
        for v in &mut x[..d] {
            *v = rng::normal(&mut rng);
        }
        let p: f64 = rng.random();
        let y = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
        let soft = (p + shift).clamp(0.0, 1.0);
        let f = sigmoid(dot(&theta, &x));
        for j in 0..dims {
            let gs = (f - soft) * x[j];
            let gh = (f - y) * x[j];
            sum_s[j] += gs;
            sq_s[j] += gs * gs;
            sum_h[j] += gh;
            sq_h[j] += gh * gh;
        }
    }
    let n = n_draws as f64;
    let variance = |sum: f64, sq: f64| (sq - sum * sum / n) / (n - 1.0);
    let z: Vec<f64> = (0..dims)
        .map(|j| {
            let se = (variance(sum_s[j], sq_s[j]) / n + variance(sum_h[j], sq_h[j]) / n).sqrt();
            (sum_s[j] / n - sum_h[j] / n) / se
        })
        .collect();
    let (worst_component, max_abs_z) =
        z.iter()
            .map(|v| v.abs())
            .enumerate()
            .fold((0, 0.0), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    Ok(UnbiasedReport {
        z,
        worst_component,
        max_abs_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_small_samples() {
        assert!(matches!(
            unbiased_gradient_check(4, 10, 0),
            Err(Error::InsufficientSamples {
                found: 10,
                required: 1000
            })
        ));
    }

    #[test]
    fn calibrated_labels_pass_and_shifted_fail() {
        let ok = unbiased_gradient_check(4, 20_000, 1).unwrap();
        assert_eq!(ok.z.len(), 5);
        assert!(ok.max_abs_z < 4.0, "{ok:?}");
        let bad = gradient_bias_check(4, 20_000, 1, 0.3).unwrap();
        assert!(bad.max_abs_z > 10.0, "{bad:?}");
        assert_eq!(bad.worst_component, 4);
    }
}
