//! Synthetic dialogues and a noisy ensemble annotator.
//!
//! Gold labels come from a latent linear concept over each utterance's own
//! features. The annotator errs through additive logit biases at three
//! scopes: one per dialogue (`b_D`), one per ensemble member (`c_j`), and an
//! independent logistic draw per call. The per-dialogue bias is what makes
//! errors cluster within a session.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Dialogue, Speaker};
use crate::error::{Error, Result};
use crate::numeric::{dot, sigmoid};
use crate::rng;

/// Logits are clamped here so that `p ∈ {0, 1}` stays finite.
pub const LOGIT_CLAMP: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub d: usize,
    pub n_dialogues: usize,
    /// Inclusive `[min, max]` utterance count per dialogue.
    pub utterances_per_dialogue: (usize, usize),
    /// Latent concept; drawn from the seed with norm `w_star_norm` when absent.
    pub w_star: Option<Vec<f64>>,
    pub w_star_norm: f64,
    /// Classes; 1 means a single binary problem. With more, gold labels are
    /// one-hot draws from a softmax over per-class concepts.
    pub n_classes: usize,
    pub sigma_session: f64,
    pub sigma_prompt: f64,
    pub sigma_draw: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            d: 8,
            n_dialogues: 600,
            utterances_per_dialogue: (6, 14),
            w_star: None,
            w_star_norm: 3.0,
            n_classes: 1,
            sigma_session: 0.5,
            sigma_prompt: 0.25,
            sigma_draw: 1.0,
            seed: 0,
        }
    }
}

impl WorldConfig {
    /// A world whose annotator never errs and whose gold labels are
    /// deterministic (`p ∈ {0, 1}` up to floating point saturation).
    pub fn noise_free(self) -> Self {
        WorldConfig {
            w_star: None,
            w_star_norm: 1e9,
            sigma_session: 0.0,
            sigma_prompt: 0.0,
            sigma_draw: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_dialogues == 0 {
            return Err(Error::param("n_dialogues", "empty world"));
        }
        if self.d == 0 {
            return Err(Error::param("d", "must be at least 1"));
        }
        let (lo, hi) = self.utterances_per_dialogue;
        if lo == 0 || lo > hi {
            return Err(Error::param(
                "utterances_per_dialogue",
                format!("[{lo}, {hi}] is not a non-empty range of positive counts"),
            ));
        }
        if self.n_classes == 0 {
            return Err(Error::param("n_classes", "must be at least 1"));
        }
        for (name, v) in [
            ("sigma_session", self.sigma_session),
            ("sigma_prompt", self.sigma_prompt),
            ("sigma_draw", self.sigma_draw),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be finite and non-negative")));
            }
        }
        if let Some(w) = &self.w_star {
            if w.len() != self.d {
                return Err(Error::param(
                    "w_star",
                    format!("length {} differs from d = {}", w.len(), self.d),
                ));
            }
            if self.n_classes != 1 {
                return Err(Error::param("w_star", "an explicit concept needs n_classes = 1"));
            }
        }
        Ok(())
    }

    /// One concept vector per class (a single one in the binary case).
    pub fn concepts(&self) -> Vec<Vec<f64>> {
        if let Some(w) = &self.w_star {
            return vec![w.clone()];
        }
        let mut rng = rng::scoped(self.seed, "concept", "");
        (0..self.n_classes)
            .map(|_| {
                let v = rng::normal_vec(&mut rng, self.d);
                let norm = dot(&v, &v).sqrt();
                v.into_iter().map(|x| x * self.w_star_norm / norm).collect()
            })
            .collect()
    }
}

/// Clamped logit of the true positive probability of `class` given features.
pub fn true_logit(concepts: &[Vec<f64>], features: &[f64], class: usize) -> f64 {
    let z = if concepts.len() == 1 {
        dot(&concepts[0], features)
    } else {
        let scores: Vec<f64> = concepts.iter().map(|w| dot(w, features)).collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let own = scores[class] - max;
        let rest = scores
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != class)
            .map(|(_, s)| (s - max).exp())
            .sum::<f64>();
        // logit(p_c) = log p_c - log(1 - p_c) with shared normalizer cancelled
        own - rest.ln()
    };
    z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
}

fn dialogue_id(i: usize) -> String {
    format!("d{i:04}")
}

/// Draw a corpus from the latent concept. Deterministic given the config.
pub fn generate_world(config: &WorldConfig) -> Result<Corpus> {
    config.validate()?;
    let concepts = config.concepts();
    let dialogues: Vec<Dialogue> = (0..config.n_dialogues)
        .into_par_iter()
        .map(|i| {
            let id = dialogue_id(i);
            let mut rng = rng::scoped(config.seed, "world", &id);
            let (lo, hi) = config.utterances_per_dialogue;
            let n = rng.random_range(lo..=hi);
            let utterances: Vec<_> = (0..n)
                .map(|j| {
                    let x = rng::normal_vec(&mut rng, config.d);
                    let gold = if config.n_classes == 1 {
                        let p = sigmoid(dot(&concepts[0], &x));
                        vec![u8::from(rng.random::<f64>() < p)]
                    } else {
                        let scores: Vec<f64> = concepts.iter().map(|w| dot(w, &x)).collect();
                        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
                        let total: f64 = weights.iter().sum();
                        let mut u = rng.random::<f64>() * total;
                        let mut class = weights.len() - 1;
                        for (c, w) in weights.iter().enumerate() {
                            if u < *w {
                                class = c;
                                break;
                            }
                            u -= w;
                        }
                        (0..config.n_classes).map(|c| u8::from(c == class)).collect()
                    };
                    let speaker = if j % 2 == 0 { Speaker::Customer } else { Speaker::Agent };
                    (speaker, None, Some(x), Some(gold))
                })
                .collect();
            Dialogue::new(id, utterances)
        })
        .collect::<Result<_>>()?;
    Corpus::new(dialogues)
}

/// Hard ensemble labels for one dialogue and one class.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelerDraws {
    pub dialogue_id: String,
    pub class_index: usize,
    /// `n` rows of `k` binary draws.
    pub draws: Vec<Vec<u8>>,
    /// The session bias `b_D`, kept for diagnostics.
    pub session_bias: f64,
}

impl LabelerDraws {
    pub fn k(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }
}

/// Emulate `k` annotator calls per utterance for `class`.
///
/// Draws are generated member-by-member, so the first `k` members of a
/// larger ensemble coincide with a smaller one under the same seed.
pub fn simulate_draws(corpus: &Corpus, k: usize, config: &WorldConfig, class: usize) -> Result<Vec<LabelerDraws>> {
    if k == 0 {
        return Err(Error::param("k", "ensemble size must be at least 1"));
    }
    config.validate()?;
    let concepts = config.concepts();
    if class >= concepts.len() {
        return Err(Error::param("class", format!("{class} >= {} classes", concepts.len())));
    }
    let member_bias: Vec<f64> = {
        let mut rng = rng::scoped(config.seed, "prompt", &class.to_string());
        (0..k).map(|_| config.sigma_prompt * rng::normal(&mut rng)).collect()
    };
    let scope = format!("draws/{class}");
    corpus
        .dialogues
        .par_iter()
        .map(|dialogue| {
            let logits: Vec<f64> = dialogue
                .utterances
                .iter()
                .map(|u| {
                    let x = u.features.as_ref().ok_or_else(|| Error::MissingFeatures {
                        dialogue_id: dialogue.id.clone(),
                        utterance: u.index,
                    })?;
                    if x.len() != config.d {
                        return Err(Error::DimensionMismatch {
                            expected: config.d,
                            found: x.len(),
                        });
                    }
                    Ok(true_logit(&concepts, x, class))
                })
                .collect::<Result<_>>()?;
            let mut rng = rng::scoped(config.seed, &scope, &dialogue.id);
            let session_bias = config.sigma_session * rng::normal(&mut rng);
            let mut draws = vec![Vec::with_capacity(k); logits.len()];
            for c in &member_bias {
                for (row, z) in draws.iter_mut().zip(&logits) {
                    let noise = config.sigma_draw * rng::logistic(&mut rng);
                    row.push(u8::from(z + session_bias + c + noise > 0.0));
                }
            }
            Ok(LabelerDraws {
                dialogue_id: dialogue.id.clone(),
                class_index: class,
                draws,
                session_bias,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> WorldConfig {
        WorldConfig {
            d: 4,
            n_dialogues: 50,
            seed,
            ..WorldConfig::default()
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_world(&small(5)).unwrap();
        let b = generate_world(&small(5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_world(&small(6)).unwrap());
        let da = simulate_draws(&a, 7, &small(5), 0).unwrap();
        let db = simulate_draws(&b, 7, &small(5), 0).unwrap();
        assert_eq!(da, db);
    }

    #[test]
    fn zero_concept_gives_fair_coins() {
        let config = WorldConfig {
            w_star: Some(vec![0.0; 4]),
            n_dialogues: 400,
            ..small(1)
        };
        let corpus = generate_world(&config).unwrap();
        let labels: Vec<u8> = corpus
            .dialogues
            .iter()
            .flat_map(|d| d.utterances.iter().map(|u| u.gold.as_ref().unwrap()[0]))
            .collect();
        let rate = labels.iter().map(|&y| y as f64).sum::<f64>() / labels.len() as f64;
        let se = (0.25 / labels.len() as f64).sqrt();
        assert!((rate - 0.5).abs() < 4.0 * se, "rate {rate}");
    }

    #[test]
    fn saturated_concept_labels_positive_side() {
        let config = WorldConfig {
            w_star_norm: 100.0,
            n_dialogues: 1000,
            ..small(2)
        };
        let corpus = generate_world(&config).unwrap();
        let w = &config.concepts()[0];
        let (mut pos, mut total) = (0usize, 0usize);
        for u in corpus.dialogues.iter().flat_map(|d| &d.utterances) {
            if dot(w, u.features.as_ref().unwrap()) > 0.0 {
                total += 1;
                pos += u.gold.as_ref().unwrap()[0] as usize;
            }
        }
        assert!(total > 1000);
        assert!(pos as f64 / total as f64 > 0.99);
    }

    #[test]
    fn noise_free_labeler_reproduces_gold() {
        let config = small(3).noise_free();
        let corpus = generate_world(&config).unwrap();
        let draws = simulate_draws(&corpus, 5, &config, 0).unwrap();
        for (d, dr) in corpus.dialogues.iter().zip(&draws) {
            for (u, row) in d.utterances.iter().zip(&dr.draws) {
                let y = u.gold.as_ref().unwrap()[0];
                assert!(row.iter().all(|&v| v == y));
            }
        }
    }

    #[test]
    fn session_shift_has_the_sign_of_the_bias() {
        let config = WorldConfig {
            n_dialogues: 100,
            sigma_session: 2.0,
            sigma_prompt: 0.0,
            ..small(4)
        };
        let corpus = generate_world(&config).unwrap();
        let draws = simulate_draws(&corpus, 30, &config, 0).unwrap();
        let concepts = config.concepts();
        let mut agree = 0usize;
        for (d, dr) in corpus.dialogues.iter().zip(&draws) {
            // retained b_D is shared by every row of the dialogue
            assert!(draws
                .iter()
                .filter(|o| o.dialogue_id == d.id)
                .all(|o| o.session_bias == dr.session_bias));
            let shift: f64 = d
                .utterances
                .iter()
                .zip(&dr.draws)
                .map(|(u, row)| {
                    let p = sigmoid(true_logit(&concepts, u.features.as_ref().unwrap(), 0));
                    row.iter().map(|&v| v as f64).sum::<f64>() / row.len() as f64 - p
                })
                .sum::<f64>()
                / d.len() as f64;
            agree += usize::from(shift.signum() == dr.session_bias.signum());
        }
        assert!(agree >= 90, "{agree} of 100 dialogues");
    }

    #[test]
    fn members_are_nested_across_k() {
        let config = small(8);
        let corpus = generate_world(&config).unwrap();
        let five = simulate_draws(&corpus, 5, &config, 0).unwrap();
        let thirty = simulate_draws(&corpus, 30, &config, 0).unwrap();
        for (a, b) in five.iter().zip(&thirty) {
            assert_eq!(a.session_bias, b.session_bias);
            for (ra, rb) in a.draws.iter().zip(&b.draws) {
                assert_eq!(ra[..], rb[..5]);
            }
        }
    }

    #[test]
    fn multiclass_gold_is_one_hot() {
        let config = WorldConfig {
            n_classes: 3,
            ..small(9)
        };
        let corpus = generate_world(&config).unwrap();
        assert_eq!(corpus.n_classes, 3);
        for u in corpus.dialogues.iter().flat_map(|d| &d.utterances) {
            assert_eq!(u.gold.as_ref().unwrap().iter().map(|&v| v as usize).sum::<usize>(), 1);
        }
        let concepts = config.concepts();
        let x = corpus.dialogues[0].utterances[0].features.clone().unwrap();
        let total: f64 = (0..3).map(|c| sigmoid(true_logit(&concepts, &x, c))).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_configs() {
        for config in [
            WorldConfig {
                n_dialogues: 0,
                ..small(0)
            },
            WorldConfig { d: 0, ..small(0) },
            WorldConfig {
                sigma_draw: -1.0,
                ..small(0)
            },
            WorldConfig {
                utterances_per_dialogue: (3, 2),
                ..small(0)
            },
            WorldConfig {
                w_star: Some(vec![1.0]),
                ..small(0)
            },
        ] {
            assert!(generate_world(&config).is_err());
        }
        let err = generate_world(&WorldConfig {
            n_dialogues: 0,
            ..small(0)
        })
        .unwrap_err();
        assert!(err.to_string().contains("empty world"));
    }
}
