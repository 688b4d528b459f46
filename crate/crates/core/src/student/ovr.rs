//! One-vs-rest reduction of a C-class problem to C binary students.

use crate::corpus::{Corpus, SegmentOptions};
use crate::error::{Error, Result};
use crate::pairing::{PairMode, PairSampler};
use crate::rng;
use crate::scores::{align_scores, ScoreVector};

use super::loss::PointExample;
use super::model::{Architecture, StudentModel};
use super::pipeline::pair_examples;
use super::train::{train, LossKind, TrainConfig, TrainData};

#[derive(Clone, Debug, PartialEq)]
pub struct OneVsRestConfig {
    pub architecture: Architecture,
    pub segments: SegmentOptions,
    /// `loss` selects soft-label pointwise or intra-session pairwise training.
    pub train: TrainConfig,
    pub pairs_per_dialogue: usize,
    pub threshold: f64,
}

impl Default for OneVsRestConfig {
    fn default() -> Self {
        OneVsRestConfig {
            architecture: Architecture::Linear,
            segments: SegmentOptions::default(),
            train: TrainConfig::default(),
            pairs_per_dialogue: 16,
            threshold: 0.5,
        }
    }
}

/// Train one binary student per class on that class's annotator scores.
pub fn one_vs_rest_train(
    corpus: &Corpus,
    scores: &[ScoreVector],
    n_classes: usize,
    config: &OneVsRestConfig,
) -> Result<Vec<StudentModel>> {
    if n_classes < 2 {
        return Err(Error::param("n_classes", "one-vs-rest needs at least two classes"));
    }
    let segments = corpus.segments(&config.segments)?;
    (0..n_classes)
        .map(|class| {
            let aligned = align_scores(corpus, scores, class)?;
            let seed = rng::derive_seed(config.train.seed, "ovr", &class.to_string());
            let init = StudentModel::init(config.architecture, corpus.d, seed);
            let train_config = TrainConfig {
                seed,
                ..config.train.clone()
            };
            let outcome = match config.train.loss {
                LossKind::Pointwise => {
                    let data: Vec<PointExample> = segments
                        .iter()
                        .zip(&aligned)
                        .flat_map(|(segs, sv)| {
                            segs.iter().map(move |seg| PointExample {
                                features: seg.features.clone(),
                                target: sv.s[seg.end_index - 1],
                            })
                        })
                        .collect();
                    train(init, TrainData::Pointwise(&data), &train_config)?
                }
                LossKind::Pairwise => {
                    let sampler = PairSampler {
                        mode: PairMode::Intra,
                        pairs_per_dialogue: config.pairs_per_dialogue,
                        threshold: config.threshold,
                        seed,
                    };
                    let pairs = sampler.sample(corpus, &aligned)?;
                    let data = pair_examples(&segments, &pairs);
                    train(init, TrainData::Pairwise(&data), &train_config)?
                }
            };
            Ok(outcome.model)
        })
        .collect()
}

/// Argmax over the per-class logits; ties go to the lowest class index.
pub fn one_vs_rest_predict(models: &[StudentModel], x: &[f64]) -> Result<usize> {
    if models.is_empty() {
        return Err(Error::Empty("no one-vs-rest models"));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (class, model) in models.iter().enumerate() {
        let z = model.predict_logit(x)?;
        if z > best.1 {
            best = (class, z);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(bias: f64) -> StudentModel {
        StudentModel::from_parts(Architecture::Linear, 2, vec![0.0, 0.0, bias]).unwrap()
    }

    #[test]
    fn dominant_class_wins() {
        let models = [constant(-5.0), constant(5.0), constant(-5.0)];
        assert_eq!(one_vs_rest_predict(&models, &[0.3, 0.1]).unwrap(), 1);
    }

    #[test]
    fn ties_go_low() {
        let models = [constant(-1.0), constant(2.0), constant(2.0)];
        assert_eq!(one_vs_rest_predict(&models, &[0.0, 0.0]).unwrap(), 1);
        assert!(one_vs_rest_predict(&[], &[0.0]).is_err());
    }

    #[test]
    fn complementary_binary_agrees_with_threshold() {
        let class0 = StudentModel::from_parts(Architecture::Linear, 2, vec![1.0, -2.0, 0.3]).unwrap();
        let class1 = StudentModel::from_parts(Architecture::Linear, 2, vec![-1.0, 2.0, -0.3]).unwrap();
        let models = [class0.clone(), class1];
        let mut rng = rng::seeded(2);
        for _ in 0..200 {
            let x = rng::normal_vec(&mut rng, 2);
            let binary = class0.predict_logit(&x).unwrap() > 0.0;
            let predicted = one_vs_rest_predict(&models, &x).unwrap();
            assert_eq!(predicted == 0, binary);
        }
    }
}
