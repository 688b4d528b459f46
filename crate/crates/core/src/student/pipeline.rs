//! The three training arms compared under scarce gold labels.
//!
//! Dialogues are split into a held-out evaluation set and a training pool.
//! A gold subsample of the pool (at dialogue granularity) stands in for the
//! human-labeled data; annotator scores cover the whole pool.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Segment, SegmentOptions};
use crate::error::{Error, Result};
use crate::pairing::{PairMode, PairSampler, PreferencePair};
use crate::rng;
use crate::scores::ScoreVector;

use super::loss::{PairExample, PointExample};
use super::model::{Architecture, StudentModel};
use super::train::{train, LossKind, TrainConfig, TrainData};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Pointwise training on the gold subsample only.
    FinetuneOnly,
    /// Pointwise pretraining on soft scores, then gold fine-tuning.
    PointwisePretrain,
    /// Pairwise pretraining on intra-session pairs, then gold fine-tuning.
    PairwisePretrain,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::FinetuneOnly, Arm::PointwisePretrain, Arm::PairwisePretrain];

    pub fn name(&self) -> &'static str {
        match self {
            Arm::FinetuneOnly => "finetune_only",
            Arm::PointwisePretrain => "pointwise_pretrain",
            Arm::PairwisePretrain => "pairwise_pretrain",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub architecture: Architecture,
    pub segments: SegmentOptions,
    /// Pretraining schedule; its `loss` field is set per arm.
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
    pub pairs_per_dialogue: usize,
    /// Fraction of dialogues held out for evaluation.
    pub test_fraction: f64,
    pub threshold: f64,
    pub class: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            architecture: Architecture::Linear,
            segments: SegmentOptions::default(),
            pretrain: TrainConfig::default(),
            finetune: TrainConfig::default(),
            pairs_per_dialogue: 16,
            test_fraction: 0.2,
            threshold: 0.5,
            class: 0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutcome {
    pub accuracy: f64,
    pub gold_dialogues: usize,
    pub pretrain_examples: usize,
    pub model: StudentModel,
}

/// Held-out and pool dialogue positions, plus the pool order used for gold
/// subsampling (so smaller fractions are prefixes of larger ones).
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub test: Vec<usize>,
    pub pool: Vec<usize>,
}

pub fn split_dialogues(n: usize, test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::param(
            "test_fraction",
            format!("{test_fraction} is not in (0, 1)"),
        ));
    }
    if n < 2 {
        return Err(Error::Empty("need at least two dialogues to split"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::scoped(seed, "split", ""));
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let pool = order.split_off(n_test);
    Ok(Split { test: order, pool })
}

/// Build point examples for the given dialogues with targets from `target`.
fn points(
    segments: &[Vec<Segment>],
    dialogues: &[usize],
    mut target: impl FnMut(usize, &Segment) -> Result<f64>,
) -> Result<Vec<PointExample>> {
    let mut out = Vec::new();
    for &d in dialogues {
        for seg in &segments[d] {
            out.push(PointExample {
                features: seg.features.clone(),
                target: target(d, seg)?,
            });
        }
    }
    Ok(out)
}

pub fn pair_examples(segments: &[Vec<Segment>], pairs: &[PreferencePair]) -> Vec<PairExample> {
    pairs
        .iter()
        .map(|p| PairExample {
            preferred: segments[p.a.dialogue][p.a.end_index - 1].features.clone(),
            other: segments[p.b.dialogue][p.b.end_index - 1].features.clone(),
            delta_s: p.delta_s,
        })
        .collect()
}

/// Share of held-out segments whose sign of logit matches gold.
pub fn accuracy(
    model: &StudentModel,
    corpus: &Corpus,
    segments: &[Vec<Segment>],
    dialogues: &[usize],
    class: usize,
) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for &d in dialogues {
        for seg in &segments[d] {
            let y = corpus.dialogues[d].gold(seg.end_index, class)?;
            let predicted = u8::from(model.predict_logit(&seg.features)? > 0.0);
            correct += usize::from(predicted == y);
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::Empty("evaluation split"));
    }
    Ok(correct as f64 / total as f64)
}

/// Train one arm and report held-out accuracy. `scores` must be aligned
/// with `corpus.dialogues` and belong to `config.class`.
pub fn pipeline(
    corpus: &Corpus,
    scores: &[ScoreVector],
    gold_fraction: f64,
    arm: Arm,
    config: &PipelineConfig,
) -> Result<PipelineOutcome> {
    let segments = corpus.segments(&config.segments)?;
    pipeline_with_segments(corpus, &segments, scores, gold_fraction, arm, config)
}

/// As [`pipeline`], reusing precomputed segments.
pub fn pipeline_with_segments(
    corpus: &Corpus,
    segments: &[Vec<Segment>],
    scores: &[ScoreVector],
    gold_fraction: f64,
    arm: Arm,
    config: &PipelineConfig,
) -> Result<PipelineOutcome> {
    if !(gold_fraction > 0.0 && gold_fraction <= 1.0) {
        return Err(Error::param(
            "gold_fraction",
            format!("{gold_fraction} is not in (0, 1]"),
        ));
    }
    if scores.len() != corpus.len() {
        return Err(Error::DimensionMismatch {
            expected: corpus.len(),
            found: scores.len(),
        });
    }
    let split = split_dialogues(corpus.len(), config.test_fraction, config.seed)?;
    let n_gold = (split.pool.len() as f64 * gold_fraction).round() as usize;
    if n_gold == 0 {
        return Err(Error::Empty("gold subsample"));
    }
    let gold_dialogues = &split.pool[..n_gold];
    let gold = points(segments, gold_dialogues, |d, seg| {
        Ok(corpus.dialogues[d].gold(seg.end_index, config.class)? as f64)
    })?;

    let init = StudentModel::init(config.architecture, corpus.d, rng::derive_seed(config.seed, "init", ""));
    let (pretrained, pretrain_examples) = match arm {
        Arm::FinetuneOnly => (init, 0),
        Arm::PointwisePretrain => {
            let soft = points(segments, &split.pool, |d, seg| Ok(scores[d].s[seg.end_index - 1]))?;
            let cfg = TrainConfig {
                loss: LossKind::Pointwise,
                ..config.pretrain.clone()
            };
            (train(init, TrainData::Pointwise(&soft), &cfg)?.model, soft.len())
        }
        Arm::PairwisePretrain => {
            let pool_corpus = Corpus {
                dialogues: split.pool.iter().map(|&d| corpus.dialogues[d].clone()).collect(),
                d: corpus.d,
                n_classes: corpus.n_classes,
            };
            let pool_scores: Vec<ScoreVector> = split.pool.iter().map(|&d| scores[d].clone()).collect();
            let sampler = PairSampler {
                mode: PairMode::Intra,
                pairs_per_dialogue: config.pairs_per_dialogue,
                threshold: config.threshold,
                seed: rng::derive_seed(config.seed, "pairs", ""),
            };
            let mut pairs = sampler.sample(&pool_corpus, &pool_scores)?;
            for p in &mut pairs {
                p.a.dialogue = split.pool[p.a.dialogue];
                p.b.dialogue = split.pool[p.b.dialogue];
            }
            let examples = pair_examples(segments, &pairs);
            if examples.is_empty() {
                return Err(Error::Empty("no discordant intra-session pairs"));
            }
            let cfg = TrainConfig {
                loss: LossKind::Pairwise,
                ..config.pretrain.clone()
            };
            (train(init, TrainData::Pairwise(&examples), &cfg)?.model, examples.len())
        }
    };
    let finetune = TrainConfig {
        loss: LossKind::Pointwise,
        ..config.finetune.clone()
    };
    let model = train(pretrained, TrainData::Pointwise(&gold), &finetune)?.model;
    Ok(PipelineOutcome {
        accuracy: accuracy(&model, corpus, segments, &split.test, config.class)?,
        gold_dialogues: n_gold,
        pretrain_examples,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_a_partition() {
        let split = split_dialogues(50, 0.2, 3).unwrap();
        assert_eq!(split.test.len(), 10);
        let mut all: Vec<usize> = split.test.iter().chain(&split.pool).copied().collect();
        all.sort();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert_eq!(split, split_dialogues(50, 0.2, 3).unwrap());
        assert!(split_dialogues(1, 0.2, 3).is_err());
        assert!(split_dialogues(10, 0.0, 3).is_err());
    }
}
