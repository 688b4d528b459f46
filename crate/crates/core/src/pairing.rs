//! Preference pairs between segments and the score-difference correlation study.
//!
//! Pairs are always stored with the preferred (annotator-positive) segment
//! first, so `delta_s = s_a - s_b` is positive at a 0.5 threshold.

use std::fmt::Write as _;

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::numeric::ols;
use crate::rng;
use crate::scores::{bucket_index, HardLabel, ScoreVector};

/// Attempts allowed per requested pair before a dialogue gives up.
pub const ATTEMPTS_PER_PAIR: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairMode {
    /// Both segments from the same dialogue.
    Intra,
    /// Segments from two different dialogues.
    Cross,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SegmentRef {
    /// Position of the dialogue in the corpus.
    pub dialogue: usize,
    pub dialogue_id: String,
    /// 1-based index of the last utterance in the segment.
    pub end_index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preference {
    AOverB,
    BOverA,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreferencePair {
    pub a: SegmentRef,
    pub b: SegmentRef,
    pub delta_s: f64,
    pub preference: Preference,
    pub same_session: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairSampler {
    pub mode: PairMode,
    pub pairs_per_dialogue: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl PairSampler {
    pub fn new(mode: PairMode, pairs_per_dialogue: usize, seed: u64) -> Self {
        PairSampler {
            mode,
            pairs_per_dialogue,
            threshold: 0.5,
            seed,
        }
    }

    /// Sample discordant pairs. `scores` must be aligned with `corpus.dialogues`.
    ///
    /// Each dialogue gets its own generator, so output order and content do
    /// not depend on thread scheduling.
    pub fn sample(&self, corpus: &Corpus, scores: &[ScoreVector]) -> Result<Vec<PreferencePair>> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::param(
                "threshold",
                format!("{} is not in (0, 1)", self.threshold),
            ));
        }
        if scores.len() != corpus.len() {
            return Err(Error::DimensionMismatch {
                expected: corpus.len(),
                found: scores.len(),
            });
        }
        for (d, sv) in corpus.dialogues.iter().zip(scores) {
            if d.id != sv.dialogue_id || d.len() != sv.s.len() {
                return Err(Error::ScoreLength {
                    dialogue_id: d.id.clone(),
                    expected: d.len(),
                    found: sv.s.len(),
                });
            }
        }
        let labels: Vec<Vec<HardLabel>> = scores
            .iter()
            .map(|sv| sv.s.iter().map(|&s| HardLabel::from_score(s, self.threshold)).collect())
            .collect();
        if self.mode == PairMode::Cross && corpus.len() < 2 {
            warn!("cross-session pairing needs at least two dialogues");
            return Ok(Vec::new());
        }
        let per_dialogue: Vec<Vec<PreferencePair>> = (0..corpus.len())
            .into_par_iter()
            .map(|slot| self.sample_slot(corpus, scores, &labels, slot))
            .collect();
        Ok(per_dialogue.into_iter().flatten().collect())
    }

    fn sample_slot(
        &self,
        corpus: &Corpus,
        scores: &[ScoreVector],
        labels: &[Vec<HardLabel>],
        slot: usize,
    ) -> Vec<PreferencePair> {
        let scope = match self.mode {
            PairMode::Intra => "pairs/intra",
            PairMode::Cross => "pairs/cross",
        };
        let mut rng = rng::scoped(self.seed, scope, &corpus.dialogues[slot].id);
        let mut pairs = Vec::with_capacity(self.pairs_per_dialogue);
        let budget = ATTEMPTS_PER_PAIR * self.pairs_per_dialogue;
        let n_dialogues = corpus.len();
        for _ in 0..budget {
            if pairs.len() == self.pairs_per_dialogue {
                break;
            }
            let (da, ia, db, ib) = match self.mode {
                PairMode::Intra => {
                    let n = labels[slot].len();
                    if n < 2 {
                        break;
                    }
                    let i = rng.random_range(0..n);
                    let mut j = rng.random_range(0..n - 1);
                    if j >= i {
                        j += 1;
                    }
                    (slot, i, slot, j)
                }
                PairMode::Cross => {
                    let da = rng.random_range(0..n_dialogues);
                    let mut db = rng.random_range(0..n_dialogues - 1);
                    if db >= da {
                        db += 1;
                    }
                    let ia = rng.random_range(0..labels[da].len());
                    let ib = rng.random_range(0..labels[db].len());
                    (da, ia, db, ib)
                }
            };
            let ((pa, ea), (pb, eb)) = match (labels[da][ia], labels[db][ib]) {
                (HardLabel::Positive, HardLabel::Negative) => ((da, ia), (db, ib)),
                (HardLabel::Negative, HardLabel::Positive) => ((db, ib), (da, ia)),
                _ => continue,
            };
            pairs.push(PreferencePair {
                a: segment_ref(corpus, pa, ea),
                b: segment_ref(corpus, pb, eb),
                delta_s: scores[pa].s[ea] - scores[pb].s[eb],
                preference: Preference::AOverB,
                same_session: pa == pb,
            });
        }
        if pairs.is_empty() && self.pairs_per_dialogue > 0 && self.mode == PairMode::Intra {
            log::debug!("dialogue {} yielded no discordant pairs", corpus.dialogues[slot].id);
        } else if pairs.len() < self.pairs_per_dialogue {
            log::debug!(
                "dialogue {} yielded {} of {} pairs",
                corpus.dialogues[slot].id,
                pairs.len(),
                self.pairs_per_dialogue
            );
        }
        pairs
    }
}

fn segment_ref(corpus: &Corpus, dialogue: usize, offset: usize) -> SegmentRef {
    SegmentRef {
        dialogue,
        dialogue_id: corpus.dialogues[dialogue].id.clone(),
        end_index: offset + 1,
    }
}

/// Pair export, one row per pair.
pub fn pairs_csv(pairs: &[PreferencePair]) -> String {
    let mut out = String::from("dialogue_a,end_a,dialogue_b,end_b,delta_s,same_session\n");
    for p in pairs {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{}",
            p.a.dialogue_id, p.a.end_index, p.b.dialogue_id, p.b.end_index, p.delta_s, p.same_session
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationBucket {
    pub lo: f64,
    pub hi: f64,
    pub mean_ds: f64,
    /// Fraction of pairs whose gold labels agree with the preference.
    pub p_gold: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTable {
    pub group: String,
    pub buckets: Vec<CorrelationBucket>,
    /// `(slope, intercept)` of `p_gold` on `mean_ds`; `None` with fewer than
    /// two nonempty buckets.
    pub fit: Option<(f64, f64)>,
}

impl CorrelationTable {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|(s, _)| s)
    }
}

/// `(delta_s, gold agrees)` for each pair.
pub fn gold_agreement(corpus: &Corpus, pairs: &[PreferencePair], class: usize) -> Result<Vec<(f64, bool)>> {
    pairs
        .iter()
        .map(|p| {
            let ya = corpus.dialogues[p.a.dialogue].gold(p.a.end_index, class)?;
            let yb = corpus.dialogues[p.b.dialogue].gold(p.b.end_index, class)?;
            Ok((p.delta_s, ya == 1 && yb == 0))
        })
        .collect()
}

/// Bucket `(delta_s, agrees)` observations over `(0, 1]` and fit a line.
pub fn correlation_table(group: &str, observations: &[(f64, bool)], m: usize) -> CorrelationTable {
    let mut count = vec![0usize; m];
    let mut agree = vec![0usize; m];
    let mut sum_ds = vec![0.0f64; m];
    for &(ds, ok) in observations {
        let b = bucket_index(ds.abs().min(1.0), m);
        count[b] += 1;
        agree[b] += usize::from(ok);
        sum_ds[b] += ds.abs();
    }
    let buckets: Vec<CorrelationBucket> = (0..m)
        .map(|b| {
            let n = count[b];
            CorrelationBucket {
                lo: b as f64 / m as f64,
                hi: (b + 1) as f64 / m as f64,
                mean_ds: if n == 0 { 0.0 } else { sum_ds[b] / n as f64 },
                p_gold: if n == 0 { 0.0 } else { agree[b] as f64 / n as f64 },
                count: n,
            }
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = buckets
        .iter()
        .filter(|b| b.count > 0)
        .map(|b| (b.mean_ds, b.p_gold))
        .unzip();
    CorrelationTable {
        group: group.to_string(),
        fit: ols(&xs, &ys),
        buckets,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReport {
    pub intra: CorrelationTable,
    pub cross: CorrelationTable,
}

impl CorrelationReport {
    /// `slope(intra) - slope(cross)`, when both are defined.
    pub fn slope_difference(&self) -> Option<f64> {
        Some(self.intra.slope()? - self.cross.slope()?)
    }
}

pub fn correlation_experiment(
    corpus: &Corpus,
    intra: &[PreferencePair],
    cross: &[PreferencePair],
    class: usize,
    m: usize,
) -> Result<CorrelationReport> {
    if m < 2 {
        return Err(Error::param("buckets", format!("{m} < 2")));
    }
    Ok(CorrelationReport {
        intra: correlation_table("intra", &gold_agreement(corpus, intra, class)?, m),
        cross: correlation_table("cross", &gold_agreement(corpus, cross, class)?, m),
    })
}

/// Bootstrap standard error of the slope difference, resampling pairs
/// within each group. Replicates with an undefined slope are skipped.
pub fn bootstrap_slope_difference_se(
    intra: &[(f64, bool)],
    cross: &[(f64, bool)],
    m: usize,
    replicates: usize,
    seed: u64,
) -> Option<f64> {
    if intra.is_empty() || cross.is_empty() {
        return None;
    }
    let mut rng = rng::scoped(seed, "bootstrap", "slope");
    let mut resample = |obs: &[(f64, bool)]| -> Vec<(f64, bool)> {
        (0..obs.len()).map(|_| obs[rng.random_range(0..obs.len())]).collect()
    };
    let diffs: Vec<f64> = (0..replicates)
        .filter_map(|_| {
            let a = correlation_table("intra", &resample(intra), m).slope();
            let b = correlation_table("cross", &resample(cross), m).slope();
            Some(a? - b?)
        })
        .collect();
    if diffs.len() < 2 {
        return None;
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
    Some(var.sqrt())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:.6}"))
}

/// Bucket rows of both groups.
pub fn correlation_csv(report: &CorrelationReport) -> String {
    let mut out = String::from("group,bucket_lo,bucket_hi,mean_ds,p_gold,count\n");
    for table in [&report.intra, &report.cross] {
        for b in &table.buckets {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6},{}",
                table.group, b.lo, b.hi, b.mean_ds, b.p_gold, b.count
            );
        }
    }
    out
}

/// Linear fit per group; undefined fits are written as `nan`.
pub fn correlation_fit_csv(report: &CorrelationReport) -> String {
    let mut out = String::from("group,slope,intercept\n");
    for table in [&report.intra, &report.cross] {
        let _ = writeln!(
            out,
            "{},{},{}",
            table.group,
            fmt_opt(table.fit.map(|f| f.0)),
            fmt_opt(table.fit.map(|f| f.1))
        );
    }
    out
}
