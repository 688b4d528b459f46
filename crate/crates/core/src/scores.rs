//! Ensemble confidence scores, hard labels, and calibration.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::simulator::{simulate_draws, LabelerDraws, WorldConfig};

/// Aggregated confidence for every utterance of one dialogue, one class.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector {
    pub dialogue_id: String,
    pub class_index: usize,
    pub k: usize,
    pub s: Vec<f64>,
}

/// Row means of the ensemble draws.
pub fn aggregate(draws: &LabelerDraws) -> Result<ScoreVector> {
    let s = draws
        .draws
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if row.is_empty() {
                return Err(Error::InvalidDialogue {
                    dialogue_id: draws.dialogue_id.clone(),
                    message: format!("utterance {} has no ensemble draws", i + 1),
                });
            }
            let positives = row.iter().map(|&v| v as u32).sum::<u32>();
            Ok(positives as f64 / row.len() as f64)
        })
        .collect::<Result<_>>()?;
    Ok(ScoreVector {
        dialogue_id: draws.dialogue_id.clone(),
        class_index: draws.class_index,
        k: draws.k(),
        s,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HardLabel {
    Negative,
    Positive,
    /// Score sits exactly on the threshold.
    Abstain,
}

impl HardLabel {
    pub fn from_score(s: f64, threshold: f64) -> Self {
        if s > threshold {
            HardLabel::Positive
        } else if s < threshold {
            HardLabel::Negative
        } else {
            HardLabel::Abstain
        }
    }

    pub fn as_bit(self) -> Option<u8> {
        match self {
            HardLabel::Negative => Some(0),
            HardLabel::Positive => Some(1),
            HardLabel::Abstain => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HardLabels {
    pub dialogue_id: String,
    pub labels: Vec<HardLabel>,
}

/// Majority vote at `threshold`, abstaining on exact ties.
pub fn hard_labels(scores: &ScoreVector, threshold: f64) -> Result<HardLabels> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::param("threshold", format!("{threshold} is not in (0, 1)")));
    }
    Ok(HardLabels {
        dialogue_id: scores.dialogue_id.clone(),
        labels: scores.s.iter().map(|&s| HardLabel::from_score(s, threshold)).collect(),
    })
}

#[derive(Serialize, Deserialize)]
struct ScoreRecord {
    id: String,
    class: usize,
    k: usize,
    s: Vec<f64>,
}

/// Serialize score vectors as JSONL, one `{"id","class","k","s"}` record per line.
pub fn scores_to_jsonl(scores: &[ScoreVector]) -> Result<String> {
    let mut out = String::new();
    for sv in scores {
        let record = ScoreRecord {
            id: sv.dialogue_id.clone(),
            class: sv.class_index,
            k: sv.k,
            s: sv.s.clone(),
        };
        out.push_str(&serde_json::to_string(&record).map_err(|e| Error::Serialize(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

/// Read externally produced scores and check them against `corpus`.
pub fn load_external_scores(path: &Path, corpus: &Corpus) -> Result<Vec<ScoreVector>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_external_scores(BufReader::new(file), path, corpus)
}

pub fn parse_external_scores(reader: impl BufRead, origin: &Path, corpus: &Corpus) -> Result<Vec<ScoreVector>> {
    let lengths: HashMap<&str, usize> = corpus.dialogues.iter().map(|d| (d.id.as_str(), d.len())).collect();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ScoreRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        let n = *lengths.get(record.id.as_str()).ok_or_else(|| Error::UnknownDialogue {
            dialogue_id: record.id.clone(),
        })?;
        if record.s.len() != n {
            return Err(Error::ScoreLength {
                dialogue_id: record.id,
                expected: n,
                found: record.s.len(),
            });
        }
        if let Some((j, &v)) = record.s.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::ScoreRange {
                dialogue_id: record.id,
                utterance: j + 1,
                value: v,
            });
        }
        if record.k == 0 {
            return Err(Error::MalformedLine {
                line: i + 1,
                message: "k must be at least 1".into(),
            });
        }
        out.push(ScoreVector {
            dialogue_id: record.id,
            class_index: record.class,
            k: record.k,
            s: record.s,
        });
    }
    Ok(out)
}

/// Pick out the scores of `class`, ordered like `corpus.dialogues`.
pub fn align_scores(corpus: &Corpus, scores: &[ScoreVector], class: usize) -> Result<Vec<ScoreVector>> {
    let by_id: HashMap<&str, &ScoreVector> = scores
        .iter()
        .filter(|s| s.class_index == class)
        .map(|s| (s.dialogue_id.as_str(), s))
        .collect();
    corpus
        .dialogues
        .iter()
        .map(|d| {
            let sv = by_id.get(d.id.as_str()).ok_or_else(|| Error::MissingScores {
                dialogue_id: d.id.clone(),
                class,
            })?;
            if sv.s.len() != d.len() {
                return Err(Error::ScoreLength {
                    dialogue_id: d.id.clone(),
                    expected: d.len(),
                    found: sv.s.len(),
                });
            }
            Ok((*sv).clone())
        })
        .collect()
}

/// One equal-width score interval `(lo, hi]` (the first also holds `lo`).
#[derive(Clone, Debug, PartialEq)]
pub struct ReliabilityBucket {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Fraction of gold positives; 0 when empty.
    pub acc: f64,
    /// Mean score; 0 when empty.
    pub conf: f64,
}

/// Index of the equal-width bucket holding `value ∈ [0, 1]` among `m`
/// buckets `[0, 1/m], (1/m, 2/m], …`.
pub fn bucket_index(value: f64, m: usize) -> usize {
    let mut i = ((value * m as f64).ceil() as isize - 1).clamp(0, m as isize - 1) as usize;
    // guard against rounding in value * m
    if i > 0 && value <= i as f64 / m as f64 {
        i -= 1;
    } else if i + 1 < m && value > (i + 1) as f64 / m as f64 {
        i += 1;
    }
    i
}

/// Partition `(score, gold)` pairs into `m` equal-width buckets.
pub fn bucketize(items: &[(f64, u8)], m: usize) -> Result<Vec<ReliabilityBucket>> {
    if m < 2 {
        return Err(Error::param("buckets", format!("{m} < 2")));
    }
    if items.is_empty() {
        return Err(Error::Empty("no labeled items to bucketize"));
    }
    let mut count = vec![0usize; m];
    let mut positives = vec![0usize; m];
    let mut conf = vec![0.0f64; m];
    for &(s, y) in items {
        let b = bucket_index(s, m);
        count[b] += 1;
        positives[b] += y as usize;
        conf[b] += s;
    }
    Ok((0..m)
        .map(|b| {
            let n = count[b];
            let (acc, conf) = if n == 0 {
                (0.0, 0.0)
            } else {
                (positives[b] as f64 / n as f64, conf[b] / n as f64)
            };
            ReliabilityBucket {
                lo: b as f64 / m as f64,
                hi: (b + 1) as f64 / m as f64,
                count: n,
                acc,
                conf,
            }
        })
        .collect())
}

/// Expected calibration error: count-weighted mean `|acc - conf|`.
pub fn ece(buckets: &[ReliabilityBucket]) -> Result<f64> {
    let total: usize = buckets.iter().map(|b| b.count).sum();
    if total == 0 {
        return Err(Error::Empty("all buckets are empty"));
    }
    Ok(buckets
        .iter()
        .filter(|b| b.count > 0)
        .map(|b| b.count as f64 / total as f64 * (b.acc - b.conf).abs())
        .sum())
}

/// Join aligned scores with gold labels of `class`.
pub fn join_gold(corpus: &Corpus, scores: &[ScoreVector], class: usize) -> Result<Vec<(f64, u8)>> {
    let mut items = Vec::with_capacity(corpus.n_utterances());
    for (dialogue, sv) in corpus.dialogues.iter().zip(scores) {
        if dialogue.id != sv.dialogue_id {
            return Err(Error::MissingScores {
                dialogue_id: dialogue.id.clone(),
                class,
            });
        }
        for (u, &s) in dialogue.utterances.iter().zip(&sv.s) {
            items.push((s, dialogue.gold(u.index, class)?));
        }
    }
    Ok(items)
}

/// Reliability table and ECE for one ensemble size.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationPoint {
    pub k: usize,
    pub buckets: Vec<ReliabilityBucket>,
    pub ece: f64,
}

pub fn calibration_of(corpus: &Corpus, scores: &[ScoreVector], class: usize, m: usize) -> Result<CalibrationPoint> {
    let items = join_gold(corpus, scores, class)?;
    let buckets = bucketize(&items, m)?;
    Ok(CalibrationPoint {
        k: scores.first().map_or(0, |s| s.k),
        ece: ece(&buckets)?,
        buckets,
    })
}

/// Simulate, aggregate, and calibrate once per ensemble size.
pub fn ece_curve(
    corpus: &Corpus,
    config: &WorldConfig,
    k_values: &[usize],
    m: usize,
    class: usize,
) -> Result<Vec<CalibrationPoint>> {
    k_values
        .iter()
        .map(|&k| {
            let scores = simulate_draws(corpus, k, config, class)?
                .iter()
                .map(aggregate)
                .collect::<Result<Vec<_>>>()?;
            calibration_of(corpus, &scores, class, m)
        })
        .collect()
}

/// `k,ece` CSV with six decimals.
pub fn ece_curve_csv(points: &[CalibrationPoint]) -> String {
    let mut out = String::from("k,ece\n");
    for p in points {
        let _ = writeln!(out, "{},{:.6}", p.k, p.ece);
    }
    out
}

/// Per-bucket reliability rows for every ensemble size.
pub fn reliability_csv(points: &[CalibrationPoint]) -> String {
    let mut out = String::from("k,bucket_lo,bucket_hi,count,acc,conf\n");
    for p in points {
        for b in &p.buckets {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{},{:.6},{:.6}",
                p.k, b.lo, b.hi, b.count, b.acc, b.conf
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Dialogue, Speaker};
    use std::io::Cursor;

    fn draws(rows: Vec<Vec<u8>>) -> LabelerDraws {
        LabelerDraws {
            dialogue_id: "d".into(),
            class_index: 0,
            draws: rows,
            session_bias: 0.0,
        }
    }

    #[test]
    fn aggregate_row_means() {
        let sv = aggregate(&draws(vec![vec![1, 0, 1, 0, 1], vec![1; 7], vec![1, 1, 0]])).unwrap();
        assert_eq!(sv.s[0], 0.6);
        assert_eq!(sv.s[1], 1.0);
        assert!((sv.s[2] - 2.0 / 3.0).abs() < 1e-15);
        assert!(aggregate(&draws(vec![vec![]])).is_err());
    }

    #[test]
    fn hard_label_thresholds() {
        let sv = ScoreVector {
            dialogue_id: "d".into(),
            class_index: 0,
            k: 1,
            s: vec![0.6, 0.5, 0.4999],
        };
        let hl = hard_labels(&sv, 0.5).unwrap();
        assert_eq!(
            hl.labels,
            vec![HardLabel::Positive, HardLabel::Abstain, HardLabel::Negative]
        );
        assert!(hard_labels(&sv, 1.0).is_err());
        assert!(hard_labels(&sv, 0.0).is_err());
    }

    fn two_utterance_corpus() -> Corpus {
        Corpus::new(vec![Dialogue::new(
            "d1",
            [
                (Speaker::User, None, None, Some(vec![1])),
                (Speaker::Agent, None, None, Some(vec![0])),
            ],
        )
        .unwrap()])
        .unwrap()
    }

    fn parse(text: &str) -> Result<Vec<ScoreVector>> {
        parse_external_scores(
            Cursor::new(text.to_string()),
            Path::new("<memory>"),
            &two_utterance_corpus(),
        )
    }

    #[test]
    fn external_scores_validation() {
        let ok = parse(r#"{"id":"d1","class":0,"k":5,"s":[0.2,0.8]}"#).unwrap();
        assert_eq!(ok[0].k, 5);
        assert_eq!(ok[0].s, vec![0.2, 0.8]);

        let err = parse(r#"{"id":"d1","class":0,"k":5,"s":[0.2,0.8,0.1]}"#).unwrap_err();
        assert!(matches!(err, Error::ScoreLength { ref dialogue_id, expected: 2, found: 3 } if dialogue_id == "d1"));
        assert!(err.to_string().contains("d1"));

        let err = parse(r#"{"id":"d1","class":0,"k":5,"s":[1.2,0.8]}"#).unwrap_err();
        assert!(matches!(err, Error::ScoreRange { utterance: 1, .. }));

        let err = parse(r#"{"id":"zz","class":0,"k":5,"s":[0.2,0.8]}"#).unwrap_err();
        assert!(matches!(err, Error::UnknownDialogue { .. }));
    }

    #[test]
    fn bucket_edges() {
        assert_eq!(bucket_index(0.0, 5), 0);
        assert_eq!(bucket_index(0.2, 5), 0);
        assert_eq!(bucket_index(0.2000001, 5), 1);
        assert_eq!(bucket_index(0.6, 5), 2);
        assert_eq!(bucket_index(3.0 / 5.0, 5), 2);
        assert_eq!(bucket_index(0.8, 5), 3);
        assert_eq!(bucket_index(1.0, 5), 4);
        for k in 1..=30 {
            for j in 0..=k {
                let s = j as f64 / k as f64;
                let b = bucket_index(s, 5);
                assert!(s <= (b + 1) as f64 / 5.0);
                assert!(b == 0 || s > b as f64 / 5.0);
            }
        }
    }

    #[test]
    fn bucketize_two_items() {
        let buckets = bucketize(&[(0.1, 0), (0.9, 1)], 5).unwrap();
        assert_eq!(buckets.len(), 5);
        assert_eq!((buckets[0].count, buckets[0].acc, buckets[0].conf), (1, 0.0, 0.1));
        assert_eq!((buckets[4].count, buckets[4].acc, buckets[4].conf), (1, 1.0, 0.9));
        assert!(buckets[1..4].iter().all(|b| b.count == 0));
    }

    #[test]
    fn bucketize_degenerate_mass() {
        let items = vec![(1.0, 1u8); 12];
        let buckets = bucketize(&items, 5).unwrap();
        assert_eq!(buckets.iter().filter(|b| b.count > 0).count(), 1);
        assert_eq!((buckets[4].acc, buckets[4].conf), (1.0, 1.0));
        assert_eq!(ece(&buckets).unwrap(), 0.0);
    }

    #[test]
    fn bucketize_calibrated_set() {
        // each bucket: scores averaging c, with positive fraction c
        let mut items = Vec::new();
        for (s, n, positives) in [(0.2, 5, 1), (0.5, 2, 1), (0.7, 10, 7), (1.0, 3, 3)] {
            items.extend((0..n).map(|i| (s, u8::from(i < positives))));
        }
        let buckets = bucketize(&items, 5).unwrap();
        for b in buckets.iter().filter(|b| b.count > 0) {
            assert!((b.acc - b.conf).abs() < 1e-12, "{b:?}");
        }
        assert!(ece(&buckets).unwrap() < 1e-12);
    }

    #[test]
    fn bucketize_errors() {
        assert!(bucketize(&[], 5).is_err());
        assert!(bucketize(&[(0.5, 1)], 1).is_err());
    }

    fn bucket(count: usize, acc: f64, conf: f64) -> ReliabilityBucket {
        ReliabilityBucket {
            lo: 0.0,
            hi: 1.0,
            count,
            acc,
            conf,
        }
    }

    #[test]
    fn ece_hand_cases() {
        assert_eq!(ece(&[bucket(3, 0.4, 0.4), bucket(5, 0.9, 0.9)]).unwrap(), 0.0);
        let two = ece(&[bucket(2, 0.5, 0.25), bucket(2, 1.0, 0.75)]).unwrap();
        assert!((two - 0.25).abs() < 1e-12);
        let one = ece(&[bucket(10, 0.3, 0.9)]).unwrap();
        assert!((one - 0.6).abs() < 1e-12);
        assert!(ece(&[bucket(0, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn k1_hard_labels_then_aggregate_is_identity() {
        let d = draws(vec![vec![1], vec![0], vec![1]]);
        let sv = aggregate(&d).unwrap();
        let hl = hard_labels(&sv, 0.5).unwrap();
        let back: Vec<Vec<u8>> = hl.labels.iter().map(|l| vec![l.as_bit().unwrap()]).collect();
        assert_eq!(aggregate(&draws(back.clone())).unwrap(), sv);
        assert_eq!(back, d.draws);
    }

    #[test]
    fn csv_layout() {
        let points = vec![
            CalibrationPoint {
                k: 1,
                buckets: vec![],
                ece: 0.2,
            },
            CalibrationPoint {
                k: 30,
                buckets: vec![],
                ece: 0.05,
            },
        ];
        assert_eq!(ece_curve_csv(&points), "k,ece\n1,0.200000\n30,0.050000\n");
    }
}
