//! Dialogues, their utterances, and prefix segments.
//!
//! A corpus is read from JSONL, one dialogue object per line:
//!
//! ```text
//! {"id": "d1", "utterances": [{"speaker": "agent", "text": "hi", "features": [0.1, 0.2], "gold": [1]}]}
//! ```
//!
//! `text`, `features` and `gold` are optional; unknown keys are ignored.
//! Utterance indices are positional and 1-based.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speaker role tag. Unrecognized roles are kept verbatim.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Speaker {
    Agent,
    Customer,
    System,
    User,
    Other(String),
}

impl From<String> for Speaker {
    fn from(s: String) -> Self {
        match s.as_str() {
            "agent" => Speaker::Agent,
            "customer" => Speaker::Customer,
            "system" => Speaker::System,
            "user" => Speaker::User,
            _ => Speaker::Other(s),
        }
    }
}

impl From<Speaker> for String {
    fn from(s: Speaker) -> Self {
        s.to_string()
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speaker::Agent => f.write_str("agent"),
            Speaker::Customer => f.write_str("customer"),
            Speaker::System => f.write_str("system"),
            Speaker::User => f.write_str("user"),
            Speaker::Other(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    /// 1-based position within the dialogue.
    pub index: usize,
    pub speaker: Speaker,
    pub text: Option<String>,
    pub features: Option<Vec<f64>>,
    /// One-vs-rest gold labels, one entry per class.
    pub gold: Option<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dialogue {
    pub id: String,
    pub utterances: Vec<Utterance>,
}

impl Dialogue {
    /// Build a dialogue, numbering utterances 1..=n in order.
    pub fn new(
        id: impl Into<String>,
        utterances: impl IntoIterator<Item = (Speaker, Option<String>, Option<Vec<f64>>, Option<Vec<u8>>)>,
    ) -> Result<Self> {
        let id = id.into();
        let utterances: Vec<Utterance> = utterances
            .into_iter()
            .enumerate()
            .map(|(i, (speaker, text, features, gold))| Utterance {
                index: i + 1,
                speaker,
                text,
                features,
                gold,
            })
            .collect();
        let dialogue = Dialogue { id, utterances };
        dialogue.validate()?;
        Ok(dialogue)
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Utterance by 1-based index.
    pub fn utterance(&self, index: usize) -> Option<&Utterance> {
        index.checked_sub(1).and_then(|i| self.utterances.get(i))
    }

    /// Gold label of utterance `index` for `class`.
    pub fn gold(&self, index: usize, class: usize) -> Result<u8> {
        self.utterance(index)
            .and_then(|u| u.gold.as_ref())
            .and_then(|g| g.get(class).copied())
            .ok_or_else(|| Error::MissingGold {
                dialogue_id: self.id.clone(),
                utterance: index,
                class,
            })
    }

    fn validate(&self) -> Result<()> {
        let invalid = |message: String| Error::InvalidDialogue {
            dialogue_id: self.id.clone(),
            message,
        };
        if self.utterances.is_empty() {
            return Err(invalid("dialogue has no utterances".into()));
        }
        for (i, u) in self.utterances.iter().enumerate() {
            if u.index != i + 1 {
                return Err(invalid(format!(
                    "utterance at position {} has index {}",
                    i + 1,
                    u.index
                )));
            }
            if let Some(g) = &u.gold {
                if g.iter().any(|&v| v > 1) {
                    return Err(invalid(format!("utterance {} has a non-binary gold label", u.index)));
                }
            }
        }
        Ok(())
    }
}

/// A prefix slice of a dialogue ending at `end_index`, pooled into one feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub dialogue_id: String,
    pub end_index: usize,
    pub window_start: usize,
    pub features: Vec<f64>,
}

/// How segments are cut and pooled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentOptions {
    /// Keep only the last `window` utterances; `None` keeps the full prefix.
    pub window: Option<usize>,
    /// Recency weight `γ ∈ (0, 1]`; utterance `j` in a segment ending at `i`
    /// gets weight `γ^(i - j)`.
    pub recency: f64,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        SegmentOptions {
            window: None,
            recency: 1.0,
        }
    }
}

impl SegmentOptions {
    pub fn validate(&self) -> Result<()> {
        if self.window == Some(0) {
            return Err(Error::param("window", "must be positive"));
        }
        if !(self.recency > 0.0 && self.recency <= 1.0) {
            return Err(Error::param("recency", format!("{} is not in (0, 1]", self.recency)));
        }
        Ok(())
    }

    /// First utterance covered by the segment ending at `end`.
    pub fn window_start(&self, end: usize) -> usize {
        match self.window {
            Some(w) => end.saturating_sub(w - 1).max(1),
            None => 1,
        }
    }
}

/// Recency-weighted mean of utterance features over `start..=end`.
pub fn feature_of_segment(dialogue: &Dialogue, start: usize, end: usize, recency: f64) -> Result<Vec<f64>> {
    if start < 1 || start > end || end > dialogue.len() {
        return Err(Error::InvalidDialogue {
            dialogue_id: dialogue.id.clone(),
            message: format!("segment {start}..={end} out of range 1..={}", dialogue.len()),
        });
    }
    let mut pooled: Option<Vec<f64>> = None;
    let mut weight = 1.0;
    let mut total = 0.0;
    for j in (start..=end).rev() {
        let features = dialogue.utterances[j - 1]
            .features
            .as_ref()
            .ok_or_else(|| Error::MissingFeatures {
                dialogue_id: dialogue.id.clone(),
                utterance: j,
            })?;
        let acc = pooled.get_or_insert_with(|| vec![0.0; features.len()]);
        if acc.len() != features.len() {
            return Err(Error::DimensionMismatch {
                expected: acc.len(),
                found: features.len(),
            });
        }
        for (a, x) in acc.iter_mut().zip(features) {
            *a += weight * x;
        }
        total += weight;
        weight *= recency;
    }
    let mut pooled = pooled.unwrap_or_default();
    for a in &mut pooled {
        *a /= total;
    }
    Ok(pooled)
}

/// Cut a dialogue into its `n` stride-1 prefix segments.
pub fn segment_dialogue(dialogue: &Dialogue, options: &SegmentOptions) -> Result<Vec<Segment>> {
    options.validate()?;
    (1..=dialogue.len())
        .map(|end| {
            let start = options.window_start(end);
            Ok(Segment {
                dialogue_id: dialogue.id.clone(),
                end_index: end,
                window_start: start,
                features: feature_of_segment(dialogue, start, end, options.recency)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub dialogues: Vec<Dialogue>,
    /// Feature dimensionality; 0 when no utterance carries features.
    pub d: usize,
    /// Number of one-vs-rest classes; 0 when no utterance carries gold labels.
    pub n_classes: usize,
}

impl Corpus {
    /// Validate the dialogues and infer `d` and the class count.
    pub fn new(dialogues: Vec<Dialogue>) -> Result<Self> {
        let mut builder = CorpusBuilder::default();
        for (i, dialogue) in dialogues.into_iter().enumerate() {
            builder.push(dialogue, i + 1)?;
        }
        Ok(builder.finish())
    }

    pub fn len(&self) -> usize {
        self.dialogues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dialogues.is_empty()
    }

    pub fn n_utterances(&self) -> usize {
        self.dialogues.iter().map(Dialogue::len).sum()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.dialogues.iter().position(|d| d.id == id)
    }

    /// Segment every dialogue; the outer vector is aligned with `dialogues`.
    pub fn segments(&self, options: &SegmentOptions) -> Result<Vec<Vec<Segment>>> {
        self.dialogues.iter().map(|d| segment_dialogue(d, options)).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(self.to_jsonl()?.as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for dialogue in &self.dialogues {
            let record = DialogueRecord::from(dialogue);
            out.push_str(&serde_json::to_string(&record).map_err(|e| Error::Serialize(e.to_string()))?);
            out.push('\n');
        }
        Ok(out)
    }
}

#[derive(Default)]
struct CorpusBuilder {
    dialogues: Vec<Dialogue>,
    ids: HashSet<String>,
    d: Option<usize>,
    n_classes: Option<usize>,
}

impl CorpusBuilder {
    fn push(&mut self, dialogue: Dialogue, line: usize) -> Result<()> {
        dialogue.validate()?;
        if !self.ids.insert(dialogue.id.clone()) {
            return Err(Error::DuplicateDialogue {
                line,
                dialogue_id: dialogue.id,
            });
        }
        for u in &dialogue.utterances {
            if let Some(f) = &u.features {
                let expected = *self.d.get_or_insert(f.len());
                if f.len() != expected {
                    return Err(Error::FeatureDimension {
                        line,
                        dialogue_id: dialogue.id.clone(),
                        utterance: u.index,
                        expected,
                        found: f.len(),
                    });
                }
            }
            if let Some(g) = &u.gold {
                let expected = *self.n_classes.get_or_insert(g.len());
                if g.len() != expected {
                    return Err(Error::GoldDimension {
                        line,
                        dialogue_id: dialogue.id.clone(),
                        utterance: u.index,
                        expected,
                        found: g.len(),
                    });
                }
            }
        }
        self.dialogues.push(dialogue);
        Ok(())
    }

    fn finish(self) -> Corpus {
        Corpus {
            dialogues: self.dialogues,
            d: self.d.unwrap_or(0),
            n_classes: self.n_classes.unwrap_or(0),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct UtteranceRecord {
    speaker: Speaker,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold: Option<Vec<u8>>,
}

#[derive(Serialize, Deserialize)]
struct DialogueRecord {
    id: String,
    utterances: Vec<UtteranceRecord>,
}

impl From<&Dialogue> for DialogueRecord {
    fn from(d: &Dialogue) -> Self {
        DialogueRecord {
            id: d.id.clone(),
            utterances: d
                .utterances
                .iter()
                .map(|u| UtteranceRecord {
                    speaker: u.speaker.clone(),
                    text: u.text.clone(),
                    features: u.features.clone(),
                    gold: u.gold.clone(),
                })
                .collect(),
        }
    }
}

/// Supported corpus file formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    match format {
        CorpusFormat::Jsonl => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            parse_jsonl(BufReader::new(file), path)
        }
    }
}

/// Parse JSONL dialogue records from any reader. `origin` is only used in IO errors.
pub fn parse_jsonl(reader: impl BufRead, origin: &Path) -> Result<Corpus> {
    let mut builder = CorpusBuilder::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DialogueRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        let id = record.id.clone();
        let dialogue = Dialogue::new(
            record.id,
            record
                .utterances
                .into_iter()
                .map(|u| (u.speaker, u.text, u.features, u.gold)),
        )
        .map_err(|e| Error::MalformedLine {
            line: line_no,
            message: match e {
                Error::InvalidDialogue { message, .. } => format!("dialogue {id}: {message}"),
                other => other.to_string(),
            },
        })?;
        builder.push(dialogue, line_no)?;
    }
    Ok(builder.finish())
}
