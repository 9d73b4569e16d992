//! Labeled embedding collections and trial lists.

mod io;
mod synth;

use std::collections::HashMap;
use std::fmt;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::linalg::Vector;

pub use io::{
    load_embeddings, load_embeddings_auto, load_trials, write_embeddings, write_trials,
    EmbeddingFormat,
};
pub use synth::{gen_synthetic, gen_trials, SynthConfig};
pub(crate) use io::read_magic;

/// One labeled embedding vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub speaker_id: String,
    pub utterance_id: String,
    pub vector: Vector,
}

impl Embedding {
    pub fn new(speaker_id: impl Into<String>, utterance_id: impl Into<String>, vector: Vector) -> Self {
        Self {
            speaker_id: speaker_id.into(),
            utterance_id: utterance_id.into(),
            vector,
        }
    }
}

/// An ordered, immutable collection of embeddings sharing one dimension.
///
/// Utterance ids are unique and every vector has positive norm. Speakers are
/// indexed in order of first appearance.
#[derive(Clone)]
pub struct Dataset {
    dim: usize,
    embeddings: Vec<Embedding>,
    speakers: IndexMap<String, Vec<usize>>,
    speaker_of: Vec<usize>,
    utterances: HashMap<String, usize>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.embeddings == other.embeddings
    }
}

impl fmt::Debug for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dataset")
            .field("dim", &self.dim)
            .field("embeddings", &self.embeddings.len())
            .field("speakers", &self.speakers.len())
            .finish()
    }
}

impl Dataset {
    pub fn new(dim: usize, embeddings: Vec<Embedding>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dataset dimension must be positive".into()));
        }
        let mut speakers: IndexMap<String, Vec<usize>> = IndexMap::new();
        let mut speaker_of = Vec::with_capacity(embeddings.len());
        let mut utterances = HashMap::with_capacity(embeddings.len());
        for (pos, e) in embeddings.iter().enumerate() {
            if e.vector.dim() != dim {
                return Err(Error::DimensionMismatch {
                    op: "dataset",
                    left: format!("declared dim {dim}"),
                    right: format!("utterance `{}` has dim {}", e.utterance_id, e.vector.dim()),
                });
            }
            if !(e.vector.norm() > 0.0) {
                return Err(Error::ZeroNorm {
                    context: format!("utterance `{}`", e.utterance_id),
                });
            }
            if utterances.insert(e.utterance_id.clone(), pos).is_some() {
                return Err(Error::DuplicateUtterance(e.utterance_id.clone()));
            }
            let entry = speakers.entry(e.speaker_id.clone());
            speaker_of.push(entry.index());
            entry.or_default().push(pos);
        }
        Ok(Self {
            dim,
            embeddings,
            speakers,
            speaker_of,
            utterances,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn embeddings(&self) -> &[Embedding] {
        &self.embeddings
    }

    pub fn get(&self, pos: usize) -> Option<&Embedding> {
        self.embeddings.get(pos)
    }

    pub fn vector(&self, pos: usize) -> &[f64] {
        self.embeddings[pos].vector.as_slice()
    }

    pub fn position(&self, utterance_id: &str) -> Option<usize> {
        self.utterances.get(utterance_id).copied()
    }

    pub fn n_speakers(&self) -> usize {
        self.speakers.len()
    }

    /// Speakers in order of first appearance with the positions of their utterances.
    pub fn speakers(&self) -> impl Iterator<Item = (&str, &[usize])> + '_ {
        self.speakers.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn speaker_positions(&self, speaker_id: &str) -> Option<&[usize]> {
        self.speakers.get(speaker_id).map(Vec::as_slice)
    }

    /// Index (in first-appearance order) of the speaker of `pos`.
    pub fn speaker_index(&self, pos: usize) -> usize {
        self.speaker_of[pos]
    }

    pub(crate) fn speaker_members(&self, speaker_index: usize) -> &[usize] {
        &self.speakers[speaker_index]
    }

    /// Returns a copy with every vector scaled to unit Euclidean norm.
    pub fn length_normalized(&self) -> Dataset {
        let embeddings = self
            .embeddings
            .iter()
            .map(|e| {
                let n = e.vector.norm();
                let v = e.vector.as_slice().iter().map(|x| x / n).collect();
                Embedding {
                    speaker_id: e.speaker_id.clone(),
                    utterance_id: e.utterance_id.clone(),
                    vector: Vector::new(v).expect("finite input stays finite"),
                }
            })
            .collect();
        Dataset::new(self.dim, embeddings).expect("normalization preserves invariants")
    }
}

/// Target (same speaker) or nontarget (different speakers).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrialLabel {
    Target,
    Nontarget,
}

impl TrialLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialLabel::Target => "target",
            TrialLabel::Nontarget => "nontarget",
        }
    }
}

impl std::str::FromStr for TrialLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "target" => Ok(TrialLabel::Target),
            "nontarget" => Ok(TrialLabel::Nontarget),
            other => Err(format!("unknown trial label `{other}` (expected target or nontarget)")),
        }
    }
}

/// A labeled (enroll, test) utterance pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Trial {
    pub enroll: String,
    pub test: String,
    pub label: TrialLabel,
}

impl Trial {
    pub fn new(enroll: impl Into<String>, test: impl Into<String>, label: TrialLabel) -> Result<Self> {
        let (enroll, test) = (enroll.into(), test.into());
        if enroll == test {
            return Err(Error::SelfTrial(enroll));
        }
        Ok(Self { enroll, test, label })
    }
}
