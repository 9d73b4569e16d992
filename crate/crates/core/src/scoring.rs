//! Trial scoring, projection chains and linear score fusion.
//!
//! Score TSV: `enroll<TAB>test<TAB>score`, no header.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::dataset::{Dataset, Trial};
use crate::error::{Error, Result};
use crate::mmml::cosine_slices;
use crate::projection::Projection;

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreEntry {
    pub enroll: String,
    pub test: String,
    pub score: f64,
}

/// Ordered trial scores, unique per `(enroll, test)` key and all finite.
#[derive(Clone, Debug, Default)]
pub struct ScoreSet {
    entries: Vec<ScoreEntry>,
    index: HashMap<(String, String), usize>,
}

impl PartialEq for ScoreSet {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl ScoreSet {
    pub fn new(entries: Vec<ScoreEntry>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if !e.score.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
            if index.insert((e.enroll.clone(), e.test.clone()), i).is_some() {
                return Err(Error::DuplicateTrial(e.enroll.clone(), e.test.clone()));
            }
        }
        Ok(Self { entries, index })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.score)
    }

    pub fn get(&self, enroll: &str, test: &str) -> Option<f64> {
        // HashMap<(String, String)> cannot be probed with borrowed halves
        self.index
            .get(&(enroll.to_owned(), test.to_owned()))
            .map(|&i| self.entries[i].score)
    }

    pub fn contains(&self, enroll: &str, test: &str) -> bool {
        self.get(enroll, test).is_some()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let reader = BufReader::new(File::open(path)?);
        let mut entries = Vec::new();
        let mut seen = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [enroll, test, score] = fields[..] else {
                return Err(parse_err(lineno, format!("expected 3 columns, found {}", fields.len())));
            };
            let score: f64 = score
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid score `{score}`")))?;
            if !score.is_finite() {
                return Err(parse_err(lineno, format!("non-finite score `{score}`")));
            }
            if let Some(prev) = seen.insert((enroll.to_owned(), test.to_owned()), lineno) {
                return Err(parse_err(lineno, format!("duplicate trial ({enroll}, {test}), first seen on line {prev}")));
            }
            entries.push(ScoreEntry {
                enroll: enroll.to_owned(),
                test: test.to_owned(),
                score,
            });
        }
        Self::new(entries)
    }

    /// Scores are written in shortest round-trip form.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        for e in &self.entries {
            writeln!(w, "{}\t{}\t{:?}", e.enroll, e.test, e.score)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_chain(dim: usize, chain: &[Projection]) -> Result<()> {
    let mut cur = dim;
    for (i, p) in chain.iter().enumerate() {
        if p.d_in() != cur {
            return Err(Error::DimensionMismatch {
                op: "projection chain",
                left: format!("stage {i} input {}", p.d_in()),
                right: format!("incoming dim {cur}"),
            });
        }
        cur = p.d_out();
    }
    Ok(())
}

fn apply_chain(chain: &[Projection], x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    for p in chain {
        v = p.matrix().matvec_slice(&v);
    }
    v
}

/// Cosine score of every trial after passing both sides through `chain` in order.
///
/// An empty chain scores the raw embeddings.
pub fn score_trials(d: &Dataset, trials: &[Trial], chain: &[Projection]) -> Result<ScoreSet> {
    check_chain(d.dim(), chain)?;
    let mut projected: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut lookup = |utt: &str| -> Result<usize> {
        let pos = d.position(utt).ok_or_else(|| Error::UnknownUtterance(utt.to_owned()))?;
        projected.entry(pos).or_insert_with(|| apply_chain(chain, d.vector(pos)));
        Ok(pos)
    };
    let mut keys = Vec::with_capacity(trials.len());
    for t in trials {
        keys.push((lookup(&t.enroll)?, lookup(&t.test)?));
    }

    let mut entries = Vec::with_capacity(trials.len());
    for (t, (a, b)) in trials.iter().zip(keys) {
        let score = cosine_slices(&projected[&a], &projected[&b]).ok_or_else(|| {
            let zero: Vec<String> = [(a, &t.enroll), (b, &t.test)]
                .into_iter()
                .filter(|(p, _)| !(crate::linalg::norm(&projected[p]) > 0.0))
                .map(|(_, u)| u.clone())
                .collect();
            Error::ZeroProjected(zero)
        })?;
        entries.push(ScoreEntry {
            enroll: t.enroll.clone(),
            test: t.test.clone(),
            score,
        });
    }
    ScoreSet::new(entries)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionConfig {
    /// Weight of the first score set.
    pub alpha: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { alpha: 0.2 }
    }
}

const MAX_LISTED_KEYS: usize = 10;

fn list_missing<'a>(from: &'a ScoreSet, other: &ScoreSet) -> String {
    let missing: Vec<&'a ScoreEntry> = from.entries.iter().filter(|e| !other.contains(&e.enroll, &e.test)).collect();
    let mut shown: Vec<String> = missing
        .iter()
        .take(MAX_LISTED_KEYS)
        .map(|e| format!("({}, {})", e.enroll, e.test))
        .collect();
    if missing.len() > MAX_LISTED_KEYS {
        shown.push(format!("... {} more", missing.len() - MAX_LISTED_KEYS));
    }
    shown.join(", ")
}

/// Per-trial `alpha * a + (1 - alpha) * b`, in the order of `a`.
///
/// Both sets must cover exactly the same trial keys.
pub fn fuse(a: &ScoreSet, b: &ScoreSet, cfg: &FusionConfig) -> Result<ScoreSet> {
    if !(0.0..=1.0).contains(&cfg.alpha) {
        return Err(Error::InvalidConfig(format!("alpha must be in [0, 1], got {}", cfg.alpha)));
    }
    let same_keys = a.len() == b.len() && a.entries.iter().all(|e| b.contains(&e.enroll, &e.test));
    if !same_keys {
        return Err(Error::KeyMismatch {
            missing_in_a: list_missing(b, a),
            missing_in_b: list_missing(a, b),
        });
    }
    let alpha = cfg.alpha;
    let entries = a
        .entries
        .iter()
        .map(|e| {
            let sb = b.get(&e.enroll, &e.test).expect("key sets checked");
            // the endpoints return an input verbatim
            let score = if alpha == 1.0 {
                e.score
            } else if alpha == 0.0 {
                sb
            } else {
                alpha * e.score + (1.0 - alpha) * sb
            };
            ScoreEntry {
                enroll: e.enroll.clone(),
                test: e.test.clone(),
                score,
            }
        })
        .collect();
    ScoreSet::new(entries)
}
