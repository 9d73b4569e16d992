//! Contrastive triplet sampling for mini-batch training.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Positions of an (anchor, positive, negative) triple within a dataset.
///
/// Anchor and positive are distinct utterances of one speaker; the negative
/// belongs to a different speaker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

impl Triplet {
    /// Checks the three label constraints against `d`.
    pub fn is_valid(&self, d: &Dataset) -> bool {
        let n = d.len();
        self.anchor < n
            && self.positive < n
            && self.negative < n
            && self.anchor != self.positive
            && d.speaker_index(self.anchor) == d.speaker_index(self.positive)
            && d.speaker_index(self.anchor) != d.speaker_index(self.negative)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchesPerEpoch {
    /// A fixed number of independently sampled batches.
    Count(usize),
    /// Every eligible anchor used exactly once per epoch, in shuffled order.
    Cover,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub batch_size: usize,
    pub seed: u64,
    pub batches_per_epoch: BatchesPerEpoch,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            seed: 0,
            batches_per_epoch: BatchesPerEpoch::Cover,
        }
    }
}

/// Positions whose speaker has at least two utterances, in dataset order.
pub fn eligible_anchors(d: &Dataset) -> Vec<usize> {
    (0..d.len())
        .filter(|&p| d.speaker_members(d.speaker_index(p)).len() >= 2)
        .collect()
}

/// Draws triplets for one dataset. Holds precomputed speaker layouts so each
/// draw is O(1).
#[derive(Clone, Debug)]
pub struct TripletSampler<'a> {
    d: &'a Dataset,
    anchors: Vec<usize>,
    // positions regrouped by speaker, and each speaker's block start in it
    grouped: Vec<usize>,
    block_start: Vec<usize>,
}

impl<'a> TripletSampler<'a> {
    pub fn new(d: &'a Dataset) -> Result<Self> {
        if d.n_speakers() < 2 {
            return Err(Error::TooFewSpeakers(d.n_speakers()));
        }
        let anchors = eligible_anchors(d);
        if anchors.is_empty() {
            return Err(Error::NoEligibleAnchor);
        }
        let mut grouped = Vec::with_capacity(d.len());
        let mut block_start = Vec::with_capacity(d.n_speakers());
        for (_, members) in d.speakers() {
            block_start.push(grouped.len());
            grouped.extend_from_slice(members);
        }
        Ok(Self {
            d,
            anchors,
            grouped,
            block_start,
        })
    }

    pub fn anchors(&self) -> &[usize] {
        &self.anchors
    }

    /// Completes a triplet for `anchor` with a uniform positive and negative.
    pub fn complete(&self, anchor: usize, rng: &mut ChaCha8Rng) -> Triplet {
        let spk = self.d.speaker_index(anchor);
        let members = self.d.speaker_members(spk);
        let r = rng.random_range(0..members.len() - 1);
        let skip = members.iter().position(|&p| p == anchor).expect("anchor belongs to its speaker");
        let positive = members[if r >= skip { r + 1 } else { r }];

        let start = self.block_start[spk];
        let r = rng.random_range(0..self.grouped.len() - members.len());
        let negative = self.grouped[if r >= start { r + members.len() } else { r }];
        Triplet {
            anchor,
            positive,
            negative,
        }
    }

    /// `batch_size` triplets with anchors drawn uniformly from the eligible set.
    pub fn sample_batch(&self, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Triplet> {
        (0..batch_size)
            .map(|_| {
                let anchor = self.anchors[rng.random_range(0..self.anchors.len())];
                self.complete(anchor, rng)
            })
            .collect()
    }

    /// All batches of one epoch.
    pub fn epoch(&self, cfg: &SamplerConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<Triplet>> {
        match cfg.batches_per_epoch {
            BatchesPerEpoch::Count(n) => (0..n).map(|_| self.sample_batch(cfg.batch_size, rng)).collect(),
            BatchesPerEpoch::Cover => {
                let mut order = self.anchors.clone();
                order.shuffle(rng);
                order
                    .chunks(cfg.batch_size)
                    .map(|chunk| chunk.iter().map(|&a| self.complete(a, rng)).collect())
                    .collect()
            }
        }
    }
}

/// Samples one mini-batch of `batch_size` triplets, advancing `rng`.
pub fn sample_batch(d: &Dataset, batch_size: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Triplet>> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
    }
    Ok(TripletSampler::new(d)?.sample_batch(batch_size, rng))
}
