//! Synthetic speaker corpora and trial lists.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, Embedding, Trial, TrialLabel};
use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Isotropic Gaussian speakers with axis-aligned nuisance inflation.
///
/// Speaker means are drawn from `N(0, speaker_scatter² I)`. Each utterance is
/// its speaker mean plus Gaussian noise with standard deviation
/// `channel_scatter`, multiplied by `nuisance_scale` on the first
/// `nuisance_dims` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub utts_per_speaker: usize,
    pub dim: usize,
    pub speaker_scatter: f64,
    pub channel_scatter: f64,
    pub nuisance_dims: usize,
    pub nuisance_scale: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_speakers: 200,
            utts_per_speaker: 10,
            dim: 400,
            speaker_scatter: 1.0,
            channel_scatter: 1.0,
            nuisance_dims: 200,
            nuisance_scale: 10.0,
            seed: 7,
        }
    }
}

impl SynthConfig {
    /// The fixed 200-speaker, 50-dimensional benchmark used by the acceptance suite.
    pub fn benchmark() -> Self {
        Self {
            dim: 50,
            nuisance_dims: 25,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.utts_per_speaker < 2 {
            return bad("utts_per_speaker must be at least 2");
        }
        if self.nuisance_dims > self.dim {
            return bad("nuisance_dims must not exceed dim");
        }
        for (name, v) in [
            ("speaker_scatter", self.speaker_scatter),
            ("channel_scatter", self.channel_scatter),
            ("nuisance_scale", self.nuisance_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite")));
            }
        }
        Ok(())
    }
}

/// Generates a deterministic synthetic corpus with ids `spk%05d` / `utt%08d`.
pub fn gen_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut embeddings = Vec::with_capacity(cfg.n_speakers * cfg.utts_per_speaker);
    let mut utt = 0usize;
    for s in 0..cfg.n_speakers {
        let mean: Vec<f64> = (0..cfg.dim)
            .map(|_| cfg.speaker_scatter * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for _ in 0..cfg.utts_per_speaker {
            let v: Vec<f64> = mean
                .iter()
                .enumerate()
                .map(|(k, m)| {
                    let sd = if k < cfg.nuisance_dims {
                        cfg.channel_scatter * cfg.nuisance_scale
                    } else {
                        cfg.channel_scatter
                    };
                    m + sd * rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            embeddings.push(Embedding::new(
                format!("spk{s:05}"),
                format!("utt{utt:08}"),
                Vector::new(v)?,
            ));
            utt += 1;
        }
    }
    Dataset::new(cfg.dim, embeddings)
}

/// Unranks index `k` into the `k`-th pair `(i, j)`, `i < j < n`, in lexicographic order.
fn unrank_pair(mut k: usize, n: usize) -> (usize, usize) {
    for i in 0..n {
        let row = n - 1 - i;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
    }
    unreachable!("pair index out of range")
}

/// Samples distinct target and nontarget trials uniformly over unordered
/// utterance pairs, without replacement.
///
/// A pair appears at most once in either orientation; the enroll/test
/// orientation of each pair is a fair coin flip. The returned list is shuffled.
pub fn gen_trials(d: &Dataset, n_target: usize, n_nontarget: usize, seed: u64) -> Result<Vec<Trial>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // target pairs: per-speaker blocks of C(n_s, 2)
    let blocks: Vec<&[usize]> = d.speakers().map(|(_, m)| m).filter(|m| m.len() >= 2).collect();
    let mut block_ends = Vec::with_capacity(blocks.len());
    let mut target_capacity = 0usize;
    for m in &blocks {
        target_capacity += m.len() * (m.len() - 1) / 2;
        block_ends.push(target_capacity);
    }
    if n_target > target_capacity {
        return Err(Error::Unsatisfiable(format!(
            "{n_target} target trials requested but only {target_capacity} distinct same-speaker pairs exist"
        )));
    }

    // nontarget pairs: utterances regrouped by speaker so the partners of the
    // a-th grouped utterance are exactly the grouped positions after its block
    let grouped: Vec<usize> = d.speakers().flat_map(|(_, m)| m.iter().copied()).collect();
    let mut partner_start = Vec::with_capacity(grouped.len());
    let mut prefix = Vec::with_capacity(grouped.len());
    let mut acc = 0usize;
    let mut end = 0usize;
    for (_, members) in d.speakers() {
        end += members.len();
        for _ in members {
            partner_start.push(end);
            acc += grouped.len() - end;
            prefix.push(acc);
        }
    }
    let nontarget_capacity = acc;
    if n_nontarget > nontarget_capacity {
        return Err(Error::Unsatisfiable(format!(
            "{n_nontarget} nontarget trials requested but only {nontarget_capacity} distinct different-speaker pairs exist"
        )));
    }

    let mut trials = Vec::with_capacity(n_target + n_nontarget);
    let mut emit = |a: usize, b: usize, label: TrialLabel, rng: &mut ChaCha8Rng| {
        let (e, t) = if rng.random::<bool>() { (a, b) } else { (b, a) };
        trials.push(Trial {
            enroll: d.embeddings()[e].utterance_id.clone(),
            test: d.embeddings()[t].utterance_id.clone(),
            label,
        });
    };

    for k in rand::seq::index::sample(&mut rng, target_capacity.max(1), n_target).into_vec() {
        let b = block_ends.partition_point(|&e| e <= k);
        let start = if b == 0 { 0 } else { block_ends[b - 1] };
        let members = blocks[b];
        let (i, j) = unrank_pair(k - start, members.len());
        emit(members[i], members[j], TrialLabel::Target, &mut rng);
    }
    for k in rand::seq::index::sample(&mut rng, nontarget_capacity.max(1), n_nontarget).into_vec() {
        let a = prefix.partition_point(|&p| p <= k);
        let before = if a == 0 { 0 } else { prefix[a - 1] };
        let j = partner_start[a] + (k - before);
        emit(grouped[a], grouped[j], TrialLabel::Nontarget, &mut rng);
    }
    trials.shuffle(&mut rng);
    Ok(trials)
}
