//! Max-margin cosine metric learning.
//!
//! Learns a linear map `M` so that, after projection, an anchor is more
//! cosine-similar to another utterance of its speaker than to an utterance of
//! a different speaker by at least a margin `δ`. The objective is the sum of
//! triplet hinges
//!
//! ```text
//! L(M) = Σ max(0, δ − cos(Mw, Mw⁺) + cos(Mw, Mw⁻))
//! ```
//!
//! minimized by plain mini-batch SGD, `M ← M − ε ∂L/∂M`.
//!
//! Cosine similarity is the standard `⟨a,b⟩ / (‖a‖‖b‖)`. For `u = Ma` and
//! `v = Mb` with `c = cos(u, v)`, the gradient used here is
//!
//! ```text
//! ∂c/∂u = v / (‖u‖‖v‖) − c u / ‖u‖²
//! ∂c/∂v = u / (‖u‖‖v‖) − c v / ‖v‖²
//! ∂c/∂M = (∂c/∂u) aᵀ + (∂c/∂v) bᵀ
//! ```
//!
//! The gradient is a sum over the batch, not a mean: scale the learning rate
//! down when raising the batch size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{Dataset, Embedding};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, orthonormal_rows, Matrix, Vector};
use crate::projection::Projection;
use crate::sampler::{SamplerConfig, Triplet, TripletSampler};

/// Cosine similarity of two nonzero vectors, clamped to `[-1, 1]`.
pub fn cosine(a: &Vector, b: &Vector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            op: "cosine",
            left: format!("[{}]", a.dim()),
            right: format!("[{}]", b.dim()),
        });
    }
    cosine_slices(a.as_slice(), b.as_slice()).ok_or_else(|| Error::ZeroNorm {
        context: "cosine".into(),
    })
}

#[inline]
fn clamp_unit(c: f64) -> f64 {
    c.clamp(-1.0, 1.0)
}

/// Cosine of raw slices; `None` on a zero or non-finite norm.
pub(crate) fn cosine_slices(a: &[f64], b: &[f64]) -> Option<f64> {
    let (sa, sb) = (dot(a, a), dot(b, b));
    let denom = (sa * sb).sqrt();
    // sqrt(x * x) == x exactly, so identical inputs score exactly 1
    if denom > 0.0 && denom.is_finite() {
        return Some(clamp_unit(dot(a, b) / denom));
    }
    // over- or underflow: rescale by the largest magnitude and retry
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (ma, mb) = (max_abs(a), max_abs(b));
    if !(ma > 0.0 && mb > 0.0 && ma.is_finite() && mb.is_finite()) {
        return None;
    }
    let a: Vec<f64> = a.iter().map(|x| x / ma).collect();
    let b: Vec<f64> = b.iter().map(|x| x / mb).collect();
    Some(clamp_unit(dot(&a, &b) / (dot(&a, &a) * dot(&b, &b)).sqrt()))
}

/// A projected vector with its norm, ready for cosine terms.
struct Projected {
    v: Vec<f64>,
    norm: f64,
}

fn project_one(m: &Matrix, x: &[f64], utt: &str) -> Result<Projected> {
    let v = m.matvec_slice(x);
    let n = norm(&v);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::DegenerateProjection(format!("utterance `{utt}`")));
    }
    Ok(Projected { v, norm: n })
}

fn check_conformable(m: &Projection, d: &Dataset) -> Result<()> {
    if m.d_in() != d.dim() {
        return Err(Error::DimensionMismatch {
            op: "projection input",
            left: format!("{}x{}", m.d_out(), m.d_in()),
            right: format!("dataset dim {}", d.dim()),
        });
    }
    Ok(())
}

fn check_triplet(t: &Triplet, d: &Dataset) -> Result<()> {
    if !t.is_valid(d) {
        return Err(Error::InvalidConfig(format!("invalid triplet {t:?}")));
    }
    Ok(())
}

/// Per-triplet terms shared by the loss and its gradient.
struct TripletTerms {
    anchor: Projected,
    positive: Projected,
    negative: Projected,
    cos_pos: f64,
    cos_neg: f64,
    hinge: f64,
}

fn triplet_terms(m: &Matrix, t: &Triplet, d: &Dataset, margin: f64) -> Result<TripletTerms> {
    let emb = |p: usize| -> &Embedding { &d.embeddings()[p] };
    let pr = |p: usize| project_one(m, d.vector(p), &emb(p).utterance_id);
    let (anchor, positive, negative) = (pr(t.anchor)?, pr(t.positive)?, pr(t.negative)?);
    let cos_pos = clamp_unit(dot(&anchor.v, &positive.v) / (anchor.norm * positive.norm));
    let cos_neg = clamp_unit(dot(&anchor.v, &negative.v) / (anchor.norm * negative.norm));
    let hinge = (margin - cos_pos + cos_neg).max(0.0);
    Ok(TripletTerms {
        anchor,
        positive,
        negative,
        cos_pos,
        cos_neg,
        hinge,
    })
}

/// Hinge value `max(0, δ − cos(Mw, Mw⁺) + cos(Mw, Mw⁻))` of one triplet.
///
/// The triplet is active when the value is positive.
pub fn triplet_loss(m: &Projection, t: &Triplet, d: &Dataset, margin: f64) -> Result<f64> {
    check_conformable(m, d)?;
    check_triplet(t, d)?;
    Ok(triplet_terms(m.matrix(), t, d, margin)?.hinge)
}

/// `(∂c/∂u, ∂c/∂v)` for `c = cos(u, v)`.
fn cosine_grads(u: &Projected, v: &Projected, c: f64) -> (Vec<f64>, Vec<f64>) {
    let inv = 1.0 / (u.norm * v.norm);
    let (cu, cv) = (c / (u.norm * u.norm), c / (v.norm * v.norm));
    let gu = u.v.iter().zip(&v.v).map(|(ui, vi)| vi * inv - cu * ui).collect();
    let gv = u.v.iter().zip(&v.v).map(|(ui, vi)| ui * inv - cv * vi).collect();
    (gu, gv)
}

/// Loss, gradient and number of active triplets for one batch.
#[derive(Clone, Debug)]
pub struct BatchGradient {
    pub loss: f64,
    pub grad: Matrix,
    pub active: usize,
}

fn batch_gradient(m: &Matrix, batch: &[Triplet], d: &Dataset, margin: f64) -> Result<BatchGradient> {
    let mut grad = Matrix::zeros(m.rows(), m.cols())?;
    let mut loss = 0.0;
    let mut active = 0;
    // fixed summation order keeps the reduction deterministic
    for t in batch {
        let terms = triplet_terms(m, t, d, margin)?;
        if terms.hinge <= 0.0 {
            continue;
        }
        loss += terms.hinge;
        active += 1;
        // L_t = δ − cos(a, p) + cos(a, n)
        let (gap_a, gap_p) = cosine_grads(&terms.anchor, &terms.positive, terms.cos_pos);
        let (gan_a, gan_n) = cosine_grads(&terms.anchor, &terms.negative, terms.cos_neg);
        let g_anchor: Vec<f64> = gan_a.iter().zip(&gap_a).map(|(n, p)| n - p).collect();
        grad.add_outer(1.0, &g_anchor, d.vector(t.anchor));
        grad.add_outer(-1.0, &gap_p, d.vector(t.positive));
        grad.add_outer(1.0, &gan_n, d.vector(t.negative));
    }
    Ok(BatchGradient { loss, grad, active })
}

/// Summed hinge loss over `batch` and its analytic gradient with respect to `M`.
pub fn batch_loss_and_grad(m: &Projection, batch: &[Triplet], d: &Dataset, margin: f64) -> Result<(f64, Matrix)> {
    let g = batch_gradient_checked(m, batch, d, margin)?;
    Ok((g.loss, g.grad))
}

/// Like [`batch_loss_and_grad`] but also reports the active-triplet count.
pub fn batch_gradient_checked(m: &Projection, batch: &[Triplet], d: &Dataset, margin: f64) -> Result<BatchGradient> {
    if batch.is_empty() {
        return Err(Error::InvalidConfig("batch must not be empty".into()));
    }
    check_conformable(m, d)?;
    for t in batch {
        check_triplet(t, d)?;
    }
    batch_gradient(m.matrix(), batch, d, margin)
}

/// How the projection is initialized before SGD.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// Identity when square, otherwise random orthonormal rows from `seed`.
    Auto { seed: u64 },
    /// Requires `d_out == d_in`.
    Identity,
    /// Orthonormalized rows of a seeded Gaussian `d_out × d_in` matrix.
    RandomOrthonormal { seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Hinge margin δ, in `(0, 2)`.
    pub margin: f64,
    /// SGD step size ε.
    pub learning_rate: f64,
    /// Multiplies the learning rate after every epoch; in `(0, 1]`.
    pub lr_decay: f64,
    pub epochs: usize,
    pub batch: SamplerConfig,
    pub init: Init,
    /// Stop once the mean epoch loss has not improved for this many epochs.
    pub early_stop_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            margin: 0.5,
            learning_rate: 0.05,
            lr_decay: 0.95,
            epochs: 50,
            batch: SamplerConfig::default(),
            init: Init::Auto { seed: 0 },
            early_stop_patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.margin > 0.0 && self.margin < 2.0) {
            return bad(format!("margin must lie in (0, 2), got {}", self.margin));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay));
        }
        if self.batch.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        Ok(())
    }
}

/// Statistics for one training epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean hinge value per sampled triplet.
    pub mean_loss: f64,
    pub active_fraction: f64,
    /// Learning rate used during this epoch.
    pub learning_rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub stopped_early: bool,
}

/// Builds the starting projection for `train`.
pub fn initial_projection(d_in: usize, d_out: usize, init: Init) -> Result<Projection> {
    if d_out == 0 || d_out > d_in {
        return Err(Error::InvalidConfig(format!(
            "output dimension must lie in 1..={d_in}, got {d_out}"
        )));
    }
    let random = |seed: u64| -> Result<Projection> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = (0..d_out * d_in).map(|_| rng.sample(StandardNormal)).collect();
        let q = orthonormal_rows(&Matrix::new(d_out, d_in, g)?)?;
        Projection::new(q, format!("random orthonormal init (seed {seed})"))
    };
    match init {
        Init::Identity if d_out == d_in => Projection::new(Matrix::identity(d_in)?, "identity init"),
        Init::Identity => Err(Error::InvalidConfig(format!(
            "identity init needs d_out == d_in, got {d_out} and {d_in}"
        ))),
        Init::Auto { .. } if d_out == d_in => Projection::new(Matrix::identity(d_in)?, "identity init"),
        Init::Auto { seed } | Init::RandomOrthonormal { seed } => random(seed),
    }
}

/// Trains a `d_out × d.dim()` projection by mini-batch SGD on the hinge objective.
pub fn train(d: &Dataset, d_out: usize, cfg: &TrainConfig) -> Result<(Projection, TrainReport)> {
    cfg.validate()?;
    let init = initial_projection(d.dim(), d_out, cfg.init)?;
    let sampler = TripletSampler::new(d)?;
    let mut report = TrainReport::default();
    if cfg.epochs == 0 {
        return Ok((init, report));
    }

    let mut m = init.into_matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.batch.seed);
    let mut lr = cfg.learning_rate;
    let mut best = f64::INFINITY;
    let mut stale = 0usize;

    for epoch in 0..cfg.epochs {
        let mut total_loss = 0.0;
        let mut total_active = 0usize;
        let mut total = 0usize;
        for batch in sampler.epoch(&cfg.batch, &mut rng) {
            let g = batch_gradient(&m, &batch, d, cfg.margin).map_err(|e| match e {
                Error::DegenerateProjection(_) if epoch > 0 => Error::Diverged { epoch },
                other => other,
            })?;
            total_loss += g.loss;
            total_active += g.active;
            total += batch.len();
            m.axpy(-lr, &g.grad);
        }
        let mean_loss = total_loss / total as f64;
        if !mean_loss.is_finite() || !m.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        report.epochs.push(EpochStats {
            epoch,
            mean_loss,
            active_fraction: total_active as f64 / total as f64,
            learning_rate: lr,
        });
        lr *= cfg.lr_decay;

        if let Some(patience) = cfg.early_stop_patience {
            if mean_loss < best {
                best = mean_loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    report.stopped_early = true;
                    break;
                }
            }
        }
    }

    let provenance = format!(
        "mmml d_out={d_out} margin={} lr={} lr_decay={} epochs={} batch_size={} seed={}",
        cfg.margin,
        cfg.learning_rate,
        cfg.lr_decay,
        report.epochs.len(),
        cfg.batch.batch_size,
        cfg.batch.seed
    );
    Ok((Projection::new(m, provenance)?, report))
}

/// Applies `m` to every embedding, keeping labels.
pub fn project(m: &Projection, d: &Dataset) -> Result<Dataset> {
    check_conformable(m, d)?;
    let mut zero = Vec::new();
    let mut embeddings = Vec::with_capacity(d.len());
    for e in d.embeddings() {
        let v = m.matrix().matvec_slice(e.vector.as_slice());
        if !(norm(&v) >= 1e-12) {
            zero.push(e.utterance_id.clone());
            continue;
        }
        embeddings.push(Embedding::new(e.speaker_id.clone(), e.utterance_id.clone(), Vector::new(v)?));
    }
    if !zero.is_empty() {
        return Err(Error::ZeroProjected(zero));
    }
    Dataset::new(m.d_out(), embeddings)
}
