//! Error-rate curves, equal error rate and DET coordinates.
//!
//! Higher scores are more target-like. At threshold `θ` a nontarget with
//! score `>= θ` is a false positive and a target with score `< θ` a miss.

use crate::dataset::{Trial, TrialLabel};
use crate::error::{Error, Result};
use crate::scoring::ScoreSet;

/// False-positive and false-negative rates over an ascending threshold sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRates {
    thresholds: Vec<f64>,
    fpr: Vec<f64>,
    fnr: Vec<f64>,
}

impl ErrorRates {
    /// Validates lengths, ascending thresholds, rates in `[0, 1]` and monotonicity.
    pub fn new(thresholds: Vec<f64>, fpr: Vec<f64>, fnr: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() || thresholds.len() != fpr.len() || fpr.len() != fnr.len() {
            return Err(Error::InvalidShape {
                rows: thresholds.len(),
                cols: fpr.len().max(fnr.len()),
                reason: "thresholds, fpr and fnr must be non-empty and equally long",
            });
        }
        let in_unit = |x: &f64| (0.0..=1.0).contains(x);
        if !fpr.iter().all(in_unit) || !fnr.iter().all(in_unit) {
            return Err(Error::InvalidConfig("error rates must lie in [0, 1]".into()));
        }
        for i in 1..thresholds.len() {
            if !(thresholds[i - 1] < thresholds[i]) {
                return Err(Error::InvalidConfig("thresholds must be strictly ascending".into()));
            }
            if fpr[i] > fpr[i - 1] || fnr[i] < fnr[i - 1] {
                return Err(Error::InvalidConfig(format!("error rates are not monotone at sweep point {i}")));
            }
        }
        Ok(Self { thresholds, fpr, fnr })
    }

    /// Sweep over every distinct score plus `±∞`.
    pub fn from_scores(targets: &[f64], nontargets: &[f64]) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::EmptyClass("target"));
        }
        if nontargets.is_empty() {
            return Err(Error::EmptyClass("nontarget"));
        }
        if let Some(i) = targets.iter().chain(nontargets).position(|s| !s.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        let sorted = |s: &[f64]| {
            let mut v = s.to_vec();
            v.sort_by(f64::total_cmp);
            v
        };
        let (tar, non) = (sorted(targets), sorted(nontargets));
        let mut thresholds: Vec<f64> = tar.iter().chain(&non).copied().collect();
        thresholds.sort_by(f64::total_cmp);
        // -0.0 and 0.0 are the same threshold
        thresholds.dedup_by(|a, b| a == b);
        thresholds.insert(0, f64::NEG_INFINITY);
        thresholds.push(f64::INFINITY);

        let (nt, nn) = (tar.len() as f64, non.len() as f64);
        let mut fpr = Vec::with_capacity(thresholds.len());
        let mut fnr = Vec::with_capacity(thresholds.len());
        for &th in &thresholds {
            let misses = tar.partition_point(|&s| s < th);
            let false_alarms = non.len() - non.partition_point(|&s| s < th);
            fnr.push(misses as f64 / nt);
            fpr.push(false_alarms as f64 / nn);
        }
        Ok(Self { thresholds, fpr, fnr })
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn fpr(&self) -> &[f64] {
        &self.fpr
    }

    pub fn fnr(&self) -> &[f64] {
        &self.fnr
    }

    /// Interpolated crossing of the `(fpr, fnr)` polyline with `fpr == fnr`.
    pub fn eer(&self) -> EerResult {
        let diff = |i: usize| self.fnr[i] - self.fpr[i];
        let Some(hi) = (0..self.len()).find(|&i| diff(i) >= 0.0) else {
            // unreachable for curves with a +inf sentinel, where fpr ends at 0
            let last = self.len() - 1;
            return EerResult {
                eer: self.fpr[last],
                threshold: self.thresholds[last],
            };
        };
        if diff(hi) == 0.0 || hi == 0 {
            return EerResult {
                eer: self.fpr[hi].max(self.fnr[hi]),
                threshold: self.thresholds[hi],
            };
        }
        let lo = hi - 1;
        let (d0, d1) = (diff(lo), diff(hi));
        let t = -d0 / (d1 - d0);
        let eer = self.fpr[lo] + t * (self.fpr[hi] - self.fpr[lo]);
        let (a, b) = (self.thresholds[lo], self.thresholds[hi]);
        let threshold = match (a.is_finite(), b.is_finite()) {
            (true, true) => a + t * (b - a),
            (true, false) => a,
            (false, _) => b,
        };
        EerResult { eer, threshold }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EerResult {
    pub eer: f64,
    /// Score threshold at the crossing.
    pub threshold: f64,
}

/// Splits the scores of `trials` by label.
pub fn split_scores(scores: &ScoreSet, trials: &[Trial]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut targets = Vec::new();
    let mut nontargets = Vec::new();
    for t in trials {
        let s = scores
            .get(&t.enroll, &t.test)
            .ok_or_else(|| Error::MissingScore(t.enroll.clone(), t.test.clone()))?;
        match t.label {
            TrialLabel::Target => targets.push(s),
            TrialLabel::Nontarget => nontargets.push(s),
        }
    }
    Ok((targets, nontargets))
}

pub fn error_curve(scores: &ScoreSet, trials: &[Trial]) -> Result<ErrorRates> {
    let (targets, nontargets) = split_scores(scores, trials)?;
    ErrorRates::from_scores(&targets, &nontargets)
}

pub fn eer(scores: &ScoreSet, trials: &[Trial]) -> Result<EerResult> {
    Ok(error_curve(scores, trials)?.eer())
}

/// Inverse standard normal CDF (Acklam's rational approximation).
///
/// Absolute error is below 1.5e-7 on `(0, 1)`. Returns `±∞` at 0 and 1 and
/// NaN outside `[0, 1]`.
pub fn probit(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

pub const DET_CLIP: f64 = 1e-6;

/// `(probit(fpr), probit(fnr))` per sweep point, rates clipped to `[1e-6, 1 - 1e-6]`.
pub fn det_points(curve: &ErrorRates) -> Vec<(f64, f64)> {
    let warp = |r: f64| probit(r.clamp(DET_CLIP, 1.0 - DET_CLIP));
    curve.fpr.iter().zip(&curve.fnr).map(|(&x, &y)| (warp(x), warp(y))).collect()
}
