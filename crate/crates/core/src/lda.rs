//! Fisher linear discriminant analysis.
//!
//! The generalized problem `S_b v = λ (S_w + r I) v` is reduced to a
//! symmetric one by whitening with the Cholesky factor `S_w + r I = L Lᵀ`:
//! the eigenvectors `u` of `L⁻¹ S_b L⁻ᵀ` map back as `v = L⁻ᵀ u`.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, solve_lower, solve_lower_transpose, sym_eig, Matrix};
use crate::projection::Projection;

#[derive(Clone, Debug, PartialEq)]
pub struct LdaConfig {
    pub d_out: usize,
    /// Relative ridge: `ridge * trace(S_w) / dim` is added to the diagonal of `S_w`.
    pub ridge: f64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            d_out: 150,
            ridge: 1e-6,
        }
    }
}

/// Within- and between-speaker scatter matrices.
#[derive(Clone, Debug)]
pub struct Scatter {
    pub within: Matrix,
    pub between: Matrix,
}

fn symmetrize(m: &mut Matrix) {
    let n = m.rows();
    for r in 0..n {
        for c in r + 1..n {
            let avg = 0.5 * (m.get(r, c) + m.get(c, r));
            m.set(r, c, avg);
            m.set(c, r, avg);
        }
    }
}

/// `S_w = Σ_s Σ_u (x_u − μ_s)(x_u − μ_s)ᵀ`, `S_b = Σ_s n_s (μ_s − μ)(μ_s − μ)ᵀ`.
pub fn scatter_matrices(d: &Dataset) -> Result<Scatter> {
    if d.n_speakers() < 2 {
        return Err(Error::TooFewSpeakers(d.n_speakers()));
    }
    let dim = d.dim();
    let mut mean = vec![0.0; dim];
    for e in d.embeddings() {
        for (m, x) in mean.iter_mut().zip(e.vector.as_slice()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= d.len() as f64);

    let mut within = Matrix::zeros(dim, dim)?;
    let mut between = Matrix::zeros(dim, dim)?;
    let mut diff = vec![0.0; dim];
    for (_, members) in d.speakers() {
        let mut mu = vec![0.0; dim];
        for &p in members {
            for (m, x) in mu.iter_mut().zip(d.vector(p)) {
                *m += x;
            }
        }
        mu.iter_mut().for_each(|m| *m /= members.len() as f64);
        for &p in members {
            for ((dst, x), m) in diff.iter_mut().zip(d.vector(p)).zip(&mu) {
                *dst = x - m;
            }
            within.add_outer(1.0, &diff, &diff);
        }
        for ((dst, m), g) in diff.iter_mut().zip(&mu).zip(&mean) {
            *dst = m - g;
        }
        between.add_outer(members.len() as f64, &diff, &diff);
    }
    symmetrize(&mut within);
    symmetrize(&mut between);
    Ok(Scatter { within, between })
}

/// A trained LDA projection and its generalized eigenvalues.
#[derive(Clone, Debug)]
pub struct LdaFit {
    pub projection: Projection,
    /// Descending, one per projection row.
    pub eigenvalues: Vec<f64>,
    /// The regularized within-class scatter the problem was solved against.
    pub regularized_within: Matrix,
    pub between: Matrix,
}

/// Largest feasible output dimension: `min(dim, n_speakers − 1)`.
pub fn max_output_dim(d: &Dataset) -> usize {
    d.dim().min(d.n_speakers().saturating_sub(1))
}

pub fn fit_lda(d: &Dataset, cfg: &LdaConfig) -> Result<LdaFit> {
    if !(cfg.ridge >= 0.0 && cfg.ridge.is_finite()) {
        return Err(Error::InvalidConfig(format!("ridge must be nonnegative, got {}", cfg.ridge)));
    }
    if d.n_speakers() < 2 {
        return Err(Error::TooFewSpeakers(d.n_speakers()));
    }
    let max = max_output_dim(d);
    if cfg.d_out == 0 || cfg.d_out > max {
        return Err(Error::RankBound {
            requested: cfg.d_out,
            max,
        });
    }
    let Scatter { mut within, between } = scatter_matrices(d)?;
    let dim = d.dim();
    let ridge = cfg.ridge * within.trace() / dim as f64;
    for i in 0..dim {
        within.set(i, i, within.get(i, i) + ridge);
    }

    let l = cholesky(&within)?;
    // C = L⁻¹ S_b L⁻ᵀ, using the symmetry of S_b
    let half = solve_lower(&l, &between);
    let mut whitened = solve_lower(&l, &half.transpose()).transpose();
    symmetrize(&mut whitened);
    let eig = sym_eig(&whitened)?;

    let mut top = Matrix::zeros(dim, cfg.d_out)?;
    for r in 0..dim {
        for c in 0..cfg.d_out {
            top.set(r, c, eig.vectors.get(r, c));
        }
    }
    // columns of L⁻ᵀ U are the generalized eigenvectors
    let directions = solve_lower_transpose(&l, &top).transpose();
    let mut rows = Vec::with_capacity(cfg.d_out);
    for i in 0..cfg.d_out {
        let mut row = directions.row(i).to_vec();
        let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        let pivot = row.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        row.iter_mut().for_each(|x| *x *= sign / n);
        rows.push(row);
    }
    let projection = Projection::new(
        Matrix::from_rows(&rows)?,
        format!("lda d_out={} ridge={} speakers={}", cfg.d_out, cfg.ridge, d.n_speakers()),
    )?;
    Ok(LdaFit {
        projection,
        eigenvalues: eig.values[..cfg.d_out].to_vec(),
        regularized_within: within,
        between,
    })
}

/// Rows are the top `d_out` unit-norm generalized eigenvectors of `(S_b, S_w + ridge)`.
pub fn train_lda(d: &Dataset, cfg: &LdaConfig) -> Result<Projection> {
    Ok(fit_lda(d, cfg)?.projection)
}
