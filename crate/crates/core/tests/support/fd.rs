//! Finite-difference oracle for the batch gradient, shared by the core
//! gradient test and the acceptance suite.

use mmml::mmml::batch_loss_and_grad;
use mmml::sampler::sample_batch;
use mmml::{Dataset, Matrix, Projection, Triplet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const STEP: f64 = 1e-6;
pub const REL_TOL: f64 = 1e-4;
pub const MIN_GRAD: f64 = 1e-8;
pub const KINK: f64 = 1e-4;

/// Double-double arithmetic, so that the finite differences below are
/// limited by truncation error rather than by f64 rounding.
#[derive(Clone, Copy, Debug)]
struct Dd(f64, f64);

impl Dd {
    fn from(x: f64) -> Dd {
        Dd(x, 0.0)
    }

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd(s, (a - (s - bb)) + (b - bb))
    }

    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.0, o.0);
        let t = Dd::two_sum(self.1, o.1);
        let hi = Dd::two_sum(s.0, s.1 + t.0);
        Dd::two_sum(hi.0, hi.1 + t.1)
    }

    fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let err = self.0.mul_add(o.0, -p);
        Dd::two_sum(p, err + self.0 * o.1 + self.1 * o.0)
    }

    fn div(self, o: Dd) -> Dd {
        let q1 = self.0 / o.0;
        let r = self.add(o.mul(Dd::from(q1)).neg());
        let q2 = r.0 / o.0;
        let r = r.add(o.mul(Dd::from(q2)).neg());
        let q3 = r.0 / o.0;
        Dd::two_sum(q1, q2).add(Dd::from(q3))
    }

    fn sqrt(self) -> Dd {
        let x = self.0.sqrt();
        // one Newton step: x + (a - x²) / 2x
        let r = self.add(Dd::from(x).mul(Dd::from(x)).neg());
        Dd::two_sum(x, r.0 / (2.0 * x))
    }

    fn value(self) -> f64 {
        self.0 + self.1
    }
}

fn dd_dot(u: &[Dd], v: &[Dd]) -> Dd {
    u.iter().zip(v).fold(Dd::from(0.0), |acc, (a, b)| acc.add(a.mul(*b)))
}

fn cos(u: &[Dd], v: &[Dd]) -> Dd {
    dd_dot(u, v).div(dd_dot(u, u).mul(dd_dot(v, v)).sqrt())
}

fn project(m: &Matrix, x: &[f64]) -> Vec<Dd> {
    (0..m.rows())
        .map(|r| {
            m.row(r)
                .iter()
                .zip(x)
                .fold(Dd::from(0.0), |acc, (a, b)| acc.add(Dd::from(*a).mul(Dd::from(*b))))
        })
        .collect()
}

fn hinge_arg(p: [&[Dd]; 3], margin: f64) -> Dd {
    Dd::from(margin).add(cos(p[0], p[1]).neg()).add(cos(p[0], p[2]))
}

pub struct Case {
    pub m: Matrix,
    pub batch: Vec<Triplet>,
    pub margin: f64,
}

/// Central differences of the summed hinge loss. Perturbing `M[r][c]` only
/// moves coordinate `r` of each projected vector, by `±h * x[c]`.
fn finite_difference(case: &Case, d: &Dataset) -> Matrix {
    let projected: Vec<[Vec<Dd>; 3]> = case
        .batch
        .iter()
        .map(|t| [t.anchor, t.positive, t.negative].map(|p| project(&case.m, d.vector(p))))
        .collect();
    let (rows, cols) = case.m.shape();
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let loss_at = |h: f64| -> Dd {
                case.batch.iter().zip(&projected).fold(Dd::from(0.0), |acc, (t, p)| {
                    let shifted: Vec<Vec<Dd>> = [t.anchor, t.positive, t.negative]
                        .iter()
                        .zip(p)
                        .map(|(&pos, v)| {
                            let mut v = v.clone();
                            v[r] = v[r].add(Dd::from(h).mul(Dd::from(d.vector(pos)[c])));
                            v
                        })
                        .collect();
                    let arg = hinge_arg([&shifted[0], &shifted[1], &shifted[2]], case.margin);
                    if arg.value() > 0.0 {
                        acc.add(arg)
                    } else {
                        acc
                    }
                })
            };
            out[r * cols + c] = loss_at(STEP).add(loss_at(-STEP).neg()).value() / (2.0 * STEP);
        }
    }
    Matrix::new(rows, cols, out).unwrap()
}

pub fn random_case(d: &Dataset, d_out: usize, rng: &mut ChaCha8Rng) -> Case {
    let data = (0..d_out * d.dim()).map(|_| rng.sample(StandardNormal)).collect();
    let m = Matrix::new(d_out, d.dim(), data).unwrap();
    let margin = rng.random_range(0.1..1.5);
    let size = rng.random_range(1..=8);
    // keep away from the hinge kink, where the loss is not differentiable
    let batch: Vec<Triplet> = sample_batch(d, size, rng)
        .unwrap()
        .into_iter()
        .filter(|t| {
            let p = [t.anchor, t.positive, t.negative].map(|pos| project(&m, d.vector(pos)));
            hinge_arg([&p[0], &p[1], &p[2]], margin).value().abs() > KINK
        })
        .collect();
    Case { m, batch, margin }
}

pub struct Outcome {
    pub checked: usize,
    pub worst: f64,
}

pub fn check(case: &Case, d: &Dataset) -> Outcome {
    let proj = Projection::new(case.m.clone(), "fd").unwrap();
    let (_, analytic) = batch_loss_and_grad(&proj, &case.batch, d, case.margin).unwrap();
    let numeric = finite_difference(case, d);
    let mut out = Outcome { checked: 0, worst: 0.0 };
    for (a, f) in analytic.as_slice().iter().zip(numeric.as_slice()) {
        if a.abs() > MIN_GRAD {
            out.checked += 1;
            let rel = (a - f).abs() / a.abs().max(f.abs());
            out.worst = out.worst.max(rel);
        }
    }
    out
}


/// Runs `per_shape` nonempty cases for each `(d_in, d_out)` and returns the
/// number of cases and the worst relative error seen.
pub fn run_cases(shapes: &[(usize, usize)], per_shape: usize, seed: u64) -> (usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut cases, mut worst) = (0, 0.0f64);
    for &(d_in, d_out) in shapes {
        let d = mmml::dataset::gen_synthetic(&mmml::SynthConfig {
            n_speakers: 6,
            utts_per_speaker: 4,
            dim: d_in,
            nuisance_dims: d_in / 2,
            nuisance_scale: 3.0,
            seed: d_in as u64,
            ..mmml::SynthConfig::default()
        })
        .unwrap();
        let mut done = 0;
        while done < per_shape {
            let case = random_case(&d, d_out, &mut rng);
            if case.batch.is_empty() {
                continue;
            }
            worst = worst.max(check(&case, &d).worst);
            done += 1;
        }
        cases += done;
    }
    (cases, worst)
}
