//! Analytic batch gradient against central finite differences.

#[path = "support/fd.rs"]
mod fd;

use mmml::dataset::{gen_synthetic, SynthConfig};
use mmml::mmml::batch_loss_and_grad;
use mmml::Projection;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn analytic_gradient_matches_finite_differences() {
    let (cases, worst) = fd::run_cases(&[(5, 5), (20, 10), (50, 25)], 40, 2024);
    assert!(cases >= 100);
    assert!(worst <= fd::REL_TOL, "worst relative error {worst}");
}

#[test]
fn inactive_triplets_contribute_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = gen_synthetic(&SynthConfig { n_speakers: 5, utts_per_speaker: 3, dim: 6, nuisance_dims: 0, ..SynthConfig::default() }).unwrap();
    for _ in 0..50 {
        let case = fd::random_case(&d, 4, &mut rng);
        let proj = Projection::new(case.m.clone(), "x").unwrap();
        for t in &case.batch {
            let (loss, grad) = batch_loss_and_grad(&proj, std::slice::from_ref(t), &d, case.margin).unwrap();
            if loss == 0.0 {
                assert!(grad.as_slice().iter().all(|&g| g == 0.0));
            }
        }
    }
}
