//! Desk-scale comparison of raw cosine, LDA and MMML on the synthetic benchmark.
//!
//! Usage: `cargo run --release -p mmml --example benchmark [margin lr lr_decay epochs batch [dev_speakers]]`

use std::time::Instant;

use mmml::dataset::{gen_synthetic, gen_trials};
use mmml::mmml::train;
use mmml::{eer, fuse, score_trials, train_lda, FusionConfig, LdaConfig, SynthConfig, TrainConfig};

fn main() -> mmml::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let mut cfg = TrainConfig::default();
    if let [margin, lr, decay, epochs, batch, ..] = args[..] {
        cfg.margin = margin;
        cfg.learning_rate = lr;
        cfg.lr_decay = decay;
        cfg.epochs = epochs as usize;
        cfg.batch.batch_size = batch as usize;
    }

    let dev_speakers = args.get(5).map_or(200, |&n| n as usize);
    let dev = gen_synthetic(&SynthConfig {
        n_speakers: dev_speakers,
        ..SynthConfig::benchmark()
    })?;
    let eval = gen_synthetic(&SynthConfig {
        n_speakers: 100,
        seed: 8,
        ..SynthConfig::benchmark()
    })?;
    let trials = gen_trials(&eval, 2000, 8000, 11)?;

    let raw = score_trials(&eval, &trials, &[])?;
    println!("raw cosine  EER {:.4}", eer(&raw, &trials)?.eer);

    let lda = train_lda(&dev, &LdaConfig { d_out: 25, ..LdaConfig::default() })?;
    let lda_scores = score_trials(&eval, &trials, std::slice::from_ref(&lda))?;
    println!("lda         EER {:.4}", eer(&lda_scores, &trials)?.eer);

    // the 25 speaker-informative axes, selected by hand
    let rows: Vec<Vec<f64>> = (0..25).map(|i| (0..50).map(|k| if k == 25 + i { 1.0 } else { 0.0 }).collect()).collect();
    let sel = mmml::Matrix::from_rows(&rows)?;
    let oracle = mmml::Projection::new(sel, "oracle")?;
    let o = score_trials(&eval, &trials, &[oracle])?;
    println!("clean-axes  EER {:.4}", eer(&o, &trials)?.eer);
    let dev_trials = gen_trials(&dev, 2000, 8000, 12)?;
    let lda_dev = score_trials(&dev, &dev_trials, std::slice::from_ref(&lda))?;
    println!("lda on dev  EER {:.4}", eer(&lda_dev, &dev_trials)?.eer);

    let start = Instant::now();
    let (m, report) = train(&dev, 25, &cfg)?;
    let dev_scores = score_trials(&dev, &dev_trials, std::slice::from_ref(&m))?;
    println!("mmml on dev EER {:.4}  |M| {:.3}", eer(&dev_scores, &dev_trials)?.eer, m.matrix().max_abs());
    let col = |k: usize| (0..m.d_out()).map(|r| m.matrix().get(r, k).powi(2)).sum::<f64>().sqrt();
    let nuis: f64 = (0..25).map(col).sum::<f64>() / 25.0;
    let clean: f64 = (25..50).map(col).sum::<f64>() / 25.0;
    println!("column norm nuisance {nuis:.4} clean {clean:.4}");
    let mmml_scores = score_trials(&eval, &trials, &[m])?;
    println!(
        "mmml        EER {:.4}  ({:.1}s, final loss {:.4}, active {:.3})",
        eer(&mmml_scores, &trials)?.eer,
        start.elapsed().as_secs_f64(),
        report.epochs.last().map_or(f64::NAN, |e| e.mean_loss),
        report.epochs.last().map_or(f64::NAN, |e| e.active_fraction),
    );

    let fused = fuse(&mmml_scores, &lda_scores, &FusionConfig::default())?;
    println!("fused 0.2   EER {:.4}", eer(&fused, &trials)?.eer);
    Ok(())
}
