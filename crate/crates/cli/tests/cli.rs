mod common;

use common::*;
use mmml::dataset::{load_embeddings_auto, write_embeddings};
use mmml::linalg::matmul;
use mmml::mmml::initial_projection;
use mmml::{Dataset, Embedding, EmbeddingFormat, Init, Projection, ScoreSet, Vector};
use tempfile::TempDir;

fn small_corpus(dir: &TempDir) -> (String, String) {
    let emb = s(&path(dir.path(), "dev.emb"));
    let trials = s(&path(dir.path(), "dev.trials"));
    ok(&[
        "gen-synth", "--speakers", "20", "--utts", "4", "--dim", "12", "--nuisance-dims", "6", "--seed", "3", "--out",
        &emb, "--trials-out", &trials, "--targets", "60", "--nontargets", "200",
    ]);
    (emb, trials)
}

#[test]
fn gen_synth_writes_loadable_corpus() {
    let dir = TempDir::new().unwrap();
    let out = path(dir.path(), "dev.emb");
    ok(&[
        "gen-synth", "--speakers", "200", "--utts", "10", "--dim", "50", "--nuisance-dims", "25", "--nuisance-scale",
        "10", "--seed", "7", "--out", &s(&out),
    ]);
    let d = load_embeddings_auto(&out).unwrap();
    assert_eq!((d.len(), d.dim(), d.n_speakers()), (2000, 50, 200));

    let tsv = path(dir.path(), "dev.tsv");
    ok(&["gen-synth", "--speakers", "3", "--utts", "2", "--dim", "4", "--nuisance-dims", "1", "--out", &s(&tsv)]);
    assert!(std::fs::read_to_string(&tsv).unwrap().starts_with("#dim\t4\n"));
}

#[test]
fn exit_codes() {
    let r = mmml(&["gen-synth", "--speakers", "3"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("Usage"), "{}", r.stderr);
    assert_eq!(mmml(&["no-such-command"]).code, 2);
    assert_eq!(mmml(&["fuse", "--a", "x", "--b", "y", "--out", "z", "--alpha", "abc"]).code, 2);

    let dir = TempDir::new().unwrap();
    let missing = s(&path(dir.path(), "missing.emb"));
    let r = mmml(&["train-lda", "--dev", &missing, "--out", &s(&path(dir.path(), "x.prj"))]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.starts_with("error: loading"), "{}", r.stderr);
}

#[test]
fn train_mmml_log_and_zero_epochs() {
    let dir = TempDir::new().unwrap();
    let (emb, _) = small_corpus(&dir);
    let (prj, log) = (s(&path(dir.path(), "m.prj")), s(&path(dir.path(), "m.log")));
    ok(&["train-mmml", "--dev", &emb, "--dout", "5", "--epochs", "7", "--batch-size", "16", "--out", &prj, "--log", &log]);
    let text = std::fs::read_to_string(&log).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("epoch\tmean_loss\tactive_fraction\tlearning_rate"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| r.split('\t').count() == 4));
    let p = Projection::load(&prj).unwrap();
    assert_eq!((p.d_out(), p.d_in()), (5, 12));

    ok(&["train-mmml", "--dev", &emb, "--dout", "5", "--epochs", "0", "--seed", "9", "--out", &prj]);
    let init = initial_projection(12, 5, Init::Auto { seed: 9 }).unwrap();
    assert_eq!(Projection::load(&prj).unwrap().matrix(), init.matrix());
}

#[test]
fn train_lda_rank_bound_and_recovery() {
    let dir = TempDir::new().unwrap();
    let (emb, _) = small_corpus(&dir);
    let prj = s(&path(dir.path(), "lda.prj"));
    let r = mmml(&["train-lda", "--dev", &emb, "--dout", "20", "--out", &prj]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("max feasible is 12"), "{}", r.stderr);

    // two classes with means ±e₀ and unit spherical noise
    let rows: Vec<Embedding> = (0..400)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let x = [sign + ((i * 37 % 101) as f64 / 50.0 - 1.0), (i * 53 % 97) as f64 / 48.0 - 1.0, (i * 71 % 89) as f64 / 44.0 - 1.0];
            Embedding::new(if sign > 0.0 { "p" } else { "n" }, format!("u{i}"), Vector::new(x.to_vec()).unwrap())
        })
        .collect();
    let two = path(dir.path(), "two.tsv");
    write_embeddings(&Dataset::new(3, rows).unwrap(), &two, EmbeddingFormat::Tsv).unwrap();
    ok(&["train-lda", "--dev", &s(&two), "--dout", "1", "--out", &prj]);
    let p = Projection::load(&prj).unwrap();
    assert_eq!((p.d_out(), p.d_in()), (1, 3));
    assert!(p.matrix().get(0, 0).abs() >= 0.99, "{:?}", p.matrix().row(0));
}

#[test]
fn score_chains() {
    let dir = TempDir::new().unwrap();
    let (emb, trials) = small_corpus(&dir);
    let out = |n: &str| s(&path(dir.path(), n));

    ok(&["score", "--emb", &emb, "--trials", &trials, "--out", &out("raw.scores")]);
    Projection::identity(12).unwrap().save(out("id.prj")).unwrap();
    ok(&["score", "--emb", &emb, "--trials", &trials, "--proj", &out("id.prj"), "--out", &out("id.scores")]);
    assert_eq!(std::fs::read(out("raw.scores")).unwrap(), std::fs::read(out("id.scores")).unwrap());

    let m1 = initial_projection(12, 8, Init::RandomOrthonormal { seed: 1 }).unwrap().scaled(3.0).unwrap();
    let m2 = initial_projection(8, 4, Init::RandomOrthonormal { seed: 2 }).unwrap();
    m1.save(out("m1.prj")).unwrap();
    m2.save(out("m2.prj")).unwrap();
    Projection::new(matmul(m2.matrix(), m1.matrix()).unwrap(), "m2*m1").unwrap().save(out("m21.prj")).unwrap();
    ok(&["score", "--emb", &emb, "--trials", &trials, "--proj", &out("m1.prj"), "--proj", &out("m2.prj"), "--out", &out("chain.scores")]);
    ok(&["score", "--emb", &emb, "--trials", &trials, "--proj", &out("m21.prj"), "--out", &out("single.scores")]);
    let (a, b) = (ScoreSet::load(out("chain.scores")).unwrap(), ScoreSet::load(out("single.scores")).unwrap());
    assert_eq!(a.len(), 260);
    for (x, y) in a.scores().zip(b.scores()) {
        assert!((x - y).abs() <= 1e-10);
    }

    // wrong order does not compose
    let r = mmml(&["score", "--emb", &emb, "--trials", &trials, "--proj", &out("m2.prj"), "--proj", &out("m1.prj"), "--out", &out("bad")]);
    assert_eq!(r.code, 1);
}

#[test]
fn project_subcommand_matches_chain() {
    let dir = TempDir::new().unwrap();
    let (emb, _) = small_corpus(&dir);
    let prj = path(dir.path(), "m.prj");
    let m = initial_projection(12, 6, Init::RandomOrthonormal { seed: 4 }).unwrap();
    m.save(&prj).unwrap();
    let out = path(dir.path(), "projected.tsv");
    ok(&["project", "--emb", &emb, "--proj", &s(&prj), "--out", &s(&out)]);
    let p = load_embeddings_auto(&out).unwrap();
    let expected = mmml::mmml::project(&m, &load_embeddings_auto(&emb).unwrap()).unwrap();
    assert_eq!(p, expected);
}

#[test]
fn fuse_examples() {
    let dir = TempDir::new().unwrap();
    let (a, b, out) = (path(dir.path(), "a"), path(dir.path(), "b"), path(dir.path(), "f"));
    write_scores(&a, &[("x", "y", 1.0)]);
    write_scores(&b, &[("x", "y", 0.5)]);
    ok(&["fuse", "--a", &s(&a), "--b", &s(&b), "--out", &s(&out)]);
    let f = ScoreSet::load(&out).unwrap();
    assert!((f.get("x", "y").unwrap() - 0.6).abs() < 1e-15);
    for (alpha, expect) in [("1", &a), ("0", &b)] {
        ok(&["fuse", "--a", &s(&a), "--b", &s(&b), "--alpha", alpha, "--out", &s(&out)]);
        assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(expect).unwrap());
    }

    write_scores(&b, &[("x", "z", 0.5)]);
    let r = mmml(&["fuse", "--a", &s(&a), "--b", &s(&b), "--out", &s(&out)]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("(x, z)") && r.stderr.contains("(x, y)"), "{}", r.stderr);
}

#[test]
fn eval_fixtures() {
    let dir = TempDir::new().unwrap();
    let (scores, trials, det) = (path(dir.path(), "s"), path(dir.path(), "t"), path(dir.path(), "det.tsv"));

    write_scores(&scores, &[("a", "b", 1.0), ("a", "c", 1.0), ("a", "d", 0.0), ("b", "d", 0.0)]);
    write_trials(&trials, &[("a", "b", "target"), ("a", "c", "target"), ("a", "d", "nontarget"), ("b", "d", "nontarget")]);
    let r = ok(&["eval", "--scores", &s(&scores), "--trials", &s(&trials)]);
    assert_eq!(r.stdout.lines().next(), Some("EER 0.0000 (0.00%)"));

    let six = [("t1", 0.9, "target"), ("t2", 0.8, "target"), ("t3", 0.3, "target"), ("n1", 0.7, "nontarget"), ("n2", 0.2, "nontarget"), ("n3", 0.1, "nontarget")];
    write_scores(&scores, &six.map(|(t, sc, _)| ("e", t, sc)));
    write_trials(&trials, &six.map(|(t, _, l)| ("e", t, l)));
    let r = ok(&["eval", "--scores", &s(&scores), "--trials", &s(&trials), "--det-out", &s(&det)]);
    assert_eq!(r.stdout.lines().next(), Some("EER 0.3333 (33.33%)"));
    let det = std::fs::read_to_string(&det).unwrap();
    // six distinct scores plus the two infinite sentinels
    assert_eq!(det.lines().count(), 8);
    for l in det.lines() {
        let xs: Vec<f64> = l.split('\t').map(|x| x.parse().unwrap()).collect();
        assert_eq!(xs.len(), 2, "{l}");
    }

    write_trials(&trials, &[("e", "missing", "target")]);
    assert_eq!(mmml(&["eval", "--scores", &s(&scores), "--trials", &s(&trials)]).code, 1);
}

#[test]
fn end_to_end_mmml_beats_raw_cosine() {
    let dir = TempDir::new().unwrap();
    let f = |n: &str| s(&path(dir.path(), n));
    ok(&["gen-synth", "--speakers", "200", "--utts", "10", "--dim", "50", "--nuisance-dims", "25", "--seed", "7", "--out", &f("dev.emb")]);
    ok(&[
        "gen-synth", "--speakers", "100", "--utts", "10", "--dim", "50", "--nuisance-dims", "25", "--seed", "8", "--out",
        &f("eval.emb"), "--trials-out", &f("eval.trials"),
    ]);
    ok(&["train-mmml", "--dev", &f("dev.emb"), "--dout", "25", "--out", &f("m.prj")]);
    ok(&["score", "--emb", &f("eval.emb"), "--trials", &f("eval.trials"), "--proj", &f("m.prj"), "--out", &f("m.scores")]);
    ok(&["score", "--emb", &f("eval.emb"), "--trials", &f("eval.trials"), "--out", &f("raw.scores")]);
    let mmml_eer = parse_eer(&ok(&["eval", "--scores", &f("m.scores"), "--trials", &f("eval.trials")]).stdout);
    let raw_eer = parse_eer(&ok(&["eval", "--scores", &f("raw.scores"), "--trials", &f("eval.trials")]).stdout);
    assert!(mmml_eer < raw_eer, "mmml {mmml_eer} vs raw {raw_eer}");
}

#[test]
fn length_norm_leaves_cosine_scores_unchanged() {
    let dir = TempDir::new().unwrap();
    let (emb, trials) = small_corpus(&dir);
    let out = |n: &str| s(&path(dir.path(), n));
    ok(&["score", "--emb", &emb, "--trials", &trials, "--out", &out("a")]);
    ok(&["score", "--emb", &emb, "--trials", &trials, "--length-norm", "--out", &out("b")]);
    let (a, b) = (ScoreSet::load(out("a")).unwrap(), ScoreSet::load(out("b")).unwrap());
    for (x, y) in a.scores().zip(b.scores()) {
        assert!((x - y).abs() <= 1e-12);
    }
}
