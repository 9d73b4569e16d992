//! Python bindings. Vectors and matrices cross the boundary as lists of floats;
//! trials as `(enroll, test, "target" | "nontarget")` tuples and scores as
//! `(enroll, test, score)` tuples.

use mmml::dataset::{gen_synthetic, gen_trials, load_embeddings_auto, write_embeddings};
use mmml::mmml::{project, train};
use mmml::sampler::BatchesPerEpoch;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

type TrialTuple = (String, String, String);
type ScoreTuple = (String, String, f64);
type EpochRow = (usize, f64, f64, f64);

fn err(e: mmml::Error) -> PyErr {
    match e {
        mmml::Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_trials(trials: Vec<TrialTuple>) -> PyResult<Vec<mmml::Trial>> {
    trials
        .into_iter()
        .map(|(e, t, l)| {
            let label = l.parse().map_err(PyValueError::new_err)?;
            mmml::Trial::new(e, t, label).map_err(err)
        })
        .collect()
}

fn to_scores(scores: Vec<ScoreTuple>) -> PyResult<mmml::ScoreSet> {
    let entries = scores.into_iter().map(|(enroll, test, score)| mmml::ScoreEntry { enroll, test, score }).collect();
    mmml::ScoreSet::new(entries).map_err(err)
}

fn from_scores(s: &mmml::ScoreSet) -> Vec<ScoreTuple> {
    s.entries().iter().map(|e| (e.enroll.clone(), e.test.clone(), e.score)).collect()
}

/// Labeled embeddings of a common dimension.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset(mmml::Dataset);

#[pymethods]
impl PyDataset {
    #[new]
    fn new(speakers: Vec<String>, utterances: Vec<String>, vectors: Vec<Vec<f64>>) -> PyResult<Self> {
        if speakers.len() != utterances.len() || speakers.len() != vectors.len() {
            return Err(PyValueError::new_err("speakers, utterances and vectors must have equal length"));
        }
        let dim = vectors.first().map_or(0, Vec::len);
        let rows = speakers
            .into_iter()
            .zip(utterances)
            .zip(vectors)
            .map(|((s, u), v)| Ok(mmml::Embedding::new(s, u, mmml::Vector::new(v).map_err(err)?)))
            .collect::<PyResult<Vec<_>>>()?;
        mmml::Dataset::new(dim, rows).map(Self).map_err(err)
    }

    /// Reads a binary or TSV embedding file, chosen by extension.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        load_embeddings_auto(path).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (n_speakers=200, utts_per_speaker=10, dim=400, speaker_scatter=1.0, channel_scatter=1.0, nuisance_dims=200, nuisance_scale=10.0, seed=7))]
    #[allow(clippy::too_many_arguments)]
    fn synthetic(
        n_speakers: usize,
        utts_per_speaker: usize,
        dim: usize,
        speaker_scatter: f64,
        channel_scatter: f64,
        nuisance_dims: usize,
        nuisance_scale: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = mmml::SynthConfig {
            n_speakers,
            utts_per_speaker,
            dim,
            speaker_scatter,
            channel_scatter,
            nuisance_dims,
            nuisance_scale,
            seed,
        };
        gen_synthetic(&cfg).map(Self).map_err(err)
    }

    /// The 200-speaker, 50-dimensional benchmark corpus.
    #[staticmethod]
    fn benchmark() -> PyResult<Self> {
        gen_synthetic(&mmml::SynthConfig::benchmark()).map(Self).map_err(err)
    }

    #[pyo3(signature = (path, binary=true))]
    fn save(&self, path: &str, binary: bool) -> PyResult<()> {
        let format = if binary { mmml::EmbeddingFormat::Binary } else { mmml::EmbeddingFormat::Tsv };
        write_embeddings(&self.0, path, format).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn n_speakers(&self) -> usize {
        self.0.n_speakers()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn speakers(&self) -> Vec<String> {
        self.0.embeddings().iter().map(|e| e.speaker_id.clone()).collect()
    }

    fn utterances(&self) -> Vec<String> {
        self.0.embeddings().iter().map(|e| e.utterance_id.clone()).collect()
    }

    fn vectors(&self) -> Vec<Vec<f64>> {
        self.0.embeddings().iter().map(|e| e.vector.as_slice().to_vec()).collect()
    }

    fn length_normalized(&self) -> Self {
        Self(self.0.length_normalized())
    }

    fn project(&self, projection: &PyProjection) -> PyResult<Self> {
        project(&projection.0, &self.0).map(Self).map_err(err)
    }

    /// Samples distinct unordered same- and different-speaker pairs.
    #[pyo3(signature = (n_target, n_nontarget, seed=11))]
    fn trials(&self, n_target: usize, n_nontarget: usize, seed: u64) -> PyResult<Vec<TrialTuple>> {
        let trials = gen_trials(&self.0, n_target, n_nontarget, seed).map_err(err)?;
        Ok(trials.into_iter().map(|t| (t.enroll, t.test, t.label.as_str().to_owned())).collect())
    }

    fn __repr__(&self) -> String {
        format!("Dataset(len={}, dim={}, speakers={})", self.0.len(), self.0.dim(), self.0.n_speakers())
    }
}

/// A linear map `x -> M x` with a provenance note.
#[pyclass(name = "Projection", frozen, from_py_object)]
#[derive(Clone)]
struct PyProjection(mmml::Projection);

#[pymethods]
impl PyProjection {
    #[new]
    #[pyo3(signature = (rows, provenance=String::from("python")))]
    fn new(rows: Vec<Vec<f64>>, provenance: String) -> PyResult<Self> {
        let m = mmml::Matrix::from_rows(&rows).map_err(err)?;
        mmml::Projection::new(m, provenance).map(Self).map_err(err)
    }

    #[staticmethod]
    fn identity(dim: usize) -> PyResult<Self> {
        mmml::Projection::identity(dim).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        mmml::Projection::load(path).map(Self).map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(err)
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.0.d_out()).map(|r| self.0.matrix().row(r).to_vec()).collect()
    }

    #[getter]
    fn d_in(&self) -> usize {
        self.0.d_in()
    }

    #[getter]
    fn d_out(&self) -> usize {
        self.0.d_out()
    }

    #[getter]
    fn provenance(&self) -> String {
        self.0.provenance().to_owned()
    }

    fn scaled(&self, c: f64) -> PyResult<Self> {
        self.0.scaled(c).map(Self).map_err(err)
    }

    /// `next ∘ self`.
    fn then(&self, next: &PyProjection) -> PyResult<Self> {
        self.0.then(&next.0).map(Self).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Projection({}x{}, {:?})", self.0.d_out(), self.0.d_in(), self.0.provenance())
    }
}

/// Trains a projection; returns it with per-epoch
/// `(epoch, mean_loss, active_fraction, learning_rate)` rows.
#[pyfunction]
#[pyo3(signature = (dataset, d_out=150, margin=0.5, learning_rate=0.05, lr_decay=0.95, epochs=50, batch_size=128, batches_per_epoch=None, seed=0, patience=None))]
#[allow(clippy::too_many_arguments)]
fn train_mmml(
    dataset: &PyDataset,
    d_out: usize,
    margin: f64,
    learning_rate: f64,
    lr_decay: f64,
    epochs: usize,
    batch_size: usize,
    batches_per_epoch: Option<usize>,
    seed: u64,
    patience: Option<usize>,
) -> PyResult<(PyProjection, Vec<EpochRow>)> {
    let cfg = mmml::TrainConfig {
        margin,
        learning_rate,
        lr_decay,
        epochs,
        batch: mmml::SamplerConfig {
            batch_size,
            seed,
            batches_per_epoch: batches_per_epoch.map_or(BatchesPerEpoch::Cover, BatchesPerEpoch::Count),
        },
        init: mmml::Init::Auto { seed },
        early_stop_patience: patience,
    };
    let (p, report) = train(&dataset.0, d_out, &cfg).map_err(err)?;
    let log = report.epochs.iter().map(|e| (e.epoch, e.mean_loss, e.active_fraction, e.learning_rate)).collect();
    Ok((PyProjection(p), log))
}

#[pyfunction]
#[pyo3(signature = (dataset, d_out=150, ridge=1e-6))]
fn train_lda(dataset: &PyDataset, d_out: usize, ridge: f64) -> PyResult<PyProjection> {
    mmml::train_lda(&dataset.0, &mmml::LdaConfig { d_out, ridge }).map(PyProjection).map_err(err)
}

/// Cosine scores after applying `chain` in order.
#[pyfunction]
#[pyo3(signature = (dataset, trials, chain=Vec::new()))]
fn score(dataset: &PyDataset, trials: Vec<TrialTuple>, chain: Vec<PyProjection>) -> PyResult<Vec<ScoreTuple>> {
    let chain: Vec<mmml::Projection> = chain.into_iter().map(|p| p.0).collect();
    let s = mmml::score_trials(&dataset.0, &to_trials(trials)?, &chain).map_err(err)?;
    Ok(from_scores(&s))
}

/// `alpha * a + (1 - alpha) * b`, keyed by trial.
#[pyfunction]
#[pyo3(signature = (a, b, alpha=0.2))]
fn fuse(a: Vec<ScoreTuple>, b: Vec<ScoreTuple>, alpha: f64) -> PyResult<Vec<ScoreTuple>> {
    let s = mmml::fuse(&to_scores(a)?, &to_scores(b)?, &mmml::FusionConfig { alpha }).map_err(err)?;
    Ok(from_scores(&s))
}

/// `(eer, threshold)` for scored trials.
#[pyfunction]
fn eer(scores: Vec<ScoreTuple>, trials: Vec<TrialTuple>) -> PyResult<(f64, f64)> {
    let r = mmml::eer(&to_scores(scores)?, &to_trials(trials)?).map_err(err)?;
    Ok((r.eer, r.threshold))
}

/// `(eer, threshold)` from raw target and nontarget score lists.
#[pyfunction]
fn eer_from_scores(targets: Vec<f64>, nontargets: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = mmml::ErrorRates::from_scores(&targets, &nontargets).map_err(err)?.eer();
    Ok((r.eer, r.threshold))
}

/// DET curve points `(probit(fpr), probit(fnr))`.
#[pyfunction]
fn det(targets: Vec<f64>, nontargets: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    let curve = mmml::ErrorRates::from_scores(&targets, &nontargets).map_err(err)?;
    Ok(mmml::det_points(&curve))
}

#[pyfunction]
fn cosine(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    let (a, b) = (mmml::Vector::new(a).map_err(err)?, mmml::Vector::new(b).map_err(err)?);
    mmml::cosine(&a, &b).map_err(err)
}

#[pyfunction]
fn probit(p: f64) -> f64 {
    mmml::probit(p)
}

#[pymodule]
fn mmml_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyProjection>()?;
    m.add_function(wrap_pyfunction!(train_mmml, m)?)?;
    m.add_function(wrap_pyfunction!(train_lda, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(fuse, m)?)?;
    m.add_function(wrap_pyfunction!(eer, m)?)?;
    m.add_function(wrap_pyfunction!(eer_from_scores, m)?)?;
    m.add_function(wrap_pyfunction!(det, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(probit, m)?)?;
    Ok(())
}
