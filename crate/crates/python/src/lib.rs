//! Python bindings for the preference representation toolkit.
//!
//! Matrices cross the boundary as lists of lists of floats; structured
//! reports come back as plain dicts.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use prefrep::datasets::{self, BtGenConfig, PreferenceDataset};
use prefrep::expressiveness::{self, SkewMatrix};
use prefrep::gpo::{self, GameSpec, InnerConfig, PolicyDistribution, ScoreMode};
use prefrep::models::{bt_to_gpm, AnyModel, BtModel, GpmModel, ItemRef, PreferenceModel, ScoreMatrix};
use prefrep::prefcore::{self, EmbeddingVector, PreferenceScore, ScaleVector};
use prefrep::training::{self, LossKind, Optimizer, TrainConfig};
use prefrep::PrefError;

fn err(e: PrefError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn skew(rows: Vec<Vec<f64>>) -> PyResult<SkewMatrix> {
    SkewMatrix::new(rows).map_err(err)
}

/// A trained or hand-built GPM or Bradley-Terry model.
#[pyclass(name = "Model", module = "prefrep_py", skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: AnyModel,
}

#[pymethods]
impl PyModel {
    /// GPM from raw gate parameters per context and raw embeddings per context and item.
    #[staticmethod]
    #[pyo3(signature = (k, beta, scales, embeddings, normalize = false))]
    fn gpm(
        k: usize,
        beta: f64,
        scales: std::collections::BTreeMap<String, Vec<f64>>,
        embeddings: std::collections::BTreeMap<String, std::collections::BTreeMap<String, Vec<f64>>>,
        normalize: bool,
    ) -> PyResult<Self> {
        let m = GpmModel::from_tables(k, beta, normalize, Default::default(), &scales, &embeddings).map_err(err)?;
        Ok(Self { inner: AnyModel::Gpm(m) })
    }

    /// Bradley-Terry model from rewards per context and item.
    #[staticmethod]
    fn bt(beta: f64, rewards: std::collections::BTreeMap<String, std::collections::BTreeMap<String, f64>>) -> PyResult<Self> {
        let m = BtModel::from_rewards(beta, &rewards).map_err(err)?;
        Ok(Self { inner: AnyModel::Bt(m) })
    }

    /// Randomly initialized GPM covering every item of `dataset`.
    #[staticmethod]
    #[pyo3(signature = (dataset, k, beta = 0.1, normalize = false, init_scale = 0.1, seed = 0))]
    fn init_gpm(dataset: &PyDataset, k: usize, beta: f64, normalize: bool, init_scale: f64, seed: u64) -> PyResult<Self> {
        let m = GpmModel::init(dataset.inner.catalog(), k, beta, normalize, init_scale, seed).map_err(err)?;
        Ok(Self { inner: AnyModel::Gpm(m) })
    }

    #[staticmethod]
    #[pyo3(signature = (dataset, beta = 1.0, init_scale = 0.1, seed = 0))]
    fn init_bt(dataset: &PyDataset, beta: f64, init_scale: f64, seed: u64) -> PyResult<Self> {
        let m = BtModel::init(dataset.inner.catalog(), beta, init_scale, seed).map_err(err)?;
        Ok(Self { inner: AnyModel::Bt(m) })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: AnyModel::load(path).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: AnyModel::from_json(text).map_err(err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner {
            AnyModel::Gpm(_) => "gpm",
            AnyModel::Bt(_) => "bt",
        }
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    fn contexts(&self) -> Vec<String> {
        self.inner.catalog().into_keys().collect()
    }

    fn items(&self, context: &str) -> PyResult<Vec<String>> {
        Ok(self.inner.items(context).map_err(err)?.into_iter().map(String::from).collect())
    }

    /// Preference score s(a > b | context).
    fn score(&self, context: &str, a: &str, b: &str) -> PyResult<f64> {
        self.inner.score_items(context, a, b).map_err(err)
    }

    /// P(a > b | context) = sigma(s / beta).
    fn prob(&self, context: &str, a: &str, b: &str) -> PyResult<f64> {
        let s = self.inner.score_items(context, a, b).map_err(err)?;
        prefcore::preference_prob(PreferenceScore(s), self.inner.beta()).map_err(err)
    }

    /// Pairwise score matrix; all items of the context when `items` is omitted.
    #[pyo3(signature = (context, items = None))]
    fn score_matrix(&self, context: &str, items: Option<Vec<String>>) -> PyResult<Vec<Vec<f64>>> {
        let names: Vec<String> = match items {
            Some(v) => v,
            None => self.items(context)?,
        };
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        Ok(self.inner.score_matrix(context, &refs).map_err(err)?.to_rows())
    }

    /// Embedding used for scoring (GPM only).
    fn embedding(&self, context: &str, item: &str) -> PyResult<Vec<f64>> {
        match &self.inner {
            AnyModel::Gpm(m) => Ok(m.embed(&ItemRef::new(context, item)).map_err(err)?.into_coords()),
            AnyModel::Bt(_) => Err(PyValueError::new_err("embedding() needs a GPM model; use to_gpm() first")),
        }
    }

    /// Gated block scales of a context (GPM only).
    fn scales(&self, context: &str) -> PyResult<Vec<f64>> {
        match &self.inner {
            AnyModel::Gpm(m) => Ok(m.scales(context).map_err(err)?.lambdas().to_vec()),
            AnyModel::Bt(_) => Err(PyValueError::new_err("scales() needs a GPM model")),
        }
    }

    /// Equivalent k=1 GPM of a BT model.
    #[pyo3(signature = (c = 1.0))]
    fn to_gpm(&self, c: f64) -> PyResult<Self> {
        match &self.inner {
            AnyModel::Bt(m) => Ok(Self { inner: AnyModel::Gpm(bt_to_gpm(m, c).map_err(err)?) }),
            AnyModel::Gpm(_) => Ok(self.clone()),
        }
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={:?}, beta={})", self.kind(), self.beta())
    }
}

/// Pairwise preference examples.
#[pyclass(name = "Dataset", module = "prefrep_py", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: PreferenceDataset,
}

#[pymethods]
impl PyDataset {
    /// Examples as `(context, winner, loser, prob)` tuples.
    #[new]
    fn new(examples: Vec<(String, String, String, f64)>) -> PyResult<Self> {
        let examples = examples
            .into_iter()
            .map(|(context, winner, loser, prob)| datasets::PreferenceExample { context, winner, loser, prob })
            .collect();
        Ok(Self { inner: PreferenceDataset::from_examples(examples).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: datasets::load_dataset(path).map_err(err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        datasets::save_dataset(&self.inner, path).map_err(err)
    }

    /// Directed `n`-cycles with hard labels.
    #[staticmethod]
    #[pyo3(signature = (n, contexts = 1, seed = 0))]
    fn cycle(n: usize, contexts: usize, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: datasets::gen_cycle(n, contexts, seed).map_err(err)?.0 })
    }

    /// Comparisons drawn from Gaussian rewards.
    #[staticmethod]
    #[pyo3(signature = (n, contexts = 1, pairs = 100, seed = 0, soft = false, beta = 1.0))]
    fn bradley_terry(n: usize, contexts: usize, pairs: usize, seed: u64, soft: bool, beta: f64) -> PyResult<Self> {
        let cfg = BtGenConfig {
            n_items: n,
            contexts,
            pairs_per_context: pairs,
            seed,
            soft,
            beta,
        };
        Ok(Self { inner: datasets::gen_bt(&cfg).map_err(err)?.0 })
    }

    /// Full pairwise coverage of random skew score matrices.
    #[staticmethod]
    #[pyo3(signature = (n, contexts = 1, seed = 0, scale = 1.0))]
    fn skew(n: usize, contexts: usize, seed: u64, scale: f64) -> PyResult<Self> {
        Ok(Self { inner: datasets::gen_skew(n, contexts, seed, scale).map_err(err)?.0 })
    }

    fn examples(&self) -> Vec<(String, String, String, f64)> {
        self.inner
            .examples()
            .iter()
            .map(|e| (e.context.clone(), e.winner.clone(), e.loser.clone(), e.prob))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(examples={}, contexts={})", self.inner.len(), self.inner.catalog().len())
    }
}

/// Train `model` on `dataset`; returns the trained model and the per-epoch report.
#[pyfunction]
#[pyo3(signature = (model, dataset, epochs = 500, lr = 0.01, batch_size = 32, seed = 0, beta = None, loss = "ce", optimizer = "adam", init_scale = 0.1))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    model: &PyModel,
    dataset: &PyDataset,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
    beta: Option<f64>,
    loss: &str,
    optimizer: &str,
    init_scale: f64,
) -> PyResult<(PyModel, Bound<'py, PyAny>)> {
    let loss = match loss {
        "ce" => LossKind::Ce,
        "mse" => LossKind::Mse,
        other => return Err(PyValueError::new_err(format!("unknown loss `{other}`, expected ce or mse"))),
    };
    let optimizer = match optimizer {
        "adam" => Optimizer::ADAM,
        "sgd" => Optimizer::Sgd,
        other => return Err(PyValueError::new_err(format!("unknown optimizer `{other}`, expected adam or sgd"))),
    };
    let cfg = TrainConfig {
        loss,
        beta: beta.unwrap_or_else(|| model.inner.beta()),
        learning_rate: lr,
        epochs,
        batch_size,
        seed,
        optimizer,
        init_scale,
    };
    let (trained, report) = training::train(model.inner.clone(), &dataset.inner, &cfg).map_err(err)?;
    Ok((PyModel { inner: trained }, json_to_py(py, &report)?))
}

/// Fraction of examples whose preferred side gets a positive score.
#[pyfunction]
fn accuracy(model: &PyModel, dataset: &PyDataset) -> PyResult<f64> {
    training::eval_accuracy(&model.inner, dataset.inner.examples()).map_err(err)
}

/// Mean cross-entropy of `model` on `dataset`.
#[pyfunction]
fn ce_loss(model: &PyModel, dataset: &PyDataset) -> PyResult<f64> {
    training::ce_loss(&model.inner, dataset.inner.examples()).map_err(err)
}

/// Skew score of two embeddings; unit scales when `lambdas` is omitted.
#[pyfunction]
#[pyo3(signature = (a, b, lambdas = None))]
fn skew_score(a: Vec<f64>, b: Vec<f64>, lambdas: Option<Vec<f64>>) -> PyResult<f64> {
    let a = EmbeddingVector::new(a).map_err(err)?;
    let b = EmbeddingVector::new(b).map_err(err)?;
    let scales = match lambdas {
        Some(l) => ScaleVector::new(l).map_err(err)?,
        None => ScaleVector::ones(a.k()),
    };
    Ok(prefcore::skew_score(&a, &b, &scales).map_err(err)?.value())
}

/// Embeddings in R^{2k} reproducing a k x k skew matrix under unit scales.
#[pyfunction]
fn construct_real(matrix: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let c = expressiveness::construct_real(&skew(matrix)?);
    Ok(c.embeddings.into_iter().map(EmbeddingVector::into_coords).collect())
}

/// Complex embeddings in C^k; `Im <v_i, v_j>` reproduces the matrix.
#[pyfunction]
fn construct_complex(matrix: Vec<Vec<f64>>) -> PyResult<Vec<Vec<num_complex::Complex64>>> {
    Ok(expressiveness::construct_complex(&skew(matrix)?).into_iter().map(|e| e.coords).collect())
}

/// Spectral decomposition of an even-dimensional skew matrix.
#[pyfunction]
fn construct_spectral<'py>(py: Python<'py>, matrix: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let p = skew(matrix)?;
    let sd = expressiveness::construct_spectral(&p).map_err(err)?;
    let n = sd.dim();
    let out = PyDict::new(py);
    out.set_item("lambdas", sd.lambdas.clone())?;
    out.set_item("u", sd.u.chunks(n).map(<[f64]>::to_vec).collect::<Vec<_>>())?;
    out.set_item("embeddings", sd.embeddings.iter().map(|e| e.coords().to_vec()).collect::<Vec<_>>())?;
    out.set_item("residual", sd.residual(&p))?;
    out.set_item("orthogonality_residual", sd.orthogonality_residual())?;
    Ok(out)
}

/// Whether an operator is skew-symmetric, orthogonal and squares to -I.
#[pyfunction]
fn canonical_check<'py>(py: Python<'py>, operator: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(py, &expressiveness::canonical_check(&operator).map_err(err)?)
}

/// Iterated GPO on a skew score matrix. Returns the full report as a dict.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (matrix, start = None, beta = 1.0, iterations = 20, mode = "exact", k = 16, seed = 0))]
fn gpo_run<'py>(
    py: Python<'py>,
    matrix: Vec<Vec<f64>>,
    start: Option<Vec<f64>>,
    beta: f64,
    iterations: usize,
    mode: &str,
    k: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let m = ScoreMatrix::from_rows(matrix).map_err(err)?;
    let mode = match mode {
        "exact" => ScoreMode::Exact,
        "sampled" => ScoreMode::Sampled { k, seed },
        other => return Err(PyValueError::new_err(format!("unknown mode `{other}`, expected exact or sampled"))),
    };
    let start = match start {
        Some(p) => PolicyDistribution::from_probs(&p).map_err(err)?,
        None => PolicyDistribution::uniform(m.n()).map_err(err)?,
    };
    let game = GameSpec::new(m, beta, mode).map_err(err)?;
    let (_, report) = gpo::gpo_run(&start, &game, iterations, &InnerConfig::default()).map_err(err)?;
    json_to_py(py, &report)
}

/// Symmetric equilibrium of the preference game sigma(M / beta).
#[pyfunction]
#[pyo3(signature = (matrix, beta = 1.0))]
fn solve_equilibrium(matrix: Vec<Vec<f64>>, beta: f64) -> PyResult<Vec<f64>> {
    let m = ScoreMatrix::from_rows(matrix).map_err(err)?;
    Ok(gpo::solve_equilibrium(&m, beta).map_err(err)?.probs())
}

/// Worst-case win rate of `probs` against any pure response, with the witness index.
#[pyfunction]
#[pyo3(signature = (probs, matrix, beta = 1.0))]
fn von_neumann_check(probs: Vec<f64>, matrix: Vec<Vec<f64>>, beta: f64) -> PyResult<(f64, usize)> {
    let m = ScoreMatrix::from_rows(matrix).map_err(err)?;
    let pi = PolicyDistribution::from_probs(&probs).map_err(err)?;
    gpo::von_neumann_check(&pi, &m, beta).map_err(err)
}

#[pyfunction]
fn rock_paper_scissors() -> Vec<Vec<f64>> {
    gpo::rock_paper_scissors().to_rows()
}

#[pymodule]
fn prefrep_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(ce_loss, m)?)?;
    m.add_function(wrap_pyfunction!(skew_score, m)?)?;
    m.add_function(wrap_pyfunction!(construct_real, m)?)?;
    m.add_function(wrap_pyfunction!(construct_complex, m)?)?;
    m.add_function(wrap_pyfunction!(construct_spectral, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_check, m)?)?;
    m.add_function(wrap_pyfunction!(gpo_run, m)?)?;
    m.add_function(wrap_pyfunction!(solve_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(von_neumann_check, m)?)?;
    m.add_function(wrap_pyfunction!(rock_paper_scissors, m)?)?;
    Ok(())
}
