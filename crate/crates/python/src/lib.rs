//! Python bindings for the lexical semantic recognition toolkit: corpus
//! I/O, the tag codec, evaluation, format conversion, and a trainable
//! tagger. Build with `cargo build -p lsr-python`, then rename the
//! resulting `liblsr_py.so` to `lsr_py.so` somewhere on `sys.path`
//! (`python/smoke_test.py` automates this).

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use lsr::constraints::{build_masks, LatticeMasks, LexcatConstraintTable};
use lsr::corpus::{
    parse_conllulex, parse_conllulex_lenient, write_conllulex, Inventory,
    Sentence as CoreSentence,
};
use lsr::convert::{parse_cupt, parse_dimsum, to_dimsum, to_parseme, write_cupt, write_dimsum};
use lsr::crf::emissions::FeatureConfig;
use lsr::crf::model_io::{load_model, save_model};
use lsr::crf::{self, CrfModel, EmissionKind, TrainConfig};
use lsr::metrics::{dimsum_report, parseme_report, streusle_report, MetricReport};
use lsr::tagcodec::{decode, encode, format_tag};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// One analyzed sentence: tokens plus lexical units and weak MWE groups.
#[pyclass(frozen)]
struct Sentence {
    inner: CoreSentence,
}

#[pymethods]
impl Sentence {
    #[getter]
    fn sent_id(&self) -> Option<&str> {
        self.inner.sent_id()
    }

    #[getter]
    fn text(&self) -> Option<&str> {
        self.inner.text()
    }

    /// `(index, form, lemma, upos)` per token, index 1-based.
    fn tokens(&self) -> Vec<(usize, String, String, String)> {
        self.inner
            .tokens
            .iter()
            .map(|t| (t.index, t.form.clone(), t.lemma.clone(), t.upos.clone()))
            .collect()
    }

    /// The sentence's tag sequence, one formatted tag per token.
    fn tags(&self) -> PyResult<Vec<String>> {
        let tags = encode(&self.inner).map_err(value_err)?;
        Ok(tags.iter().map(format_tag).collect())
    }

    /// `(token_indices, lexcat, supersense)` per lexical unit, in order of
    /// first token. The supersense is `None` or a label like `n.PERSON`
    /// or `p.Topic|p.Goal`.
    fn units(&self) -> Vec<(Vec<usize>, String, Option<String>)> {
        self.inner
            .units
            .iter()
            .map(|u| {
                (
                    u.token_indices.clone(),
                    u.lexcat.as_str().to_string(),
                    u.supersense.as_ref().map(|a| a.to_string()),
                )
            })
            .collect()
    }

    /// Member token indices of each weak MWE group.
    fn weak_groups(&self) -> Vec<Vec<usize>> {
        self.inner.weak_groups.iter().map(|g| g.members.clone()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.tokens.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "<Sentence {} ({} tokens, {} units)>",
            self.inner.sent_id().unwrap_or("?"),
            self.inner.tokens.len(),
            self.inner.units.len()
        )
    }
}

/// Parses annotated sentences, enforcing every corpus invariant.
#[pyfunction]
fn parse(text: &str) -> PyResult<Vec<Sentence>> {
    let sentences = parse_conllulex(text, Inventory::bundled()).map_err(value_err)?;
    Ok(sentences.into_iter().map(|inner| Sentence { inner }).collect())
}

/// Serializes sentences back to the 19-column format.
#[pyfunction]
fn write(sentences: Vec<PyRef<Sentence>>) -> String {
    let inner: Vec<CoreSentence> = sentences.iter().map(|s| s.inner.clone()).collect();
    write_conllulex(&inner)
}

/// Checks every sentence and reports `(sent_id, rule, message)` per
/// violation. Hard format errors (bad column counts etc.) still raise.
#[pyfunction]
fn validate(text: &str) -> PyResult<Vec<(String, String, String)>> {
    let (_, faults) = parse_conllulex_lenient(text, Inventory::bundled()).map_err(value_err)?;
    Ok(faults
        .into_iter()
        .flat_map(|(sent_id, violations)| {
            violations
                .into_iter()
                .map(move |v| (sent_id.clone(), v.rule.to_string(), v.message))
        })
        .collect())
}

fn report_to_dict(report: &MetricReport) -> HashMap<String, HashMap<String, f64>> {
    report
        .rows
        .iter()
        .map(|row| {
            let prf = row.counts.prf();
            let mut cells = HashMap::new();
            cells.insert("p".to_string(), prf.p);
            cells.insert("r".to_string(), prf.r);
            cells.insert("f".to_string(), prf.f);
            cells.insert("matched_pred".to_string(), row.counts.matched_pred);
            cells.insert("matched_gold".to_string(), row.counts.matched_gold);
            cells.insert("predicted".to_string(), row.counts.predicted);
            cells.insert("gold".to_string(), row.counts.gold);
            (row.name.to_string(), cells)
        })
        .collect()
}

/// Scores predictions against gold. `task` selects the metric family and
/// input format: `streusle` (19-column), `parseme` (cupt), or `dimsum`.
/// Returns `{metric: {p, r, f, matched_pred, matched_gold, predicted, gold}}`.
#[pyfunction]
fn evaluate(task: &str, gold: &str, pred: &str) -> PyResult<HashMap<String, HashMap<String, f64>>> {
    let report = match task {
        "streusle" => {
            let g = parse_conllulex(gold, Inventory::bundled()).map_err(value_err)?;
            let p = parse_conllulex(pred, Inventory::bundled()).map_err(value_err)?;
            streusle_report(&g, &p).map_err(value_err)?
        }
        "parseme" => {
            let g = parse_cupt(gold).map_err(value_err)?;
            let p = parse_cupt(pred).map_err(value_err)?;
            parseme_report(&g, &p).map_err(value_err)?
        }
        "dimsum" => {
            let g = parse_dimsum(gold).map_err(value_err)?;
            let p = parse_dimsum(pred).map_err(value_err)?;
            dimsum_report(&g, &p).map_err(value_err)?
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown task `{other}`; expected streusle, parseme, or dimsum"
            )))
        }
    };
    Ok(report_to_dict(&report))
}

/// Converts 19-column input to a downstream format: `cupt` or `dimsum`.
#[pyfunction]
fn convert(text: &str, to: &str) -> PyResult<String> {
    let sentences = parse_conllulex(text, Inventory::bundled()).map_err(value_err)?;
    match to {
        "cupt" => {
            let out: Vec<_> = sentences.iter().map(to_parseme).collect();
            Ok(write_cupt(&out))
        }
        "dimsum" => {
            let out: Vec<_> = sentences.iter().map(to_dimsum).collect();
            Ok(write_dimsum(&out))
        }
        other => Err(PyValueError::new_err(format!(
            "unknown target `{other}`; expected cupt or dimsum"
        ))),
    }
}

/// A trained tagger: the feature CRF plus its tag inventory.
#[pyclass]
struct Model {
    inner: CrfModel,
}

#[pymethods]
impl Model {
    /// Reads a model written by `save` (or the CLI's `train`).
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Model> {
        let inner = load_model(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(Model { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_model(&self.inner, &path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    /// The model's tag inventory, as formatted tag strings.
    #[getter]
    fn tagset(&self) -> Vec<String> {
        self.inner.tagset.strings()
    }

    /// Tags sentences (their units and groups are ignored; only tokens
    /// matter) and returns new sentences carrying the predicted analyses.
    /// With `constrained=True`, POS/lemma lexical constraints prune the
    /// search; positions the table cannot license are relaxed per sentence.
    #[pyo3(signature = (sentences, constrained = true))]
    fn tag(&self, sentences: Vec<PyRef<Sentence>>, constrained: bool) -> PyResult<Vec<Sentence>> {
        if matches!(self.inner.kind, EmissionKind::Projection { .. }) {
            return Err(PyValueError::new_err(
                "this model scores externally supplied token vectors; the Python API only \
                 drives feature models",
            ));
        }
        let scores = Arc::new(self.inner.transition_scores());
        let table = LexcatConstraintTable::bundled();
        let mut out = Vec::with_capacity(sentences.len());
        for s in &sentences {
            let tokens = &s.inner.tokens;
            let masks = if constrained {
                let pairs: Vec<(&str, &str)> =
                    tokens.iter().map(|t| (t.upos.as_str(), t.lemma.as_str())).collect();
                build_masks(&pairs, &self.inner.tagset, self.inner.automaton.clone(), table)
                    .map_err(value_err)?
            } else {
                LatticeMasks::unconstrained(tokens.len(), self.inner.automaton.clone())
            };
            let tagged =
                self.inner.tag_with(&scores, tokens, None, masks).map_err(value_err)?;
            let structure = decode(&tagged.tags).map_err(value_err)?;
            let mut inner = s.inner.clone();
            inner.units = structure.units;
            inner.weak_groups = structure.weak_groups;
            out.push(Sentence { inner });
        }
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("<Model ({} tags)>", self.inner.tagset.len())
    }
}

/// Trains a feature CRF. Both corpora are 19-column text; the dev split
/// drives early stopping. Returns `(model, report)` where the report has
/// `epochs`, `best_epoch`, `best_dev_accuracy`, and `stopped_early`.
#[pyfunction]
#[pyo3(signature = (
    train_text,
    dev_text,
    *,
    learning_rate = 0.001,
    batch_size = 64,
    max_epochs = 75,
    patience = 25,
    seed = 1,
))]
fn train(
    py: Python<'_>,
    train_text: &str,
    dev_text: &str,
    learning_rate: f64,
    batch_size: usize,
    max_epochs: usize,
    patience: usize,
    seed: u64,
) -> PyResult<(Model, Py<pyo3::types::PyDict>)> {
    let train_sents = parse_conllulex(train_text, Inventory::bundled()).map_err(value_err)?;
    let dev_sents = parse_conllulex(dev_text, Inventory::bundled()).map_err(value_err)?;
    let config = TrainConfig {
        learning_rate,
        batch_size,
        max_epochs,
        patience,
        seed,
        ..TrainConfig::default()
    };
    let kind = EmissionKind::Feature(FeatureConfig::default());
    let (model, report) =
        crf::train(&train_sents, &dev_sents, kind, &config, None, None).map_err(value_err)?;

    let summary = pyo3::types::PyDict::new(py);
    summary.set_item("epochs", report.records.len())?;
    summary.set_item("best_epoch", report.best_epoch)?;
    summary.set_item("best_dev_accuracy", report.best_dev_accuracy)?;
    summary.set_item("stopped_early", report.stopped_early)?;
    Ok((Model { inner: model }, summary.unbind()))
}

#[pymodule]
fn lsr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Sentence>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(write, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(convert, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
