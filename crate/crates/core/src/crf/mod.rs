//! Linear-chain CRF over lexical-semantic tags.
//!
//! Scores factor into per-token emissions (hashed sparse features or a
//! linear projection of external dense vectors) plus shared transition,
//! start, and end parameters — one scalar per tag pair and per tag.
//! Training minimizes negative log-likelihood with analytic
//! forward–backward gradients, Adam updates per mini-batch, gradient-norm
//! clipping, and early stopping on dev full-tag accuracy.
//!
//! Transitions forbidden by the tag grammar are pinned to a large negative
//! sentinel and never updated, so any decode over the trained scores
//! yields a structurally valid sequence no matter what the weights are.

pub mod emissions;
pub mod model_io;
pub mod numeric;
pub mod vectors;

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{LatticeMasks, TagTransitions};
use crate::corpus::{Sentence, Token};
use crate::decoder::{self, ScoreLattice, SearchError, TransitionScores};
use crate::tagcodec::{encode, CodecError, LexTag, TagSet};

use emissions::{
    accumulate_emission_grad, emission_scores, featurize, EmissionShape, FeatureConfig,
    PreparedInputs,
};
use numeric::{backward, clip_grad_norm, forward, sequence_score, state_posteriors, Adam};

/// Fixed score for structurally forbidden transitions. Large enough that
/// exp(sentinel) underflows to exactly 0.0, small enough to stay finite
/// through sums.
pub const STRUCTURAL_NEG: f64 = -1e9;

#[derive(Debug, Error)]
pub enum CrfError {
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("cannot encode gold annotation: {0}")]
    Encode(#[from] CodecError),
    #[error("dense vectors required for the projection emission model")]
    MissingVectors,
    #[error("vector shape mismatch: {0}")]
    VectorShape(String),
    #[error(transparent)]
    Search(#[from] SearchError),
}

/// Which emission parameterization a model uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EmissionKind {
    Feature(FeatureConfig),
    Projection { dim: usize },
}

impl EmissionKind {
    pub fn shape(&self) -> EmissionShape {
        match self {
            EmissionKind::Feature(c) => EmissionShape::Feature { buckets: c.buckets() },
            EmissionKind::Projection { dim } => EmissionShape::Projection { dim: *dim },
        }
    }
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Global L2 norm ceiling for each batch gradient.
    pub clip_norm: f64,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 64,
            max_epochs: 75,
            clip_norm: 5.0,
            patience: 25,
            l2: 0.0,
            seed: 1,
        }
    }
}

/// Offsets of the flat parameter vector: emission block first, then the
/// k×k transition matrix, then start and end vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub k: usize,
    pub emission_len: usize,
}

impl ParamLayout {
    pub fn new(k: usize, emission_len: usize) -> ParamLayout {
        ParamLayout { k, emission_len }
    }

    pub fn trans_off(&self) -> usize {
        self.emission_len
    }

    pub fn start_off(&self) -> usize {
        self.emission_len + self.k * self.k
    }

    pub fn end_off(&self) -> usize {
        self.start_off() + self.k
    }

    pub fn total(&self) -> usize {
        self.end_off() + self.k
    }
}

#[derive(Debug, Clone)]
pub struct CrfModel {
    pub tagset: TagSet,
    pub kind: EmissionKind,
    pub layout: ParamLayout,
    pub params: Vec<f64>,
    pub automaton: Arc<TagTransitions>,
    /// Echo of the configuration the model was trained with, if any.
    pub trained_with: Option<TrainConfig>,
}

/// Prepare per-token inputs for an emission kind, independent of a model.
pub fn prepare_inputs(
    kind: &EmissionKind,
    tokens: &[Token],
    vectors: Option<&[Vec<f64>]>,
) -> Result<PreparedInputs, CrfError> {
    match kind {
        EmissionKind::Feature(cfg) => Ok(PreparedInputs::Hashes(featurize(tokens, cfg))),
        EmissionKind::Projection { dim } => {
            let vs = vectors.ok_or(CrfError::MissingVectors)?;
            if vs.len() != tokens.len() {
                return Err(CrfError::VectorShape(format!(
                    "{} vectors for {} tokens",
                    vs.len(),
                    tokens.len()
                )));
            }
            if let Some(bad) = vs.iter().find(|v| v.len() != *dim) {
                return Err(CrfError::VectorShape(format!(
                    "vector of length {} where the model expects {dim}",
                    bad.len()
                )));
            }
            Ok(PreparedInputs::Vectors(vs.to_vec()))
        }
    }
}

/// Result of tagging one sentence.
#[derive(Debug, Clone)]
pub struct Tagged {
    pub tags: Vec<LexTag>,
    pub indices: Vec<usize>,
    pub score: f64,
    /// True when the per-position masks had to be dropped to find a path.
    pub relaxed: bool,
}

impl CrfModel {
    /// Zero-initialized model with structural sentinels in place. The NLL
    /// is convex, so zero init plus a fixed schedule is deterministic.
    pub fn new(tagset: TagSet, kind: EmissionKind) -> CrfModel {
        let k = tagset.len();
        let layout = ParamLayout::new(k, kind.shape().param_len(k));
        let automaton = TagTransitions::from_tagset(&tagset);
        let mut params = vec![0.0; layout.total()];
        for slot in fixed_slots(&layout, &automaton) {
            params[slot] = STRUCTURAL_NEG;
        }
        CrfModel { tagset, kind, layout, params, automaton, trained_with: None }
    }

    pub fn num_tags(&self) -> usize {
        self.layout.k
    }

    /// Copy the transition/start/end blocks out of the flat vector.
    pub fn transition_scores(&self) -> TransitionScores {
        let mut scores = TransitionScores::zeros(self.layout.k);
        self.fill_transition_scores(&mut scores);
        scores
    }

    pub fn fill_transition_scores(&self, scores: &mut TransitionScores) {
        let l = &self.layout;
        let k = l.k;
        scores.k = k;
        scores.trans.resize(k * k, 0.0);
        scores.start.resize(k, 0.0);
        scores.end.resize(k, 0.0);
        scores.trans.copy_from_slice(&self.params[l.trans_off()..l.trans_off() + k * k]);
        scores.start.copy_from_slice(&self.params[l.start_off()..l.start_off() + k]);
        scores.end.copy_from_slice(&self.params[l.end_off()..l.end_off() + k]);
    }

    pub fn prepare(
        &self,
        tokens: &[Token],
        vectors: Option<&[Vec<f64>]>,
    ) -> Result<PreparedInputs, CrfError> {
        prepare_inputs(&self.kind, tokens, vectors)
    }

    pub fn emission_matrix(&self, inputs: &PreparedInputs) -> Vec<Vec<f64>> {
        emission_scores(
            inputs,
            &self.params[..self.layout.emission_len],
            self.layout.k,
            self.kind.shape(),
        )
    }

    /// Negative log-likelihood of `gold` (tag indices) for one sentence.
    pub fn nll(&self, inputs: &PreparedInputs, gold: &[usize]) -> f64 {
        let scores = self.transition_scores();
        self.nll_grad_with(&scores, inputs, gold, None)
    }

    /// NLL plus accumulation of its gradient into `grad` (layout-sized,
    /// caller zeroes). Gradient = expected feature counts − gold counts.
    pub fn nll_and_gradient(
        &self,
        inputs: &PreparedInputs,
        gold: &[usize],
        grad: &mut [f64],
    ) -> f64 {
        let scores = self.transition_scores();
        self.nll_grad_with(&scores, inputs, gold, Some(grad))
    }

    fn nll_grad_with(
        &self,
        scores: &TransitionScores,
        inputs: &PreparedInputs,
        gold: &[usize],
        grad: Option<&mut [f64]>,
    ) -> f64 {
        let k = self.layout.k;
        let n = inputs.len();
        assert_eq!(gold.len(), n, "gold length must match the sentence");
        if n == 0 {
            return 0.0;
        }
        let em = self.emission_matrix(inputs);
        let (alpha, log_z) = forward(&em, scores);
        let gold_score = sequence_score(&em, scores, gold);
        // Mathematically log Z ≥ gold score (the gold path is one summand);
        // clamp away float dust so the reported NLL is never negative.
        let nll = (log_z - gold_score).max(0.0);

        if let Some(grad) = grad {
            let l = &self.layout;
            let auto = &self.automaton;
            let beta = backward(&em, scores);
            let mut coeff = state_posteriors(&alpha, &beta, log_z);
            for (t, &g) in gold.iter().enumerate() {
                coeff[t][g] -= 1.0;
            }
            // Start/end: guard with the automaton so sentinel slots stay
            // exactly zero (their posteriors underflow to zero anyway).
            for j in 0..k {
                if auto.start_ok(j) {
                    grad[l.start_off() + j] += coeff[0][j];
                }
            }
            for j in 0..k {
                if auto.end_ok(j) {
                    grad[l.end_off() + j] += coeff[n - 1][j];
                }
            }
            // Transitions: expected pair counts minus gold pair counts.
            let t_off = l.trans_off();
            for t in 0..n - 1 {
                for j in 0..k {
                    let a = alpha[t][j];
                    for q in 0..k {
                        if !auto.step_ok(j, q) {
                            continue;
                        }
                        let xi =
                            (a + scores.trans[j * k + q] + em[t + 1][q] + beta[t + 1][q] - log_z)
                                .exp();
                        grad[t_off + j * k + q] += xi;
                    }
                }
                debug_assert!(auto.step_ok(gold[t], gold[t + 1]), "gold must be valid");
                grad[t_off + gold[t] * k + gold[t + 1]] -= 1.0;
            }
            // Emissions last: coeff already holds gamma − gold indicators.
            accumulate_emission_grad(inputs, &coeff, grad, k, self.kind.shape());
        }
        nll
    }

    /// Decode one sentence under the given masks. If the per-position
    /// filters leave no feasible path, they are dropped (structure kept)
    /// and the result is marked `relaxed`.
    pub fn tag(
        &self,
        tokens: &[Token],
        vectors: Option<&[Vec<f64>]>,
        masks: LatticeMasks,
    ) -> Result<Tagged, CrfError> {
        let scores = Arc::new(self.transition_scores());
        self.tag_with(&scores, tokens, vectors, masks)
    }

    /// As [`tag`](CrfModel::tag), reusing a pre-built transition block
    /// (worth it when tagging many sentences).
    pub fn tag_with(
        &self,
        scores: &Arc<TransitionScores>,
        tokens: &[Token],
        vectors: Option<&[Vec<f64>]>,
        masks: LatticeMasks,
    ) -> Result<Tagged, CrfError> {
        let inputs = self.prepare(tokens, vectors)?;
        let emissions = self.emission_matrix(&inputs);
        let mut lattice = ScoreLattice { emissions, scores: scores.clone(), masks };
        let (indices, score, relaxed) = match decoder::viterbi(&lattice) {
            Ok((path, score)) => (path, score, false),
            Err(SearchError::NoFeasiblePath) => {
                lattice.masks.relax_all();
                let (path, score) = decoder::viterbi(&lattice)?;
                (path, score, true)
            }
            Err(e) => return Err(e.into()),
        };
        let tags = indices.iter().map(|&i| self.tagset.get(i).clone()).collect();
        Ok(Tagged { tags, indices, score, relaxed })
    }
}

/// Slots of the flat vector pinned at [`STRUCTURAL_NEG`]: one per
/// automaton-forbidden transition, start, or end.
fn fixed_slots(layout: &ParamLayout, auto: &TagTransitions) -> Vec<usize> {
    let k = layout.k;
    let mut out = Vec::new();
    for j in 0..k {
        for q in 0..k {
            if !auto.step_ok(j, q) {
                out.push(layout.trans_off() + j * k + q);
            }
        }
    }
    for j in 0..k {
        if !auto.start_ok(j) {
            out.push(layout.start_off() + j);
        }
        if !auto.end_ok(j) {
            out.push(layout.end_off() + j);
        }
    }
    out
}

/// Map a gold tag onto the training tagset: exact match, else same flag
/// and lexcat with the supersense dropped, else same flag and lexcat with
/// any supersense, else any tag with the same flag.
pub fn backoff_index(tagset: &TagSet, tag: &LexTag) -> Option<usize> {
    if let Some(i) = tagset.index_of(tag) {
        return Some(i);
    }
    if tag.supersense.is_some() {
        let bare = LexTag { flag: tag.flag, lexcat: tag.lexcat, supersense: None };
        if let Some(i) = tagset.index_of(&bare) {
            return Some(i);
        }
    }
    if tag.lexcat.is_some() {
        if let Some(i) = tagset.iter().position(|t| t.flag == tag.flag && t.lexcat == tag.lexcat)
        {
            return Some(i);
        }
    }
    tagset.iter().position(|t| t.flag == tag.flag)
}

/// One epoch's log line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_train_nll: f64,
    pub dev_accuracy: Option<f64>,
    pub dev_mean_nll: Option<f64>,
    pub improved: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub tagset_len: usize,
    /// Distinct dev gold tags absent from the training tagset.
    pub unseen_dev_tags: usize,
    pub initial_dev_nll: Option<f64>,
    pub records: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_dev_accuracy: Option<f64>,
    pub stopped_early: bool,
}

/// Train a model. The tagset comes from the training corpus; dev gold tags
/// missing from it are backed off (see [`backoff_index`]) for dev scoring
/// only. Deterministic given the seed: batch order comes from a seeded
/// generator and batch gradients accumulate in sentence order.
pub fn train(
    train_sents: &[Sentence],
    dev_sents: &[Sentence],
    kind: EmissionKind,
    config: &TrainConfig,
    train_vectors: Option<&[Vec<Vec<f64>>]>,
    dev_vectors: Option<&[Vec<Vec<f64>>]>,
) -> Result<(CrfModel, TrainReport), CrfError> {
    if train_sents.is_empty() {
        return Err(CrfError::EmptyCorpus);
    }
    check_vector_alignment(train_sents, train_vectors, "train")?;
    check_vector_alignment(dev_sents, dev_vectors, "dev")?;

    let tagset = TagSet::from_sentences(train_sents)?;
    let mut model = CrfModel::new(tagset, kind);
    model.trained_with = Some(config.clone());

    // Gold indices and prepared inputs, fixed for the whole run.
    let mut train_gold: Vec<Vec<usize>> = Vec::with_capacity(train_sents.len());
    let mut train_inputs: Vec<PreparedInputs> = Vec::with_capacity(train_sents.len());
    for (i, s) in train_sents.iter().enumerate() {
        let tags = encode(s)?;
        train_gold.push(
            tags.iter()
                .map(|t| model.tagset.index_of(t).expect("training tags define the tagset"))
                .collect(),
        );
        train_inputs.push(model.prepare(&s.tokens, vectors_for(train_vectors, i))?);
    }

    let mut unseen = std::collections::HashSet::new();
    let mut dev_gold: Vec<Vec<Option<usize>>> = Vec::with_capacity(dev_sents.len());
    let mut dev_inputs: Vec<PreparedInputs> = Vec::with_capacity(dev_sents.len());
    for (i, s) in dev_sents.iter().enumerate() {
        let tags = encode(s)?;
        let mut row = Vec::with_capacity(tags.len());
        for t in &tags {
            if model.tagset.index_of(t).is_none() {
                unseen.insert(crate::tagcodec::format_tag(t));
            }
            row.push(backoff_index(&model.tagset, t));
        }
        dev_gold.push(row);
        dev_inputs.push(model.prepare(&s.tokens, vectors_for(dev_vectors, i))?);
    }

    let initial_dev_nll = dev_mean_nll(&model, &dev_inputs, &dev_gold);

    let total = model.layout.total();
    let fixed = fixed_slots(&model.layout, &model.automaton);
    let mut adam = Adam::new(config.learning_rate, total);
    let mut grad = vec![0.0; total];
    let mut scores = TransitionScores::zeros(model.layout.k);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_sents.len()).collect();

    let mut records = Vec::new();
    let mut best_params: Option<Vec<f64>> = None;
    let mut best_epoch = None;
    let mut best_acc = f64::NEG_INFINITY;
    let mut since_best = 0usize;
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_nll = 0.0;
        for batch in order.chunks(config.batch_size.max(1)) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            model.fill_transition_scores(&mut scores);
            for &i in batch {
                epoch_nll +=
                    model.nll_grad_with(&scores, &train_inputs[i], &train_gold[i], Some(&mut grad));
            }
            let bs = batch.len() as f64;
            grad.iter_mut().for_each(|g| *g /= bs);
            if config.l2 > 0.0 {
                for i in 0..total {
                    grad[i] += config.l2 * model.params[i];
                }
                for &s in &fixed {
                    grad[s] = 0.0;
                }
            }
            clip_grad_norm(&mut grad, config.clip_norm);
            adam.step(&mut model.params, &grad);
        }
        let mean_train_nll = epoch_nll / train_sents.len() as f64;

        let (epoch_acc, epoch_dev_nll) = if dev_sents.is_empty() {
            (None, None)
        } else {
            (
                Some(dev_accuracy(&model, &dev_inputs, &dev_gold)),
                dev_mean_nll(&model, &dev_inputs, &dev_gold),
            )
        };

        let improved = epoch_acc.map_or(false, |acc| acc > best_acc);
        if improved {
            best_acc = epoch_acc.expect("improvement implies dev accuracy");
            best_epoch = Some(epoch);
            best_params = Some(model.params.clone());
            since_best = 0;
        } else if epoch_acc.is_some() {
            since_best += 1;
        }
        records.push(EpochRecord {
            epoch,
            mean_train_nll,
            dev_accuracy: epoch_acc,
            dev_mean_nll: epoch_dev_nll,
            improved,
        });
        if epoch_acc.is_some() && since_best >= config.patience {
            stopped_early = true;
            break;
        }
    }

    if let Some(p) = best_params {
        model.params = p;
    }
    let report = TrainReport {
        tagset_len: model.tagset.len(),
        unseen_dev_tags: unseen.len(),
        initial_dev_nll,
        records,
        best_epoch,
        best_dev_accuracy: best_epoch.map(|_| best_acc),
        stopped_early,
    };
    Ok((model, report))
}

fn vectors_for<'a>(all: Option<&'a [Vec<Vec<f64>>]>, i: usize) -> Option<&'a [Vec<f64>]> {
    all.map(|v| v[i].as_slice())
}

fn check_vector_alignment(
    sents: &[Sentence],
    vectors: Option<&[Vec<Vec<f64>>]>,
    which: &str,
) -> Result<(), CrfError> {
    if let Some(vs) = vectors {
        if vs.len() != sents.len() {
            return Err(CrfError::VectorShape(format!(
                "{} {which} sentences but {} vector blocks",
                sents.len(),
                vs.len()
            )));
        }
    }
    Ok(())
}

/// Full-tag accuracy of unconstrained decodes against (backed-off) gold.
/// Read-only over the model, parallel across sentences, order-stable.
fn dev_accuracy(model: &CrfModel, inputs: &[PreparedInputs], gold: &[Vec<Option<usize>>]) -> f64 {
    let scores = Arc::new(model.transition_scores());
    let per_sentence: Vec<(usize, usize)> = inputs
        .par_iter()
        .zip(gold.par_iter())
        .map(|(inp, gold_row)| {
            let n = inp.len();
            if n == 0 {
                return (0, 0);
            }
            let emissions = model.emission_matrix(inp);
            let lattice = ScoreLattice {
                emissions,
                scores: scores.clone(),
                masks: LatticeMasks::unconstrained(n, model.automaton.clone()),
            };
            match decoder::viterbi(&lattice) {
                Ok((path, _)) => {
                    let correct = path
                        .iter()
                        .zip(gold_row)
                        .filter(|(p, g)| g.map_or(false, |g| **p == g))
                        .count();
                    (correct, n)
                }
                Err(_) => (0, n),
            }
        })
        .collect();
    let (correct, total) =
        per_sentence.iter().fold((0usize, 0usize), |(c, t), &(dc, dt)| (c + dc, t + dt));
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

/// Mean dev NLL over sentences whose gold tags all map into the tagset.
fn dev_mean_nll(
    model: &CrfModel,
    inputs: &[PreparedInputs],
    gold: &[Vec<Option<usize>>],
) -> Option<f64> {
    let scores = model.transition_scores();
    let mut sum = 0.0;
    let mut n = 0usize;
    for (inp, row) in inputs.iter().zip(gold) {
        let mapped: Option<Vec<usize>> = row.iter().copied().collect();
        if let Some(g) = mapped {
            sum += model.nll_grad_with(&scores, inp, &g, None);
            n += 1;
        }
    }
    if n == 0 {
        None
    } else {
        Some(sum / n as f64)
    }
}

/// Most-frequent-tag-per-form baseline. Ties pick the smaller tag index;
/// unseen forms fall back to the most frequent tag overall.
#[derive(Debug, Clone)]
pub struct FrequentTagBaseline {
    pub tagset: TagSet,
    by_form: HashMap<String, usize>,
    pub fallback: usize,
}

impl FrequentTagBaseline {
    pub fn fit(train_sents: &[Sentence]) -> Result<FrequentTagBaseline, CrfError> {
        if train_sents.is_empty() {
            return Err(CrfError::EmptyCorpus);
        }
        let tagset = TagSet::from_sentences(train_sents)?;
        let mut per_form: HashMap<String, HashMap<usize, usize>> = HashMap::new();
        let mut global: HashMap<usize, usize> = HashMap::new();
        for s in train_sents {
            let tags = encode(s)?;
            for (tok, tag) in s.tokens.iter().zip(&tags) {
                let idx = tagset.index_of(tag).expect("tagset covers training tags");
                *per_form.entry(tok.form.clone()).or_default().entry(idx).or_insert(0) += 1;
                *global.entry(idx).or_insert(0) += 1;
            }
        }
        let argmax = |counts: &HashMap<usize, usize>| -> usize {
            counts
                .iter()
                .map(|(&idx, &c)| (idx, c))
                .min_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)))
                .expect("non-empty counts")
                .0
        };
        let by_form = per_form.iter().map(|(f, c)| (f.clone(), argmax(c))).collect();
        let fallback = argmax(&global);
        Ok(FrequentTagBaseline { tagset, by_form, fallback })
    }

    pub fn predict(&self, tokens: &[Token]) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.by_form.get(&t.form).copied().unwrap_or(self.fallback))
            .collect()
    }
}
