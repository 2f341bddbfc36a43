//! Exact search over masked score lattices.
//!
//! [`viterbi`] and [`brute_force`] implement the same contract: among
//! feasible paths (per-position masks, structural automaton, finite score),
//! return the one with the maximum total score, breaking ties toward the
//! lexicographically smallest index sequence. `brute_force` enumerates, so
//! it doubles as an oracle for the dynamic program on small lattices.

use std::sync::Arc;

use thiserror::Error;

use crate::constraints::LatticeMasks;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("no feasible path through the lattice")]
    NoFeasiblePath,
    #[error("lattice too large to enumerate ({paths:.3e} paths > {limit:.1e})")]
    TooLarge { paths: f64, limit: f64 },
    #[error("malformed lattice: {0}")]
    Shape(String),
}

/// Tag-to-tag, start, and end scores shared across sentences.
/// `trans` is row-major `[from][to]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionScores {
    pub k: usize,
    pub trans: Vec<f64>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

impl TransitionScores {
    pub fn zeros(k: usize) -> TransitionScores {
        TransitionScores { k, trans: vec![0.0; k * k], start: vec![0.0; k], end: vec![0.0; k] }
    }
}

/// One sentence's search space: per-token per-tag emission scores plus the
/// shared transition scores, filtered by `masks`.
#[derive(Debug, Clone)]
pub struct ScoreLattice {
    pub emissions: Vec<Vec<f64>>,
    pub scores: Arc<TransitionScores>,
    pub masks: LatticeMasks,
}

impl ScoreLattice {
    pub fn len(&self) -> usize {
        self.emissions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emissions.is_empty()
    }

    pub fn num_tags(&self) -> usize {
        self.scores.k
    }

    fn check_shape(&self) -> Result<(), SearchError> {
        let k = self.scores.k;
        if self.masks.transitions.len() != k {
            return Err(SearchError::Shape(format!(
                "mask automaton has {} tags, scores have {k}",
                self.masks.transitions.len()
            )));
        }
        if self.masks.allow.len() != self.emissions.len() {
            return Err(SearchError::Shape(format!(
                "{} emission rows vs {} mask rows",
                self.emissions.len(),
                self.masks.allow.len()
            )));
        }
        for (t, row) in self.emissions.iter().enumerate() {
            if row.len() != k || self.masks.allow[t].len() != k {
                return Err(SearchError::Shape(format!("row {t} is not {k} wide")));
            }
        }
        if self.scores.trans.len() != k * k
            || self.scores.start.len() != k
            || self.scores.end.len() != k
        {
            return Err(SearchError::Shape("transition score shapes disagree".into()));
        }
        Ok(())
    }

    #[inline]
    fn allowed(&self, t: usize, k: usize) -> bool {
        self.masks.allow[t][k]
    }

    #[inline]
    fn tr(&self, from: usize, to: usize) -> f64 {
        self.scores.trans[from * self.scores.k + to]
    }
}

/// Total score of a specific path, or None if the path is masked out or
/// non-finite. The accumulation order (start+first emission, then
/// transition and emission per step, then end) is fixed; callers comparing
/// scores across search strategies rely on it.
pub fn path_score(lattice: &ScoreLattice, path: &[usize]) -> Option<f64> {
    if path.len() != lattice.len() {
        return None;
    }
    let auto = &lattice.masks.transitions;
    if path.is_empty() {
        return Some(0.0);
    }
    let first = path[0];
    if !lattice.allowed(0, first) || !auto.start_ok(first) {
        return None;
    }
    let mut sc = lattice.scores.start[first] + lattice.emissions[0][first];
    for t in 1..path.len() {
        let (p, q) = (path[t - 1], path[t]);
        if !lattice.allowed(t, q) || !auto.step_ok(p, q) {
            return None;
        }
        sc = sc + lattice.tr(p, q) + lattice.emissions[t][q];
    }
    let last = *path.last().expect("non-empty");
    if !auto.end_ok(last) {
        return None;
    }
    sc += lattice.scores.end[last];
    if sc == f64::NEG_INFINITY {
        return None;
    }
    Some(sc)
}

/// Maximum-score path via dynamic programming.
///
/// Computes best-suffix scores right-to-left, then reconstructs left to
/// right taking the smallest tag index whenever continuations tie, which
/// yields the lexicographically smallest maximizer (under exact
/// arithmetic, the same path `brute_force` returns).
pub fn viterbi(lattice: &ScoreLattice) -> Result<(Vec<usize>, f64), SearchError> {
    lattice.check_shape()?;
    let (n, k) = (lattice.len(), lattice.num_tags());
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let auto = &lattice.masks.transitions;
    const NEG: f64 = f64::NEG_INFINITY;

    // suffix[t][j]: best score of a path over positions t.. that starts
    // with tag j (emission at t included, start score excluded).
    let mut suffix = vec![vec![NEG; k]; n];
    for j in 0..k {
        if lattice.allowed(n - 1, j) && auto.end_ok(j) {
            suffix[n - 1][j] = lattice.emissions[n - 1][j] + lattice.scores.end[j];
        }
    }
    for t in (0..n - 1).rev() {
        for j in 0..k {
            if !lattice.allowed(t, j) {
                continue;
            }
            let mut best = NEG;
            for q in 0..k {
                if suffix[t + 1][q] == NEG || !auto.step_ok(j, q) {
                    continue;
                }
                let v = lattice.tr(j, q) + suffix[t + 1][q];
                if v > best {
                    best = v;
                }
            }
            if best != NEG {
                suffix[t][j] = lattice.emissions[t][j] + best;
            }
        }
    }

    let mut first = None;
    let mut best = NEG;
    for j in 0..k {
        if suffix[0][j] == NEG || !auto.start_ok(j) {
            continue;
        }
        let v = lattice.scores.start[j] + suffix[0][j];
        if v > best {
            best = v;
            first = Some(j);
        }
    }
    let mut path = vec![first.ok_or(SearchError::NoFeasiblePath)?];
    for t in 1..n {
        let prev = path[t - 1];
        let mut choice = None;
        let mut best = NEG;
        for q in 0..k {
            if suffix[t][q] == NEG || !auto.step_ok(prev, q) {
                continue;
            }
            let v = lattice.tr(prev, q) + suffix[t][q];
            if v > best {
                best = v;
                choice = Some(q);
            }
        }
        path.push(choice.ok_or(SearchError::NoFeasiblePath)?);
    }
    let score = path_score(lattice, &path).ok_or(SearchError::NoFeasiblePath)?;
    Ok((path, score))
}

const ENUMERATION_LIMIT: f64 = 1e7;

/// Maximum-score path by exhaustive enumeration (depth-first, ascending tag
/// index, so ties resolve to the lexicographically smallest path). Guarded:
/// errs when the lattice has more than 10^7 paths.
pub fn brute_force(lattice: &ScoreLattice) -> Result<(Vec<usize>, f64), SearchError> {
    lattice.check_shape()?;
    let (n, k) = (lattice.len(), lattice.num_tags());
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let paths = (k as f64).powi(n as i32);
    if paths > ENUMERATION_LIMIT {
        return Err(SearchError::TooLarge { paths, limit: ENUMERATION_LIMIT });
    }
    let auto = lattice.masks.transitions.clone();
    const NEG: f64 = f64::NEG_INFINITY;

    struct Dfs<'a> {
        lattice: &'a ScoreLattice,
        n: usize,
        k: usize,
        stack: Vec<usize>,
        best: Option<(Vec<usize>, f64)>,
    }
    impl Dfs<'_> {
        fn go(&mut self, t: usize, acc: f64, auto: &crate::constraints::TagTransitions) {
            for j in 0..self.k {
                if !self.lattice.allowed(t, j) {
                    continue;
                }
                let sc = if t == 0 {
                    if !auto.start_ok(j) {
                        continue;
                    }
                    self.lattice.scores.start[j] + self.lattice.emissions[0][j]
                } else {
                    let prev = self.stack[t - 1];
                    if !auto.step_ok(prev, j) {
                        continue;
                    }
                    acc + self.lattice.tr(prev, j) + self.lattice.emissions[t][j]
                };
                if sc == NEG {
                    continue;
                }
                self.stack.push(j);
                if t + 1 == self.n {
                    if auto.end_ok(j) {
                        let total = sc + self.lattice.scores.end[j];
                        if total != NEG
                            && self.best.as_ref().map_or(true, |(_, b)| total > *b)
                        {
                            self.best = Some((self.stack.clone(), total));
                        }
                    }
                } else {
                    self.go(t + 1, sc, auto);
                }
                self.stack.pop();
            }
        }
    }

    let mut dfs = Dfs { lattice, n, k, stack: Vec::with_capacity(n), best: None };
    dfs.go(0, 0.0, &auto);
    match dfs.best {
        None => Err(SearchError::NoFeasiblePath),
        Some((path, _)) => {
            let score = path_score(lattice, &path).ok_or(SearchError::NoFeasiblePath)?;
            Ok((path, score))
        }
    }
}
