//! Hard decoding constraints: which tags a token may take, given its UPOS
//! and lemma, and which tag transitions the scheme permits. Compiled into
//! per-sentence boolean masks consumed by the decoder.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::corpus::Lexcat;
use crate::tagcodec::{is_valid_transition, MweFlag, TagSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstraintError {
    #[error("constraint table line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no constraint row for UPOS `{0}` (add one or allow unknown UPOS)")]
    UnknownUpos(String),
    #[error("tag set entry `{0}` carries no lexcat but is not a strong continuation")]
    UnlabeledTag(String),
}

/// What `allowed_lexcats` does for a UPOS with no table row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingUposPolicy {
    /// Report an error (the bundled table covers the full UD inventory, so
    /// a miss usually means corrupt input).
    #[default]
    Error,
    /// Treat the token as unconstrained.
    AllowAll,
}

/// UPOS → permitted lexcats, with optional per-lemma overrides
/// (e.g. `AUX lemma=be` may also be a full verb).
#[derive(Debug, Clone)]
pub struct LexcatConstraintTable {
    base: HashMap<String, BTreeSet<Lexcat>>,
    lemma_rules: HashMap<(String, String), BTreeSet<Lexcat>>,
    pub missing_upos: MissingUposPolicy,
}

fn all_lexcats() -> &'static BTreeSet<Lexcat> {
    static ALL: OnceLock<BTreeSet<Lexcat>> = OnceLock::new();
    ALL.get_or_init(|| Lexcat::ALL.iter().copied().collect())
}

impl LexcatConstraintTable {
    /// Parses the table format: `UPOS [lemma=<string>] -> LEXCAT[,LEXCAT...]`
    /// per line, `#` comments. Repeated left-hand sides union their
    /// right-hand sides.
    pub fn parse(text: &str) -> Result<LexcatConstraintTable, ConstraintError> {
        let mut table = LexcatConstraintTable {
            base: HashMap::new(),
            lemma_rules: HashMap::new(),
            missing_upos: MissingUposPolicy::default(),
        };
        for (line0, raw) in text.lines().enumerate() {
            let line = line0 + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (lhs, rhs) = content.split_once("->").ok_or_else(|| ConstraintError::Parse {
                line,
                message: "missing `->`".to_string(),
            })?;
            let mut cats = BTreeSet::new();
            for part in rhs.split(',') {
                let part = part.trim();
                if part.is_empty() {
                    return Err(ConstraintError::Parse {
                        line,
                        message: "empty lexcat in list".to_string(),
                    });
                }
                cats.insert(Lexcat::parse(part).map_err(|e| ConstraintError::Parse {
                    line,
                    message: e.to_string(),
                })?);
            }
            if cats.is_empty() {
                return Err(ConstraintError::Parse {
                    line,
                    message: "empty lexcat list".to_string(),
                });
            }
            let lhs = lhs.trim();
            match lhs.split_once(char::is_whitespace) {
                None => {
                    table.base.entry(lhs.to_string()).or_default().extend(cats);
                }
                Some((upos, rest)) => {
                    let rest = rest.trim();
                    let lemma = rest.strip_prefix("lemma=").ok_or_else(|| {
                        ConstraintError::Parse {
                            line,
                            message: format!("expected `lemma=<string>`, found `{rest}`"),
                        }
                    })?;
                    if lemma.is_empty() {
                        return Err(ConstraintError::Parse {
                            line,
                            message: "empty lemma".to_string(),
                        });
                    }
                    table
                        .lemma_rules
                        .entry((upos.to_string(), lemma.to_string()))
                        .or_default()
                        .extend(cats);
                }
            }
        }
        Ok(table)
    }

    /// The table shipped with the crate.
    pub fn bundled() -> &'static LexcatConstraintTable {
        static BUNDLED: OnceLock<LexcatConstraintTable> = OnceLock::new();
        BUNDLED.get_or_init(|| {
            LexcatConstraintTable::parse(include_str!("../resources/lexcat_constraints.txt"))
                .expect("bundled constraint table parses")
        })
    }

    /// Categories a unit may carry when it starts at a token with this
    /// UPOS/lemma. A lemma rule takes precedence over the UPOS row.
    pub fn allowed_lexcats(
        &self,
        upos: &str,
        lemma: &str,
    ) -> Result<&BTreeSet<Lexcat>, ConstraintError> {
        if let Some(cats) = self.lemma_rules.get(&(upos.to_string(), lemma.to_string())) {
            return Ok(cats);
        }
        match self.base.get(upos) {
            Some(cats) => Ok(cats),
            None => match self.missing_upos {
                MissingUposPolicy::AllowAll => Ok(all_lexcats()),
                MissingUposPolicy::Error => Err(ConstraintError::UnknownUpos(upos.to_string())),
            },
        }
    }

    pub fn upos_count(&self) -> usize {
        self.base.len()
    }
}

/// Structural tag-to-tag legality for a fixed tag set, derived from the
/// flag transition automaton. Shared between masks and the CRF.
#[derive(Debug, Clone, PartialEq)]
pub struct TagTransitions {
    k: usize,
    flags: Vec<MweFlag>,
    start: Vec<bool>,
    end: Vec<bool>,
    trans: Vec<bool>, // k*k, row-major [from][to]
}

impl TagTransitions {
    pub fn from_tagset(tagset: &TagSet) -> Arc<TagTransitions> {
        let k = tagset.len();
        let flags: Vec<MweFlag> = tagset.iter().map(|t| t.flag).collect();
        let start = flags.iter().map(|&f| is_valid_transition(None, Some(f))).collect();
        let end = flags.iter().map(|&f| is_valid_transition(Some(f), None)).collect();
        let mut trans = vec![false; k * k];
        for (i, &fi) in flags.iter().enumerate() {
            for (j, &fj) in flags.iter().enumerate() {
                trans[i * k + j] = is_valid_transition(Some(fi), Some(fj));
            }
        }
        Arc::new(TagTransitions { k, flags, start, end, trans })
    }

    /// An automaton that permits every start, step, and end: no structure,
    /// only scores. The per-tag flags are a placeholder (`O`).
    pub fn allowing_all(k: usize) -> Arc<TagTransitions> {
        Arc::new(TagTransitions {
            k,
            flags: vec![MweFlag::Out; k],
            start: vec![true; k],
            end: vec![true; k],
            trans: vec![true; k * k],
        })
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn flag(&self, k: usize) -> MweFlag {
        self.flags[k]
    }

    pub fn start_ok(&self, k: usize) -> bool {
        self.start[k]
    }

    pub fn end_ok(&self, k: usize) -> bool {
        self.end[k]
    }

    pub fn step_ok(&self, from: usize, to: usize) -> bool {
        self.trans[from * self.k + to]
    }
}

/// Per-sentence decoding masks: `allow[t][k]` is the POS/lemma filter,
/// `transitions` the tag-set-wide structural automaton.
/// `fallback_positions` records tokens (1-based) where the filter was
/// dropped because it left no way to start a unit.
#[derive(Debug, Clone)]
pub struct LatticeMasks {
    pub allow: Vec<Vec<bool>>,
    pub transitions: Arc<TagTransitions>,
    pub fallback_positions: Vec<usize>,
}

impl LatticeMasks {
    /// Masks that impose only the structural automaton.
    pub fn unconstrained(len: usize, transitions: Arc<TagTransitions>) -> LatticeMasks {
        LatticeMasks {
            allow: vec![vec![true; transitions.len()]; len],
            transitions,
            fallback_positions: Vec::new(),
        }
    }

    /// Drops the POS/lemma filter everywhere (structural masks stay).
    pub fn relax_all(&mut self) {
        for row in &mut self.allow {
            row.iter_mut().for_each(|b| *b = true);
        }
    }
}

/// Compiles the constraint table into per-position tag masks for one
/// sentence, given `(upos, lemma)` per token.
///
/// Strong continuations (`I_`/`i_`) are always allowed: the category they
/// continue was licensed where the unit started. Other tags need their
/// lexcat in the token's allowed set. If a position ends up with no way to
/// start a unit (no surviving `O`/`B`-flagged tag), its filter is dropped
/// entirely and the position recorded, so constrained decoding cannot be
/// starved by a table gap.
pub fn build_masks(
    tokens: &[(&str, &str)],
    tagset: &TagSet,
    transitions: Arc<TagTransitions>,
    table: &LexcatConstraintTable,
) -> Result<LatticeMasks, ConstraintError> {
    let k = tagset.len();
    let mut allow = Vec::with_capacity(tokens.len());
    let mut fallback_positions = Vec::new();
    for (i, &(upos, lemma)) in tokens.iter().enumerate() {
        let cats = table.allowed_lexcats(upos, lemma)?;
        let mut row = vec![false; k];
        let mut can_open = false;
        for (ki, tag) in tagset.iter().enumerate() {
            if tag.flag.is_strong_cont() {
                row[ki] = true;
                continue;
            }
            let lexcat = tag
                .lexcat
                .ok_or_else(|| ConstraintError::UnlabeledTag(crate::tagcodec::format_tag(tag)))?;
            if cats.contains(&lexcat) {
                row[ki] = true;
                if matches!(tag.flag, MweFlag::Out | MweFlag::Begin) {
                    can_open = true;
                }
            }
        }
        if !can_open {
            row.iter_mut().for_each(|b| *b = true);
            fallback_positions.push(i + 1);
        }
        allow.push(row);
    }
    Ok(LatticeMasks { allow, transitions, fallback_positions })
}
