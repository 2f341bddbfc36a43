//! The `BbIiOo_~` tagging scheme: a lossless per-token encoding of lexical
//! units, weak groups, and gaps.
//!
//! Eight positional flags: `O`/`B`/`I_`/`I~` at the top level and their
//! lowercase counterparts `o`/`b`/`i_`/`i~` inside a gap. `B`/`b` open a
//! multiword unit (or a unit that starts a weak group), `I_`/`i_` continue
//! the current strong unit, `I~`/`i~` start a new unit weakly linked to the
//! previous one, `O`/`o` are single-word units outside any MWE. A full tag is
//! `FLAG-LEXCAT-SUPERSENSE` where the label parts are carried by the first
//! token of each unit (strong continuations stay bare).

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::corpus::{
    check_supersense, Inventory, Lexcat, LexicalUnit, Sentence, Supersense, SupersenseAnno,
    WeakGroup,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("cannot parse tag `{tag}`: {reason}")]
    BadTag { tag: String, reason: String },
    #[error("token {position}: {reason}")]
    BadSequence { position: usize, reason: String },
    #[error("sentence is not encodable: {0}")]
    Unencodable(String),
    #[error("unknown tag `{0}` (not in tag set)")]
    UnknownTag(String),
}

/// Positional MWE flag. Lowercase variants mark tokens inside a gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MweFlag {
    /// `O` — single-word unit, top level.
    Out,
    /// `o` — single-word unit inside a gap.
    GapOut,
    /// `B` — first token of a multiword unit (or weak-group opener).
    Begin,
    /// `b` — like `B`, inside a gap.
    GapBegin,
    /// `I_` — continuation of the current strong unit.
    StrongCont,
    /// `i_` — like `I_`, inside a gap.
    GapStrongCont,
    /// `I~` — first token of a unit weakly linked to the previous unit.
    WeakCont,
    /// `i~` — like `I~`, inside a gap.
    GapWeakCont,
}

impl MweFlag {
    pub const ALL: &'static [MweFlag] = &[
        MweFlag::Out,
        MweFlag::GapOut,
        MweFlag::Begin,
        MweFlag::GapBegin,
        MweFlag::StrongCont,
        MweFlag::GapStrongCont,
        MweFlag::WeakCont,
        MweFlag::GapWeakCont,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MweFlag::Out => "O",
            MweFlag::GapOut => "o",
            MweFlag::Begin => "B",
            MweFlag::GapBegin => "b",
            MweFlag::StrongCont => "I_",
            MweFlag::GapStrongCont => "i_",
            MweFlag::WeakCont => "I~",
            MweFlag::GapWeakCont => "i~",
        }
    }

    pub fn parse(s: &str) -> Option<MweFlag> {
        MweFlag::ALL.iter().copied().find(|f| f.as_str() == s)
    }

    /// True for flags on tokens inside a gap (lowercase).
    pub fn in_gap(self) -> bool {
        matches!(
            self,
            MweFlag::GapOut | MweFlag::GapBegin | MweFlag::GapStrongCont | MweFlag::GapWeakCont
        )
    }

    /// True for strong continuations, which never carry labels.
    pub fn is_strong_cont(self) -> bool {
        matches!(self, MweFlag::StrongCont | MweFlag::GapStrongCont)
    }
}

impl fmt::Display for MweFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether `next` may follow `prev`. `None` stands for the sentence
/// boundary on either side. The automaton enforces, among other things:
/// a sentence starts outside any MWE, gaps open only under a multiword
/// unit, a gap closes only by continuing its host, `B`/`b` must be
/// continued, and a sentence cannot end inside a gap or right after an
/// opener.
pub fn is_valid_transition(prev: Option<MweFlag>, next: Option<MweFlag>) -> bool {
    use MweFlag::*;
    match (prev, next) {
        // Start of sentence: top level, nothing to continue.
        (None, Some(f)) => matches!(f, Out | Begin),
        (None, None) => true,
        // End of sentence: no open gap, no dangling opener.
        (Some(f), None) => matches!(f, Out | StrongCont | WeakCont),
        (Some(p), Some(f)) => match p {
            Out => matches!(f, Out | Begin),
            Begin => matches!(f, StrongCont | WeakCont | GapOut | GapBegin),
            StrongCont | WeakCont => {
                matches!(f, Out | Begin | StrongCont | WeakCont | GapOut | GapBegin)
            }
            GapOut => matches!(f, GapOut | GapBegin | StrongCont | WeakCont),
            GapBegin => matches!(f, GapStrongCont | GapWeakCont),
            GapStrongCont | GapWeakCont => matches!(
                f,
                GapStrongCont | GapWeakCont | GapOut | GapBegin | StrongCont | WeakCont
            ),
        },
    }
}

/// Checks a whole flag sequence, boundaries included.
pub fn is_valid_sequence(flags: &[MweFlag]) -> bool {
    let mut prev = None;
    for &f in flags {
        if !is_valid_transition(prev, Some(f)) {
            return false;
        }
        prev = Some(f);
    }
    is_valid_transition(prev, None)
}

/// A full lexical tag: flag, plus lexcat and supersense on unit-initial
/// tokens. Strong continuations (`I_`/`i_`) are always bare.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LexTag {
    pub flag: MweFlag,
    pub lexcat: Option<Lexcat>,
    pub supersense: Option<SupersenseAnno>,
}

impl LexTag {
    pub fn bare(flag: MweFlag) -> LexTag {
        LexTag { flag, lexcat: None, supersense: None }
    }

    pub fn labeled(flag: MweFlag, lexcat: Lexcat, ss: Option<SupersenseAnno>) -> LexTag {
        LexTag { flag, lexcat: Some(lexcat), supersense: ss }
    }

    /// Tag-local invariants: continuations bare, everything else carries a
    /// lexcat, supersense compatible with the lexcat.
    pub fn check(&self) -> Result<(), String> {
        if self.flag.is_strong_cont() {
            if self.lexcat.is_some() || self.supersense.is_some() {
                return Err(format!("{} tags carry no labels", self.flag));
            }
            return Ok(());
        }
        match self.lexcat {
            None => Err(format!("{} tag requires a lexcat", self.flag)),
            Some(lc) => check_supersense(lc, self.supersense.as_ref()),
        }
    }
}

impl fmt::Display for LexTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_tag(self))
    }
}

/// Formats a tag: `FLAG[-LEXCAT[-SS[|SS2]]]`, collapsing equal
/// role/function pairs to a single label.
pub fn format_tag(tag: &LexTag) -> String {
    let mut out = tag.flag.as_str().to_string();
    if let Some(lc) = tag.lexcat {
        out.push('-');
        out.push_str(lc.as_str());
        if let Some(ss) = &tag.supersense {
            out.push('-');
            out.push_str(&ss.to_string());
        }
    }
    out
}

/// Parses `FLAG[-LEXCAT[-SS[|SS2]]]`. The first two `-`s split the parts, so
/// supersense labels may themselves contain `-` (e.g. `p.Co-Agent`).
pub fn parse_tag(s: &str, inv: &Inventory) -> Result<LexTag, CodecError> {
    let bad = |reason: &str| CodecError::BadTag { tag: s.to_string(), reason: reason.to_string() };
    let mut parts = s.splitn(3, '-');
    let flag_str = parts.next().unwrap_or("");
    let flag = MweFlag::parse(flag_str)
        .ok_or_else(|| bad(&format!("unknown flag `{flag_str}`")))?;
    let lexcat = match parts.next() {
        None => None,
        Some("") => return Err(bad("empty lexcat part")),
        Some(lc) => {
            Some(Lexcat::parse(lc).map_err(|e| bad(&e.to_string()))?)
        }
    };
    let supersense = match parts.next() {
        None => None,
        Some("") => return Err(bad("empty supersense part")),
        Some(rest) => Some(parse_supersense_part(rest, inv).map_err(|e| bad(&e))?),
    };
    let tag = LexTag { flag, lexcat, supersense };
    tag.check().map_err(|e| bad(&e))?;
    Ok(tag)
}

fn parse_supersense_part(rest: &str, inv: &Inventory) -> Result<SupersenseAnno, String> {
    match rest.split_once('|') {
        None => {
            let ss = Supersense::parse(rest, inv).map_err(|e| e.to_string())?;
            Ok(SupersenseAnno::Single(ss))
        }
        Some((role, function)) => {
            let role = Supersense::parse(role, inv).map_err(|e| e.to_string())?;
            let function = Supersense::parse(function, inv).map_err(|e| e.to_string())?;
            SupersenseAnno::snacs(role, function).map_err(|e| e.to_string())
        }
    }
}

/// Encodes a sentence's analysis as one tag per token. The sentence must be
/// structurally valid (`validate_sentence` returns nothing); gaps are
/// detected from the unit/group token sets.
pub fn encode(s: &Sentence) -> Result<Vec<LexTag>, CodecError> {
    let n = s.tokens.len();
    let unit_of = s.unit_of_token();
    let group_of = s.group_of_unit();

    // Token positions lying inside some expression's gap.
    let mut in_gap = vec![false; n];
    let mut spans: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    for unit in &s.units {
        spans.push((unit.first_token(), unit.last_token(), unit.token_indices.clone()));
    }
    for group in &s.weak_groups {
        let toks = s.group_tokens(group);
        match (toks.first(), toks.last()) {
            (Some(&lo), Some(&hi)) => spans.push((lo, hi, toks)),
            _ => return Err(CodecError::Unencodable("weak group with no tokens".into())),
        }
    }
    for (lo, hi, toks) in &spans {
        for t in *lo + 1..*hi {
            if !toks.contains(&t) {
                in_gap[t - 1] = true;
            }
        }
    }

    let mut tags = Vec::with_capacity(n);
    for t in 1..=n {
        let u = unit_of[t - 1].ok_or_else(|| {
            CodecError::Unencodable(format!("token {t} is not covered by any unit"))
        })?;
        let unit = &s.units[u];
        let first_of_unit = unit.first_token() == t;
        let flag = if !first_of_unit {
            if in_gap[t - 1] { MweFlag::GapStrongCont } else { MweFlag::StrongCont }
        } else {
            // Is this unit a non-initial member of its weak group?
            let weak_cont = group_of[u]
                .map(|g| s.weak_groups[g].members.first() != Some(&u))
                .unwrap_or(false);
            if weak_cont {
                if in_gap[t - 1] { MweFlag::GapWeakCont } else { MweFlag::WeakCont }
            } else if unit.is_multiword() || group_of[u].is_some() {
                if in_gap[t - 1] { MweFlag::GapBegin } else { MweFlag::Begin }
            } else if in_gap[t - 1] {
                MweFlag::GapOut
            } else {
                MweFlag::Out
            }
        };
        let tag = if first_of_unit {
            LexTag::labeled(flag, unit.lexcat, unit.supersense.clone())
        } else {
            LexTag::bare(flag)
        };
        tags.push(tag);
    }

    // A valid sentence always yields a legal sequence; double-check so an
    // unvalidated input cannot produce undecodable output.
    let flags: Vec<MweFlag> = tags.iter().map(|t| t.flag).collect();
    if !is_valid_sequence(&flags) {
        return Err(CodecError::Unencodable(
            "analysis requires an illegal flag transition (is the sentence valid?)".into(),
        ));
    }
    Ok(tags)
}

/// The unit/group structure recovered from a tag sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SentenceStructure {
    pub units: Vec<LexicalUnit>,
    pub weak_groups: Vec<WeakGroup>,
}

/// Decodes a tag sequence back into units and weak groups. Fails on the
/// first position whose flag transition is illegal or whose labels break a
/// tag invariant.
pub fn decode(tags: &[LexTag]) -> Result<SentenceStructure, CodecError> {
    let mut units: Vec<LexicalUnit> = Vec::new();
    let mut chains: Vec<Vec<usize>> = Vec::new();

    let mut outer_unit: Option<usize> = None; // extendable top-level unit
    let mut outer_chain: Option<usize> = None; // open top-level weak chain
    let mut gap_unit: Option<usize> = None;
    let mut gap_chain: Option<usize> = None;
    let mut prev: Option<MweFlag> = None;

    let err = |position: usize, reason: String| CodecError::BadSequence { position, reason };

    for (pos0, tag) in tags.iter().enumerate() {
        let t = pos0 + 1;
        if !is_valid_transition(prev, Some(tag.flag)) {
            return Err(err(
                t,
                format!(
                    "flag {} cannot follow {}",
                    tag.flag,
                    prev.map(|f| f.as_str()).unwrap_or("start of sentence")
                ),
            ));
        }
        tag.check().map_err(|reason| err(t, reason))?;

        let open = |units: &mut Vec<LexicalUnit>, tag: &LexTag, t: usize| -> usize {
            units.push(LexicalUnit::new(
                vec![t],
                tag.lexcat.expect("checked: labeled flags carry a lexcat"),
                tag.supersense.clone(),
            ));
            units.len() - 1
        };

        match tag.flag {
            MweFlag::Out => {
                open(&mut units, tag, t);
                outer_unit = None;
                outer_chain = None;
            }
            MweFlag::Begin => {
                outer_unit = Some(open(&mut units, tag, t));
                outer_chain = None;
            }
            MweFlag::StrongCont => {
                gap_unit = None;
                gap_chain = None;
                let u = outer_unit
                    .ok_or_else(|| err(t, "I_ with no open unit to continue".into()))?;
                units[u].token_indices.push(t);
            }
            MweFlag::WeakCont => {
                gap_unit = None;
                gap_chain = None;
                let prev_u = outer_unit
                    .ok_or_else(|| err(t, "I~ with no previous unit to link to".into()))?;
                let chain = match outer_chain {
                    Some(c) => c,
                    None => {
                        chains.push(vec![prev_u]);
                        chains.len() - 1
                    }
                };
                outer_chain = Some(chain);
                let u = open(&mut units, tag, t);
                chains[chain].push(u);
                outer_unit = Some(u);
            }
            MweFlag::GapOut => {
                open(&mut units, tag, t);
                gap_unit = None;
                gap_chain = None;
            }
            MweFlag::GapBegin => {
                gap_unit = Some(open(&mut units, tag, t));
                gap_chain = None;
            }
            MweFlag::GapStrongCont => {
                let u = gap_unit
                    .ok_or_else(|| err(t, "i_ with no open in-gap unit to continue".into()))?;
                units[u].token_indices.push(t);
            }
            MweFlag::GapWeakCont => {
                let prev_u = gap_unit
                    .ok_or_else(|| err(t, "i~ with no previous in-gap unit to link to".into()))?;
                let chain = match gap_chain {
                    Some(c) => c,
                    None => {
                        chains.push(vec![prev_u]);
                        chains.len() - 1
                    }
                };
                gap_chain = Some(chain);
                let u = open(&mut units, tag, t);
                chains[chain].push(u);
                gap_unit = Some(u);
            }
        }
        prev = Some(tag.flag);
    }

    if !is_valid_transition(prev, None) {
        return Err(err(
            tags.len(),
            format!(
                "sentence cannot end with {}",
                prev.map(|f| f.as_str()).unwrap_or("nothing")
            ),
        ));
    }

    let weak_groups = chains.into_iter().map(WeakGroup::new).collect();
    let mut structure = SentenceStructure { units, weak_groups };
    // Decode builds units in opening order, which interleaves gap-level and
    // top-level openings; normalize to first-token order.
    let mut tmp = Sentence {
        comments: Vec::new(),
        tokens: Vec::new(),
        units: std::mem::take(&mut structure.units),
        weak_groups: std::mem::take(&mut structure.weak_groups),
        extra_rows: Vec::new(),
    };
    tmp.canonicalize();
    Ok(SentenceStructure { units: tmp.units, weak_groups: tmp.weak_groups })
}

/// The closed tag vocabulary of a training corpus, in first-occurrence
/// order. Lookup is by formatted tag string.
#[derive(Debug, Clone, Default)]
pub struct TagSet {
    tags: Vec<LexTag>,
    index: HashMap<String, usize>,
}

impl TagSet {
    pub fn from_tags<'a, I: IntoIterator<Item = &'a LexTag>>(tags: I) -> TagSet {
        let mut set = TagSet::default();
        for tag in tags {
            set.insert(tag);
        }
        set
    }

    /// Collects every distinct tag in encoding order over the corpus.
    pub fn from_sentences(sentences: &[Sentence]) -> Result<TagSet, CodecError> {
        let mut set = TagSet::default();
        for s in sentences {
            for tag in encode(s)? {
                set.insert(&tag);
            }
        }
        Ok(set)
    }

    pub fn insert(&mut self, tag: &LexTag) -> usize {
        let key = format_tag(tag);
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.tags.push(tag.clone());
        self.index.insert(key, self.tags.len() - 1);
        self.tags.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn get(&self, i: usize) -> &LexTag {
        &self.tags[i]
    }

    pub fn index_of(&self, tag: &LexTag) -> Option<usize> {
        self.index.get(&format_tag(tag)).copied()
    }

    pub fn index_of_str(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &LexTag> {
        self.tags.iter()
    }

    pub fn strings(&self) -> Vec<String> {
        self.tags.iter().map(format_tag).collect()
    }
}
