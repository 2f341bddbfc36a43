//! Projections into the PARSEME and DiMSUM label spaces, plus readers and
//! writers for those formats.
//!
//! Both projections only ever discard: PARSEME keeps the verbal multiword
//! units and their category (the lexcat minus its `V.` prefix); DiMSUM
//! keeps strong unit segmentation and noun/verb supersenses, dropping weak
//! groups, lexcats, and adposition supersenses.

pub mod cupt;
pub mod dimsum;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::corpus::{Lexcat, Sentence, Supersense, SupersenseClass, Token};

pub use cupt::{parse_cupt, write_cupt};
pub use dimsum::{parse_dimsum, write_dimsum};

#[derive(Debug, Error)]
pub enum ConvertError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl ConvertError {
    fn at(line: usize, message: impl Into<String>) -> ConvertError {
        ConvertError::Format { line, message: message.into() }
    }
}

/// The verbal MWE categories of the PARSEME 1.1 shared task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParsemeCategory {
    Vid,
    VpcFull,
    VpcSemi,
    LvcFull,
    LvcCause,
    Iav,
}

/// Lexcat ↔ PARSEME category table; the projection consults this, so new
/// categories only need a row here.
pub const LEXCAT_TO_PARSEME: &[(Lexcat, ParsemeCategory)] = &[
    (Lexcat::Vid, ParsemeCategory::Vid),
    (Lexcat::VpcFull, ParsemeCategory::VpcFull),
    (Lexcat::VpcSemi, ParsemeCategory::VpcSemi),
    (Lexcat::LvcFull, ParsemeCategory::LvcFull),
    (Lexcat::LvcCause, ParsemeCategory::LvcCause),
    (Lexcat::Iav, ParsemeCategory::Iav),
];

impl ParsemeCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ParsemeCategory::Vid => "VID",
            ParsemeCategory::VpcFull => "VPC.full",
            ParsemeCategory::VpcSemi => "VPC.semi",
            ParsemeCategory::LvcFull => "LVC.full",
            ParsemeCategory::LvcCause => "LVC.cause",
            ParsemeCategory::Iav => "IAV",
        }
    }

    pub fn parse(s: &str) -> Option<ParsemeCategory> {
        [
            ParsemeCategory::Vid,
            ParsemeCategory::VpcFull,
            ParsemeCategory::VpcSemi,
            ParsemeCategory::LvcFull,
            ParsemeCategory::LvcCause,
            ParsemeCategory::Iav,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
    }

    pub fn of_lexcat(lexcat: Lexcat) -> Option<ParsemeCategory> {
        LEXCAT_TO_PARSEME.iter().find(|(l, _)| *l == lexcat).map(|(_, c)| *c)
    }
}

/// One verbal MWE: 1-based token indices plus its category. `id` is the
/// sentence-local number used in the cupt column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vmwe {
    pub id: u32,
    pub tokens: BTreeSet<usize>,
    pub category: ParsemeCategory,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsemeSentence {
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
    pub vmwes: Vec<Vmwe>,
    /// Range/empty-node rows kept verbatim, keyed by the index of the last
    /// integer-id token seen before them.
    pub extra_rows: Vec<(usize, String)>,
}

/// Keep exactly the multi-token verbal-MWE units; drop everything else.
pub fn to_parseme(s: &Sentence) -> ParsemeSentence {
    let mut vmwes = Vec::new();
    for unit in &s.units {
        if !unit.is_multiword() {
            continue;
        }
        if let Some(category) = ParsemeCategory::of_lexcat(unit.lexcat) {
            vmwes.push(Vmwe {
                id: vmwes.len() as u32 + 1,
                tokens: unit.token_indices.iter().copied().collect(),
                category,
            });
        }
    }
    ParsemeSentence {
        comments: s.comments.clone(),
        tokens: s.tokens.clone(),
        vmwes,
        extra_rows: s.extra_rows.clone(),
    }
}

/// A strong unit in the DiMSUM label space: a token-index set and an
/// optional noun/verb supersense.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimsumUnit {
    pub token_indices: Vec<usize>,
    pub supersense: Option<Supersense>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimsumSentence {
    pub sent_id: String,
    pub tokens: Vec<Token>,
    pub units: Vec<DimsumUnit>,
}

/// Drop weak groups, lexcats, and adposition supersenses; keep strong
/// segmentation and noun/verb supersenses.
pub fn to_dimsum(s: &Sentence) -> DimsumSentence {
    let units = s
        .units
        .iter()
        .map(|u| {
            let supersense = match &u.supersense {
                Some(crate::corpus::SupersenseAnno::Single(ss))
                    if ss.class() != SupersenseClass::Adposition =>
                {
                    Some(ss.clone())
                }
                _ => None,
            };
            DimsumUnit { token_indices: u.token_indices.clone(), supersense }
        })
        .collect();
    DimsumSentence {
        sent_id: s.sent_id().unwrap_or("").to_string(),
        tokens: s.tokens.clone(),
        units,
    }
}

/// The six DiMSUM MWE flags (no strength distinction, lowercase in gaps).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimsumFlag {
    Out,
    GapOut,
    Begin,
    GapBegin,
    Cont,
    GapCont,
}

impl DimsumFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            DimsumFlag::Out => "O",
            DimsumFlag::GapOut => "o",
            DimsumFlag::Begin => "B",
            DimsumFlag::GapBegin => "b",
            DimsumFlag::Cont => "I",
            DimsumFlag::GapCont => "i",
        }
    }

    pub fn parse(s: &str) -> Option<DimsumFlag> {
        Some(match s {
            "O" => DimsumFlag::Out,
            "o" => DimsumFlag::GapOut,
            "B" => DimsumFlag::Begin,
            "b" => DimsumFlag::GapBegin,
            "I" => DimsumFlag::Cont,
            "i" => DimsumFlag::GapCont,
            _ => return None,
        })
    }

    /// Map onto the 8-flag scheme (strength defaults to strong); the
    /// transition rules coincide under this mapping.
    pub fn as_mwe_flag(self) -> crate::tagcodec::MweFlag {
        use crate::tagcodec::MweFlag::*;
        match self {
            DimsumFlag::Out => Out,
            DimsumFlag::GapOut => GapOut,
            DimsumFlag::Begin => Begin,
            DimsumFlag::GapBegin => GapBegin,
            DimsumFlag::Cont => StrongCont,
            DimsumFlag::GapCont => GapStrongCont,
        }
    }
}

/// Per-token flags for a DiMSUM sentence. Tokens strictly inside another
/// unit's span get the lowercase variants.
pub fn dimsum_flags(d: &DimsumSentence) -> Vec<DimsumFlag> {
    let n = d.tokens.len();
    let mut in_gap = vec![false; n];
    for u in &d.units {
        let (first, last) = match (u.token_indices.first(), u.token_indices.last()) {
            (Some(&f), Some(&l)) => (f, l),
            _ => continue,
        };
        let members: BTreeSet<usize> = u.token_indices.iter().copied().collect();
        for t in first + 1..last {
            if !members.contains(&t) {
                in_gap[t - 1] = true;
            }
        }
    }
    let mut flags = vec![DimsumFlag::Out; n];
    for (t, flag) in flags.iter_mut().enumerate() {
        if in_gap[t] {
            *flag = DimsumFlag::GapOut;
        }
    }
    for u in &d.units {
        for (pos, &t) in u.token_indices.iter().enumerate() {
            let gap = in_gap[t - 1];
            flags[t - 1] = match (pos, u.token_indices.len(), gap) {
                (_, 1, false) => DimsumFlag::Out,
                (_, 1, true) => DimsumFlag::GapOut,
                (0, _, false) => DimsumFlag::Begin,
                (0, _, true) => DimsumFlag::GapBegin,
                (_, _, false) => DimsumFlag::Cont,
                (_, _, true) => DimsumFlag::GapCont,
            };
        }
    }
    flags
}

/// The DiMSUM tag-space string per token: flag, plus the unit's supersense
/// on its first token (`B-n.ACT`, `O-v.stative`, bare flag otherwise).
pub fn dimsum_tags(d: &DimsumSentence) -> Vec<String> {
    let flags = dimsum_flags(d);
    let mut tags: Vec<String> = flags.iter().map(|f| f.as_str().to_string()).collect();
    for u in &d.units {
        if let (Some(&first), Some(ss)) = (u.token_indices.first(), u.supersense.as_ref()) {
            tags[first - 1] = format!("{}-{}", flags[first - 1].as_str(), ss.label());
        }
    }
    tags
}
