//! Lexical semantic recognition: comprehensive MWE + supersense analysis.
//!
//! The crate models sentences as total segmentations into lexical units
//! (single words or strong multiword expressions, possibly gappy) that may be
//! grouped into weak MWEs, with each unit carrying a lexical category and
//! optionally a supersense. It provides:
//!
//! * [`corpus`] — the data model, validation, and the 19-column `.conllulex`
//!   file format;
//! * [`tagcodec`] — the lossless `BbIiOo_~` tagging scheme (encode, decode,
//!   tag grammar, legal flag transitions);
//! * [`constraints`] — category/POS filters compiled into per-sentence
//!   lattice masks for constrained decoding;
//! * [`decoder`] — exact Viterbi search over masked score lattices;
//! * [`crf`] — a linear-chain CRF tagger with sparse-feature or
//!   dense-vector-projection emissions, trained with Adam;
//! * [`metrics`] — tag accuracy, labeled unit P/R/F, MWE link scores, and the
//!   PARSEME / DiMSUM shared-task measures;
//! * [`convert`] — projections to the PARSEME `.cupt` and DiMSUM formats;
//! * [`cli`] — the `lsr` command-line front end.

pub mod cli;
pub mod constraints;
pub mod convert;
pub mod corpus;
pub mod crf;
pub mod decoder;
pub mod metrics;
pub mod tagcodec;
