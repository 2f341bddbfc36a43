//! The 9-column DiMSUM file format: index, form, lemma, POS, MWE flag,
//! parent offset, an unused strength column, supersense, sentence id.
//!
//! The parent column chains each `I`/`i` token to the previous token of
//! its expression; supersenses sit on unit-initial tokens only. `#` lines
//! are skipped on read — this space has nowhere to keep them.

use std::fmt::Write as _;

use super::{dimsum_flags, ConvertError, DimsumFlag, DimsumSentence, DimsumUnit};
use crate::corpus::{Inventory, Supersense, SupersenseClass, Token};

const COLUMNS: usize = 9;

pub fn parse_dimsum(text: &str) -> Result<Vec<DimsumSentence>, ConvertError> {
    let inv = Inventory::bundled();
    let mut sentences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut file_flags: Vec<DimsumFlag> = Vec::new();
    let mut parents: Vec<usize> = Vec::new();
    let mut labels: Vec<Option<Supersense>> = Vec::new();
    let mut token_lines: Vec<usize> = Vec::new();
    let mut sent_id = String::new();

    let flush = |tokens: &mut Vec<Token>,
                     file_flags: &mut Vec<DimsumFlag>,
                     parents: &mut Vec<usize>,
                     labels: &mut Vec<Option<Supersense>>,
                     token_lines: &mut Vec<usize>,
                     sent_id: &mut String,
                     sentences: &mut Vec<DimsumSentence>|
     -> Result<(), ConvertError> {
        if tokens.is_empty() {
            return Ok(());
        }
        let sentence = assemble(
            std::mem::take(tokens),
            std::mem::take(file_flags),
            std::mem::take(parents),
            std::mem::take(labels),
            std::mem::take(token_lines),
            std::mem::take(sent_id),
        )?;
        sentences.push(sentence);
        Ok(())
    };

    for (line0, raw) in text.lines().enumerate() {
        let line = line0 + 1;
        let row = raw.strip_suffix('\r').unwrap_or(raw);
        if row.is_empty() {
            flush(&mut tokens, &mut file_flags, &mut parents, &mut labels,
                  &mut token_lines, &mut sent_id, &mut sentences)?;
            continue;
        }
        if row.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() != COLUMNS {
            return Err(ConvertError::at(
                line,
                format!("expected {COLUMNS} tab-separated columns, found {}", cols.len()),
            ));
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| ConvertError::at(line, format!("bad token index `{}`", cols[0])))?;
        if index != tokens.len() + 1 {
            return Err(ConvertError::at(
                line,
                format!("token index {index} out of order (expected {})", tokens.len() + 1),
            ));
        }
        let flag = DimsumFlag::parse(cols[4])
            .ok_or_else(|| ConvertError::at(line, format!("bad MWE flag `{}`", cols[4])))?;
        let parent: usize = cols[5]
            .parse()
            .map_err(|_| ConvertError::at(line, format!("bad parent offset `{}`", cols[5])))?;
        match flag {
            DimsumFlag::Cont | DimsumFlag::GapCont => {
                if parent == 0 || parent >= index {
                    return Err(ConvertError::at(
                        line,
                        format!("continuation token {index} needs an earlier parent, got {parent}"),
                    ));
                }
            }
            _ => {
                if parent != 0 {
                    return Err(ConvertError::at(
                        line,
                        format!("token {index} does not continue an expression; parent must be 0"),
                    ));
                }
            }
        }
        if !cols[6].is_empty() {
            return Err(ConvertError::at(line, "strength column must stay empty"));
        }
        let label = match cols[7] {
            "" => None,
            text => {
                let ss = Supersense::parse(text, inv)
                    .map_err(|e| ConvertError::at(line, e.to_string()))?;
                if ss.class() == SupersenseClass::Adposition {
                    return Err(ConvertError::at(
                        line,
                        format!("`{text}` is an adposition supersense; only noun and verb labels belong here"),
                    ));
                }
                if matches!(flag, DimsumFlag::Cont | DimsumFlag::GapCont) {
                    return Err(ConvertError::at(
                        line,
                        "supersense on a continuation token; labels go on the first token",
                    ));
                }
                Some(ss)
            }
        };
        if tokens.is_empty() {
            sent_id = cols[8].to_string();
        } else if cols[8] != sent_id {
            return Err(ConvertError::at(
                line,
                format!("sentence id changed mid-sentence (`{}` after `{sent_id}`)", cols[8]),
            ));
        }
        tokens.push(Token::simple(index, cols[1], cols[2], cols[3]));
        file_flags.push(flag);
        parents.push(parent);
        labels.push(label);
        token_lines.push(line);
    }
    flush(&mut tokens, &mut file_flags, &mut parents, &mut labels, &mut token_lines,
          &mut sent_id, &mut sentences)?;
    Ok(sentences)
}

/// Rebuild units from flags and parent chains, then require the flags the
/// segmentation implies to match the flags the file wrote.
fn assemble(
    tokens: Vec<Token>,
    file_flags: Vec<DimsumFlag>,
    parents: Vec<usize>,
    labels: Vec<Option<Supersense>>,
    token_lines: Vec<usize>,
    sent_id: String,
) -> Result<DimsumSentence, ConvertError> {
    let mut units: Vec<DimsumUnit> = Vec::new();
    for (i, &flag) in file_flags.iter().enumerate() {
        let t = i + 1;
        match flag {
            DimsumFlag::Begin | DimsumFlag::GapBegin => {
                units.push(DimsumUnit { token_indices: vec![t], supersense: labels[i].clone() });
            }
            DimsumFlag::Cont | DimsumFlag::GapCont => {
                let p = parents[i];
                let unit = units
                    .iter_mut()
                    .find(|u| u.token_indices.last() == Some(&p))
                    .ok_or_else(|| {
                        ConvertError::at(
                            token_lines[i],
                            format!("parent {p} is not the latest token of any expression"),
                        )
                    })?;
                unit.token_indices.push(t);
            }
            DimsumFlag::Out | DimsumFlag::GapOut => {
                if let Some(ss) = &labels[i] {
                    units.push(DimsumUnit {
                        token_indices: vec![t],
                        supersense: Some(ss.clone()),
                    });
                }
            }
        }
    }
    let sentence = DimsumSentence { sent_id, tokens, units };
    let implied = dimsum_flags(&sentence);
    for (i, (got, want)) in file_flags.iter().zip(&implied).enumerate() {
        if got != want {
            return Err(ConvertError::at(
                token_lines[i],
                format!(
                    "flag `{}` disagrees with the segmentation (expected `{}`)",
                    got.as_str(),
                    want.as_str()
                ),
            ));
        }
    }
    Ok(sentence)
}

pub fn write_dimsum(sentences: &[DimsumSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        let flags = dimsum_flags(s);
        let mut parent = vec![0usize; s.tokens.len()];
        let mut label: Vec<&str> = vec![""; s.tokens.len()];
        for u in &s.units {
            for pair in u.token_indices.windows(2) {
                parent[pair[1] - 1] = pair[0];
            }
            if let (Some(&first), Some(ss)) = (u.token_indices.first(), u.supersense.as_ref()) {
                label[first - 1] = ss.label();
            }
        }
        for (i, t) in s.tokens.iter().enumerate() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t\t{}\t{}",
                t.index,
                t.form,
                t.lemma,
                t.upos,
                flags[i].as_str(),
                parent[i],
                label[i],
                s.sent_id,
            );
        }
        out.push('\n');
    }
    out
}
