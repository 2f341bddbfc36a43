//! The `.cupt` format: the ten CoNLL-U columns plus a PARSEME:MWE column.
//!
//! The MWE column holds `*` for tokens outside every VMWE, or a
//! `;`-separated list of VMWE numbers; the number carries `:CATEGORY` on
//! the expression's first token. Range and empty-node rows are preserved
//! verbatim, like in the other readers.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{ConvertError, ParsemeCategory, ParsemeSentence, Vmwe};
use crate::corpus::Token;

const COLUMNS: usize = 11;

struct VmweDraft {
    tokens: BTreeSet<usize>,
    category: Option<ParsemeCategory>,
    first_line: usize,
}

pub fn parse_cupt(text: &str) -> Result<Vec<ParsemeSentence>, ConvertError> {
    let mut sentences = Vec::new();
    let mut comments: Vec<String> = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut drafts: BTreeMap<u32, VmweDraft> = BTreeMap::new();
    let mut extra_rows: Vec<(usize, String)> = Vec::new();
    let mut block_start_line = 1;

    let flush = |comments: &mut Vec<String>,
                     tokens: &mut Vec<Token>,
                     drafts: &mut BTreeMap<u32, VmweDraft>,
                     extra_rows: &mut Vec<(usize, String)>,
                     sentences: &mut Vec<ParsemeSentence>,
                     block_line: usize|
     -> Result<(), ConvertError> {
        if comments.is_empty() && tokens.is_empty() {
            return Ok(());
        }
        if tokens.is_empty() {
            return Err(ConvertError::at(block_line, "comment block with no token rows"));
        }
        let mut vmwes = Vec::with_capacity(drafts.len());
        for (id, draft) in std::mem::take(drafts) {
            let category = draft.category.ok_or_else(|| {
                ConvertError::at(
                    draft.first_line,
                    format!("MWE {id} never names its category"),
                )
            })?;
            vmwes.push(Vmwe { id, tokens: draft.tokens, category });
        }
        sentences.push(ParsemeSentence {
            comments: std::mem::take(comments),
            tokens: std::mem::take(tokens),
            vmwes,
            extra_rows: std::mem::take(extra_rows),
        });
        Ok(())
    };

    for (line0, raw) in text.lines().enumerate() {
        let line = line0 + 1;
        let row = raw.strip_suffix('\r').unwrap_or(raw);
        if row.is_empty() {
            flush(&mut comments, &mut tokens, &mut drafts, &mut extra_rows, &mut sentences,
                  block_start_line)?;
            block_start_line = line + 1;
            continue;
        }
        if row.starts_with('#') {
            comments.push(row.to_string());
            continue;
        }
        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() != COLUMNS {
            return Err(ConvertError::at(
                line,
                format!("expected {COLUMNS} tab-separated columns, found {}", cols.len()),
            ));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            // Same convention as the conllulex reader: keyed by the index
            // of the token the row precedes.
            extra_rows.push((tokens.len() + 1, row.to_string()));
            continue;
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| ConvertError::at(line, format!("bad token id `{}`", cols[0])))?;
        if index != tokens.len() + 1 {
            return Err(ConvertError::at(
                line,
                format!("token id {index} out of order (expected {})", tokens.len() + 1),
            ));
        }
        tokens.push(Token {
            index,
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            xpos: cols[4].to_string(),
            feats: cols[5].to_string(),
            head: cols[6].to_string(),
            deprel: cols[7].to_string(),
            deps: cols[8].to_string(),
            misc: cols[9].to_string(),
        });
        parse_mwe_cell(cols[10], index, line, &mut drafts)?;
    }
    flush(&mut comments, &mut tokens, &mut drafts, &mut extra_rows, &mut sentences,
          block_start_line)?;
    Ok(sentences)
}

fn parse_mwe_cell(
    cell: &str,
    index: usize,
    line: usize,
    drafts: &mut BTreeMap<u32, VmweDraft>,
) -> Result<(), ConvertError> {
    if cell == "*" || cell == "_" {
        return Ok(());
    }
    for entry in cell.split(';') {
        let (id_part, cat_part) = match entry.split_once(':') {
            Some((i, c)) => (i, Some(c)),
            None => (entry, None),
        };
        let id: u32 = id_part
            .parse()
            .map_err(|_| ConvertError::at(line, format!("bad MWE entry `{entry}`")))?;
        if id == 0 {
            return Err(ConvertError::at(line, "MWE numbers start at 1"));
        }
        let category = match cat_part {
            None => None,
            Some(c) => Some(ParsemeCategory::parse(c).ok_or_else(|| {
                ConvertError::at(line, format!("unknown MWE category `{c}`"))
            })?),
        };
        let draft = drafts.entry(id).or_insert_with(|| VmweDraft {
            tokens: BTreeSet::new(),
            category: None,
            first_line: line,
        });
        draft.tokens.insert(index);
        match (draft.category, category) {
            (Some(a), Some(b)) if a != b => {
                return Err(ConvertError::at(
                    line,
                    format!("MWE {id} is both {} and {}", a.as_str(), b.as_str()),
                ));
            }
            (None, Some(c)) => draft.category = Some(c),
            _ => {}
        }
    }
    Ok(())
}

pub fn write_cupt(sentences: &[ParsemeSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        for c in &s.comments {
            let _ = writeln!(out, "{c}");
        }
        let mut extras = s.extra_rows.iter().peekable();
        for t in &s.tokens {
            while let Some((_, row)) = extras.next_if(|(anchor, _)| *anchor <= t.index) {
                let _ = writeln!(out, "{row}");
            }
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                t.index, t.form, t.lemma, t.upos, t.xpos, t.feats, t.head, t.deprel,
                t.deps, t.misc,
                mwe_cell(&s.vmwes, t.index),
            );
        }
        for (_, row) in extras {
            let _ = writeln!(out, "{row}");
        }
        out.push('\n');
    }
    out
}

fn mwe_cell(vmwes: &[Vmwe], index: usize) -> String {
    let mut ordered: Vec<&Vmwe> = vmwes.iter().filter(|v| v.tokens.contains(&index)).collect();
    if ordered.is_empty() {
        return "*".to_string();
    }
    ordered.sort_by_key(|v| v.id);
    let entries: Vec<String> = ordered
        .iter()
        .map(|v| {
            if v.tokens.iter().next() == Some(&index) {
                format!("{}:{}", v.id, v.category.as_str())
            } else {
                v.id.to_string()
            }
        })
        .collect();
    entries.join(";")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convert::to_parseme;
    use crate::corpus::{parse_conllulex, Inventory};

    fn fixture_text() -> String {
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/mini.cupt"))
            .unwrap()
    }

    #[test]
    fn parses_the_fixture() {
        let sents = parse_cupt(&fixture_text()).unwrap();
        assert_eq!(sents.len(), 2);
        let first = &sents[0];
        assert_eq!(first.tokens.len(), 7);
        assert_eq!(first.vmwes.len(), 2);
        assert_eq!(first.vmwes[0].id, 1);
        assert_eq!(first.vmwes[0].category, ParsemeCategory::VpcFull);
        assert_eq!(first.vmwes[0].tokens, BTreeSet::from([2, 4]));
        assert_eq!(first.vmwes[1].tokens, BTreeSet::from([5, 6]));
        // Second sentence: a range row, an overlap, and `_` as none.
        let second = &sents[1];
        assert_eq!(second.extra_rows.len(), 1);
        assert_eq!(second.extra_rows[0].0, 1); // precedes token 1
        assert!(second.extra_rows[0].1.starts_with("1-2\t"));
        assert_eq!(second.vmwes[0].tokens, BTreeSet::from([3, 4]));
        assert_eq!(second.vmwes[1].tokens, BTreeSet::from([3, 5]));
    }

    #[test]
    fn round_trips_to_a_fixpoint() {
        let p1 = parse_cupt(&fixture_text()).unwrap();
        let out1 = write_cupt(&p1);
        let p2 = parse_cupt(&out1).unwrap();
        assert_eq!(p2, p1);
        assert_eq!(write_cupt(&p2), out1);
    }

    #[test]
    fn writes_projected_sentences_losslessly() {
        let text = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/tests/data/mini.conllulex"
        ))
        .unwrap();
        let projected: Vec<ParsemeSentence> = parse_conllulex(&text, Inventory::bundled())
            .unwrap()
            .iter()
            .map(to_parseme)
            .collect();
        let reread = parse_cupt(&write_cupt(&projected)).unwrap();
        assert_eq!(reread, projected);
    }

    #[test]
    fn rejects_malformed_rows() {
        let missing_cat = "1\tgave\tgive\tVERB\t_\t_\t0\troot\t_\t_\t1\n";
        assert!(parse_cupt(missing_cat).is_err());
        let conflict = "1\tgave\tgive\tVERB\t_\t_\t0\troot\t_\t_\t1:VID\n\
                        2\tup\tup\tADP\t_\t_\t1\tcompound:prt\t_\t_\t1:IAV\n";
        assert!(parse_cupt(conflict).is_err());
        let bad_id = "1\tgave\tgive\tVERB\t_\t_\t0\troot\t_\t_\t0:VID\n";
        assert!(parse_cupt(bad_id).is_err());
        let bad_cat = "1\tgave\tgive\tVERB\t_\t_\t0\troot\t_\t_\t1:NOPE\n";
        assert!(parse_cupt(bad_cat).is_err());
        let short = "1\tgave\tgive\tVERB\t_\t_\t0\troot\t_\t_\n";
        assert!(parse_cupt(short).is_err());
        let disorder = "2\tgave\tgive\tVERB\t_\t_\t0\troot\t_\t_\t*\n";
        assert!(parse_cupt(disorder).is_err());
    }
}
