//! The 19-column `.conllulex` format: CoNLL-U plus lexical-semantic columns
//! SMWE, LEXCAT, LEXLEMMA, SS, SS2, WMWE, WCAT, WLEMMA, LEXTAG.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::corpus::{
    validate_sentence, Inventory, Lexcat, LexicalUnit, Sentence, Supersense, SupersenseAnno,
    SupersenseClass, Token, Violation, WeakGroup,
};
use crate::tagcodec::{encode, format_tag};

pub const COLUMNS: usize = 19;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("sentence `{sent_id}` is not well-formed: {}", first(.violations))]
    Invalid { sent_id: String, violations: Vec<Violation> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn first(violations: &[Violation]) -> String {
    match violations {
        [] => "unknown violation".to_string(),
        [v] => v.to_string(),
        [v, rest @ ..] => format!("{v} (+{} more)", rest.len()),
    }
}

impl CorpusError {
    fn format(line: usize, message: impl Into<String>) -> CorpusError {
        CorpusError::Format { line, message: message.into() }
    }
}

fn opt(col: &str) -> Option<&str> {
    if col == "_" { None } else { Some(col) }
}

fn parse_mwe_ref(col: &str, line: usize, name: &str) -> Result<Option<(u32, u32)>, CorpusError> {
    match opt(col) {
        None => Ok(None),
        Some(v) => {
            let (k, j) = v.split_once(':').ok_or_else(|| {
                CorpusError::format(line, format!("{name} column `{v}` is not `k:j`"))
            })?;
            let parse = |s: &str| {
                s.parse::<u32>().map_err(|_| {
                    CorpusError::format(line, format!("{name} column `{v}` is not `k:j`"))
                })
            };
            Ok(Some((parse(k)?, parse(j)?)))
        }
    }
}

struct LexRow {
    index: usize,
    line: usize,
    smwe: Option<(u32, u32)>,
    lexcat: Option<String>,
    lexlemma: Option<String>,
    ss: Option<String>,
    ss2: Option<String>,
    wmwe: Option<(u32, u32)>,
    wcat: Option<String>,
    wlemma: Option<String>,
    lextag: Option<String>,
}

/// Parses CONLLULEX text into validated sentences (canonical unit order).
/// Range and empty-node rows are preserved opaquely; the LEXTAG column is
/// cross-checked against the tags implied by the structural columns.
pub fn parse_conllulex(text: &str, inv: &Inventory) -> Result<Vec<Sentence>, CorpusError> {
    parse_internal(text, inv, true).map(|(sentences, _)| sentences)
}

/// As [`parse_conllulex`], but structural violations are collected per
/// sentence instead of stopping the parse (the offending sentences are
/// dropped from the result). Malformed rows still fail hard.
pub fn parse_conllulex_lenient(
    text: &str,
    inv: &Inventory,
) -> Result<(Vec<Sentence>, Vec<(String, Vec<Violation>)>), CorpusError> {
    parse_internal(text, inv, false)
}

type Faults = Vec<(String, Vec<Violation>)>;

fn parse_internal(
    text: &str,
    inv: &Inventory,
    stop_on_invalid: bool,
) -> Result<(Vec<Sentence>, Faults), CorpusError> {
    let mut sentences = Vec::new();
    let mut faults: Faults = Vec::new();
    let mut comments: Vec<String> = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut rows: Vec<LexRow> = Vec::new();
    let mut extra_rows: Vec<(usize, String)> = Vec::new();
    let mut block_start_line = 1;

    let flush = |comments: &mut Vec<String>,
                     tokens: &mut Vec<Token>,
                     rows: &mut Vec<LexRow>,
                     extra_rows: &mut Vec<(usize, String)>,
                     sentences: &mut Vec<Sentence>,
                     faults: &mut Faults,
                     block_line: usize|
     -> Result<(), CorpusError> {
        if comments.is_empty() && tokens.is_empty() {
            return Ok(());
        }
        if tokens.is_empty() {
            return Err(CorpusError::format(block_line, "comment block with no token rows"));
        }
        match build_sentence(
            std::mem::take(comments),
            std::mem::take(tokens),
            std::mem::take(rows),
            std::mem::take(extra_rows),
            inv,
        ) {
            Ok(sentence) => sentences.push(sentence),
            Err(CorpusError::Invalid { sent_id, violations }) if !stop_on_invalid => {
                faults.push((sent_id, violations));
            }
            Err(e) => return Err(e),
        }
        Ok(())
    };

    for (line0, raw) in text.lines().enumerate() {
        let line = line0 + 1;
        let row = raw.strip_suffix('\r').unwrap_or(raw);
        if row.is_empty() {
            flush(&mut comments, &mut tokens, &mut rows, &mut extra_rows, &mut sentences,
                  &mut faults, block_start_line)?;
            block_start_line = line + 1;
            continue;
        }
        if row.starts_with('#') {
            comments.push(row.to_string());
            continue;
        }
        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() != COLUMNS {
            return Err(CorpusError::format(
                line,
                format!("expected {COLUMNS} tab-separated columns, found {}", cols.len()),
            ));
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            extra_rows.push((tokens.len() + 1, row.to_string()));
            continue;
        }
        let index: usize = id
            .parse()
            .map_err(|_| CorpusError::format(line, format!("bad token id `{id}`")))?;
        if index != tokens.len() + 1 {
            return Err(CorpusError::format(
                line,
                format!("token id {id} out of order (expected {})", tokens.len() + 1),
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
        rows.push(LexRow {
            index,
            line,
            smwe: parse_mwe_ref(cols[10], line, "SMWE")?,
            lexcat: opt(cols[11]).map(str::to_string),
            lexlemma: opt(cols[12]).map(str::to_string),
            ss: opt(cols[13]).map(str::to_string),
            ss2: opt(cols[14]).map(str::to_string),
            wmwe: parse_mwe_ref(cols[15], line, "WMWE")?,
            wcat: opt(cols[16]).map(str::to_string),
            wlemma: opt(cols[17]).map(str::to_string),
            lextag: opt(cols[18]).map(str::to_string),
        });
    }
    flush(&mut comments, &mut tokens, &mut rows, &mut extra_rows, &mut sentences,
          &mut faults, block_start_line)?;
    Ok((sentences, faults))
}

fn parse_supersense_cols(
    row: &LexRow,
    inv: &Inventory,
) -> Result<Option<SupersenseAnno>, CorpusError> {
    let bad = |msg: String| CorpusError::format(row.line, msg);
    match (&row.ss, &row.ss2) {
        (None, None) => Ok(None),
        (None, Some(ss2)) => Err(bad(format!("SS2 `{ss2}` without SS"))),
        (Some(ss), None) => {
            let ss = Supersense::parse(ss, inv).map_err(|e| bad(e.to_string()))?;
            Ok(Some(SupersenseAnno::Single(ss)))
        }
        (Some(ss), Some(ss2)) => {
            let role = Supersense::parse(ss, inv).map_err(|e| bad(e.to_string()))?;
            let function = Supersense::parse(ss2, inv).map_err(|e| bad(e.to_string()))?;
            SupersenseAnno::snacs(role, function)
                .map(Some)
                .map_err(|e| bad(e.to_string()))
        }
    }
}

fn build_sentence(
    comments: Vec<String>,
    tokens: Vec<Token>,
    rows: Vec<LexRow>,
    extra_rows: Vec<(usize, String)>,
    inv: &Inventory,
) -> Result<Sentence, CorpusError> {
    let mut units: Vec<LexicalUnit> = Vec::new();

    // Strong units: single-token rows plus SMWE groups.
    let mut smwe_groups: BTreeMap<u32, Vec<&LexRow>> = BTreeMap::new();
    for row in &rows {
        match row.smwe {
            Some((k, _)) => smwe_groups.entry(k).or_default().push(row),
            None => {
                let line = row.line;
                let lexcat_str = row.lexcat.as_deref().ok_or_else(|| {
                    CorpusError::format(line, "token belongs to no unit (no LEXCAT, no SMWE)")
                })?;
                let lexcat = Lexcat::parse(lexcat_str)
                    .map_err(|e| CorpusError::format(line, e.to_string()))?;
                let ss = parse_supersense_cols(row, inv)?;
                let mut unit = LexicalUnit::new(vec![row.index], lexcat, ss);
                unit.lexlemma = row.lexlemma.clone();
                units.push(unit);
            }
        }
    }
    for (k, group) in &smwe_groups {
        let mut group: Vec<&&LexRow> = group.iter().collect();
        group.sort_by_key(|r| r.index);
        for (pos, row) in group.iter().enumerate() {
            let j = row.smwe.expect("grouped by smwe").1;
            if j as usize != pos + 1 {
                return Err(CorpusError::format(
                    row.line,
                    format!("SMWE {k}:{j} out of order (expected {k}:{})", pos + 1),
                ));
            }
        }
        let head = group[0];
        let lexcat_str = head.lexcat.as_deref().ok_or_else(|| {
            CorpusError::format(head.line, format!("SMWE {k} has no LEXCAT on its first token"))
        })?;
        let lexcat = Lexcat::parse(lexcat_str)
            .map_err(|e| CorpusError::format(head.line, e.to_string()))?;
        for row in &group[1..] {
            if row.lexcat.is_some() || row.ss.is_some() {
                return Err(CorpusError::format(
                    row.line,
                    format!("SMWE {k} continuation token carries labels"),
                ));
            }
        }
        let ss = parse_supersense_cols(head, inv)?;
        let mut unit =
            LexicalUnit::new(group.iter().map(|r| r.index).collect(), lexcat, ss);
        unit.lexlemma = head.lexlemma.clone();
        unit.smwe_id = Some(*k);
        units.push(unit);
    }

    units.sort_by_key(|u| u.first_token());
    let mut unit_of_token: BTreeMap<usize, usize> = BTreeMap::new();
    for (u, unit) in units.iter().enumerate() {
        for &t in &unit.token_indices {
            unit_of_token.insert(t, u);
        }
    }

    // Weak groups: whole units, keyed by token membership.
    let mut weak_groups: Vec<WeakGroup> = Vec::new();
    let mut wmwe_groups: BTreeMap<u32, Vec<&LexRow>> = BTreeMap::new();
    for row in &rows {
        if let Some((k, _)) = row.wmwe {
            wmwe_groups.entry(k).or_default().push(row);
        }
    }
    for (k, group) in &wmwe_groups {
        let mut group: Vec<&&LexRow> = group.iter().collect();
        group.sort_by_key(|r| r.index);
        for (pos, row) in group.iter().enumerate() {
            let j = row.wmwe.expect("grouped by wmwe").1;
            if j as usize != pos + 1 {
                return Err(CorpusError::format(
                    row.line,
                    format!("WMWE {k}:{j} out of order (expected {k}:{})", pos + 1),
                ));
            }
        }
        let mut members: Vec<usize> = Vec::new();
        for row in &group {
            let u = *unit_of_token.get(&row.index).expect("all tokens have units");
            if members.last() != Some(&u) {
                if members.contains(&u) {
                    return Err(CorpusError::format(
                        row.line,
                        format!("WMWE {k} token order interleaves units"),
                    ));
                }
                members.push(u);
            }
        }
        // Every member unit must be wholly inside the group.
        let group_tokens: Vec<usize> = group.iter().map(|r| r.index).collect();
        for &u in &members {
            for &t in &units[u].token_indices {
                if !group_tokens.contains(&t) {
                    return Err(CorpusError::format(
                        group[0].line,
                        format!("WMWE {k} includes only part of a strong unit"),
                    ));
                }
            }
        }
        if members.len() < 2 {
            return Err(CorpusError::format(
                group[0].line,
                format!("WMWE {k} has fewer than 2 member units"),
            ));
        }
        let head = group[0];
        let mut wg = WeakGroup::new(members);
        wg.wmwe_id = Some(*k);
        wg.wcat = head.wcat.clone();
        wg.wlemma = head.wlemma.clone();
        for row in &group[1..] {
            if row.wcat.is_some() || row.wlemma.is_some() {
                return Err(CorpusError::format(
                    row.line,
                    format!("WMWE {k} continuation token carries WCAT/WLEMMA"),
                ));
            }
        }
        weak_groups.push(wg);
    }

    let mut sentence = Sentence { comments, tokens, units, weak_groups, extra_rows };
    sentence.canonicalize();

    let violations = validate_sentence(&sentence);
    if !violations.is_empty() {
        return Err(CorpusError::Invalid {
            sent_id: sentence.sent_id().unwrap_or("<no sent_id>").to_string(),
            violations,
        });
    }

    // LEXTAG cross-check: the tag column must agree with the structural
    // columns it mirrors.
    let tags = encode(&sentence).map_err(|e| CorpusError::Format {
        line: rows.first().map(|r| r.line).unwrap_or(0),
        message: e.to_string(),
    })?;
    for (row, tag) in rows.iter().zip(&tags) {
        if let Some(found) = &row.lextag {
            let expected = format_tag(tag);
            if *found != expected {
                return Err(CorpusError::format(
                    row.line,
                    format!("LEXTAG `{found}` does not match structure (expected `{expected}`)"),
                ));
            }
        }
    }

    Ok(sentence)
}

pub fn parse_conllulex_file(
    path: impl AsRef<Path>,
    inv: &Inventory,
) -> Result<Vec<Sentence>, CorpusError> {
    let text = fs::read_to_string(path)?;
    parse_conllulex(&text, inv)
}

fn joined_lemmas(s: &Sentence, token_indices: &[usize]) -> String {
    token_indices
        .iter()
        .map(|&t| s.tokens[t - 1].lemma.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Expression numbering for the SMWE/WMWE columns. Stored ids are reused
/// when every expression has one; otherwise all expressions are renumbered
/// by first token (strong before weak on ties).
fn mwe_numbers(s: &Sentence) -> (Vec<Option<u32>>, Vec<Option<u32>>) {
    let mut strong: Vec<Option<u32>> = s
        .units
        .iter()
        .map(|u| if u.is_multiword() { u.smwe_id } else { None })
        .collect();
    let mut weak: Vec<Option<u32>> = s.weak_groups.iter().map(|g| g.wmwe_id).collect();
    let all_present = s
        .units
        .iter()
        .filter(|u| u.is_multiword())
        .all(|u| u.smwe_id.is_some())
        && s.weak_groups.iter().all(|g| g.wmwe_id.is_some());
    if !all_present {
        let mut exprs: Vec<(usize, bool, usize)> = Vec::new(); // (first token, is_weak, idx)
        for (u, unit) in s.units.iter().enumerate() {
            if unit.is_multiword() {
                exprs.push((unit.first_token(), false, u));
            }
        }
        for (g, group) in s.weak_groups.iter().enumerate() {
            let lo = s.group_tokens(group).first().copied().unwrap_or(usize::MAX);
            exprs.push((lo, true, g));
        }
        exprs.sort();
        for (n, (_, is_weak, idx)) in exprs.into_iter().enumerate() {
            if is_weak {
                weak[idx] = Some(n as u32 + 1);
            } else {
                strong[idx] = Some(n as u32 + 1);
            }
        }
    }
    (strong, weak)
}

/// Renders sentences in the 19-column format. Lexical columns are
/// regenerated from the structure; comments and preserved rows verbatim.
pub fn write_conllulex(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        for c in &s.comments {
            out.push_str(c);
            out.push('\n');
        }
        let tags = encode(s).expect("write requires a valid sentence");
        let unit_of = s.unit_of_token();
        let group_of = s.group_of_unit();
        let (strong_ids, weak_ids) = mwe_numbers(s);

        // Per-token weak column entries.
        let mut wmwe_col: Vec<Option<(u32, u32)>> = vec![None; s.tokens.len()];
        let mut w_first: Vec<usize> = Vec::new();
        for (g, group) in s.weak_groups.iter().enumerate() {
            let toks = s.group_tokens(group);
            w_first.push(toks.first().copied().unwrap_or(0));
            for (j, &t) in toks.iter().enumerate() {
                wmwe_col[t - 1] = Some((weak_ids[g].expect("numbered"), j as u32 + 1));
            }
        }

        let mut extra = s.extra_rows.iter().peekable();
        for (i, tok) in s.tokens.iter().enumerate() {
            while let Some(&&(anchor, ref raw)) = extra.peek() {
                if anchor <= i + 1 {
                    out.push_str(raw);
                    out.push('\n');
                    extra.next();
                } else {
                    break;
                }
            }
            let t = i + 1;
            let u = unit_of[i].expect("write requires full coverage");
            let unit = &s.units[u];
            let first_of_unit = unit.first_token() == t;

            let smwe = if unit.is_multiword() {
                let j = unit.token_indices.iter().position(|&x| x == t).unwrap() + 1;
                format!("{}:{}", strong_ids[u].expect("numbered"), j)
            } else {
                "_".to_string()
            };
            let (lexcat, lexlemma, ss, ss2) = if first_of_unit {
                let lexlemma = unit
                    .lexlemma
                    .clone()
                    .unwrap_or_else(|| joined_lemmas(s, &unit.token_indices));
                let (ss, ss2) = match &unit.supersense {
                    None => ("_".to_string(), "_".to_string()),
                    Some(anno) => match anno.class() {
                        SupersenseClass::Adposition => {
                            (anno.role().to_string(), anno.function().to_string())
                        }
                        _ => (anno.role().to_string(), "_".to_string()),
                    },
                };
                (unit.lexcat.to_string(), lexlemma, ss, ss2)
            } else {
                ("_".into(), "_".into(), "_".into(), "_".into())
            };
            let (wmwe, wcat, wlemma) = match (wmwe_col[i], group_of[u]) {
                (Some((k, j)), Some(g)) => {
                    let group = &s.weak_groups[g];
                    if w_first[g] == t {
                        let wlemma = group
                            .wlemma
                            .clone()
                            .unwrap_or_else(|| joined_lemmas(s, &s.group_tokens(group)));
                        (
                            format!("{k}:{j}"),
                            group.wcat.clone().unwrap_or_else(|| "_".into()),
                            wlemma,
                        )
                    } else {
                        (format!("{k}:{j}"), "_".into(), "_".into())
                    }
                }
                (Some((k, j)), None) => (format!("{k}:{j}"), "_".into(), "_".into()),
                (None, _) => ("_".into(), "_".into(), "_".into()),
            };
            let lextag = format_tag(&tags[i]);
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                t, tok.form, tok.lemma, tok.upos, tok.xpos, tok.feats, tok.head, tok.deprel,
                tok.deps, tok.misc, smwe, lexcat, lexlemma, ss, ss2, wmwe, wcat, wlemma, lextag
            )
            .expect("writing to String cannot fail");
        }
        for (_, raw) in extra {
            out.push_str(raw);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

pub fn write_conllulex_file(
    path: impl AsRef<Path>,
    sentences: &[Sentence],
) -> Result<(), CorpusError> {
    fs::write(path, write_conllulex(sentences))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const VEHICLE: &str = "\
# sent_id = reviews-086839-0003
# text = We took our vehicle in for a repair to the air conditioning
1\tWe\twe\tPRON\tPRP\tCase=Nom|Number=Plur|Person=1|PronType=Prs\t2\tnsubj\t2:nsubj\t_\t_\tPRON\twe\t_\t_\t_\t_\t_\tO-PRON
2\ttook\ttake\tVERB\tVBD\tMood=Ind|Tense=Past|VerbForm=Fin\t0\troot\t0:root\t_\t1:1\tV.VPC.full\ttake in\tv.Motion\t_\t_\t_\t_\tB-V.VPC.full-v.Motion
3\tour\tour\tPRON\tPRP$\tNumber=Plur|Person=1|Poss=Yes|PronType=Prs\t4\tnmod:poss\t4:nmod:poss\t_\t_\tPRON.POSS\tour\t_\t_\t_\t_\t_\to-PRON.POSS
4\tvehicle\tvehicle\tNOUN\tNN\tNumber=Sing\t2\tobj\t2:obj\t_\t_\tN\tvehicle\tn.ARTIFACT\t_\t_\t_\t_\to-N-n.ARTIFACT
5\tin\tin\tADP\tRP\t_\t2\tcompound:prt\t2:compound:prt\t_\t1:2\t_\t_\t_\t_\t_\t_\t_\tI_
6\tfor\tfor\tADP\tIN\t_\t8\tcase\t8:case\t_\t_\tP\tfor\tp.Purpose\tp.Purpose\t_\t_\t_\tO-P-p.Purpose
7\ta\ta\tDET\tDT\tDefinite=Ind|PronType=Art\t8\tdet\t8:det\t_\t_\tDET\ta\t_\t_\t_\t_\t_\tO-DET
8\trepair\trepair\tNOUN\tNN\tNumber=Sing\t2\tobl\t2:obl:for\t_\t_\tN\trepair\tn.ACT\t_\t_\t_\t_\tO-N-n.ACT
9\tto\tto\tADP\tIN\t_\t12\tcase\t12:case\t_\t_\tP\tto\tp.Theme\tp.Theme\t_\t_\t_\tO-P-p.Theme
10\tthe\tthe\tDET\tDT\tDefinite=Def|PronType=Art\t12\tdet\t12:det\t_\t_\tDET\tthe\t_\t_\t_\t_\t_\tO-DET
11\tair\tair\tNOUN\tNN\tNumber=Sing\t12\tcompound\t12:compound\t_\t2:1\tN\tair conditioning\tn.ARTIFACT\t_\t_\t_\t_\tB-N-n.ARTIFACT
12\tconditioning\tconditioning\tNOUN\tNN\tNumber=Sing\t8\tnmod\t8:nmod:to\t_\t2:2\t_\t_\t_\t_\t_\t_\t_\tI_
";

    const WEAK: &str = "\
# sent_id = reviews-000001-0001
# text = I highly recommended this place .
1\tI\ti\tPRON\tPRP\t_\t3\tnsubj\t3:nsubj\t_\t_\tPRON\ti\t_\t_\t_\t_\t_\tO-PRON
2\thighly\thighly\tADV\tRB\t_\t3\tadvmod\t3:advmod\t_\t_\tADV\thighly\t_\t_\t1:1\t_\thighly recommend\tB-ADV
3\trecommended\trecommend\tVERB\tVBD\t_\t0\troot\t0:root\t_\t_\tV\trecommend\tv.communication\t_\t1:2\t_\t_\tI~-V-v.communication
4\tthis\tthis\tDET\tDT\t_\t5\tdet\t5:det\t_\t_\tDET\tthis\t_\t_\t_\t_\t_\tO-DET
5\tplace\tplace\tNOUN\tNN\t_\t3\tobj\t3:obj\t_\t_\tN\tplace\tn.GROUP\t_\t_\t_\t_\tO-N-n.GROUP
6\t.\t.\tPUNCT\t.\t_\t3\tpunct\t3:punct\t_\t_\tPUNCT\t.\t_\t_\t_\t_\t_\tO-PUNCT
";

    fn inv() -> &'static Inventory {
        Inventory::bundled()
    }

    #[test]
    fn parses_vehicle_sentence() {
        let sentences = parse_conllulex(VEHICLE, inv()).unwrap();
        assert_eq!(sentences.len(), 1);
        let s = &sentences[0];
        assert_eq!(s.sent_id(), Some("reviews-086839-0003"));
        assert_eq!(s.tokens.len(), 12);
        assert_eq!(s.units.len(), 10);
        assert_eq!(s.weak_groups.len(), 0);
        let vpc = s.units.iter().find(|u| u.token_indices == vec![2, 5]).unwrap();
        assert_eq!(vpc.lexcat, Lexcat::VpcFull);
        assert_eq!(
            vpc.supersense.as_ref().unwrap().role().label(),
            "v.Motion"
        );
        assert!(vpc.is_gappy());
        let air = s.units.iter().find(|u| u.token_indices == vec![11, 12]).unwrap();
        assert_eq!(air.lexlemma.as_deref(), Some("air conditioning"));
    }

    #[test]
    fn round_trips_bytes() {
        for text in [VEHICLE, WEAK] {
            let sentences = parse_conllulex(text, inv()).unwrap();
            let written = write_conllulex(&sentences);
            assert_eq!(written.trim_end_matches('\n'), text.trim_end_matches('\n'));
            // And the round trip is stable.
            let reparsed = parse_conllulex(&written, inv()).unwrap();
            assert_eq!(reparsed, sentences);
        }
    }

    #[test]
    fn parses_weak_group() {
        let sentences = parse_conllulex(WEAK, inv()).unwrap();
        let s = &sentences[0];
        assert_eq!(s.weak_groups.len(), 1);
        let group = &s.weak_groups[0];
        assert_eq!(group.wlemma.as_deref(), Some("highly recommend"));
        let members: Vec<&[usize]> = group
            .members
            .iter()
            .map(|&u| s.units[u].token_indices.as_slice())
            .collect();
        assert_eq!(members, vec![&[2][..], &[3][..]]);
    }

    #[test]
    fn regenerates_annotation_columns() {
        // Strip ids and derived columns; the writer must rebuild them.
        let mut sentences = parse_conllulex(VEHICLE, inv()).unwrap();
        for u in &mut sentences[0].units {
            u.lexlemma = None;
            u.smwe_id = None;
        }
        let written = write_conllulex(&sentences);
        assert_eq!(written.trim_end_matches('\n'), VEHICLE.trim_end_matches('\n'));
    }

    #[test]
    fn preserves_range_rows_and_unknown_comments() {
        let text = "\
# sent_id = x-1
# text = don't go
# genre = reviews
1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\t_\t_\t_\t_\t_\t_\t_\t_\t_
1\tdo\tdo\tAUX\tVBP\t_\t3\taux\t3:aux\t_\t_\tAUX\tdo\t_\t_\t_\t_\t_\tO-AUX
2\tn't\tnot\tPART\tRB\t_\t3\tadvmod\t3:advmod\t_\t_\tADV\tnot\t_\t_\t_\t_\t_\tO-ADV
3\tgo\tgo\tVERB\tVB\t_\t0\troot\t0:root\t_\t_\tV\tgo\tv.motion\t_\t_\t_\t_\tO-V-v.motion
";
        let sentences = parse_conllulex(text, inv()).unwrap();
        assert_eq!(sentences[0].extra_rows.len(), 1);
        assert_eq!(sentences[0].extra_rows[0].0, 1);
        assert_eq!(sentences[0].comments.len(), 3);
        let written = write_conllulex(&sentences);
        assert_eq!(written.trim_end_matches('\n'), text.trim_end_matches('\n'));
    }

    #[test]
    fn rejects_malformed_input() {
        // Wrong column count.
        let bad = "1\tWe\twe\tPRON\n";
        assert!(matches!(
            parse_conllulex(bad, inv()),
            Err(CorpusError::Format { line: 1, .. })
        ));
        // LEXTAG inconsistent with the structural columns.
        let mismatch = VEHICLE.replace("O-P-p.Purpose", "O-P-p.Theme");
        match parse_conllulex(&mismatch, inv()) {
            Err(CorpusError::Format { line, message }) => {
                assert_eq!(line, 8);
                assert!(message.contains("LEXTAG"), "{message}");
            }
            other => panic!("expected LEXTAG mismatch, got {other:?}"),
        }
        // Token out of order.
        let reordered = VEHICLE.replace("\n2\ttook", "\n3\ttook");
        assert!(parse_conllulex(&reordered, inv()).is_err());
        // Structural violation: N without supersense.
        let no_ss = WEAK.replace(
            "\tN\tplace\tn.GROUP\t_\t_\t_\t_\tO-N-n.GROUP",
            "\tN\tplace\t_\t_\t_\t_\t_\tO-N",
        );
        assert!(matches!(
            parse_conllulex(&no_ss, inv()),
            Err(CorpusError::Invalid { .. })
        ));
    }

    #[test]
    fn lenient_parse_collects_violations_and_keeps_going() {
        let no_ss = WEAK.replace(
            "\tN\tplace\tn.GROUP\t_\t_\t_\t_\tO-N-n.GROUP",
            "\tN\tplace\t_\t_\t_\t_\t_\tO-N",
        );
        let both = format!("{VEHICLE}\n{no_ss}");
        let (sentences, faults) = parse_conllulex_lenient(&both, inv()).unwrap();
        assert_eq!(sentences.len(), 1);
        assert_eq!(faults.len(), 1);
        assert!(!faults[0].1.is_empty());
        // Clean input: no faults, identical to the strict parse.
        let (clean, none) = parse_conllulex_lenient(VEHICLE, inv()).unwrap();
        assert!(none.is_empty());
        assert_eq!(clean, parse_conllulex(VEHICLE, inv()).unwrap());
        // Malformed rows still fail hard.
        assert!(parse_conllulex_lenient("1\tWe\twe\tPRON\n", inv()).is_err());
    }

    #[test]
    fn weak_group_must_contain_whole_units() {
        // Mark only the first token of the strong MWE as weak-group member.
        let bad = VEHICLE
            .replace(
                "\t1:1\tV.VPC.full\ttake in\tv.Motion\t_\t_\t_\t_\tB-V.VPC.full-v.Motion",
                "\t1:1\tV.VPC.full\ttake in\tv.Motion\t_\t1:1\t_\ttake for\tB-V.VPC.full-v.Motion",
            )
            .replace(
                "\tP\tfor\tp.Purpose\tp.Purpose\t_\t_\t_\tO-P-p.Purpose",
                "\tP\tfor\tp.Purpose\tp.Purpose\t1:2\t_\t_\tO-P-p.Purpose",
            );
        let err = parse_conllulex(&bad, inv()).unwrap_err();
        assert!(err.to_string().contains("part of a strong unit"), "{err}");
    }
}
