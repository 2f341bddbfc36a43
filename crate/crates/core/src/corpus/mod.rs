//! Sentence data model: tokens, lexical units, weak MWE groups, validation.

pub mod conllulex;
pub mod lexicon;

use std::collections::BTreeSet;
use std::fmt;

pub use conllulex::{parse_conllulex, parse_conllulex_lenient, write_conllulex, CorpusError};
pub use lexicon::{
    check_supersense, Inventory, Lexcat, LexiconError, Supersense, SupersenseAnno,
    SupersenseClass,
};

/// One syntactic word. `index` is 1-based sentence position; the remaining
/// columns are kept as written (`_` means unset, as in CoNLL-U).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    pub head: String,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// A token with only the columns the tagger consumes; the rest unset.
    pub fn simple(index: usize, form: &str, lemma: &str, upos: &str) -> Token {
        Token {
            index,
            form: form.to_string(),
            lemma: lemma.to_string(),
            upos: upos.to_string(),
            xpos: "_".into(),
            feats: "_".into(),
            head: "_".into(),
            deprel: "_".into(),
            deps: "_".into(),
            misc: "_".into(),
        }
    }
}

/// A single-word or strong multiword lexical unit. `token_indices` are
/// 1-based, strictly increasing, and possibly discontinuous (gappy).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexicalUnit {
    pub token_indices: Vec<usize>,
    pub lexcat: Lexcat,
    pub supersense: Option<SupersenseAnno>,
    /// LEXLEMMA as read from a file; regenerated from token lemmas when None.
    pub lexlemma: Option<String>,
    /// SMWE group number as read from a file; regenerated when None.
    pub smwe_id: Option<u32>,
}

impl LexicalUnit {
    pub fn new(
        token_indices: Vec<usize>,
        lexcat: Lexcat,
        supersense: Option<SupersenseAnno>,
    ) -> LexicalUnit {
        LexicalUnit { token_indices, lexcat, supersense, lexlemma: None, smwe_id: None }
    }

    pub fn first_token(&self) -> usize {
        *self.token_indices.first().expect("unit has at least one token")
    }

    pub fn last_token(&self) -> usize {
        *self.token_indices.last().expect("unit has at least one token")
    }

    pub fn is_multiword(&self) -> bool {
        self.token_indices.len() > 1
    }

    /// True when the unit's tokens are not one contiguous block.
    pub fn is_gappy(&self) -> bool {
        self.is_multiword()
            && (self.last_token() - self.first_token() + 1) != self.token_indices.len()
    }
}

/// A weak MWE: an ordered group of two or more whole lexical units.
/// `members` index into `Sentence::units`, ordered by first token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeakGroup {
    pub members: Vec<usize>,
    /// WMWE group number as read from a file; regenerated when None.
    pub wmwe_id: Option<u32>,
    /// WCAT column as read from a file (rarely used; kept verbatim).
    pub wcat: Option<String>,
    /// WLEMMA as read from a file; regenerated when None.
    pub wlemma: Option<String>,
}

impl WeakGroup {
    pub fn new(members: Vec<usize>) -> WeakGroup {
        WeakGroup { members, wmwe_id: None, wcat: None, wlemma: None }
    }
}

/// A fully analyzed sentence. `comments` holds the raw `#`-comment lines
/// (including `# sent_id = ...` / `# text = ...`) in file order;
/// `extra_rows` preserves range/empty-node rows opaquely, keyed by the index
/// of the token they precede (`tokens.len() + 1` = after the last token).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sentence {
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
    pub units: Vec<LexicalUnit>,
    pub weak_groups: Vec<WeakGroup>,
    pub extra_rows: Vec<(usize, String)>,
}

impl Sentence {
    pub fn new(sent_id: &str, text: &str, tokens: Vec<Token>) -> Sentence {
        Sentence {
            comments: vec![format!("# sent_id = {sent_id}"), format!("# text = {text}")],
            tokens,
            units: Vec::new(),
            weak_groups: Vec::new(),
            extra_rows: Vec::new(),
        }
    }

    fn comment_value(&self, key: &str) -> Option<&str> {
        self.comments.iter().find_map(|c| {
            let rest = c.strip_prefix('#')?.trim_start();
            let value = rest.strip_prefix(key)?.trim_start().strip_prefix('=')?;
            Some(value.trim_start())
        })
    }

    pub fn sent_id(&self) -> Option<&str> {
        self.comment_value("sent_id")
    }

    pub fn text(&self) -> Option<&str> {
        self.comment_value("text")
    }

    /// Unit index owning each token position, or None where uncovered
    /// (uncovered positions only occur in invalid sentences).
    pub fn unit_of_token(&self) -> Vec<Option<usize>> {
        let mut map = vec![None; self.tokens.len()];
        for (u, unit) in self.units.iter().enumerate() {
            for &t in &unit.token_indices {
                if t >= 1 && t <= map.len() {
                    map[t - 1] = Some(u);
                }
            }
        }
        map
    }

    /// Weak-group index of each unit, or None.
    pub fn group_of_unit(&self) -> Vec<Option<usize>> {
        let mut map = vec![None; self.units.len()];
        for (g, group) in self.weak_groups.iter().enumerate() {
            for &u in &group.members {
                if u < map.len() {
                    map[u] = Some(g);
                }
            }
        }
        map
    }

    /// All tokens of a weak group (union of its member units), sorted.
    pub fn group_tokens(&self, group: &WeakGroup) -> Vec<usize> {
        let mut toks: Vec<usize> = group
            .members
            .iter()
            .filter_map(|&u| self.units.get(u))
            .flat_map(|u| u.token_indices.iter().copied())
            .collect();
        toks.sort_unstable();
        toks
    }

    /// Sorts units by first token, remapping weak-group member indices,
    /// and sorts groups/members likewise. Canonical order makes structural
    /// equality meaningful after decode or parse.
    pub fn canonicalize(&mut self) {
        let mut order: Vec<usize> = (0..self.units.len()).collect();
        order.sort_by_key(|&u| {
            (self.units[u].first_token(), self.units[u].token_indices.clone())
        });
        let mut remap = vec![0usize; self.units.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let mut units = std::mem::take(&mut self.units);
        let mut reordered: Vec<Option<LexicalUnit>> = (0..units.len()).map(|_| None).collect();
        for (old, unit) in units.drain(..).enumerate() {
            reordered[remap[old]] = Some(unit);
        }
        self.units = reordered.into_iter().map(|u| u.expect("permutation")).collect();
        for group in &mut self.weak_groups {
            for m in &mut group.members {
                if *m < remap.len() {
                    *m = remap[*m];
                }
            }
            group.members.sort_by_key(|&u| self.units[u].first_token());
        }
        self.weak_groups.sort_by_key(|g| {
            g.members.first().map(|&u| self.units[u].first_token()).unwrap_or(usize::MAX)
        });
    }
}

/// A broken invariant: the rule's stable code, the token indices involved,
/// and a human-readable account.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: &'static str,
    pub tokens: Vec<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.rule, self.message)
    }
}

fn violation(rule: &'static str, tokens: Vec<usize>, message: String) -> Violation {
    Violation { rule, tokens, message }
}

/// Checks every structural invariant; returns all violations found (empty
/// iff the sentence is well-formed and encodable in the tagging scheme).
pub fn validate_sentence(s: &Sentence) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = s.tokens.len();

    for (i, tok) in s.tokens.iter().enumerate() {
        if tok.index != i + 1 {
            out.push(violation(
                "token-index",
                vec![i + 1],
                format!("token at position {} carries index {}", i + 1, tok.index),
            ));
        }
    }

    // Units: shape, range, ordering.
    let mut units_ok = true;
    for (u, unit) in s.units.iter().enumerate() {
        if unit.token_indices.is_empty() {
            out.push(violation("unit-empty", vec![], format!("unit #{u} has no tokens")));
            units_ok = false;
            continue;
        }
        if !unit.token_indices.windows(2).all(|w| w[0] < w[1]) {
            out.push(violation(
                "unit-order",
                unit.token_indices.clone(),
                format!("unit #{u} token indices are not strictly increasing"),
            ));
            units_ok = false;
        }
        for &t in &unit.token_indices {
            if t < 1 || t > n {
                out.push(violation(
                    "unit-range",
                    vec![t],
                    format!("unit #{u} references token {t} outside 1..={n}"),
                ));
                units_ok = false;
            }
        }
    }

    // Disjointness + coverage.
    if units_ok {
        let mut owner: Vec<Option<usize>> = vec![None; n];
        for (u, unit) in s.units.iter().enumerate() {
            for &t in &unit.token_indices {
                match owner[t - 1] {
                    Some(prev) => out.push(violation(
                        "unit-overlap",
                        vec![t],
                        format!("token {t} belongs to units #{prev} and #{u}"),
                    )),
                    None => owner[t - 1] = Some(u),
                }
            }
        }
        let uncovered: Vec<usize> =
            (1..=n).filter(|&t| owner[t - 1].is_none()).collect();
        if !uncovered.is_empty() {
            out.push(violation(
                "coverage",
                uncovered.clone(),
                format!("tokens not covered by any unit: {uncovered:?}"),
            ));
        }
    }

    // Per-unit labeling.
    for unit in &s.units {
        let toks = unit.token_indices.clone();
        if let Err(reason) = check_supersense(unit.lexcat, unit.supersense.as_ref()) {
            out.push(violation("supersense", toks.clone(), reason));
        }
        if unit.is_multiword() && unit.lexcat.single_word_only() {
            out.push(violation(
                "arity",
                toks.clone(),
                format!("lexcat {} is single-word-only but unit has {} tokens",
                    unit.lexcat, unit.token_indices.len()),
            ));
        }
        if !unit.is_multiword() && unit.lexcat.mwe_only() {
            out.push(violation(
                "arity",
                toks,
                format!("lexcat {} is MWE-only but unit is a single word", unit.lexcat),
            ));
        }
    }

    // Weak groups: size, refs, disjointness, ordering.
    let mut groups_ok = units_ok;
    let mut claimed: Vec<Option<usize>> = vec![None; s.units.len()];
    for (g, group) in s.weak_groups.iter().enumerate() {
        let mut seen = BTreeSet::new();
        for &m in &group.members {
            if m >= s.units.len() {
                out.push(violation(
                    "weak-ref",
                    vec![],
                    format!("weak group #{g} references missing unit #{m}"),
                ));
                groups_ok = false;
                continue;
            }
            if !seen.insert(m) {
                out.push(violation(
                    "weak-ref",
                    s.units[m].token_indices.clone(),
                    format!("weak group #{g} lists unit #{m} twice"),
                ));
                groups_ok = false;
            }
            match claimed[m] {
                Some(prev) if prev != g => out.push(violation(
                    "weak-overlap",
                    s.units[m].token_indices.clone(),
                    format!("unit #{m} belongs to weak groups #{prev} and #{g}"),
                )),
                _ => claimed[m] = Some(g),
            }
        }
        if seen.len() < 2 {
            out.push(violation(
                "weak-size",
                group.members.iter().filter(|&&m| m < s.units.len())
                    .map(|&m| s.units[m].first_token()).collect(),
                format!("weak group #{g} has {} member(s); needs at least 2", seen.len()),
            ));
            groups_ok = false;
        }
        if groups_ok {
            let firsts: Vec<usize> =
                group.members.iter().map(|&m| s.units[m].first_token()).collect();
            if !firsts.windows(2).all(|w| w[0] < w[1]) {
                out.push(violation(
                    "weak-order",
                    firsts,
                    format!("weak group #{g} members are not in first-token order"),
                ));
            }
        }
    }

    // Gap structure. Every expression (unit or weak-group token union) whose
    // span has holes opens gaps; the scheme supports exactly one nesting
    // level, so anything intersecting a gap must sit wholly inside it and be
    // contiguous.
    if units_ok && groups_ok && out.iter().all(|v| v.rule != "unit-overlap") {
        let mut expressions: Vec<(String, BTreeSet<usize>)> = Vec::new();
        for (u, unit) in s.units.iter().enumerate() {
            expressions.push((
                format!("unit #{u}"),
                unit.token_indices.iter().copied().collect(),
            ));
        }
        for (g, group) in s.weak_groups.iter().enumerate() {
            expressions.push((
                format!("weak group #{g}"),
                s.group_tokens(group).into_iter().collect(),
            ));
        }
        for (name_e, toks_e) in &expressions {
            let (lo, hi) = match (toks_e.iter().next(), toks_e.iter().next_back()) {
                (Some(&lo), Some(&hi)) => (lo, hi),
                _ => continue,
            };
            let gap: BTreeSet<usize> =
                (lo + 1..hi).filter(|t| !toks_e.contains(t)).collect();
            if gap.is_empty() {
                continue;
            }
            for (name_o, toks_o) in &expressions {
                if std::ptr::eq(name_e, name_o) {
                    continue;
                }
                let inside: Vec<usize> =
                    toks_o.intersection(&gap).copied().collect();
                if inside.is_empty() {
                    continue;
                }
                if !toks_o.is_subset(&gap) {
                    out.push(violation(
                        "gap-straddle",
                        inside,
                        format!("{name_o} crosses a gap boundary of {name_e}"),
                    ));
                    continue;
                }
                let (olo, ohi) = (
                    *toks_o.iter().next().unwrap(),
                    *toks_o.iter().next_back().unwrap(),
                );
                if ohi - olo + 1 != toks_o.len() {
                    out.push(violation(
                        "gap-nested",
                        toks_o.iter().copied().collect(),
                        format!("{name_o} is discontinuous inside a gap of {name_e}"),
                    ));
                }
            }
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inv() -> &'static Inventory {
        Inventory::bundled()
    }

    fn ss(label: &str) -> SupersenseAnno {
        SupersenseAnno::Single(Supersense::parse(label, inv()).unwrap())
    }

    fn toks(n: usize) -> Vec<Token> {
        (1..=n).map(|i| Token::simple(i, &format!("w{i}"), &format!("w{i}"), "NOUN")).collect()
    }

    fn covered(n: usize, units: Vec<LexicalUnit>) -> Sentence {
        let mut s = Sentence::new("test-0001", "test", toks(n));
        s.units = units;
        s
    }

    fn noun_unit(idx: Vec<usize>) -> LexicalUnit {
        LexicalUnit::new(idx, Lexcat::N, Some(ss("n.ARTIFACT")))
    }

    #[test]
    fn valid_simple_sentence() {
        let s = covered(2, vec![noun_unit(vec![1]), noun_unit(vec![2])]);
        assert_eq!(validate_sentence(&s), vec![]);
    }

    #[test]
    fn detects_overlap_and_coverage() {
        let s = covered(3, vec![noun_unit(vec![1, 2]), noun_unit(vec![2])]);
        let rules: Vec<&str> = validate_sentence(&s).iter().map(|v| v.rule).collect();
        assert!(rules.contains(&"unit-overlap"));
        assert!(rules.contains(&"coverage"));
    }

    #[test]
    fn detects_bad_supersense_and_arity() {
        // N requires a noun supersense.
        let mut s = covered(1, vec![LexicalUnit::new(vec![1], Lexcat::N, None)]);
        assert_eq!(validate_sentence(&s)[0].rule, "supersense");
        // V is single-word-only.
        s = covered(2, vec![LexicalUnit::new(vec![1, 2], Lexcat::V, Some(ss("v.motion")))]);
        assert!(validate_sentence(&s).iter().any(|v| v.rule == "arity"));
        // V.VPC.full is MWE-only.
        s = covered(
            1,
            vec![LexicalUnit::new(vec![1], Lexcat::VpcFull, Some(ss("v.motion")))],
        );
        assert!(validate_sentence(&s).iter().any(|v| v.rule == "arity"));
        // PRON.POSS with no supersense is fine; with a noun supersense is not.
        s = covered(1, vec![LexicalUnit::new(vec![1], Lexcat::PronPoss, None)]);
        assert_eq!(validate_sentence(&s), vec![]);
        s = covered(1, vec![LexicalUnit::new(vec![1], Lexcat::PronPoss, Some(ss("n.ACT")))]);
        assert_eq!(validate_sentence(&s)[0].rule, "supersense");
    }

    #[test]
    fn weak_group_rules() {
        let mut s = covered(2, vec![noun_unit(vec![1]), noun_unit(vec![2])]);
        s.weak_groups.push(WeakGroup::new(vec![0]));
        assert!(validate_sentence(&s).iter().any(|v| v.rule == "weak-size"));

        s.weak_groups[0].members = vec![0, 1];
        assert_eq!(validate_sentence(&s), vec![]);

        s.weak_groups.push(WeakGroup::new(vec![1, 0]));
        let rules: Vec<&str> = validate_sentence(&s).iter().map(|v| v.rule).collect();
        assert!(rules.contains(&"weak-overlap"));
        assert!(rules.contains(&"weak-order"));
    }

    #[test]
    fn gap_tokens_must_be_covered_and_contained() {
        // Unit {1,3} with token 2 uncovered.
        let s = covered(3, vec![noun_unit(vec![1, 3])]);
        assert!(validate_sentence(&s).iter().any(|v| v.rule == "coverage"));
        // Unit {2,4} straddles the gap of {1,3}.
        let s = covered(4, vec![noun_unit(vec![1, 3]), noun_unit(vec![2, 4])]);
        assert!(validate_sentence(&s).iter().any(|v| v.rule == "gap-straddle"));
        // Discontinuous unit inside a gap: one nesting level only.
        let s = covered(
            5,
            vec![noun_unit(vec![1, 5]), noun_unit(vec![2, 4]), noun_unit(vec![3])],
        );
        assert!(validate_sentence(&s).iter().any(|v| v.rule == "gap-nested"));
        // Proper gap: fully covered, contiguous inner units.
        let s = covered(4, vec![noun_unit(vec![1, 4]), noun_unit(vec![2]), noun_unit(vec![3])]);
        assert_eq!(validate_sentence(&s), vec![]);
    }

    #[test]
    fn weak_member_inside_other_members_gap_is_rejected() {
        // Unit A = {1,3} (gappy), unit B = {2} inside A's gap; weak group {A, B}
        // relates tokens across a gap boundary, which the tagging scheme
        // cannot express.
        let mut s = covered(3, vec![noun_unit(vec![1, 3]), noun_unit(vec![2])]);
        s.weak_groups.push(WeakGroup::new(vec![0, 1]));
        assert!(validate_sentence(&s).iter().any(|v| v.rule == "gap-straddle"));
    }

    #[test]
    fn canonicalize_orders_units_and_groups() {
        let mut s = covered(3, vec![noun_unit(vec![3]), noun_unit(vec![1]), noun_unit(vec![2])]);
        s.weak_groups.push(WeakGroup::new(vec![2, 0]));
        s.canonicalize();
        assert_eq!(s.units[0].token_indices, vec![1]);
        assert_eq!(s.units[1].token_indices, vec![2]);
        assert_eq!(s.units[2].token_indices, vec![3]);
        assert_eq!(s.weak_groups[0].members, vec![1, 2]);
        assert_eq!(validate_sentence(&s), vec![]);
    }

    #[test]
    fn metadata_accessors() {
        let s = Sentence::new("reviews-086839-0003", "We took it", toks(0));
        assert_eq!(s.sent_id(), Some("reviews-086839-0003"));
        assert_eq!(s.text(), Some("We took it"));
    }
}
