//! Scorers: tag accuracy, labeled-unit and link-based MWE precision/recall,
//! and the PARSEME and DiMSUM schemes.
//!
//! Link matching is asymmetric — a predicted link can connect tokens the
//! gold groups together without any single gold link being recovered — so
//! `Counts` carries separate numerators for the precision and recall sides.
//! Averaged handlings make every field potentially fractional.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::convert::{dimsum_tags, DimsumSentence, ParsemeSentence};
use crate::corpus::{Sentence, SupersenseAnno, SupersenseClass, Token};
use crate::tagcodec::{encode, CodecError, LexTag};

/// Hard cap on either side of the one-to-one matching search in
/// token-based PARSEME scoring (the subset table is `2^n`).
pub const ASSIGNMENT_LIMIT: usize = 20;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("gold has {gold} sentences, prediction has {pred}")]
    CorpusSize { gold: usize, pred: usize },
    #[error("sentence {index}: {message}")]
    Alignment { index: usize, message: String },
    #[error("sentence {index}: {count} expressions exceed the one-to-one matching limit")]
    TooManyExpressions { index: usize, count: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Match counts for one metric. For exact-match metrics the two numerators
/// coincide; for link metrics they may differ.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Counts {
    pub matched_pred: f64,
    pub matched_gold: f64,
    pub predicted: f64,
    pub gold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f: f64,
}

impl Counts {
    /// Counts for a metric whose matches are symmetric.
    pub fn exact(matched: f64, predicted: f64, gold: f64) -> Counts {
        Counts { matched_pred: matched, matched_gold: matched, predicted, gold }
    }

    /// Accuracy rendered as degenerate counts: both denominators are the
    /// token total, so P = R = F = accuracy.
    pub fn accuracy(correct: usize, total: usize) -> Counts {
        Counts::exact(correct as f64, total as f64, total as f64)
    }

    /// An empty category is scored perfect only when both sides are empty;
    /// predicting nothing against a nonempty gold (or anything against an
    /// empty gold) earns zero.
    pub fn precision(&self) -> f64 {
        if self.predicted == 0.0 {
            if self.gold == 0.0 { 1.0 } else { 0.0 }
        } else {
            self.matched_pred / self.predicted
        }
    }

    pub fn recall(&self) -> f64 {
        if self.gold == 0.0 {
            if self.predicted == 0.0 { 1.0 } else { 0.0 }
        } else {
            self.matched_gold / self.gold
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) }
    }

    pub fn prf(&self) -> Prf {
        Prf { p: self.precision(), r: self.recall(), f: self.f1() }
    }

    pub fn mean(a: Counts, b: Counts) -> Counts {
        Counts {
            matched_pred: (a.matched_pred + b.matched_pred) / 2.0,
            matched_gold: (a.matched_gold + b.matched_gold) / 2.0,
            predicted: (a.predicted + b.predicted) / 2.0,
            gold: (a.gold + b.gold) / 2.0,
        }
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, rhs: Counts) {
        self.matched_pred += rhs.matched_pred;
        self.matched_gold += rhs.matched_gold;
        self.predicted += rhs.predicted;
        self.gold += rhs.gold;
    }
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(mut self, rhs: Counts) -> Counts {
        self += rhs;
        self
    }
}

fn check_aligned<T>(
    gold: &[T],
    pred: &[T],
    tokens: impl Fn(&T) -> &[Token],
) -> Result<(), MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::CorpusSize { gold: gold.len(), pred: pred.len() });
    }
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        let (gt, pt) = (tokens(g), tokens(p));
        if gt.len() != pt.len() {
            return Err(MetricsError::Alignment {
                index: i + 1,
                message: format!("gold has {} tokens, prediction has {}", gt.len(), pt.len()),
            });
        }
        if let Some((j, (a, b))) =
            gt.iter().zip(pt).enumerate().find(|(_, (a, b))| a.form != b.form)
        {
            return Err(MetricsError::Alignment {
                index: i + 1,
                message: format!("token {}: form `{}` != `{}`", j + 1, a.form, b.form),
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- tags --

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagAccuracyMode {
    /// Whole tag: flag, lexcat, supersense.
    Full,
    /// Ignore the lexcat; compare flag and supersense.
    DropLexcat,
    /// Ignore the supersense; compare flag and lexcat.
    DropSupersense,
}

fn tags_agree(a: &LexTag, b: &LexTag, mode: TagAccuracyMode) -> bool {
    match mode {
        TagAccuracyMode::Full => a == b,
        TagAccuracyMode::DropLexcat => a.flag == b.flag && a.supersense == b.supersense,
        TagAccuracyMode::DropSupersense => a.flag == b.flag && a.lexcat == b.lexcat,
    }
}

/// Token-level accuracy in tag space, under the given comparison mode.
pub fn tag_accuracy(
    gold: &[Sentence],
    pred: &[Sentence],
    mode: TagAccuracyMode,
) -> Result<Counts, MetricsError> {
    check_aligned(gold, pred, |s| &s.tokens[..])?;
    let mut correct = 0;
    let mut total = 0;
    for (g, p) in gold.iter().zip(pred) {
        let gt = encode(g)?;
        let pt = encode(p)?;
        correct += gt.iter().zip(&pt).filter(|(a, b)| tags_agree(a, b, mode)).count();
        total += gt.len();
    }
    Ok(Counts::accuracy(correct, total))
}

// --------------------------------------------------------------- units --

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupersenseFilter {
    Noun,
    Verb,
    Snacs,
}

/// How adposition labels are compared. Irrelevant for noun/verb filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnacsLabelMode {
    /// The whole construal (`p.Role|p.Function`, collapsed when equal).
    Full,
    /// Role reading only.
    RoleOnly,
    /// Function reading only.
    FunctionOnly,
}

fn unit_label(
    anno: &SupersenseAnno,
    filter: SupersenseFilter,
    mode: SnacsLabelMode,
) -> Option<String> {
    let keep = match filter {
        SupersenseFilter::Noun => anno.class() == SupersenseClass::Noun,
        SupersenseFilter::Verb => anno.class() == SupersenseClass::Verb,
        SupersenseFilter::Snacs => anno.class() == SupersenseClass::Adposition,
    };
    if !keep {
        return None;
    }
    Some(match (filter, mode) {
        (SupersenseFilter::Snacs, SnacsLabelMode::RoleOnly) => anno.role().label().to_string(),
        (SupersenseFilter::Snacs, SnacsLabelMode::FunctionOnly) => {
            anno.function().label().to_string()
        }
        _ => anno.to_string(),
    })
}

/// Exact-match PRF over labeled units: a predicted unit scores when a gold
/// unit has the identical token set and the same label under `mode`.
pub fn unit_labeled_prf(
    gold: &[Sentence],
    pred: &[Sentence],
    filter: SupersenseFilter,
    mode: SnacsLabelMode,
) -> Result<Counts, MetricsError> {
    check_aligned(gold, pred, |s| &s.tokens[..])?;
    let mut counts = Counts::default();
    for (g, p) in gold.iter().zip(pred) {
        let select = |s: &Sentence| -> Vec<(Vec<usize>, String)> {
            s.units
                .iter()
                .filter_map(|u| {
                    let label = unit_label(u.supersense.as_ref()?, filter, mode)?;
                    Some((u.token_indices.clone(), label))
                })
                .collect()
        };
        let gold_units = select(g);
        let pred_units = select(p);
        let gold_map: HashMap<&[usize], &str> =
            gold_units.iter().map(|(t, l)| (&t[..], &l[..])).collect();
        let matched = pred_units
            .iter()
            .filter(|(t, l)| gold_map.get(&t[..]) == Some(&&l[..]))
            .count();
        counts += Counts::exact(matched as f64, pred_units.len() as f64, gold_units.len() as f64);
    }
    Ok(counts)
}

// --------------------------------------------------------------- links --

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeakHandling {
    /// Links within strong units only.
    StrongOnly,
    /// Strong links plus chains over each weak group's merged token set.
    StrongPlusWeak,
    /// Component-wise mean of the other two handlings.
    Average,
}

/// Links (consecutive pairs over each group's sorted tokens, deduplicated)
/// and the token → group-ids relation for partial credit.
fn link_side(groups: &[Vec<usize>], n: usize) -> (BTreeSet<(usize, usize)>, Vec<BTreeSet<usize>>) {
    let mut links = BTreeSet::new();
    let mut member: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (gid, toks) in groups.iter().enumerate() {
        if toks.len() < 2 {
            continue;
        }
        for pair in toks.windows(2) {
            links.insert((pair[0], pair[1]));
        }
        for &t in toks {
            member[t - 1].insert(gid);
        }
    }
    (links, member)
}

fn link_counts(gold_groups: &[Vec<usize>], pred_groups: &[Vec<usize>], n: usize) -> Counts {
    let (gold_links, gold_member) = link_side(gold_groups, n);
    let (pred_links, pred_member) = link_side(pred_groups, n);
    let co = |m: &[BTreeSet<usize>], a: usize, b: usize| !m[a - 1].is_disjoint(&m[b - 1]);
    Counts {
        matched_pred: pred_links.iter().filter(|&&(a, b)| co(&gold_member, a, b)).count() as f64,
        matched_gold: gold_links.iter().filter(|&&(a, b)| co(&pred_member, a, b)).count() as f64,
        predicted: pred_links.len() as f64,
        gold: gold_links.len() as f64,
    }
}

fn strong_groups(s: &Sentence) -> Vec<Vec<usize>> {
    s.units.iter().filter(|u| u.is_multiword()).map(|u| u.token_indices.clone()).collect()
}

fn strong_weak_groups(s: &Sentence) -> Vec<Vec<usize>> {
    let mut groups = strong_groups(s);
    groups.extend(s.weak_groups.iter().map(|w| s.group_tokens(w)));
    groups
}

/// Link-based MWE identification PRF. A link scores when its endpoints are
/// co-grouped on the other side, so splitting a long unit keeps precision
/// while losing recall.
pub fn mwe_link_prf(
    gold: &[Sentence],
    pred: &[Sentence],
    handling: WeakHandling,
) -> Result<Counts, MetricsError> {
    check_aligned(gold, pred, |s| &s.tokens[..])?;
    let mut strong = Counts::default();
    let mut plus = Counts::default();
    for (g, p) in gold.iter().zip(pred) {
        let n = g.tokens.len();
        strong += link_counts(&strong_groups(g), &strong_groups(p), n);
        plus += link_counts(&strong_weak_groups(g), &strong_weak_groups(p), n);
    }
    Ok(match handling {
        WeakHandling::StrongOnly => strong,
        WeakHandling::StrongPlusWeak => plus,
        WeakHandling::Average => Counts::mean(strong, plus),
    })
}

// ------------------------------------------------------------- parseme --

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParsemeMatch {
    /// Whole expressions: identical token sets (multiset-aware).
    MweBased,
    /// Shared tokens under the best one-to-one expression pairing.
    TokenBased,
}

/// Best total token overlap over one-to-one pairings of the two MWE lists.
fn best_assignment(gold: &[&BTreeSet<usize>], pred: &[&BTreeSet<usize>]) -> usize {
    let (small, large) =
        if gold.len() <= pred.len() { (gold, pred) } else { (pred, gold) };
    if small.is_empty() {
        return 0;
    }
    let full = 1usize << small.len();
    let mut dp = vec![0u32; full];
    for item in large {
        let overlap: Vec<u32> =
            small.iter().map(|s| item.intersection(s).count() as u32).collect();
        let mut next = dp.clone();
        for mask in 0..full {
            let mut rest = mask;
            while rest != 0 {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let cand = dp[mask & !(1 << j)] + overlap[j];
                if cand > next[mask] {
                    next[mask] = cand;
                }
            }
        }
        dp = next;
    }
    dp[full - 1] as usize
}

pub fn parseme_prf(
    gold: &[ParsemeSentence],
    pred: &[ParsemeSentence],
    mode: ParsemeMatch,
) -> Result<Counts, MetricsError> {
    check_aligned(gold, pred, |s| &s.tokens[..])?;
    let mut counts = Counts::default();
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        match mode {
            ParsemeMatch::MweBased => {
                let mut sets: HashMap<&BTreeSet<usize>, (usize, usize)> = HashMap::new();
                for v in &g.vmwes {
                    sets.entry(&v.tokens).or_default().0 += 1;
                }
                for v in &p.vmwes {
                    sets.entry(&v.tokens).or_default().1 += 1;
                }
                let matched: usize = sets.values().map(|&(a, b)| a.min(b)).sum();
                counts +=
                    Counts::exact(matched as f64, p.vmwes.len() as f64, g.vmwes.len() as f64);
            }
            ParsemeMatch::TokenBased => {
                let smaller = g.vmwes.len().min(p.vmwes.len());
                if smaller > ASSIGNMENT_LIMIT {
                    return Err(MetricsError::TooManyExpressions { index: i + 1, count: smaller });
                }
                let gs: Vec<&BTreeSet<usize>> = g.vmwes.iter().map(|v| &v.tokens).collect();
                let ps: Vec<&BTreeSet<usize>> = p.vmwes.iter().map(|v| &v.tokens).collect();
                let matched = best_assignment(&gs, &ps);
                let pred_tokens: usize = ps.iter().map(|t| t.len()).sum();
                let gold_tokens: usize = gs.iter().map(|t| t.len()).sum();
                counts +=
                    Counts::exact(matched as f64, pred_tokens as f64, gold_tokens as f64);
            }
        }
    }
    Ok(counts)
}

// -------------------------------------------------------------- dimsum --

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimsumCounts {
    /// Link-based MWE identification (strong segmentation only).
    pub mwe: Counts,
    /// Exact (first token, label) supersense matching.
    pub supersense: Counts,
    /// Element-wise sum of the two: the micro-averaged combined score.
    pub combined: Counts,
    /// Token-level accuracy in the flag[-label] tag space.
    pub tags: Counts,
}

pub fn dimsum_prf(
    gold: &[DimsumSentence],
    pred: &[DimsumSentence],
) -> Result<DimsumCounts, MetricsError> {
    check_aligned(gold, pred, |s| &s.tokens[..])?;
    let mut mwe = Counts::default();
    let mut supersense = Counts::default();
    let mut correct = 0;
    let mut total = 0;
    for (g, p) in gold.iter().zip(pred) {
        let n = g.tokens.len();
        let multiword = |s: &DimsumSentence| -> Vec<Vec<usize>> {
            s.units
                .iter()
                .filter(|u| u.token_indices.len() > 1)
                .map(|u| u.token_indices.clone())
                .collect()
        };
        mwe += link_counts(&multiword(g), &multiword(p), n);
        fn labelled(s: &DimsumSentence) -> BTreeSet<(usize, &str)> {
            s.units
                .iter()
                .filter_map(|u| {
                    Some((*u.token_indices.first()?, u.supersense.as_ref()?.label()))
                })
                .collect()
        }
        let gl = labelled(g);
        let pl = labelled(p);
        supersense += Counts::exact(
            gl.intersection(&pl).count() as f64,
            pl.len() as f64,
            gl.len() as f64,
        );
        let gt = dimsum_tags(g);
        let pt = dimsum_tags(p);
        correct += gt.iter().zip(&pt).filter(|(a, b)| a == b).count();
        total += gt.len();
    }
    Ok(DimsumCounts {
        mwe,
        supersense,
        combined: mwe + supersense,
        tags: Counts::accuracy(correct, total),
    })
}

// ------------------------------------------------------------- reports --

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub name: String,
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    fn from_pairs(pairs: Vec<(&str, Counts)>) -> MetricReport {
        MetricReport {
            rows: pairs
                .into_iter()
                .map(|(name, counts)| MetricRow { name: name.to_string(), counts })
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Counts> {
        self.rows.iter().find(|r| r.name == name).map(|r| &r.counts)
    }

    /// One tab-separated line per metric, with a header; counts print
    /// exactly (fractions kept), scores to four places.
    pub fn machine_tsv(&self) -> String {
        let mut out = String::from("metric\tmatched_pred\tmatched_gold\tpredicted\tgold\tp\tr\tf\n");
        for row in &self.rows {
            let c = &row.counts;
            let s = c.prf();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}",
                row.name, c.matched_pred, c.matched_gold, c.predicted, c.gold, s.p, s.r, s.f
            );
        }
        out
    }

    /// Fixed-width table with percentages and match ratios.
    pub fn human_table(&self) -> String {
        let name_w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max("metric".len());
        let ratio =
            |m: f64, d: f64| format!("{m}/{d}");
        let pred_w = self
            .rows
            .iter()
            .map(|r| ratio(r.counts.matched_pred, r.counts.predicted).len())
            .max()
            .unwrap_or(0)
            .max("pred".len());
        let gold_w = self
            .rows
            .iter()
            .map(|r| ratio(r.counts.matched_gold, r.counts.gold).len())
            .max()
            .unwrap_or(0)
            .max("gold".len());
        let mut out = format!(
            "{:<name_w$}  {:>7}  {:>7}  {:>7}  {:>pred_w$}  {:>gold_w$}\n",
            "metric", "p", "r", "f", "pred", "gold"
        );
        for row in &self.rows {
            let c = &row.counts;
            let s = c.prf();
            let _ = writeln!(
                out,
                "{:<name_w$}  {:>7.2}  {:>7.2}  {:>7.2}  {:>pred_w$}  {:>gold_w$}",
                row.name,
                s.p * 100.0,
                s.r * 100.0,
                s.f * 100.0,
                ratio(c.matched_pred, c.predicted),
                ratio(c.matched_gold, c.gold),
            );
        }
        out
    }
}

pub fn streusle_report(
    gold: &[Sentence],
    pred: &[Sentence],
) -> Result<MetricReport, MetricsError> {
    Ok(MetricReport::from_pairs(vec![
        ("tags-full", tag_accuracy(gold, pred, TagAccuracyMode::Full)?),
        ("tags-nolexcat", tag_accuracy(gold, pred, TagAccuracyMode::DropLexcat)?),
        ("tags-nosupersense", tag_accuracy(gold, pred, TagAccuracyMode::DropSupersense)?),
        ("ss-noun", unit_labeled_prf(gold, pred, SupersenseFilter::Noun, SnacsLabelMode::Full)?),
        ("ss-verb", unit_labeled_prf(gold, pred, SupersenseFilter::Verb, SnacsLabelMode::Full)?),
        ("snacs", unit_labeled_prf(gold, pred, SupersenseFilter::Snacs, SnacsLabelMode::Full)?),
        (
            "snacs-role",
            unit_labeled_prf(gold, pred, SupersenseFilter::Snacs, SnacsLabelMode::RoleOnly)?,
        ),
        (
            "snacs-function",
            unit_labeled_prf(gold, pred, SupersenseFilter::Snacs, SnacsLabelMode::FunctionOnly)?,
        ),
        ("links-strong", mwe_link_prf(gold, pred, WeakHandling::StrongOnly)?),
        ("links-strong+weak", mwe_link_prf(gold, pred, WeakHandling::StrongPlusWeak)?),
        ("links-average", mwe_link_prf(gold, pred, WeakHandling::Average)?),
    ]))
}

pub fn parseme_report(
    gold: &[ParsemeSentence],
    pred: &[ParsemeSentence],
) -> Result<MetricReport, MetricsError> {
    Ok(MetricReport::from_pairs(vec![
        ("mwe-based", parseme_prf(gold, pred, ParsemeMatch::MweBased)?),
        ("token-based", parseme_prf(gold, pred, ParsemeMatch::TokenBased)?),
    ]))
}

pub fn dimsum_report(
    gold: &[DimsumSentence],
    pred: &[DimsumSentence],
) -> Result<MetricReport, MetricsError> {
    let d = dimsum_prf(gold, pred)?;
    Ok(MetricReport::from_pairs(vec![
        ("mwe-links", d.mwe),
        ("supersenses", d.supersense),
        ("combined", d.combined),
        ("tags", d.tags),
    ]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convert::{to_dimsum, to_parseme, DimsumUnit, ParsemeCategory, Vmwe};
    use crate::corpus::{
        parse_conllulex, Inventory, Lexcat, LexicalUnit, Supersense, WeakGroup,
    };

    fn ss(label: &str) -> Supersense {
        Supersense::parse(label, Inventory::bundled()).unwrap()
    }

    fn anno(label: &str) -> Option<SupersenseAnno> {
        Some(SupersenseAnno::single(ss(label)))
    }

    fn sent(forms: &[&str]) -> Sentence {
        let tokens: Vec<Token> =
            forms.iter().enumerate().map(|(i, f)| Token::simple(i + 1, f, f, "NOUN")).collect();
        Sentence::new("t-1", &forms.join(" "), tokens)
    }

    fn unit(toks: &[usize], lexcat: &str, label: Option<&str>) -> LexicalUnit {
        LexicalUnit::new(
            toks.to_vec(),
            Lexcat::parse(lexcat).unwrap(),
            label.and_then(anno),
        )
    }

    fn fixture() -> Vec<Sentence> {
        let text = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/tests/data/mini.conllulex"
        ))
        .unwrap();
        parse_conllulex(&text, Inventory::bundled()).unwrap()
    }

    #[test]
    fn zero_denominator_conventions() {
        let both_empty = Counts::exact(0.0, 0.0, 0.0).prf();
        assert_eq!((both_empty.p, both_empty.r, both_empty.f), (1.0, 1.0, 1.0));
        let nothing_predicted = Counts::exact(0.0, 0.0, 5.0).prf();
        assert_eq!((nothing_predicted.p, nothing_predicted.r), (0.0, 0.0));
        assert_eq!(nothing_predicted.f, 0.0);
        let nothing_gold = Counts::exact(0.0, 3.0, 0.0).prf();
        assert_eq!((nothing_gold.p, nothing_gold.r, nothing_gold.f), (0.0, 0.0, 0.0));
        let plain = Counts::exact(2.0, 4.0, 8.0).prf();
        assert_eq!(plain.p, 0.5);
        assert_eq!(plain.r, 0.25);
        assert!((plain.f - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn accuracy_modes_isolate_the_changed_field() {
        let forms: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
        let refs: Vec<&str> = forms.iter().map(|s| s.as_str()).collect();
        let mut gold = sent(&refs);
        for i in 1..=10 {
            gold.units.push(unit(&[i], "N", Some("n.ARTIFACT")));
        }
        // One supersense off: full and no-lexcat drop, no-supersense holds.
        let mut ss_off = gold.clone();
        ss_off.units[2].supersense = anno("n.COGNITION");
        let run = |p: &Sentence, m| {
            tag_accuracy(std::slice::from_ref(&gold), std::slice::from_ref(p), m)
                .unwrap()
                .prf()
                .p
        };
        assert_eq!(run(&ss_off, TagAccuracyMode::Full), 0.9);
        assert_eq!(run(&ss_off, TagAccuracyMode::DropLexcat), 0.9);
        assert_eq!(run(&ss_off, TagAccuracyMode::DropSupersense), 1.0);
        // One lexcat off: the complementary pattern.
        let mut lexcat_off = gold.clone();
        lexcat_off.units[4].lexcat = Lexcat::parse("PRON").unwrap();
        assert_eq!(run(&lexcat_off, TagAccuracyMode::Full), 0.9);
        assert_eq!(run(&lexcat_off, TagAccuracyMode::DropLexcat), 1.0);
        assert_eq!(run(&lexcat_off, TagAccuracyMode::DropSupersense), 0.9);
    }

    #[test]
    fn unit_prf_needs_set_and_label() {
        let mut gold = sent(&["a", "b", "c", "d", "e", "f"]);
        gold.units.push(unit(&[1], "N", Some("n.ACT")));
        gold.units.push(unit(&[3, 4], "N", Some("n.GROUP")));
        let mut pred = sent(&["a", "b", "c", "d", "e", "f"]);
        pred.units.push(unit(&[1], "N", Some("n.ACT"))); // match
        pred.units.push(unit(&[3, 4], "N", Some("n.PERSON"))); // wrong label
        pred.units.push(unit(&[6], "N", Some("n.ACT"))); // spurious
        let c = unit_labeled_prf(
            std::slice::from_ref(&gold),
            std::slice::from_ref(&pred),
            SupersenseFilter::Noun,
            SnacsLabelMode::Full,
        )
        .unwrap();
        let s = c.prf();
        assert!((s.p - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.r, 0.5);
        assert!((s.f - 0.4).abs() < 1e-12);
    }

    #[test]
    fn snacs_modes_score_each_reading() {
        let mut gold = sent(&["x", "at", "y"]);
        gold.units.push(LexicalUnit::new(
            vec![2],
            Lexcat::parse("P").unwrap(),
            Some(SupersenseAnno::snacs(ss("p.Stimulus"), ss("p.Goal")).unwrap()),
        ));
        let mut pred = sent(&["x", "at", "y"]);
        pred.units.push(LexicalUnit::new(
            vec![2],
            Lexcat::parse("P").unwrap(),
            Some(SupersenseAnno::snacs(ss("p.Stimulus"), ss("p.Topic")).unwrap()),
        ));
        let run = |mode| {
            unit_labeled_prf(
                std::slice::from_ref(&gold),
                std::slice::from_ref(&pred),
                SupersenseFilter::Snacs,
                mode,
            )
            .unwrap()
            .prf()
            .f
        };
        assert_eq!(run(SnacsLabelMode::Full), 0.0);
        assert_eq!(run(SnacsLabelMode::RoleOnly), 1.0);
        assert_eq!(run(SnacsLabelMode::FunctionOnly), 0.0);
        // An equal pair collapses to a single, so the two spellings agree.
        let mut collapsed = pred.clone();
        collapsed.units[0].supersense =
            Some(SupersenseAnno::snacs(ss("p.Goal"), ss("p.Goal")).unwrap());
        let mut plain = gold.clone();
        plain.units[0].supersense = anno("p.Goal");
        let c = unit_labeled_prf(
            std::slice::from_ref(&plain),
            std::slice::from_ref(&collapsed),
            SupersenseFilter::Snacs,
            SnacsLabelMode::Full,
        )
        .unwrap();
        assert_eq!(c.prf().f, 1.0);
    }

    #[test]
    fn links_score_partial_segmentations() {
        // Gold one unit {1,2,3,4}; prediction splits it in two.
        let mut gold = sent(&["a", "b", "c", "d"]);
        gold.units.push(unit(&[1, 2, 3, 4], "N", None));
        let mut pred = sent(&["a", "b", "c", "d"]);
        pred.units.push(unit(&[1, 2], "N", None));
        pred.units.push(unit(&[3, 4], "N", None));
        let c = mwe_link_prf(
            std::slice::from_ref(&gold),
            std::slice::from_ref(&pred),
            WeakHandling::StrongOnly,
        )
        .unwrap();
        assert_eq!((c.matched_pred, c.predicted), (2.0, 2.0));
        assert_eq!((c.matched_gold, c.gold), (2.0, 3.0));
        let s = c.prf();
        assert_eq!(s.p, 1.0);
        assert!((s.r - 2.0 / 3.0).abs() < 1e-12);
        // Overlapping prediction covers every gold pair through co-grouping.
        let mut gold2 = sent(&["a", "b", "c"]);
        gold2.units.push(unit(&[1, 2, 3], "N", None));
        let mut pred2 = sent(&["a", "b", "c"]);
        pred2.units.push(unit(&[1, 2], "N", None));
        pred2.units.push(unit(&[2, 3], "N", None));
        let c2 = mwe_link_prf(
            std::slice::from_ref(&gold2),
            std::slice::from_ref(&pred2),
            WeakHandling::StrongOnly,
        )
        .unwrap();
        let s2 = c2.prf();
        assert_eq!((s2.p, s2.r), (1.0, 1.0));
    }

    #[test]
    fn weak_average_splits_the_difference() {
        // Gold: strong {1,2}, weakly grouped with the unit {3}.
        let mut gold = sent(&["a", "b", "c"]);
        gold.units.push(unit(&[1, 2], "N", None));
        gold.units.push(unit(&[3], "N", None));
        gold.weak_groups.push(WeakGroup::new(vec![0, 1]));
        // Prediction: the strong unit alone.
        let mut pred = sent(&["a", "b", "c"]);
        pred.units.push(unit(&[1, 2], "N", None));
        pred.units.push(unit(&[3], "N", None));
        let strong = mwe_link_prf(
            std::slice::from_ref(&gold),
            std::slice::from_ref(&pred),
            WeakHandling::StrongOnly,
        )
        .unwrap();
        assert_eq!(strong.prf().f, 1.0);
        let plus = mwe_link_prf(
            std::slice::from_ref(&gold),
            std::slice::from_ref(&pred),
            WeakHandling::StrongPlusWeak,
        )
        .unwrap();
        assert_eq!((plus.matched_gold, plus.gold), (1.0, 2.0));
        let avg = mwe_link_prf(
            std::slice::from_ref(&gold),
            std::slice::from_ref(&pred),
            WeakHandling::Average,
        )
        .unwrap();
        assert_eq!(avg.gold, 1.5);
        assert_eq!(avg.prf().p, 1.0);
        assert!((avg.prf().r - 2.0 / 3.0).abs() < 1e-12);
    }

    fn psent(n: usize, sets: &[&[usize]]) -> ParsemeSentence {
        ParsemeSentence {
            comments: Vec::new(),
            tokens: (1..=n).map(|i| Token::simple(i, "w", "w", "X")).collect(),
            vmwes: sets
                .iter()
                .enumerate()
                .map(|(k, ts)| Vmwe {
                    id: k as u32 + 1,
                    tokens: ts.iter().copied().collect(),
                    category: ParsemeCategory::Vid,
                })
                .collect(),
            extra_rows: Vec::new(),
        }
    }

    #[test]
    fn parseme_scores_both_granularities() {
        // Gold {1,2}; predicted {1,2,3}: no whole-expression match, two
        // shared tokens.
        let gold = psent(3, &[&[1, 2]]);
        let pred = psent(3, &[&[1, 2, 3]]);
        let mwe = parseme_prf(
            std::slice::from_ref(&gold),
            std::slice::from_ref(&pred),
            ParsemeMatch::MweBased,
        )
        .unwrap();
        assert_eq!(mwe.prf().f, 0.0);
        assert_eq!((mwe.predicted, mwe.gold), (1.0, 1.0));
        let tok = parseme_prf(
            std::slice::from_ref(&gold),
            std::slice::from_ref(&pred),
            ParsemeMatch::TokenBased,
        )
        .unwrap();
        assert_eq!(tok.matched_pred, 2.0);
        assert!((tok.prf().p - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(tok.prf().r, 1.0);
        // One-to-one: two predictions cannot both consume the same gold.
        let gold2 = psent(3, &[&[1, 2, 3]]);
        let pred2 = psent(3, &[&[1, 2], &[2, 3]]);
        let tok2 = parseme_prf(
            std::slice::from_ref(&gold2),
            std::slice::from_ref(&pred2),
            ParsemeMatch::TokenBased,
        )
        .unwrap();
        assert_eq!(tok2.matched_pred, 2.0);
        assert_eq!((tok2.predicted, tok2.gold), (4.0, 3.0));
        // Duplicated token sets match as a multiset.
        let gold3 = psent(2, &[&[1, 2], &[1, 2]]);
        let pred3 = psent(2, &[&[1, 2]]);
        let mwe3 = parseme_prf(
            std::slice::from_ref(&gold3),
            std::slice::from_ref(&pred3),
            ParsemeMatch::MweBased,
        )
        .unwrap();
        assert_eq!(mwe3.matched_pred, 1.0);
        assert_eq!((mwe3.predicted, mwe3.gold), (1.0, 2.0));
    }

    fn dsent(n: usize, units: &[(&[usize], Option<&str>)]) -> DimsumSentence {
        DimsumSentence {
            sent_id: "d-1".to_string(),
            tokens: (1..=n).map(|i| Token::simple(i, "w", "w", "X")).collect(),
            units: units
                .iter()
                .map(|(ts, label)| DimsumUnit {
                    token_indices: ts.to_vec(),
                    supersense: label.map(ss),
                })
                .collect(),
        }
    }

    #[test]
    fn dimsum_combines_by_summing_counts() {
        let gold = dsent(5, &[(&[1, 2], Some("n.EVENT")), (&[4], Some("n.TIME"))]);
        let pred = dsent(5, &[(&[1, 2], Some("n.EVENT")), (&[5], Some("n.TIME"))]);
        let d = dimsum_prf(std::slice::from_ref(&gold), std::slice::from_ref(&pred)).unwrap();
        assert_eq!(d.mwe.prf().f, 1.0);
        assert_eq!((d.supersense.matched_pred, d.supersense.predicted), (1.0, 2.0));
        assert_eq!(d.combined.matched_pred, d.mwe.matched_pred + d.supersense.matched_pred);
        assert_eq!(d.combined.predicted, d.mwe.predicted + d.supersense.predicted);
        // Tags: tokens 4 and 5 disagree (label moved), rest agree.
        assert_eq!(d.tags.prf().p, 3.0 / 5.0);
        // Empty prediction still aligns; accuracy drops, PRF zeroes out.
        let empty = dsent(5, &[]);
        let d2 = dimsum_prf(std::slice::from_ref(&gold), std::slice::from_ref(&empty)).unwrap();
        assert_eq!(d2.supersense.prf().p, 0.0);
        assert_eq!(d2.mwe.prf().r, 0.0);
        assert_eq!(d2.tags.prf().p, 2.0 / 5.0);
    }

    #[test]
    fn reports_self_evaluate_perfectly() {
        let gold = fixture();
        let report = streusle_report(&gold, &gold).unwrap();
        assert_eq!(report.rows.len(), 11);
        for row in &report.rows {
            let s = row.counts.prf();
            assert_eq!((s.p, s.r, s.f), (1.0, 1.0, 1.0), "{} not perfect", row.name);
        }
        let parseme: Vec<_> = gold.iter().map(to_parseme).collect();
        for row in &parseme_report(&parseme, &parseme).unwrap().rows {
            assert_eq!(row.counts.prf().f, 1.0, "{} not perfect", row.name);
        }
        let dimsum: Vec<_> = gold.iter().map(to_dimsum).collect();
        for row in &dimsum_report(&dimsum, &dimsum).unwrap().rows {
            assert_eq!(row.counts.prf().f, 1.0, "{} not perfect", row.name);
        }
    }

    #[test]
    fn swapping_arguments_swaps_the_numerators() {
        let gold = fixture();
        let mut pred = gold.clone();
        // Metric-visible divergences: a noun supersense, a SNACS construal,
        // and a weak group.
        pred[4]
            .units
            .iter_mut()
            .find(|u| u.token_indices == vec![2])
            .unwrap()
            .supersense = anno("n.PERSON");
        pred[6]
            .units
            .iter_mut()
            .find(|u| u.token_indices == vec![4])
            .unwrap()
            .supersense = Some(SupersenseAnno::snacs(ss("p.Topic"), ss("p.Goal")).unwrap());
        pred[1].weak_groups.clear();
        let ab = streusle_report(&gold, &pred).unwrap();
        let ba = streusle_report(&pred, &gold).unwrap();
        let mut any_imperfect = false;
        for (x, y) in ab.rows.iter().zip(&ba.rows) {
            assert_eq!(x.counts.matched_pred, y.counts.matched_gold, "{}", x.name);
            assert_eq!(x.counts.matched_gold, y.counts.matched_pred, "{}", x.name);
            assert_eq!(x.counts.predicted, y.counts.gold, "{}", x.name);
            assert_eq!(x.counts.gold, y.counts.predicted, "{}", x.name);
            assert_eq!(x.counts.prf().p, y.counts.prf().r, "{}", x.name);
            assert_eq!(x.counts.prf().f, y.counts.prf().f, "{}", x.name);
            any_imperfect |= x.counts.prf().f < 1.0;
        }
        assert!(any_imperfect, "mutations were metric-invisible");
    }

    #[test]
    fn misaligned_corpora_are_rejected() {
        let gold = fixture();
        let pred = &gold[..gold.len() - 1];
        assert!(matches!(
            tag_accuracy(&gold, pred, TagAccuracyMode::Full),
            Err(MetricsError::CorpusSize { .. })
        ));
        let mut renamed = gold.clone();
        renamed[0].tokens[0].form = "Wee".to_string();
        assert!(matches!(
            mwe_link_prf(&gold, &renamed, WeakHandling::StrongOnly),
            Err(MetricsError::Alignment { .. })
        ));
    }

    #[test]
    fn report_tables_render_both_shapes() {
        let gold = fixture();
        let report = streusle_report(&gold, &gold).unwrap();
        let tsv = report.machine_tsv();
        assert!(tsv.starts_with("metric\tmatched_pred\t"));
        assert_eq!(tsv.lines().count(), 12);
        assert!(tsv.contains("links-average\t"));
        let table = report.human_table();
        assert!(table.contains("metric"));
        assert!(table.contains("100.00"));
        assert_eq!(report.get("tags-full").unwrap().prf().p, 1.0);
        assert!(report.get("no-such-row").is_none());
    }
}
