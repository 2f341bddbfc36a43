//! Lexical categories and supersense inventories.

use std::collections::HashSet;
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LexiconError {
    #[error("unknown lexical category `{0}`")]
    UnknownLexcat(String),
    #[error("supersense `{0}` has no class prefix (expected n., v., or p.)")]
    MissingClassPrefix(String),
    #[error("supersense `{0}` is not in the {1} inventory")]
    NotInInventory(String, SupersenseClass),
    #[error("supersense pair `{0}|{1}` mixes classes; only adposition supersenses pair up")]
    BadPair(String, String),
}

/// The three supersense taxonomies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SupersenseClass {
    Noun,
    Verb,
    Adposition,
}

impl SupersenseClass {
    pub fn prefix(self) -> &'static str {
        match self {
            SupersenseClass::Noun => "n.",
            SupersenseClass::Verb => "v.",
            SupersenseClass::Adposition => "p.",
        }
    }

    fn of(label: &str) -> Option<SupersenseClass> {
        if label.starts_with("n.") {
            Some(SupersenseClass::Noun)
        } else if label.starts_with("v.") {
            Some(SupersenseClass::Verb)
        } else if label.starts_with("p.") {
            Some(SupersenseClass::Adposition)
        } else {
            None
        }
    }
}

impl fmt::Display for SupersenseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SupersenseClass::Noun => "noun",
            SupersenseClass::Verb => "verb",
            SupersenseClass::Adposition => "adposition",
        })
    }
}

/// A single supersense label, stored with its class prefix as written
/// (e.g. `n.ARTIFACT`, `v.motion`, `p.Purpose`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Supersense {
    label: String,
    class: SupersenseClass,
}

impl Supersense {
    /// Parses a label, checking the class prefix and inventory membership.
    /// Membership is case-insensitive; the spelling is preserved.
    /// `n.??` / `v.??` / `p.??` mark unresolved annotations and always pass.
    pub fn parse(label: &str, inv: &Inventory) -> Result<Supersense, LexiconError> {
        let class = SupersenseClass::of(label)
            .ok_or_else(|| LexiconError::MissingClassPrefix(label.to_string()))?;
        if &label[2..] != "??" && !inv.contains(class, label) {
            return Err(LexiconError::NotInInventory(label.to_string(), class));
        }
        Ok(Supersense { label: label.to_string(), class })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn class(&self) -> SupersenseClass {
        self.class
    }
}

impl fmt::Display for Supersense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// A unit's supersense annotation. Adposition units carry a role and a
/// function reading; `snacs` normalizes an equal pair to `Single`, so equal
/// pairs and singles compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SupersenseAnno {
    Single(Supersense),
    /// Role/function pair; invariant: both adposition class, role != function.
    Pair { role: Supersense, function: Supersense },
}

impl SupersenseAnno {
    pub fn single(ss: Supersense) -> SupersenseAnno {
        SupersenseAnno::Single(ss)
    }

    pub fn snacs(role: Supersense, function: Supersense) -> Result<SupersenseAnno, LexiconError> {
        if role.class() != SupersenseClass::Adposition
            || function.class() != SupersenseClass::Adposition
        {
            return Err(LexiconError::BadPair(
                role.label().to_string(),
                function.label().to_string(),
            ));
        }
        if role == function {
            Ok(SupersenseAnno::Single(role))
        } else {
            Ok(SupersenseAnno::Pair { role, function })
        }
    }

    /// The role reading (first member; the label itself for singles).
    pub fn role(&self) -> &Supersense {
        match self {
            SupersenseAnno::Single(ss) => ss,
            SupersenseAnno::Pair { role, .. } => role,
        }
    }

    /// The function reading (second member; the label itself for singles).
    pub fn function(&self) -> &Supersense {
        match self {
            SupersenseAnno::Single(ss) => ss,
            SupersenseAnno::Pair { function, .. } => function,
        }
    }

    pub fn class(&self) -> SupersenseClass {
        self.role().class()
    }

    pub fn is_pair(&self) -> bool {
        matches!(self, SupersenseAnno::Pair { .. })
    }
}

impl fmt::Display for SupersenseAnno {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SupersenseAnno::Single(ss) => write!(f, "{ss}"),
            SupersenseAnno::Pair { role, function } => write!(f, "{role}|{function}"),
        }
    }
}

macro_rules! lexcats {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        /// The syntactic-lexical category of a lexical unit.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Lexcat {
            $($variant),+
        }

        impl Lexcat {
            pub const ALL: &'static [Lexcat] = &[$(Lexcat::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Lexcat::$variant => $name),+
                }
            }

            pub fn parse(s: &str) -> Result<Lexcat, LexiconError> {
                match s {
                    $($name => Ok(Lexcat::$variant),)+
                    _ => Err(LexiconError::UnknownLexcat(s.to_string())),
                }
            }
        }
    };
}

lexcats! {
    N => "N",
    Pron => "PRON",
    PronPoss => "PRON.POSS",
    Poss => "POSS",
    V => "V",
    Vid => "V.VID",
    VpcFull => "V.VPC.full",
    VpcSemi => "V.VPC.semi",
    LvcFull => "V.LVC.full",
    LvcCause => "V.LVC.cause",
    Iav => "V.IAV",
    P => "P",
    Pp => "PP",
    Inf => "INF",
    InfP => "INF.P",
    Aux => "AUX",
    Adj => "ADJ",
    Adv => "ADV",
    Det => "DET",
    Cconj => "CCONJ",
    Sconj => "SCONJ",
    Intj => "INTJ",
    Num => "NUM",
    Sym => "SYM",
    Punct => "PUNCT",
    Disc => "DISC",
    X => "X",
}

impl fmt::Display for Lexcat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a lexcat relates to supersense annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupersensePolicy {
    /// Must carry a single supersense of this class.
    Required(SupersenseClass),
    /// May carry a supersense (or role|function pair) of this class.
    Optional(SupersenseClass),
    /// Never carries a supersense.
    None,
}

impl Lexcat {
    /// Supersense policy for units of this category. Nominal and verbal
    /// categories demand a label from their class; adposition-function
    /// categories accept (but do not require) adposition supersenses, since
    /// idiomatic and non-predicative uses go unlabeled; everything else is
    /// unlabeled.
    pub fn supersense_policy(self) -> SupersensePolicy {
        use Lexcat::*;
        match self {
            N => SupersensePolicy::Required(SupersenseClass::Noun),
            V | Vid | VpcFull | VpcSemi | LvcFull | LvcCause | Iav => {
                SupersensePolicy::Required(SupersenseClass::Verb)
            }
            P | Pp | InfP | Poss | PronPoss => {
                SupersensePolicy::Optional(SupersenseClass::Adposition)
            }
            Pron | Inf | Aux | Adj | Adv | Det | Cconj | Sconj | Intj | Num | Sym | Punct
            | Disc | X => SupersensePolicy::None,
        }
    }

    /// Categories only valid for multiword units.
    pub fn mwe_only(self) -> bool {
        use Lexcat::*;
        matches!(self, Vid | VpcFull | VpcSemi | LvcFull | LvcCause | Iav | Pp)
    }

    /// Categories only valid for single-word units.
    pub fn single_word_only(self) -> bool {
        matches!(self, Lexcat::V)
    }
}

/// Checks a lexcat/supersense combination; returns a human-readable reason on
/// failure. Pairs only for adposition classes; role|function both checked.
pub fn check_supersense(lexcat: Lexcat, ss: Option<&SupersenseAnno>) -> Result<(), String> {
    match (lexcat.supersense_policy(), ss) {
        (SupersensePolicy::None, None) => Ok(()),
        (SupersensePolicy::None, Some(anno)) => Err(format!(
            "lexcat {lexcat} does not take a supersense, got {anno}"
        )),
        (SupersensePolicy::Required(_), None) => {
            Err(format!("lexcat {lexcat} requires a supersense"))
        }
        (SupersensePolicy::Optional(_), None) => Ok(()),
        (SupersensePolicy::Required(class), Some(anno))
        | (SupersensePolicy::Optional(class), Some(anno)) => {
            if anno.class() != class {
                return Err(format!(
                    "lexcat {lexcat} takes {class} supersenses, got {anno}"
                ));
            }
            if anno.is_pair() && class != SupersenseClass::Adposition {
                return Err(format!(
                    "role|function pairs are adposition-only, got {anno} on {lexcat}"
                ));
            }
            Ok(())
        }
    }
}

/// The supersense label inventories, loaded from resource files.
#[derive(Debug, Clone)]
pub struct Inventory {
    labels: [Vec<String>; 3],
    lookup: HashSet<(SupersenseClass, String)>,
}

impl Inventory {
    pub fn from_lists<S: AsRef<str>>(noun: &[S], verb: &[S], adposition: &[S]) -> Inventory {
        let collect = |xs: &[S]| xs.iter().map(|s| s.as_ref().to_string()).collect::<Vec<_>>();
        let labels = [collect(noun), collect(verb), collect(adposition)];
        let mut lookup = HashSet::new();
        for (class, list) in [
            (SupersenseClass::Noun, &labels[0]),
            (SupersenseClass::Verb, &labels[1]),
            (SupersenseClass::Adposition, &labels[2]),
        ] {
            for label in list {
                lookup.insert((class, label.to_lowercase()));
            }
        }
        Inventory { labels, lookup }
    }

    /// Parses inventory file content: one label per line, `#` comments.
    pub fn from_texts(noun: &str, verb: &str, adposition: &str) -> Inventory {
        fn lines(text: &str) -> Vec<&str> {
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty())
                .collect()
        }
        Inventory::from_lists(&lines(noun), &lines(verb), &lines(adposition))
    }

    /// The inventories bundled with the crate.
    pub fn bundled() -> &'static Inventory {
        static BUNDLED: OnceLock<Inventory> = OnceLock::new();
        BUNDLED.get_or_init(|| {
            Inventory::from_texts(
                include_str!("../../resources/supersenses_noun.txt"),
                include_str!("../../resources/supersenses_verb.txt"),
                include_str!("../../resources/supersenses_snacs.txt"),
            )
        })
    }

    pub fn contains(&self, class: SupersenseClass, label: &str) -> bool {
        self.lookup.contains(&(class, label.to_lowercase()))
    }

    pub fn labels(&self, class: SupersenseClass) -> &[String] {
        match class {
            SupersenseClass::Noun => &self.labels[0],
            SupersenseClass::Verb => &self.labels[1],
            SupersenseClass::Adposition => &self.labels[2],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexcat_round_trip() {
        assert_eq!(Lexcat::ALL.len(), 27);
        for &lc in Lexcat::ALL {
            assert_eq!(Lexcat::parse(lc.as_str()).unwrap(), lc);
        }
        assert!(Lexcat::parse("NOUN").is_err());
        assert!(Lexcat::parse("v.vid").is_err());
    }

    #[test]
    fn bundled_inventory_sizes() {
        let inv = Inventory::bundled();
        assert_eq!(inv.labels(SupersenseClass::Noun).len(), 26);
        assert_eq!(inv.labels(SupersenseClass::Verb).len(), 15);
        assert!(inv.labels(SupersenseClass::Adposition).len() >= 50);
    }

    #[test]
    fn supersense_parse_case_insensitive_membership() {
        let inv = Inventory::bundled();
        let ss = Supersense::parse("n.ARTIFACT", inv).unwrap();
        assert_eq!(ss.class(), SupersenseClass::Noun);
        assert_eq!(ss.label(), "n.ARTIFACT");
        // Odd casing passes membership but keeps its spelling.
        let odd = Supersense::parse("n.artifact", inv).unwrap();
        assert_eq!(odd.label(), "n.artifact");
        assert_ne!(ss, odd);
        assert!(Supersense::parse("n.VEHICLE", inv).is_err());
        assert!(Supersense::parse("ARTIFACT", inv).is_err());
        assert!(Supersense::parse("p.??", inv).is_ok());
    }

    #[test]
    fn snacs_pair_normalizes_when_equal() {
        let inv = Inventory::bundled();
        let a = Supersense::parse("p.Purpose", inv).unwrap();
        let b = Supersense::parse("p.Purpose", inv).unwrap();
        let anno = SupersenseAnno::snacs(a.clone(), b).unwrap();
        assert_eq!(anno, SupersenseAnno::Single(a.clone()));
        assert!(!anno.is_pair());

        let g = Supersense::parse("p.Gestalt", inv).unwrap();
        let pair = SupersenseAnno::snacs(a.clone(), g.clone()).unwrap();
        assert!(pair.is_pair());
        assert_eq!(pair.role(), &a);
        assert_eq!(pair.function(), &g);
        assert_eq!(pair.to_string(), "p.Purpose|p.Gestalt");

        let n = Supersense::parse("n.ACT", inv).unwrap();
        assert!(SupersenseAnno::snacs(n, a).is_err());
    }

    #[test]
    fn supersense_policies() {
        let inv = Inventory::bundled();
        let nart = SupersenseAnno::Single(Supersense::parse("n.ARTIFACT", inv).unwrap());
        let vmot = SupersenseAnno::Single(Supersense::parse("v.motion", inv).unwrap());
        let ppur = SupersenseAnno::Single(Supersense::parse("p.Purpose", inv).unwrap());

        assert!(check_supersense(Lexcat::N, Some(&nart)).is_ok());
        assert!(check_supersense(Lexcat::N, None).is_err());
        assert!(check_supersense(Lexcat::N, Some(&vmot)).is_err());
        assert!(check_supersense(Lexcat::VpcFull, Some(&vmot)).is_ok());
        assert!(check_supersense(Lexcat::V, Some(&nart)).is_err());
        // Adposition-class categories: supersense optional.
        assert!(check_supersense(Lexcat::P, Some(&ppur)).is_ok());
        assert!(check_supersense(Lexcat::P, None).is_ok());
        assert!(check_supersense(Lexcat::PronPoss, None).is_ok());
        assert!(check_supersense(Lexcat::PronPoss, Some(&ppur)).is_ok());
        assert!(check_supersense(Lexcat::PronPoss, Some(&nart)).is_err());
        // Plain closed-class categories: none allowed.
        assert!(check_supersense(Lexcat::Det, None).is_ok());
        assert!(check_supersense(Lexcat::Det, Some(&ppur)).is_err());
    }

    #[test]
    fn arity_restrictions() {
        assert!(Lexcat::VpcFull.mwe_only());
        assert!(Lexcat::Pp.mwe_only());
        assert!(!Lexcat::N.mwe_only());
        assert!(Lexcat::V.single_word_only());
        assert!(!Lexcat::Vid.single_word_only());
    }
}
