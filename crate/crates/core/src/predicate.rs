//! Rule predicates and the standard 21-rule library.
//!
//! Length is counted in Unicode scalar values. Character classes are ASCII:
//! digits `0-9`, lowercase `a-z`, uppercase `A-Z`; a symbol is any character
//! that is not an ASCII letter, an ASCII digit, or whitespace. Dictionary
//! matching is case-insensitive.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest word used by the "contains a dictionary word" check.
pub const CONTAINS_MIN_WORD_LEN: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CharClass {
    Digit,
    Symbol,
    Lowercase,
    Uppercase,
}

impl CharClass {
    pub fn matches(self, c: char) -> bool {
        match self {
            CharClass::Digit => c.is_ascii_digit(),
            CharClass::Lowercase => c.is_ascii_lowercase(),
            CharClass::Uppercase => c.is_ascii_uppercase(),
            CharClass::Symbol => !c.is_ascii_alphanumeric() && !c.is_whitespace(),
        }
    }

    fn noun(self, count: usize) -> &'static str {
        match (self, count == 1) {
            (CharClass::Digit, true) => "digit",
            (CharClass::Digit, false) => "digits",
            (CharClass::Symbol, true) => "symbol",
            (CharClass::Symbol, false) => "symbols",
            (CharClass::Lowercase, _) => "lowercase",
            (CharClass::Uppercase, _) => "uppercase",
        }
    }
}

/// Word list used by the dictionary rules.
#[derive(Debug, Default)]
pub struct Dictionary {
    words: HashSet<String>,
    substrings: HashSet<String>,
    max_len: usize,
}

impl Dictionary {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut dict = Dictionary::default();
        for w in words {
            let w = w.as_ref().trim();
            if w.is_empty() {
                continue;
            }
            let w = w.to_lowercase();
            let len = w.chars().count();
            if len >= CONTAINS_MIN_WORD_LEN {
                dict.max_len = dict.max_len.max(len);
                dict.substrings.insert(w.clone());
            }
            dict.words.insert(w);
        }
        dict
    }

    /// Reads a newline-separated UTF-8 word list.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let text = String::from_utf8_lossy(&bytes);
        Ok(Dictionary::new(text.lines()))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains_exact(&self, password: &str) -> bool {
        self.words.contains(&password.to_lowercase())
    }

    /// True if some contiguous substring is a dictionary word of at least
    /// [`CONTAINS_MIN_WORD_LEN`] characters.
    pub fn contains_word_in(&self, password: &str) -> bool {
        if self.substrings.is_empty() {
            return false;
        }
        let lower = password.to_lowercase();
        let bounds: Vec<usize> = lower
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(lower.len()))
            .collect();
        let chars = bounds.len() - 1;
        for start in 0..chars {
            let longest = (chars - start).min(self.max_len);
            for len in CONTAINS_MIN_WORD_LEN..=longest {
                if self
                    .substrings
                    .contains(&lower[bounds[start]..bounds[start + len]])
                {
                    return true;
                }
            }
        }
        false
    }
}

/// A membership test over password strings.
#[derive(Clone, Debug)]
pub enum RulePredicate {
    MinLength(usize),
    MinClass { class: CharClass, count: usize },
    InDictionary(Arc<Dictionary>),
    ContainsDictionaryWord(Arc<Dictionary>),
    All(Vec<RulePredicate>),
    Any(Vec<RulePredicate>),
    Not(Box<RulePredicate>),
}

impl RulePredicate {
    pub fn evaluate(&self, password: &str) -> bool {
        match self {
            RulePredicate::MinLength(n) => password.chars().count() >= *n,
            RulePredicate::MinClass { class, count } => {
                password.chars().filter(|&c| class.matches(c)).count() >= *count
            }
            RulePredicate::InDictionary(d) => d.contains_exact(password),
            RulePredicate::ContainsDictionaryWord(d) => d.contains_word_in(password),
            RulePredicate::All(ps) => ps.iter().all(|p| p.evaluate(password)),
            RulePredicate::Any(ps) => ps.iter().any(|p| p.evaluate(password)),
            RulePredicate::Not(p) => !p.evaluate(password),
        }
    }

    /// Logical complement, pushing negation through conjunctions so that the
    /// negative forms read like their usual names.
    pub fn negate(&self) -> RulePredicate {
        match self {
            RulePredicate::Not(p) => (**p).clone(),
            RulePredicate::All(ps) => RulePredicate::Any(ps.iter().map(|p| p.negate()).collect()),
            RulePredicate::Any(ps) => RulePredicate::All(ps.iter().map(|p| p.negate()).collect()),
            other => RulePredicate::Not(Box::new(other.clone())),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            RulePredicate::MinLength(n) => format!("{n} characters or more"),
            RulePredicate::MinClass { class, count } => {
                format!("{count} {} or more", class.noun(*count))
            }
            RulePredicate::InDictionary(_) => "In a dictionary".into(),
            RulePredicate::ContainsDictionaryWord(_) => "Contains a dictionary word".into(),
            RulePredicate::All(ps) => join(ps, " AND "),
            RulePredicate::Any(ps) => join(ps, " OR "),
            RulePredicate::Not(p) => match &**p {
                RulePredicate::MinLength(n) => format!("Less than {n} characters"),
                RulePredicate::MinClass { class, count } => {
                    format!("Less than {count} {}", class.noun(*count))
                }
                RulePredicate::InDictionary(_) => "Not in a dictionary".into(),
                RulePredicate::ContainsDictionaryWord(_) => {
                    "Does not contain a dictionary word".into()
                }
                inner => format!("NOT ({})", inner.describe()),
            },
        }
    }

    /// Compact label used when rendering witness policies.
    pub fn short_label(&self) -> String {
        match self {
            RulePredicate::MinLength(n) => format!("{n} chars"),
            RulePredicate::MinClass { class, count } => {
                let noun = match class {
                    CharClass::Digit if *count == 1 => "digit",
                    CharClass::Digit => "digits",
                    CharClass::Symbol if *count == 1 => "symbol",
                    CharClass::Symbol => "symbols",
                    CharClass::Lowercase => "lower",
                    CharClass::Uppercase => "upper",
                };
                format!("{count} {noun}")
            }
            RulePredicate::InDictionary(_) => "in dictionary".into(),
            RulePredicate::ContainsDictionaryWord(_) => "contains dictionary word".into(),
            RulePredicate::All(ps) => ps
                .iter()
                .map(|p| p.short_label())
                .collect::<Vec<_>>()
                .join(", "),
            RulePredicate::Any(ps) => ps
                .iter()
                .map(|p| p.short_label())
                .collect::<Vec<_>>()
                .join(" or "),
            RulePredicate::Not(p) => match &**p {
                RulePredicate::InDictionary(_) => "not in dictionary".into(),
                RulePredicate::ContainsDictionaryWord(_) => "no dictionary word".into(),
                inner => format!("not {}", inner.short_label()),
            },
        }
    }

    pub fn needs_dictionary(&self) -> bool {
        match self {
            RulePredicate::InDictionary(_) | RulePredicate::ContainsDictionaryWord(_) => true,
            RulePredicate::All(ps) | RulePredicate::Any(ps) => {
                ps.iter().any(|p| p.needs_dictionary())
            }
            RulePredicate::Not(p) => p.needs_dictionary(),
            _ => false,
        }
    }
}

fn join(ps: &[RulePredicate], sep: &str) -> String {
    ps.iter()
        .map(|p| p.describe())
        .collect::<Vec<_>>()
        .join(sep)
}

/// Serializable predicate description, as found in rule-set config files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum PredicateSpec {
    MinLength { length: usize },
    MinClass { class: CharClass, count: usize },
    InDictionary,
    ContainsDictionaryWord,
    All { of: Vec<PredicateSpec> },
    Any { of: Vec<PredicateSpec> },
    Not { of: Box<PredicateSpec> },
}

impl PredicateSpec {
    pub fn build(&self, dictionary: Option<&Arc<Dictionary>>) -> Result<RulePredicate> {
        let dict = || dictionary.cloned().ok_or(Error::MissingDictionary);
        Ok(match self {
            PredicateSpec::MinLength { length } => RulePredicate::MinLength(*length),
            PredicateSpec::MinClass { class, count } => RulePredicate::MinClass {
                class: *class,
                count: *count,
            },
            PredicateSpec::InDictionary => RulePredicate::InDictionary(dict()?),
            PredicateSpec::ContainsDictionaryWord => RulePredicate::ContainsDictionaryWord(dict()?),
            PredicateSpec::All { of } => RulePredicate::All(
                of.iter()
                    .map(|p| p.build(dictionary))
                    .collect::<Result<_>>()?,
            ),
            PredicateSpec::Any { of } => RulePredicate::Any(
                of.iter()
                    .map(|p| p.build(dictionary))
                    .collect::<Result<_>>()?,
            ),
            PredicateSpec::Not { of } => RulePredicate::Not(Box::new(of.build(dictionary)?)),
        })
    }
}

impl From<&RulePredicate> for PredicateSpec {
    fn from(p: &RulePredicate) -> Self {
        match p {
            RulePredicate::MinLength(n) => PredicateSpec::MinLength { length: *n },
            RulePredicate::MinClass { class, count } => PredicateSpec::MinClass {
                class: *class,
                count: *count,
            },
            RulePredicate::InDictionary(_) => PredicateSpec::InDictionary,
            RulePredicate::ContainsDictionaryWord(_) => PredicateSpec::ContainsDictionaryWord,
            RulePredicate::All(ps) => PredicateSpec::All {
                of: ps.iter().map(Into::into).collect(),
            },
            RulePredicate::Any(ps) => PredicateSpec::Any {
                of: ps.iter().map(Into::into).collect(),
            },
            RulePredicate::Not(p) => PredicateSpec::Not {
                of: Box::new((&**p).into()),
            },
        }
    }
}

/// Whether rules are stated as allowed sets or banned sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleForm {
    Positive,
    Negative,
}

fn standard_positive(dict: Option<&Arc<Dictionary>>) -> Vec<RulePredicate> {
    use CharClass::*;
    let class = |class, count| RulePredicate::MinClass { class, count };
    let mut rules: Vec<RulePredicate> = (8..=16).map(RulePredicate::MinLength).collect();
    for count in [1, 2] {
        for c in [Digit, Symbol, Lowercase, Uppercase] {
            rules.push(class(c, count));
        }
    }
    // positive dictionary checks allow what the banning forms leave over
    if let Some(d) = dict {
        let not = |p| RulePredicate::Not(Box::new(p));
        rules.push(not(RulePredicate::InDictionary(d.clone())));
        rules.push(not(RulePredicate::ContainsDictionaryWord(d.clone())));
    }
    rules.push(RulePredicate::All(vec![
        RulePredicate::MinLength(8),
        class(Uppercase, 1),
    ]));
    rules.push(RulePredicate::All(vec![
        RulePredicate::MinLength(8),
        class(Uppercase, 1),
        class(Digit, 1),
    ]));
    rules
}

/// The 21 experiment rules: nine length rules (8 to 16 characters), eight
/// character-class rules, two dictionary checks and two combination rules.
pub fn standard_predicates(
    form: RuleForm,
    dictionary: Option<Arc<Dictionary>>,
) -> Result<Vec<RulePredicate>> {
    let dict = dictionary.ok_or(Error::MissingDictionary)?;
    Ok(apply_form(standard_positive(Some(&dict)), form))
}

/// The standard rules minus the two dictionary checks (19 rules).
pub fn standard_predicates_without_dictionary(form: RuleForm) -> Vec<RulePredicate> {
    apply_form(standard_positive(None), form)
}

fn apply_form(rules: Vec<RulePredicate>, form: RuleForm) -> Vec<RulePredicate> {
    match form {
        RuleForm::Positive => rules,
        RuleForm::Negative => rules.iter().map(|p| p.negate()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dict(words: &[&str]) -> Arc<Dictionary> {
        Arc::new(Dictionary::new(words))
    }

    #[test]
    fn length_rule() {
        let p = RulePredicate::MinLength(8);
        assert!(!p.evaluate("abcdefg"));
        assert!(p.evaluate("abcdefgh"));
        // counted in scalar values, not bytes
        assert!(!p.evaluate("\u{e9}\u{e9}\u{e9}\u{e9}"));
    }

    #[test]
    fn class_rules() {
        let two_digits = RulePredicate::MinClass {
            class: CharClass::Digit,
            count: 2,
        };
        assert!(two_digits.evaluate("a1b2"));
        assert!(!two_digits.evaluate("a1b"));
        let sym = RulePredicate::MinClass {
            class: CharClass::Symbol,
            count: 1,
        };
        assert!(sym.evaluate("pass!"));
        assert!(!sym.evaluate("pass word"));
        assert!(sym.evaluate("caf\u{e9}"));
    }

    #[test]
    fn dictionary_rules() {
        let d = dict(&["pass", "abc", "Word"]);
        let contains = RulePredicate::ContainsDictionaryWord(d.clone());
        assert!(contains.evaluate("mypassword"));
        assert!(!contains.evaluate("map ass"));
        // words under four characters are only used for exact matches
        assert!(!contains.evaluate("xxabcxx"));
        assert!(contains.evaluate("SWORDFISH"));
        let exact = RulePredicate::InDictionary(d);
        assert!(exact.evaluate("ABC"));
        assert!(!exact.evaluate("abcd"));
    }

    #[test]
    fn standard_set_shape() {
        let d = dict(&["password"]);
        let pos = standard_predicates(RuleForm::Positive, Some(d.clone())).unwrap();
        let neg = standard_predicates(RuleForm::Negative, Some(d)).unwrap();
        assert_eq!(pos.len(), 21);
        assert_eq!(neg.len(), 21);
        assert_eq!(pos[0].describe(), "8 characters or more");
        assert_eq!(neg[0].describe(), "Less than 8 characters");
        assert_eq!(pos[9].describe(), "1 digit or more");
        assert_eq!(pos[17].describe(), "Not in a dictionary");
        assert_eq!(neg[17].describe(), "In a dictionary");
        assert_eq!(neg[18].describe(), "Contains a dictionary word");
        assert_eq!(
            pos[20].describe(),
            "8 characters or more AND 1 uppercase or more AND 1 digit or more"
        );
        assert_eq!(
            neg[20].describe(),
            "Less than 8 characters OR Less than 1 uppercase OR Less than 1 digit"
        );
        assert!(matches!(
            standard_predicates(RuleForm::Positive, None),
            Err(Error::MissingDictionary)
        ));
        assert_eq!(
            standard_predicates_without_dictionary(RuleForm::Positive).len(),
            19
        );
    }

    #[test]
    fn spec_roundtrip_through_json() {
        let json = r#"{"name":"all","params":{"of":[
            {"name":"min_length","params":{"length":8}},
            {"name":"min_class","params":{"class":"uppercase","count":1}},
            {"name":"not","params":{"of":{"name":"in_dictionary"}}}]}}"#;
        let spec: PredicateSpec = serde_json::from_str(json).unwrap();
        let d = dict(&["hello"]);
        let pred = spec.build(Some(&d)).unwrap();
        assert!(pred.evaluate("Abcdefgh"));
        assert!(!pred.evaluate("abcdefgh"));
        assert_eq!(PredicateSpec::from(&pred), spec);
        assert!(matches!(spec.build(None), Err(Error::MissingDictionary)));
    }
}
