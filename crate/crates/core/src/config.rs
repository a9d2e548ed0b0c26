//! Rule-set configuration files.
//!
//! ```json
//! {
//!   "mode": "positive",
//!   "dictionary": "words.txt",
//!   "rules": [
//!     {"id": 1, "kind": "explicit", "passwords": ["a", "b"]},
//!     {"id": 2, "kind": "predicate", "predicate": {"name": "min_length", "params": {"length": 8}}}
//!   ]
//! }
//! ```
//!
//! `"rules": "standard"` selects the 21 built-in rules in the form matching
//! `mode`. In singleton mode the rule list is ignored and one rule per
//! password is generated. A relative dictionary path is resolved against the
//! directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{Mode, Rule, RuleBook};
use crate::predicate::{standard_predicates, Dictionary, PredicateSpec, RuleForm};
use crate::space::PasswordSpace;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RuleSpec {
    Explicit {
        id: usize,
        passwords: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Predicate {
        id: usize,
        predicate: PredicateSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
}

impl RuleSpec {
    pub fn id(&self) -> usize {
        match self {
            RuleSpec::Explicit { id, .. } | RuleSpec::Predicate { id, .. } => *id,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RulesField {
    Named(StandardRules),
    List(Vec<RuleSpec>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StandardRules {
    Standard,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSetConfig {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<PathBuf>,
    #[serde(default = "empty_rules")]
    pub rules: RulesField,
}

fn empty_rules() -> RulesField {
    RulesField::List(Vec::new())
}

impl RuleSetConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RuleSetConfig = serde_json::from_str(&text)?;
        if let (Some(dict), Some(dir)) = (&cfg.dictionary, path.parent()) {
            if dict.is_relative() {
                cfg.dictionary = Some(dir.join(dict));
            }
        }
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load_dictionary(&self) -> Result<Option<Arc<Dictionary>>> {
        self.dictionary
            .as_ref()
            .map(|p| Dictionary::load(p).map(Arc::new))
            .transpose()
    }

    /// Compiles the configured rules against `space`.
    pub fn build(&self, space: Arc<PasswordSpace>) -> Result<RuleBook> {
        if self.mode == Mode::Singleton {
            return Ok(RuleBook::singletons(space));
        }
        let dict = self.load_dictionary()?;
        self.build_with_dictionary(space, dict)
    }

    /// Like [`build`](Self::build) but with an already loaded dictionary in
    /// place of the configured path.
    pub fn build_with_dictionary(
        &self,
        space: Arc<PasswordSpace>,
        dict: Option<Arc<Dictionary>>,
    ) -> Result<RuleBook> {
        if self.mode == Mode::Singleton {
            return Ok(RuleBook::singletons(space));
        }
        let rules = match &self.rules {
            RulesField::Named(StandardRules::Standard) => {
                let form = match self.mode {
                    Mode::Negative => RuleForm::Negative,
                    _ => RuleForm::Positive,
                };
                standard_predicates(form, dict)?
                    .into_iter()
                    .enumerate()
                    .map(|(i, p)| Rule::predicate(i + 1, p))
                    .collect()
            }
            RulesField::List(specs) => {
                let mut specs: Vec<&RuleSpec> = specs.iter().collect();
                specs.sort_by_key(|s| s.id());
                specs
                    .into_iter()
                    .map(|s| build_rule(s, dict.as_ref()))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        RuleBook::new(space, rules, self.mode)
    }

    /// Config describing an existing book. Dictionary-backed predicates
    /// reference `dictionary`, which the caller must supply.
    pub fn from_book(book: &RuleBook, dictionary: Option<PathBuf>) -> Self {
        use crate::policy::Membership;
        if book.mode() == Mode::Singleton {
            return RuleSetConfig {
                mode: Mode::Singleton,
                dictionary: None,
                rules: empty_rules(),
            };
        }
        let rules = book
            .rules()
            .iter()
            .map(|r| match &r.membership {
                Membership::Explicit(set) => {
                    let mut passwords: Vec<String> = set.iter().cloned().collect();
                    // space order keeps the file stable
                    passwords.sort_by_key(|p| book.space().id_of(p));
                    RuleSpec::Explicit {
                        id: r.id,
                        passwords,
                        label: None,
                    }
                }
                Membership::Predicate(p) => RuleSpec::Predicate {
                    id: r.id,
                    predicate: p.into(),
                    label: None,
                },
            })
            .collect();
        RuleSetConfig {
            mode: book.mode(),
            dictionary,
            rules: RulesField::List(rules),
        }
    }
}

fn build_rule(spec: &RuleSpec, dict: Option<&Arc<Dictionary>>) -> Result<Rule> {
    let (mut rule, label) = match spec {
        RuleSpec::Explicit {
            id,
            passwords,
            label,
        } => (Rule::explicit(*id, passwords.iter().cloned()), label),
        RuleSpec::Predicate {
            id,
            predicate,
            label,
        } => (Rule::predicate(*id, predicate.build(dict)?), label),
    };
    if let Some(l) = label {
        rule.label = l.clone();
    }
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ruleset::RuleSet;

    #[test]
    fn parses_mixed_rules() {
        let json = r#"{
            "mode": "positive",
            "rules": [
                {"id": 2, "kind": "predicate", "predicate": {"name": "min_length", "params": {"length": 3}}},
                {"id": 1, "kind": "explicit", "passwords": ["a", "bb"], "label": "short"}
            ]
        }"#;
        let cfg: RuleSetConfig = serde_json::from_str(json).unwrap();
        let space = Arc::new(PasswordSpace::new(["a", "bb", "ccc"]).unwrap());
        let book = cfg.build(space).unwrap();
        assert_eq!(book.len(), 2);
        assert_eq!(book.rules()[0].label, "short");
        let p = book.policy(RuleSet::from_ids(2, [2])).unwrap();
        assert_eq!(p.allowed_set().into_iter().collect::<Vec<_>>(), vec!["ccc"]);
    }

    #[test]
    fn standard_requires_dictionary() {
        let cfg: RuleSetConfig =
            serde_json::from_str(r#"{"mode": "negative", "rules": "standard"}"#).unwrap();
        let space = Arc::new(PasswordSpace::new(["a"]).unwrap());
        assert!(matches!(cfg.build(space), Err(Error::MissingDictionary)));
    }

    #[test]
    fn unit_predicates_need_no_params() {
        let spec: PredicateSpec = serde_json::from_str(r#"{"name": "in_dictionary"}"#).unwrap();
        assert_eq!(spec, PredicateSpec::InDictionary);
    }

    #[test]
    fn roundtrip_through_book() {
        let space = Arc::new(PasswordSpace::new(["x", "y", "z"]).unwrap());
        let book = RuleBook::new(
            space.clone(),
            vec![Rule::explicit(1, ["z", "x"]), Rule::explicit(2, ["y"])],
            Mode::Negative,
        )
        .unwrap();
        let cfg = RuleSetConfig::from_book(&book, None);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rules.json");
        cfg.save(&path).unwrap();
        let back = RuleSetConfig::load(&path).unwrap();
        assert_eq!(back, cfg);
        let rebuilt = back.build(space).unwrap();
        assert_eq!(rebuilt.signatures(), book.signatures());
    }

    #[test]
    fn singleton_ignores_rule_list() {
        let cfg: RuleSetConfig = serde_json::from_str(r#"{"mode": "singleton"}"#).unwrap();
        let space = Arc::new(PasswordSpace::new(["a", "b"]).unwrap());
        assert_eq!(cfg.build(space).unwrap().len(), 2);
    }
}
