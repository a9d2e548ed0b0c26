//! Rules, rule books and composition policies.
//!
//! A [`RuleBook`] binds a list of rules to a [`PasswordSpace`] and caches, for
//! every password, the set of rules that contain it (its signature). Policy
//! evaluation is then a single bitset test: under positive rules a password
//! is allowed when its signature meets the active set, under negative rules
//! when it does not.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predicate::RulePredicate;
use crate::ruleset::RuleSet;
use crate::space::{PasswordId, PasswordSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Allowed set is the union of the active rules.
    Positive,
    /// Allowed set is everything outside the union of the active rules.
    Negative,
    /// One rule per password; active rules are banned passwords.
    Singleton,
}

impl Mode {
    #[inline]
    pub fn allows(self, signature: &RuleSet, active: &RuleSet) -> bool {
        match self {
            Mode::Positive => signature.intersects(active),
            Mode::Negative | Mode::Singleton => !signature.intersects(active),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Positive => "positive",
            Mode::Negative => "negative",
            Mode::Singleton => "singleton",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub enum Membership {
    Explicit(HashSet<String>),
    Predicate(RulePredicate),
}

#[derive(Clone, Debug)]
pub struct Rule {
    /// 1-based rule number.
    pub id: usize,
    pub label: String,
    pub membership: Membership,
}

impl Rule {
    pub fn explicit<I, S>(id: usize, passwords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: HashSet<String> = passwords.into_iter().map(Into::into).collect();
        let mut sorted: Vec<&String> = set.iter().collect();
        sorted.sort();
        let label = format!(
            "{{{}}}",
            sorted
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(",")
        );
        Rule {
            id,
            label,
            membership: Membership::Explicit(set),
        }
    }

    pub fn predicate(id: usize, predicate: RulePredicate) -> Self {
        Rule {
            id,
            label: predicate.describe(),
            membership: Membership::Predicate(predicate),
        }
    }

    pub fn contains(&self, password: &str) -> bool {
        match &self.membership {
            Membership::Explicit(set) => set.contains(password),
            Membership::Predicate(p) => p.evaluate(password),
        }
    }

    /// Compact name for witness rendering.
    pub fn short_label(&self) -> String {
        match &self.membership {
            Membership::Predicate(p) => p.short_label(),
            Membership::Explicit(_) => format!("R{}", self.id),
        }
    }
}

/// Rules compiled against a password space.
#[derive(Clone, Debug)]
pub struct RuleBook {
    space: Arc<PasswordSpace>,
    rules: Vec<Rule>,
    mode: Mode,
    signatures: Vec<RuleSet>,
}

impl RuleBook {
    pub fn new(space: Arc<PasswordSpace>, rules: Vec<Rule>, mode: Mode) -> Result<Self> {
        for (i, r) in rules.iter().enumerate() {
            if r.id != i + 1 {
                return Err(Error::InvalidArgument(format!(
                    "rule ids must be 1..=m in order; position {} has id {}",
                    i + 1,
                    r.id
                )));
            }
        }
        for r in &rules {
            if let Membership::Explicit(set) = &r.membership {
                if let Some(bad) = set.iter().find(|p| space.id_of(p).is_none()) {
                    return Err(Error::UnknownPassword(bad.clone()));
                }
            }
        }
        let m = rules.len();
        let signatures: Vec<RuleSet> = (0..space.len())
            .into_par_iter()
            .map(|i| {
                let pw = space.get(PasswordId(i as u32));
                RuleSet::from_indices(
                    m,
                    rules
                        .iter()
                        .enumerate()
                        .filter(|(_, r)| r.contains(pw))
                        .map(|(j, _)| j),
                )
            })
            .collect();
        let book = RuleBook {
            space,
            rules,
            mode,
            signatures,
        };
        if mode == Mode::Singleton && !book.is_singleton_family() {
            return Err(Error::InvalidMode {
                expected: "singleton",
                actual: "non-singleton",
            });
        }
        Ok(book)
    }

    /// One rule `{w}` per password, in space order.
    pub fn singletons(space: Arc<PasswordSpace>) -> Self {
        let n = space.len();
        let rules = space
            .iter()
            .map(|(id, pw)| {
                let mut r = Rule::explicit(id.index() + 1, [pw]);
                r.label = pw.to_string();
                r
            })
            .collect();
        let signatures = (0..n).map(|i| RuleSet::from_indices(n, [i])).collect();
        RuleBook {
            space,
            rules,
            mode: Mode::Singleton,
            signatures,
        }
    }

    /// Same rules interpreted under another mode.
    pub fn with_mode(mut self, mode: Mode) -> Result<Self> {
        if mode == Mode::Singleton && !self.is_singleton_family() {
            return Err(Error::InvalidMode {
                expected: "singleton",
                actual: "non-singleton",
            });
        }
        self.mode = mode;
        Ok(self)
    }

    /// Complementary rule book: every rule replaced by its complement and
    /// positive/negative mode swapped. Negative rules built this way allow
    /// exactly the intersection of the corresponding positive rules.
    pub fn complement(&self) -> Result<Self> {
        let mode = match self.mode {
            Mode::Positive => Mode::Negative,
            Mode::Negative => Mode::Positive,
            Mode::Singleton => {
                return Err(Error::InvalidMode {
                    expected: "positive or negative",
                    actual: "singleton",
                })
            }
        };
        let m = self.rules.len();
        let rules = self
            .rules
            .iter()
            .enumerate()
            .map(|(j, r)| match &r.membership {
                Membership::Predicate(p) => Rule::predicate(r.id, p.negate()),
                Membership::Explicit(_) => {
                    let members = self
                        .space
                        .iter()
                        .filter(|(id, _)| !self.signatures[id.index()].contains(j))
                        .map(|(_, pw)| pw.to_string());
                    let mut out = Rule::explicit(r.id, members);
                    out.label = format!("not {}", r.label);
                    out
                }
            })
            .collect();
        let full = RuleSet::full(m);
        let signatures = self
            .signatures
            .iter()
            .map(|s| s.complement().intersection(&full))
            .collect();
        Ok(RuleBook {
            space: self.space.clone(),
            rules,
            mode,
            signatures,
        })
    }

    pub fn space(&self) -> &Arc<PasswordSpace> {
        &self.space
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Number of rules `m`.
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Rules containing `id`.
    #[inline]
    pub fn signature(&self, id: PasswordId) -> &RuleSet {
        &self.signatures[id.index()]
    }

    pub fn signatures(&self) -> &[RuleSet] {
        &self.signatures
    }

    /// Membership query: is password `id` in rule `rule` (0-based)?
    #[inline]
    pub fn contains(&self, rule: usize, id: PasswordId) -> bool {
        self.signatures[id.index()].contains(rule)
    }

    pub fn full_set(&self) -> RuleSet {
        RuleSet::full(self.len())
    }

    pub fn empty_set(&self) -> RuleSet {
        RuleSet::empty(self.len())
    }

    pub fn policy(&self, active: RuleSet) -> Result<Policy<'_>> {
        Policy::new(self, active)
    }

    fn is_singleton_family(&self) -> bool {
        self.rules.len() == self.space.len()
            && self
                .signatures
                .iter()
                .enumerate()
                .all(|(i, s)| s.len() == 1 && s.contains(i))
    }

    /// Renders an active set in natural language. Positive policies read as a
    /// union of rules; negative policies as the intersection of the rules'
    /// complements.
    pub fn describe(&self, active: &RuleSet) -> String {
        let labels: Vec<String> = active
            .iter()
            .map(|j| match self.mode {
                Mode::Positive => self.rules[j].short_label(),
                Mode::Negative => match &self.rules[j].membership {
                    Membership::Predicate(p) => p.negate().short_label(),
                    Membership::Explicit(_) => format!("not R{}", j + 1),
                },
                Mode::Singleton => format!("not {}", self.rules[j].label),
            })
            .collect();
        match (self.mode, labels.is_empty()) {
            (Mode::Positive, true) => "nothing allowed".into(),
            (_, true) => "all passwords allowed".into(),
            (Mode::Positive, false) => labels.join(" OR "),
            (_, false) => labels.join(" AND "),
        }
    }
}

/// A composition policy: an active rule subset under its book's mode.
#[derive(Clone, Debug)]
pub struct Policy<'a> {
    book: &'a RuleBook,
    mode: Mode,
    active: RuleSet,
}

impl<'a> Policy<'a> {
    pub fn new(book: &'a RuleBook, active: RuleSet) -> Result<Self> {
        Self::with_mode(book, book.mode, active)
    }

    /// Evaluates `book` under an explicit mode. Singleton rules may be read
    /// positively (active = allowed) since the two views coincide.
    pub fn with_mode(book: &'a RuleBook, mode: Mode, active: RuleSet) -> Result<Self> {
        if active.universe() != book.len() {
            return Err(Error::InvalidArgument(format!(
                "active set over {} rules, book has {}",
                active.universe(),
                book.len()
            )));
        }
        if mode == Mode::Singleton && !book.is_singleton_family() {
            return Err(Error::InvalidMode {
                expected: "singleton",
                actual: "non-singleton",
            });
        }
        Ok(Policy { book, mode, active })
    }

    pub fn book(&self) -> &'a RuleBook {
        self.book
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn active(&self) -> &RuleSet {
        &self.active
    }

    #[inline]
    pub fn allows_id(&self, id: PasswordId) -> bool {
        self.mode.allows(self.book.signature(id), &self.active)
    }

    pub fn allows(&self, password: &str) -> Result<bool> {
        let id = self.book.space.require(password)?;
        Ok(self.allows_id(id))
    }

    pub fn allowed_ids(&self) -> Vec<PasswordId> {
        self.book
            .space
            .ids()
            .filter(|&id| self.allows_id(id))
            .collect()
    }

    pub fn allowed_set(&self) -> BTreeSet<&'a str> {
        let space: &'a PasswordSpace = &self.book.space;
        space
            .iter()
            .filter(|(id, _)| self.allows_id(*id))
            .map(|(_, pw)| pw)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn book(mode: Mode) -> RuleBook {
        let space = Arc::new(PasswordSpace::new(["a", "b", "c"]).unwrap());
        RuleBook::new(
            space,
            vec![Rule::explicit(1, ["a", "b"]), Rule::explicit(2, ["b", "c"])],
            mode,
        )
        .unwrap()
    }

    #[test]
    fn positive_semantics() {
        let b = book(Mode::Positive);
        let none = b.policy(b.empty_set()).unwrap();
        assert!(!none.allows("a").unwrap());
        let only2 = b.policy(RuleSet::from_ids(2, [2])).unwrap();
        assert!(!only2.allows("a").unwrap());
        assert!(only2.allows("c").unwrap());
        let both = b.policy(b.full_set()).unwrap();
        assert_eq!(both.allowed_set(), BTreeSet::from(["a", "b", "c"]));
    }

    #[test]
    fn negative_semantics() {
        let b = book(Mode::Negative);
        let none = b.policy(b.empty_set()).unwrap();
        assert!(none.allows("a").unwrap());
        let ban1 = b.policy(RuleSet::from_ids(2, [1])).unwrap();
        assert_eq!(ban1.allowed_set(), BTreeSet::from(["c"]));
        assert!(matches!(ban1.allows("zzz"), Err(Error::UnknownPassword(_))));
    }

    #[test]
    fn singleton_semantics() {
        let space = Arc::new(PasswordSpace::new(["a", "b"]).unwrap());
        let b = RuleBook::singletons(space);
        let p = b.policy(b.empty_set()).unwrap();
        assert_eq!(p.allowed_set(), BTreeSet::from(["a", "b"]));
        let p = b.policy(RuleSet::from_ids(2, [1])).unwrap();
        assert_eq!(p.allowed_set(), BTreeSet::from(["b"]));
        assert!(book(Mode::Positive).with_mode(Mode::Singleton).is_err());
    }

    #[test]
    fn complement_swaps_mode_and_membership() {
        let b = book(Mode::Positive);
        let c = b.complement().unwrap();
        assert_eq!(c.mode(), Mode::Negative);
        // negative complement of {R1,R2} allows R1 ∩ R2
        let p = c.policy(c.full_set()).unwrap();
        assert_eq!(p.allowed_set(), BTreeSet::from(["b"]));
        assert!(c.rules()[0].contains("c"));
    }

    #[test]
    fn rejects_bad_ids_and_unknown_passwords() {
        let space = Arc::new(PasswordSpace::new(["a"]).unwrap());
        assert!(RuleBook::new(
            space.clone(),
            vec![Rule::explicit(2, ["a"])],
            Mode::Positive
        )
        .is_err());
        assert!(matches!(
            RuleBook::new(space, vec![Rule::explicit(1, ["q"])], Mode::Positive),
            Err(Error::UnknownPassword(_))
        ));
    }
}
