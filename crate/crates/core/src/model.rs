//! User models: how a population picks passwords under a policy.
//!
//! In the ranking model every user holds a preference list and picks the
//! first allowed entry. In the normalization model a base distribution is
//! re-normalized onto the allowed set. Both are exposed through
//! [`PolicyModel`], which yields the induced distribution `Pr[w | A]` and the
//! objective `p(k, A)`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::space::{PasswordId, PasswordSpace};

/// Tolerance on the total mass of a [`FrequencyDistribution`].
pub const MASS_TOLERANCE: f64 = 1e-9;

/// An ordered list of distinct passwords, most preferred first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PreferenceList(Vec<PasswordId>);

impl PreferenceList {
    pub fn new(ids: Vec<PasswordId>) -> Result<Self> {
        let mut seen = ids.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "password {} listed twice in a preference list",
                w[0]
            )));
        }
        Ok(PreferenceList(ids))
    }

    pub fn from_names<S: AsRef<str>>(space: &PasswordSpace, names: &[S]) -> Result<Self> {
        let ids = names
            .iter()
            .map(|n| space.require(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(ids)
    }

    pub fn ids(&self) -> &[PasswordId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// First entry accepted by `allowed`.
    #[inline]
    pub fn choose_by(&self, mut allowed: impl FnMut(PasswordId) -> bool) -> Option<PasswordId> {
        self.0.iter().copied().find(|&id| allowed(id))
    }

    pub fn choose(&self, policy: &Policy<'_>) -> Result<PasswordId> {
        self.choose_by(|id| policy.allows_id(id))
            .ok_or(Error::NoAllowedPassword)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedList {
    pub weight: u64,
    pub list: PreferenceList,
}

#[derive(Serialize, Deserialize)]
struct WeightedListRepr {
    weight: u64,
    list: Vec<String>,
}

/// A finite population of users, stored as weighted distinct lists.
#[derive(Clone, Debug)]
pub struct RankingPopulation {
    space: Arc<PasswordSpace>,
    entries: Vec<WeightedList>,
    total: u64,
}

impl RankingPopulation {
    pub fn new(space: Arc<PasswordSpace>, entries: Vec<WeightedList>) -> Result<Self> {
        if entries.iter().any(|e| e.weight == 0) {
            return Err(Error::InvalidArgument(
                "list weights must be positive".into(),
            ));
        }
        if let Some(e) = entries.iter().find(|e| e.list.is_empty()) {
            return Err(Error::InvalidArgument(format!(
                "empty preference list (weight {})",
                e.weight
            )));
        }
        if entries
            .iter()
            .flat_map(|e| e.list.ids())
            .any(|id| id.index() >= space.len())
        {
            return Err(Error::InvalidArgument(
                "preference list refers to a password outside the space".into(),
            ));
        }
        let total = entries.iter().map(|e| e.weight).sum::<u64>();
        if total == 0 {
            return Err(Error::EmptyDistribution);
        }
        Ok(RankingPopulation {
            space,
            entries,
            total,
        })
    }

    /// One user per list, each with weight 1.
    pub fn uniform(space: Arc<PasswordSpace>, lists: Vec<PreferenceList>) -> Result<Self> {
        let entries = lists
            .into_iter()
            .map(|list| WeightedList { weight: 1, list })
            .collect();
        Self::new(space, entries)
    }

    pub fn space(&self) -> &Arc<PasswordSpace> {
        &self.space
    }

    pub fn entries(&self) -> &[WeightedList] {
        &self.entries
    }

    /// Total weight `n`.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Parses `[{"weight": 2, "list": ["a", "b"]}, ...]`. Without a space,
    /// one is built from the passwords in order of first appearance.
    pub fn from_json(text: &str, space: Option<Arc<PasswordSpace>>) -> Result<Self> {
        let reprs: Vec<WeightedListRepr> = serde_json::from_str(text)?;
        let space = match space {
            Some(s) => s,
            None => {
                let mut seen = HashMap::new();
                let mut order = Vec::new();
                for pw in reprs.iter().flat_map(|r| r.list.iter()) {
                    if !seen.contains_key(pw.as_str()) {
                        seen.insert(pw.as_str(), ());
                        order.push(pw.clone());
                    }
                }
                Arc::new(PasswordSpace::new(order)?)
            }
        };
        let entries = reprs
            .iter()
            .map(|r| {
                Ok(WeightedList {
                    weight: r.weight,
                    list: PreferenceList::from_names(&space, &r.list)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(space, entries)
    }

    pub fn load(path: impl AsRef<Path>, space: Option<Arc<PasswordSpace>>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, space)
    }

    pub fn to_json(&self) -> Result<String> {
        let reprs: Vec<WeightedListRepr> = self
            .entries
            .iter()
            .map(|e| WeightedListRepr {
                weight: e.weight,
                list: e
                    .list
                    .ids()
                    .iter()
                    .map(|&id| self.space.get(id).to_string())
                    .collect(),
            })
            .collect();
        Ok(serde_json::to_string_pretty(&reprs)?)
    }

    /// Induced distribution for an arbitrary allowed-set test.
    pub fn induced_by(
        &self,
        mut allowed: impl FnMut(PasswordId) -> bool,
    ) -> Result<InducedDistribution> {
        let mut chosen: Vec<(PasswordId, u64)> = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let id = e
                .list
                .choose_by(&mut allowed)
                .ok_or(Error::NoAllowedPassword)?;
            chosen.push((id, e.weight));
        }
        chosen.sort_unstable_by_key(|&(id, _)| id);
        let mut counts: Vec<(PasswordId, u64)> = Vec::new();
        for (id, w) in chosen {
            match counts.last_mut() {
                Some((last, c)) if *last == id => *c += w,
                _ => counts.push((id, w)),
            }
        }
        Ok(InducedDistribution::from_counts(counts, self.total))
    }
}

/// A base distribution over the password space.
#[derive(Clone, Debug)]
pub struct FrequencyDistribution {
    space: Arc<PasswordSpace>,
    probs: Vec<f64>,
    total_count: Option<u64>,
}

impl FrequencyDistribution {
    /// `probs[i]` is the probability of password `i`.
    pub fn new(space: Arc<PasswordSpace>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != space.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} probabilities for {} passwords",
                probs.len(),
                space.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("bad probability {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(FrequencyDistribution {
            space,
            probs,
            total_count: None,
        })
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let (names, probs): (Vec<String>, Vec<f64>) =
            pairs.into_iter().map(|(s, p)| (s.into(), p)).unzip();
        let space = Arc::new(PasswordSpace::new(names)?);
        Self::new(space, probs)
    }

    /// Normalizes occurrence counts. Repeated passwords are merged and keep
    /// the position of their first occurrence.
    pub fn from_counts<S: AsRef<str>>(counts: impl IntoIterator<Item = (S, u64)>) -> Result<Self> {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut names = Vec::new();
        let mut merged: Vec<u64> = Vec::new();
        for (pw, c) in counts {
            let pw = pw.as_ref();
            match index.get(pw) {
                Some(&i) => merged[i] += c,
                None => {
                    index.insert(pw.to_string(), names.len());
                    names.push(pw.to_string());
                    merged.push(c);
                }
            }
        }
        drop(index);
        let total: u64 = merged.iter().sum();
        if total == 0 {
            return Err(Error::EmptyDistribution);
        }
        let space = Arc::new(PasswordSpace::new(names)?);
        let probs = merged.iter().map(|&c| c as f64 / total as f64).collect();
        let mut dist = Self::new(space, probs)?;
        dist.total_count = Some(total);
        Ok(dist)
    }

    pub fn space(&self) -> &Arc<PasswordSpace> {
        &self.space
    }

    #[inline]
    pub fn prob(&self, id: PasswordId) -> f64 {
        self.probs[id.index()]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of raw occurrences, when built from counts.
    pub fn total_count(&self) -> Option<u64> {
        self.total_count
    }

    pub fn prob_of(&self, password: &str) -> Result<f64> {
        Ok(self.prob(self.space.require(password)?))
    }

    /// Parses `[["password", probability], ...]`.
    pub fn from_json(text: &str) -> Result<Self> {
        let pairs: Vec<(String, f64)> = serde_json::from_str(text)?;
        Self::from_pairs(pairs)
    }

    pub fn to_json(&self) -> Result<String> {
        let pairs: Vec<(&str, f64)> = self
            .space
            .iter()
            .map(|(id, pw)| (pw, self.probs[id.index()]))
            .collect();
        Ok(serde_json::to_string_pretty(&pairs)?)
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn induced_by(
        &self,
        mut allowed: impl FnMut(PasswordId) -> bool,
    ) -> Result<InducedDistribution> {
        let mut mass = 0.0;
        let mut kept = Vec::new();
        for id in self.space.ids() {
            let p = self.probs[id.index()];
            if p > 0.0 && allowed(id) {
                mass += p;
                kept.push((id, p));
            }
        }
        if mass <= 0.0 {
            return Err(Error::ZeroMassPolicy);
        }
        Ok(InducedDistribution::from_masses(kept, mass))
    }

    /// Draws a full ranking by repeatedly sampling from the distribution
    /// re-normalized on the passwords not yet placed. Zero-mass passwords
    /// can never be drawn while mass remains; they close the list in
    /// uniformly random order.
    pub fn sample_ranking<R: Rng + ?Sized>(&self, rng: &mut R) -> PreferenceList {
        // Sorting by Exp(1)/p gives exactly the sequential draw order.
        let mut keyed: Vec<(f64, u64, PasswordId)> = self
            .space
            .ids()
            .map(|id| {
                let p = self.probs[id.index()];
                let e: f64 = -(1.0 - rng.random::<f64>()).ln();
                let key = if p > 0.0 { e / p } else { f64::INFINITY };
                (key, rng.random::<u64>(), id)
            })
            .collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        PreferenceList(keyed.into_iter().map(|(_, _, id)| id).collect())
    }
}

/// Sequential-sampling ranking drawn from a normalization-model distribution.
pub fn ranking_from_normalization<R: Rng + ?Sized>(
    dist: &FrequencyDistribution,
    rng: &mut R,
) -> PreferenceList {
    dist.sample_ranking(rng)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InducedEntry {
    pub id: PasswordId,
    pub prob: f64,
    /// Integer weight behind `prob` in the ranking model.
    pub count: Option<u64>,
}

/// `Pr[w | A]` over the induced support, most popular first, ties by id.
#[derive(Clone, Debug, PartialEq)]
pub struct InducedDistribution {
    entries: Vec<InducedEntry>,
    denominator: Option<u64>,
    // unnormalized base masses, parallel to `entries` (normalization model)
    raw: Vec<f64>,
    raw_mass: f64,
}

impl InducedDistribution {
    fn from_counts(counts: Vec<(PasswordId, u64)>, total: u64) -> Self {
        let mut entries: Vec<InducedEntry> = counts
            .into_iter()
            .map(|(id, c)| InducedEntry {
                id,
                prob: c as f64 / total as f64,
                count: Some(c),
            })
            .collect();
        entries.sort_by(|a, b| b.count.cmp(&a.count).then(a.id.cmp(&b.id)));
        InducedDistribution {
            entries,
            denominator: Some(total),
            raw: Vec::new(),
            raw_mass: total as f64,
        }
    }

    fn from_masses(masses: Vec<(PasswordId, f64)>, mass: f64) -> Self {
        let mut entries: Vec<(PasswordId, f64)> = masses;
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        InducedDistribution {
            raw: entries.iter().map(|e| e.1).collect(),
            entries: entries
                .into_iter()
                .map(|(id, p)| InducedEntry {
                    id,
                    prob: p / mass,
                    count: None,
                })
                .collect(),
            denominator: None,
            raw_mass: mass,
        }
    }

    pub fn entries(&self) -> &[InducedEntry] {
        &self.entries
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn prob(&self, id: PasswordId) -> f64 {
        self.entries
            .iter()
            .find(|e| e.id == id)
            .map_or(0.0, |e| e.prob)
    }

    pub fn most_popular(&self) -> Option<PasswordId> {
        self.entries.first().map(|e| e.id)
    }

    /// Identities of the `k` most popular passwords.
    pub fn top(&self, k: usize) -> Vec<PasswordId> {
        self.entries.iter().take(k).map(|e| e.id).collect()
    }

    /// Sum of the `k` largest induced probabilities.
    pub fn p_k(&self, k: usize) -> f64 {
        if k >= self.entries.len() {
            return 1.0;
        }
        match self.p_k_ratio(k) {
            Some((num, den)) => num as f64 / den as f64,
            None => self.raw[..k].iter().sum::<f64>() / self.raw_mass,
        }
    }

    /// `p(k)` as an exact fraction in the ranking model.
    pub fn p_k_ratio(&self, k: usize) -> Option<(u64, u64)> {
        let den = self.denominator?;
        let num = self.entries.iter().take(k).filter_map(|e| e.count).sum();
        Some((num, den))
    }
}

/// Either user model behind one query interface.
#[derive(Clone, Debug)]
pub enum PolicyModel {
    Ranking(RankingPopulation),
    Normalization(FrequencyDistribution),
}

impl From<RankingPopulation> for PolicyModel {
    fn from(p: RankingPopulation) -> Self {
        PolicyModel::Ranking(p)
    }
}

impl From<FrequencyDistribution> for PolicyModel {
    fn from(d: FrequencyDistribution) -> Self {
        PolicyModel::Normalization(d)
    }
}

impl PolicyModel {
    pub fn space(&self) -> &Arc<PasswordSpace> {
        match self {
            PolicyModel::Ranking(p) => p.space(),
            PolicyModel::Normalization(d) => d.space(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PolicyModel::Ranking(_) => "ranking",
            PolicyModel::Normalization(_) => "normalization",
        }
    }

    pub fn induced_by(
        &self,
        allowed: impl FnMut(PasswordId) -> bool,
    ) -> Result<InducedDistribution> {
        match self {
            PolicyModel::Ranking(p) => p.induced_by(allowed),
            PolicyModel::Normalization(d) => d.induced_by(allowed),
        }
    }

    pub fn induced(&self, policy: &Policy<'_>) -> Result<InducedDistribution> {
        self.check_space(policy)?;
        self.induced_by(|id| policy.allows_id(id))
    }

    /// `Pr[w | A]`; zero for passwords the policy bans.
    pub fn induced_prob(&self, policy: &Policy<'_>, password: &str) -> Result<f64> {
        let id = self.space().require(password)?;
        let dist = self.induced(policy)?;
        Ok(dist.prob(id))
    }

    pub fn p_k(&self, policy: &Policy<'_>, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        Ok(self.induced(policy)?.p_k(k))
    }

    fn check_space(&self, policy: &Policy<'_>) -> Result<()> {
        if Arc::ptr_eq(self.space(), policy.book().space()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "policy and model use different password spaces".into(),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{Mode, Rule, RuleBook};
    use crate::ruleset::RuleSet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn abc() -> FrequencyDistribution {
        FrequencyDistribution::from_pairs([("a", 0.5), ("b", 0.3), ("c", 0.2)]).unwrap()
    }

    #[test]
    fn choose_first_allowed() {
        let d = abc();
        let book = RuleBook::new(
            d.space().clone(),
            vec![Rule::explicit(1, ["b", "c"])],
            Mode::Positive,
        )
        .unwrap();
        let l = PreferenceList::from_names(d.space(), &["a", "b", "c"]).unwrap();
        let all = Policy::with_mode(&book, Mode::Negative, book.empty_set()).unwrap();
        assert_eq!(l.choose(&all).unwrap(), PasswordId(0));
        let bc = book.policy(book.full_set()).unwrap();
        assert_eq!(l.choose(&bc).unwrap(), PasswordId(1));
        let none = book.policy(book.empty_set()).unwrap();
        assert!(matches!(l.choose(&none), Err(Error::NoAllowedPassword)));
    }

    #[test]
    fn normalization_queries() {
        let d = abc();
        let book = RuleBook::new(
            d.space().clone(),
            vec![Rule::explicit(1, ["b", "c"])],
            Mode::Positive,
        )
        .unwrap();
        let model = PolicyModel::from(d);
        let bc = book.policy(book.full_set()).unwrap();
        assert!((model.induced_prob(&bc, "b").unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(model.induced_prob(&bc, "a").unwrap(), 0.0);
        let all = Policy::with_mode(&book, Mode::Negative, book.empty_set()).unwrap();
        assert!((model.p_k(&all, 2).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(model.p_k(&all, 3).unwrap(), 1.0);
        assert_eq!(model.p_k(&all, 7).unwrap(), 1.0);
        let none = book.policy(book.empty_set()).unwrap();
        assert!(matches!(model.p_k(&none, 1), Err(Error::ZeroMassPolicy)));
    }

    #[test]
    fn ranking_symmetry() {
        let space = Arc::new(PasswordSpace::new(["a", "b"]).unwrap());
        let lists = vec![
            PreferenceList::from_names(&space, &["a", "b"]).unwrap(),
            PreferenceList::from_names(&space, &["b", "a"]).unwrap(),
        ];
        let pop = RankingPopulation::uniform(space.clone(), lists).unwrap();
        let book = RuleBook::singletons(space);
        let all = book.policy(book.empty_set()).unwrap();
        let model = PolicyModel::from(pop);
        assert_eq!(model.induced_prob(&all, "a").unwrap(), 0.5);
        let d = model.induced(&all).unwrap();
        assert_eq!(d.p_k_ratio(1), Some((1, 2)));
        let ban_a = book.policy(RuleSet::from_ids(2, [1])).unwrap();
        assert_eq!(model.induced_prob(&ban_a, "b").unwrap(), 1.0);
    }

    #[test]
    fn distribution_validation() {
        assert!(FrequencyDistribution::from_pairs([("a", 0.5), ("b", 0.4)]).is_err());
        assert!(FrequencyDistribution::from_pairs([("a", 1.5), ("b", -0.5)]).is_err());
        let d = FrequencyDistribution::from_counts([("x", 3u64), ("y", 1), ("x", 4)]).unwrap();
        assert_eq!(d.space().len(), 2);
        assert_eq!(d.prob_of("x").unwrap(), 7.0 / 8.0);
        assert_eq!(d.total_count(), Some(8));
        assert!(matches!(
            FrequencyDistribution::from_counts([("x", 0u64)]),
            Err(Error::EmptyDistribution)
        ));
    }

    #[test]
    fn preference_lists_reject_duplicates() {
        let space = PasswordSpace::new(["a", "b"]).unwrap();
        assert!(PreferenceList::from_names(&space, &["a", "a"]).is_err());
        assert!(PreferenceList::from_names(&space, &["z"]).is_err());
    }

    #[test]
    fn population_json_roundtrip() {
        let json = r#"[{"weight": 3, "list": ["x", "y"]}, {"weight": 1, "list": ["y", "z"]}]"#;
        let pop = RankingPopulation::from_json(json, None).unwrap();
        assert_eq!(pop.total(), 4);
        assert_eq!(pop.space().len(), 3);
        let again = RankingPopulation::from_json(&pop.to_json().unwrap(), None).unwrap();
        assert_eq!(again.entries(), pop.entries());
    }

    #[test]
    fn distribution_json_roundtrip() {
        let d = abc();
        let back = FrequencyDistribution::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(back.probs(), d.probs());
        assert_eq!(back.space().get(PasswordId(2)), "c");
    }

    #[test]
    fn sample_ranking_point_mass_head() {
        let d = FrequencyDistribution::from_pairs([("a", 1.0), ("b", 0.0), ("c", 0.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let l = d.sample_ranking(&mut rng);
            assert_eq!(l.ids()[0], PasswordId(0));
            assert_eq!(l.len(), 3);
        }
    }
}
