//! Sample access to a user population.
//!
//! A [`SampleOracle`] answers "which password would a random user pick under
//! this policy?". The sampling optimizers see nothing else of the model.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::model::PolicyModel;
use crate::policy::{Policy, RuleBook};
use crate::signature::SignatureTable;
use crate::space::PasswordId;

/// Aggregated outcome of a batch of draws, most frequent first, ties by id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SampleCounts {
    counts: Vec<(PasswordId, u64)>,
    total: u64,
}

impl SampleCounts {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (PasswordId, u64)>) -> Self {
        let mut merged: HashMap<PasswordId, u64> = HashMap::new();
        for (id, c) in pairs {
            if c > 0 {
                *merged.entry(id).or_default() += c;
            }
        }
        let mut counts: Vec<(PasswordId, u64)> = merged.into_iter().collect();
        counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let total = counts.iter().map(|c| c.1).sum();
        SampleCounts { counts, total }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn iter(&self) -> impl Iterator<Item = (PasswordId, u64)> + '_ {
        self.counts.iter().copied()
    }

    pub fn as_slice(&self) -> &[(PasswordId, u64)] {
        &self.counts
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn most_frequent(&self) -> Option<(PasswordId, u64)> {
        self.counts.first().copied()
    }

    pub fn count(&self, id: PasswordId) -> u64 {
        self.counts.iter().find(|c| c.0 == id).map_or(0, |c| c.1)
    }

    /// Sum of the `k` largest counts.
    pub fn top_k(&self, k: usize) -> u64 {
        self.counts.iter().take(k).map(|c| c.1).sum()
    }
}

pub trait SampleOracle {
    /// One user's choice under `policy`.
    fn draw(&mut self, policy: &Policy<'_>) -> Result<PasswordId> {
        let c = self.draw_many(policy, 1)?;
        c.most_frequent()
            .map(|(id, _)| id)
            .ok_or(Error::NoAllowedPassword)
    }

    /// `s` independent choices under `policy`.
    fn draw_many(&mut self, policy: &Policy<'_>, s: u64) -> Result<SampleCounts>;

    /// Draws served so far.
    fn draws(&self) -> u64;
}

/// RNG for run `stream` of an experiment seeded with `seed`.
pub fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Counts for `n` draws from the categorical distribution proportional to
/// `weights`, by sequential binomial splitting.
pub fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, weights: &[f64]) -> Vec<u64> {
    let mut out = vec![0; weights.len()];
    let mut suffix = vec![0.0; weights.len() + 1];
    for i in (0..weights.len()).rev() {
        suffix[i] = suffix[i + 1] + weights[i];
    }
    let last = weights.iter().rposition(|&w| w > 0.0);
    let mut left = n;
    for i in 0..weights.len() {
        if left == 0 {
            break;
        }
        if weights[i] <= 0.0 {
            continue;
        }
        let x = if Some(i) == last {
            left
        } else {
            let p = (weights[i] / suffix[i]).clamp(0.0, 1.0);
            Binomial::new(left, p).expect("valid binomial").sample(rng)
        };
        out[i] = x;
        left -= x;
    }
    out
}

/// Oracle backed by a known model.
pub struct ModelOracle<'a> {
    model: &'a PolicyModel,
    book: &'a RuleBook,
    table: Option<SignatureTable>,
    cumulative: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
    draws: u64,
}

impl<'a> ModelOracle<'a> {
    pub fn new(model: &'a PolicyModel, book: &'a RuleBook, rng: ChaCha8Rng) -> Result<Self> {
        if !std::sync::Arc::ptr_eq(model.space(), book.space()) {
            return Err(Error::InvalidArgument(
                "model and rule book use different password spaces".into(),
            ));
        }
        let table = match model {
            PolicyModel::Normalization(d) => Some(SignatureTable::new(book, d)?),
            PolicyModel::Ranking(_) => None,
        };
        let cumulative = table
            .iter()
            .flat_map(|t| t.groups())
            .map(|g| {
                let mut acc = 0.0;
                g.probs
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(ModelOracle {
            model,
            book,
            table,
            cumulative,
            rng,
            draws: 0,
        })
    }

    pub fn seeded(model: &'a PolicyModel, book: &'a RuleBook, seed: u64) -> Result<Self> {
        Self::new(model, book, ChaCha8Rng::seed_from_u64(seed))
    }

    fn draw_normalization(
        &mut self,
        table: &SignatureTable,
        policy: &Policy<'_>,
        s: u64,
    ) -> Result<SampleCounts> {
        let allowed: Vec<usize> = table
            .groups()
            .iter()
            .enumerate()
            .filter(|(_, g)| policy.mode().allows(&g.signature, policy.active()))
            .map(|(i, _)| i)
            .collect();
        let masses: Vec<f64> = allowed.iter().map(|&i| table.groups()[i].mass).collect();
        if masses.iter().sum::<f64>() <= 0.0 {
            return Err(Error::ZeroMassPolicy);
        }
        let per_group = multinomial(&mut self.rng, s, &masses);
        let mut pairs = Vec::new();
        for (&gi, &x) in allowed.iter().zip(&per_group) {
            if x == 0 {
                continue;
            }
            let g = &table.groups()[gi];
            if (x as usize) < g.members.len() {
                let cum = &self.cumulative[gi];
                let total = *cum.last().expect("nonempty group");
                for _ in 0..x {
                    let u = self.rng.random::<f64>() * total;
                    let j = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
                    pairs.push((g.members[j], 1));
                }
            } else {
                let xs = multinomial(&mut self.rng, x, &g.probs);
                pairs.extend(g.members.iter().copied().zip(xs));
            }
        }
        Ok(SampleCounts::from_pairs(pairs))
    }
}

impl SampleOracle for ModelOracle<'_> {
    fn draw_many(&mut self, policy: &Policy<'_>, s: u64) -> Result<SampleCounts> {
        if !std::ptr::eq(policy.book(), self.book) {
            return Err(Error::InvalidArgument(
                "policy was built from a different rule book".into(),
            ));
        }
        let counts = match self.model {
            PolicyModel::Ranking(pop) => {
                let d = pop.induced_by(|id| policy.allows_id(id))?;
                let ids: Vec<PasswordId> = d.entries().iter().map(|e| e.id).collect();
                let weights: Vec<f64> = d
                    .entries()
                    .iter()
                    .map(|e| e.count.unwrap_or(0) as f64)
                    .collect();
                let xs = multinomial(&mut self.rng, s, &weights);
                SampleCounts::from_pairs(ids.into_iter().zip(xs))
            }
            PolicyModel::Normalization(_) => {
                let table = self.table.take().expect("table built for normalization");
                let out = self.draw_normalization(&table, policy, s);
                self.table = Some(table);
                out?
            }
        };
        self.draws += s;
        Ok(counts)
    }

    fn draws(&self) -> u64 {
        self.draws
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FrequencyDistribution;
    use crate::policy::{Mode, Rule};
    use crate::ruleset::RuleSet;

    #[test]
    fn multinomial_conserves_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [0, 1, 17, 1000] {
            let xs = multinomial(&mut rng, n, &[0.2, 0.0, 0.5, 0.3, 0.0]);
            assert_eq!(xs.iter().sum::<u64>(), n);
            assert_eq!(xs[1], 0);
            assert_eq!(xs[4], 0);
        }
    }

    #[test]
    fn counts_order_and_queries() {
        let c = SampleCounts::from_pairs([
            (PasswordId(3), 2),
            (PasswordId(1), 5),
            (PasswordId(2), 5),
            (PasswordId(3), 1),
        ]);
        assert_eq!(c.total(), 13);
        assert_eq!(c.most_frequent(), Some((PasswordId(1), 5)));
        assert_eq!(c.count(PasswordId(3)), 3);
        assert_eq!(c.top_k(2), 10);
    }

    #[test]
    fn oracle_respects_policy_and_counts_draws() {
        let d = FrequencyDistribution::from_pairs([("a", 0.6), ("b", 0.3), ("c", 0.1)]).unwrap();
        let book = RuleBook::new(
            d.space().clone(),
            vec![Rule::explicit(1, ["b", "c"])],
            Mode::Positive,
        )
        .unwrap();
        let model = PolicyModel::from(d);
        let mut o = ModelOracle::seeded(&model, &book, 9).unwrap();
        let p = book.policy(book.full_set()).unwrap();
        let c = o.draw_many(&p, 5000).unwrap();
        assert_eq!(c.total(), 5000);
        assert_eq!(c.count(PasswordId(0)), 0);
        assert_eq!(o.draws(), 5000);
        let none = book.policy(RuleSet::empty(1)).unwrap();
        assert!(matches!(o.draw_many(&none, 1), Err(Error::ZeroMassPolicy)));
        assert_ne!(o.draw(&p).unwrap(), PasswordId(0));
    }

    #[test]
    fn same_seed_same_draws() {
        let d =
            FrequencyDistribution::from_pairs((0..20).map(|i| (format!("p{i}"), 0.05))).unwrap();
        let book = RuleBook::singletons(d.space().clone());
        let model = PolicyModel::from(d);
        let p = book.policy(book.empty_set()).unwrap();
        let a = ModelOracle::new(&model, &book, run_rng(5, 2))
            .unwrap()
            .draw_many(&p, 300)
            .unwrap();
        let b = ModelOracle::new(&model, &book, run_rng(5, 2))
            .unwrap()
            .draw_many(&p, 300)
            .unwrap();
        assert_eq!(a, b);
    }
}
