//! Reference values for a dataset and rule set: no policy, the average
//! policy, the best single rule and the exact positive and negative optima.
//!
//! All `2^m` policies are scored at once. Let `F[T]` be the mass of the
//! signature groups whose signature is a subset of `T` and `G[T]` the largest
//! single probability among them (subset-sum and subset-max transforms).
//! A negative policy `S` allows exactly the groups with signature inside the
//! complement of `S`, so its mass and top probability are `F[~S]` and
//! `G[~S]`. A positive policy allows the rest: mass `total - F[~S]`, top
//! probability the largest per-rule maximum over `S`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::BRUTE_FORCE_MAX_RULES;
use crate::policy::{Mode, RuleBook};
use crate::ruleset::RuleSet;
use crate::signature::SignatureTable;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaselineRow {
    pub active: RuleSet,
    pub p1: f64,
    pub witness: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Baselines {
    pub no_policy: f64,
    /// Mean `p(1, ·)` over positive policies with nonzero mass.
    pub mean_positive: f64,
    /// Mean `p(1, ·)` over negative policies with nonzero mass.
    pub mean_negative: f64,
    pub best_single_rule: BaselineRow,
    pub optimal_positive: BaselineRow,
    pub optimal_negative: BaselineRow,
}

/// Per-mask `p(1, ·)` for every policy over one book, `None` where the
/// policy has no mass.
#[derive(Clone, Debug)]
pub struct PolicyScores {
    pub mode: Mode,
    pub rules: usize,
    pub p1: Vec<Option<f64>>,
}

impl PolicyScores {
    /// Smallest `p1`, ties to the smallest mask.
    pub fn best(&self) -> Option<(u64, f64)> {
        let mut best: Option<(u64, f64)> = None;
        for (mask, v) in self.p1.iter().enumerate() {
            if let Some(v) = *v {
                if best.is_none_or(|b| v < b.1) {
                    best = Some((mask as u64, v));
                }
            }
        }
        best
    }

    pub fn mean(&self) -> f64 {
        let (sum, n) = self
            .p1
            .iter()
            .flatten()
            .fold((0.0, 0u64), |(s, n), v| (s + v, n + 1));
        sum / n as f64
    }
}

/// `p(1, ·)` for every active set of `table`'s book read under `mode`.
pub fn score_all(table: &SignatureTable, mode: Mode) -> Result<PolicyScores> {
    let m = table.rule_count();
    if m > BRUTE_FORCE_MAX_RULES {
        return Err(Error::TooManyRules {
            m,
            limit: BRUTE_FORCE_MAX_RULES,
        });
    }
    let size = 1usize << m;
    let full = size - 1;
    let mut mass = vec![0.0f64; size];
    let mut top = vec![0.0f64; size];
    for g in table.groups() {
        let sig = g.signature.to_mask().expect("at most 64 rules") as usize;
        mass[sig] += g.mass;
        top[sig] = top[sig].max(g.probs[0]);
    }
    let total: f64 = table.groups().iter().map(|g| g.mass).sum();
    let per_rule_top: Vec<f64> = (0..m)
        .map(|i| {
            table
                .groups()
                .iter()
                .filter(|g| g.signature.contains(i))
                .map(|g| g.probs[0])
                .fold(0.0, f64::max)
        })
        .collect();
    for i in 0..m {
        let bit = 1 << i;
        for t in 0..size {
            if t & bit != 0 {
                mass[t] += mass[t ^ bit];
                top[t] = top[t].max(top[t ^ bit]);
            }
        }
    }
    let p1 = match mode {
        Mode::Negative | Mode::Singleton => (0..size)
            .map(|s| {
                let c = full & !s;
                (mass[c] > 0.0).then(|| top[c] / mass[c])
            })
            .collect(),
        Mode::Positive => {
            let mut max_top = vec![0.0f64; size];
            for s in 1..size {
                let low = s.trailing_zeros() as usize;
                max_top[s] = max_top[s & (s - 1)].max(per_rule_top[low]);
            }
            (0..size)
                .map(|s| {
                    let allowed = total - mass[full & !s];
                    (max_top[s] > 0.0 && allowed > 0.0).then(|| max_top[s] / allowed)
                })
                .collect()
        }
    };
    Ok(PolicyScores { mode, rules: m, p1 })
}

/// Baselines for `positive` and `negative`, two books over the same space
/// and distribution as `pos_table` and `neg_table`.
pub fn compute_baselines(
    positive: &RuleBook,
    pos_table: &SignatureTable,
    negative: &RuleBook,
    neg_table: &SignatureTable,
) -> Result<Baselines> {
    let pos = score_all(pos_table, Mode::Positive)?;
    let neg = score_all(neg_table, Mode::Negative)?;
    let m = positive.len();
    let row = |book: &RuleBook, scores: &PolicyScores, mask: u64, p1: f64| {
        let active = RuleSet::from_mask(scores.rules, mask);
        BaselineRow {
            witness: book.describe(&active),
            active,
            p1,
        }
    };
    let no_policy = neg.p1[0].ok_or(Error::EmptyDistribution)?;
    let (single_mask, single_p1) = (0..m)
        .filter_map(|i| pos.p1[1 << i].map(|v| (1u64 << i, v)))
        .fold(None, |best: Option<(u64, f64)>, (mask, v)| match best {
            Some(b) if b.1 <= v => Some(b),
            _ => Some((mask, v)),
        })
        .ok_or(Error::NoFeasiblePolicy)?;
    let (pos_mask, pos_p1) = pos.best().ok_or(Error::NoFeasiblePolicy)?;
    let (neg_mask, neg_p1) = neg.best().ok_or(Error::NoFeasiblePolicy)?;
    Ok(Baselines {
        no_policy,
        mean_positive: pos.mean(),
        mean_negative: neg.mean(),
        best_single_rule: row(positive, &pos, single_mask, single_p1),
        optimal_positive: row(positive, &pos, pos_mask, pos_p1),
        optimal_negative: row(negative, &neg, neg_mask, neg_p1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::brute_force_with_mode;
    use crate::generators::{gen_random_instance, ModelKind};
    use crate::model::PolicyModel;
    use crate::policy::Policy;

    #[test]
    fn transform_scores_match_direct_evaluation() {
        for seed in 0..30 {
            let inst = gen_random_instance(9, 5, 0, ModelKind::Normalization, seed).unwrap();
            let PolicyModel::Normalization(d) = &inst.model else {
                unreachable!()
            };
            let table = SignatureTable::new(&inst.book, d).unwrap();
            for mode in [Mode::Positive, Mode::Negative] {
                let scores = score_all(&table, mode).unwrap();
                for mask in 0..32u64 {
                    let active = RuleSet::from_mask(5, mask);
                    let policy = Policy::with_mode(&inst.book, mode, active).unwrap();
                    let direct = inst.model.p_k(&policy, 1).ok();
                    match (direct, scores.p1[mask as usize]) {
                        (Some(a), Some(b)) => {
                            assert!((a - b).abs() < 1e-12, "{seed} {mode} {mask}")
                        }
                        (None, None) => {}
                        other => panic!("seed {seed} {mode} mask {mask}: {other:?}"),
                    }
                }
                let brute = brute_force_with_mode(&inst.model, &inst.book, mode, 1).unwrap();
                let (_, best) = scores.best().unwrap();
                assert!((brute.value - best).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn point_mass_dataset() {
        let d = crate::model::FrequencyDistribution::from_pairs([("a", 1.0), ("b", 0.0)]).unwrap();
        let book = RuleBook::new(
            d.space().clone(),
            vec![
                crate::policy::Rule::explicit(1, ["a", "b"]),
                crate::policy::Rule::explicit(2, ["b"]),
            ],
            Mode::Positive,
        )
        .unwrap();
        let neg = book.complement().unwrap();
        let pt = SignatureTable::new(&book, &d).unwrap();
        let nt = SignatureTable::new(&neg, &d).unwrap();
        let b = compute_baselines(&book, &pt, &neg, &nt).unwrap();
        assert_eq!(b.no_policy, 1.0);
        assert_eq!(b.optimal_positive.p1, 1.0);
        assert_eq!(b.best_single_rule.active, RuleSet::from_ids(2, [1]));
        assert_eq!(b.optimal_negative.p1, 1.0);
    }
}
