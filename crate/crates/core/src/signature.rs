//! Normalization-model evaluation grouped by rule signature.
//!
//! Two passwords contained in exactly the same rules are allowed or banned
//! together by every policy, so a distribution can be collapsed to one group
//! per distinct signature. Evaluating a policy then costs one pass over the
//! groups instead of one over the whole space.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::FrequencyDistribution;
use crate::policy::{Mode, RuleBook};
use crate::ruleset::RuleSet;
use crate::space::PasswordId;

#[derive(Clone, Debug)]
pub struct SignatureGroup {
    pub signature: RuleSet,
    pub mass: f64,
    /// Members with positive probability, most probable first, ties by id.
    pub members: Vec<PasswordId>,
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SignatureTable {
    rules: usize,
    groups: Vec<SignatureGroup>,
}

impl SignatureTable {
    pub fn new(book: &RuleBook, dist: &FrequencyDistribution) -> Result<Self> {
        if !Arc::ptr_eq(book.space(), dist.space()) {
            return Err(Error::InvalidArgument(
                "rule book and distribution use different password spaces".into(),
            ));
        }
        let mut by_sig: BTreeMap<&RuleSet, Vec<(PasswordId, f64)>> = BTreeMap::new();
        for id in dist.space().ids() {
            let p = dist.prob(id);
            if p > 0.0 {
                by_sig.entry(book.signature(id)).or_default().push((id, p));
            }
        }
        let groups = by_sig
            .into_iter()
            .map(|(sig, mut members)| {
                members.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                SignatureGroup {
                    signature: sig.clone(),
                    mass: members.iter().map(|m| m.1).sum(),
                    members: members.iter().map(|m| m.0).collect(),
                    probs: members.iter().map(|m| m.1).collect(),
                }
            })
            .collect();
        Ok(SignatureTable {
            rules: book.len(),
            groups,
        })
    }

    pub fn groups(&self) -> &[SignatureGroup] {
        &self.groups
    }

    pub fn rule_count(&self) -> usize {
        self.rules
    }

    fn allowed<'a>(
        &'a self,
        mode: Mode,
        active: &'a RuleSet,
    ) -> impl Iterator<Item = &'a SignatureGroup> + 'a {
        self.groups
            .iter()
            .filter(move |g| mode.allows(&g.signature, active))
    }

    pub fn allowed_mass(&self, mode: Mode, active: &RuleSet) -> f64 {
        self.allowed(mode, active).map(|g| g.mass).sum()
    }

    /// Most probable allowed password and its base probability.
    pub fn top_allowed(&self, mode: Mode, active: &RuleSet) -> Option<(PasswordId, f64)> {
        self.allowed(mode, active)
            .map(|g| (g.members[0], g.probs[0]))
            .min_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)))
    }

    /// `p(k, A_S)` for the policy `(mode, active)`.
    pub fn p_k(&self, mode: Mode, active: &RuleSet, k: usize) -> Result<f64> {
        let groups: Vec<&SignatureGroup> = self.allowed(mode, active).collect();
        let mass: f64 = groups.iter().map(|g| g.mass).sum();
        if mass <= 0.0 {
            return Err(Error::ZeroMassPolicy);
        }
        let support: usize = groups.iter().map(|g| g.members.len()).sum();
        if k >= support {
            return Ok(1.0);
        }
        Ok(top_k_sum(&groups, k) / mass)
    }
}

#[derive(PartialEq)]
struct Head {
    prob: f64,
    id: PasswordId,
    group: usize,
    pos: usize,
}

impl Eq for Head {}

impl Ord for Head {
    fn cmp(&self, other: &Self) -> Ordering {
        self.prob
            .total_cmp(&other.prob)
            .then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for Head {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sum of the `k` largest probabilities across sorted groups, added in
/// descending order.
fn top_k_sum(groups: &[&SignatureGroup], k: usize) -> f64 {
    if k == 1 {
        return groups.iter().map(|g| g.probs[0]).fold(0.0, f64::max);
    }
    let mut heap: BinaryHeap<Head> = groups
        .iter()
        .enumerate()
        .map(|(gi, g)| Head {
            prob: g.probs[0],
            id: g.members[0],
            group: gi,
            pos: 0,
        })
        .collect();
    let mut sum = 0.0;
    for _ in 0..k {
        let Some(h) = heap.pop() else { break };
        sum += h.prob;
        let g = groups[h.group];
        if h.pos + 1 < g.members.len() {
            heap.push(Head {
                prob: g.probs[h.pos + 1],
                id: g.members[h.pos + 1],
                group: h.group,
                pos: h.pos + 1,
            });
        }
    }
    sum
}
