//! Full-information optimizers.
//!
//! * [`reduce`] shrinks a preference list to at most `m` entries without
//!   changing the choice under any positive policy.
//! * [`guess_and_check`] finds the exact `p(k, ·)` optimum over positive
//!   policies in the ranking model for small constant `k`.
//! * [`iterative_elimination`] finds the exact `p(1, ·)` optimum over
//!   positive policies.
//! * [`sort_and_optimize`] solves singleton rules in the normalization model
//!   for any `k`.
//! * [`brute_force_optimal`] enumerates every policy and is the reference the
//!   others are tested against.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    FrequencyDistribution, InducedDistribution, PolicyModel, PreferenceList, RankingPopulation,
    WeightedList,
};
use crate::policy::{Mode, RuleBook};
use crate::ruleset::RuleSet;
use crate::signature::SignatureTable;
use crate::space::PasswordId;

/// Largest rule count accepted by [`brute_force_optimal`].
pub const BRUTE_FORCE_MAX_RULES: usize = 25;

/// Default guard on `k` for [`guess_and_check`].
pub const DEFAULT_MAX_K: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    /// `value` is the true `p(k, ·)` of `best`.
    Exact,
    /// `value` is a sample estimate.
    Estimated,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceStep {
    pub active: RuleSet,
    /// Most popular allowed password (observed or true).
    pub top: Option<PasswordId>,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<(PasswordId, u64)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub best: RuleSet,
    pub value: f64,
    /// Exact fraction behind `value` in the ranking model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<(u64, u64)>,
    pub value_kind: ValueKind,
    pub mode: Mode,
    pub k: usize,
    pub trace: Vec<TraceStep>,
    pub samples_drawn: u64,
}

/// Positive reading of a book: singleton rules double as positive rules
/// whose active set is the allowed set.
pub(crate) fn positive_view(book: &RuleBook) -> Result<Mode> {
    match book.mode() {
        Mode::Positive | Mode::Singleton => Ok(Mode::Positive),
        Mode::Negative => Err(Error::InvalidMode {
            expected: "positive",
            actual: "negative",
        }),
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidArgument("k must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// A policy value used for comparisons. In the ranking model `key` is the
/// integer numerator over the common denominator `n`, so ordering is exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Eval {
    pub key: f64,
    pub value: f64,
    pub ratio: Option<(u64, u64)>,
}

impl Eval {
    fn from_induced(d: &InducedDistribution, k: usize) -> Self {
        match d.p_k_ratio(k) {
            Some((num, den)) => {
                let num = if k >= d.support_len() { den } else { num };
                Eval {
                    key: num as f64,
                    value: num as f64 / den as f64,
                    ratio: Some((num, den)),
                }
            }
            None => {
                let v = d.p_k(k);
                Eval {
                    key: v,
                    value: v,
                    ratio: None,
                }
            }
        }
    }
}

/// Evaluates `p(k, ·)` for any active set of one book.
pub(crate) enum Evaluator<'a> {
    Ranking(&'a RankingPopulation, &'a RuleBook),
    Table(SignatureTable),
}

impl<'a> Evaluator<'a> {
    pub fn new(model: &'a PolicyModel, book: &'a RuleBook) -> Result<Self> {
        if !std::sync::Arc::ptr_eq(model.space(), book.space()) {
            return Err(Error::InvalidArgument(
                "model and rule book use different password spaces".into(),
            ));
        }
        Ok(match model {
            PolicyModel::Ranking(p) => Evaluator::Ranking(p, book),
            PolicyModel::Normalization(d) => Evaluator::Table(SignatureTable::new(book, d)?),
        })
    }

    /// `None` when the policy leaves some user without a password or has
    /// zero mass.
    pub fn eval(&self, mode: Mode, active: &RuleSet, k: usize) -> Option<Eval> {
        match self {
            Evaluator::Ranking(pop, book) => {
                let d = pop
                    .induced_by(|id| mode.allows(book.signature(id), active))
                    .ok()?;
                Some(Eval::from_induced(&d, k))
            }
            Evaluator::Table(t) => {
                let v = t.p_k(mode, active, k).ok()?;
                Some(Eval {
                    key: v,
                    value: v,
                    ratio: None,
                })
            }
        }
    }

    /// Value of `p(1, ·)` together with the most popular password.
    pub fn eval_top(&self, mode: Mode, active: &RuleSet) -> Option<(Eval, PasswordId)> {
        match self {
            Evaluator::Ranking(pop, book) => {
                let d = pop
                    .induced_by(|id| mode.allows(book.signature(id), active))
                    .ok()?;
                Some((Eval::from_induced(&d, 1), d.most_popular()?))
            }
            Evaluator::Table(t) => {
                let (id, p) = t.top_allowed(mode, active)?;
                let v = p / t.allowed_mass(mode, active);
                Some((
                    Eval {
                        key: v,
                        value: v,
                        ratio: None,
                    },
                    id,
                ))
            }
        }
    }
}

/// Output of [`reduce`] with its query counters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducedList {
    pub list: PreferenceList,
    pub choose_queries: usize,
    pub membership_queries: usize,
}

/// Keeps, in order, the favourite password under the rules still active,
/// deactivating every rule that contains it.
pub fn reduce(list: &PreferenceList, book: &RuleBook) -> Result<ReducedList> {
    positive_view(book)?;
    let mut active = book.full_set();
    let mut out = Vec::new();
    let mut choose_queries = 0;
    let mut membership_queries = 0;
    while !active.is_empty() {
        choose_queries += 1;
        let Some(w) = list.choose_by(|id| book.signature(id).intersects(&active)) else {
            if out.is_empty() {
                return Err(Error::NoAllowedPassword);
            }
            break;
        };
        out.push(w);
        for i in active.clone().iter() {
            membership_queries += 1;
            if book.contains(i, w) {
                active.remove(i);
            }
        }
    }
    Ok(ReducedList {
        list: PreferenceList::new(out)?,
        choose_queries,
        membership_queries,
    })
}

/// Reduces every list of the population and merges lists that become
/// identical.
pub fn reduce_population(pop: &RankingPopulation, book: &RuleBook) -> Result<RankingPopulation> {
    let mut index: HashMap<PreferenceList, usize> = HashMap::new();
    let mut entries: Vec<WeightedList> = Vec::new();
    for e in pop.entries() {
        let r = reduce(&e.list, book)?.list;
        match index.get(&r) {
            Some(&i) => entries[i].weight += e.weight,
            None => {
                index.insert(r.clone(), entries.len());
                entries.push(WeightedList {
                    weight: e.weight,
                    list: r,
                });
            }
        }
    }
    RankingPopulation::new(pop.space().clone(), entries)
}

#[derive(Clone, Debug)]
pub struct GuessCheckConfig {
    pub max_k: usize,
    /// A known optimal active set. When given, the elimination loop checks
    /// that the guess matching it never deactivates one of its rules.
    pub witness: Option<RuleSet>,
}

impl Default for GuessCheckConfig {
    fn default() -> Self {
        GuessCheckConfig {
            max_k: DEFAULT_MAX_K,
            witness: None,
        }
    }
}

struct Witness {
    active: RuleSet,
    guess: Vec<PasswordId>,
    threshold: u64,
}

/// Counts per allowed password; users with nothing allowed are dropped.
fn allowed_counts(
    pop: &RankingPopulation,
    book: &RuleBook,
    active: &RuleSet,
) -> Vec<(PasswordId, u64)> {
    let mut counts: Vec<(PasswordId, u64)> = Vec::new();
    for e in pop.entries() {
        if let Some(id) = e.list.choose_by(|id| book.signature(id).intersects(active)) {
            match counts.iter_mut().find(|(c, _)| *c == id) {
                Some((_, w)) => *w += e.weight,
                None => counts.push((id, e.weight)),
            }
        }
    }
    counts
}

fn subsets_of_size(items: &[PasswordId], size: usize) -> Vec<Vec<PasswordId>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn go(
        items: &[PasswordId],
        size: usize,
        start: usize,
        cur: &mut Vec<PasswordId>,
        out: &mut Vec<Vec<PasswordId>>,
    ) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < size - cur.len() {
                break;
            }
            cur.push(items[i]);
            go(items, size, i + 1, cur, out);
            cur.pop();
        }
    }
    go(items, size, 0, &mut cur, &mut out);
    out
}

/// Exact minimizer of `p(k, ·)` over nonempty positive policies.
///
/// For every guess `G` of the top-`k` passwords and every threshold `p` on
/// the grid `1/n, ..., 1`, rules are deactivated while some password outside
/// `G` has induced count above `p·n`. The eliminated set only grows as `p`
/// falls, so each guess is processed as one downward sweep that visits only
/// thresholds where the candidate changes.
pub fn guess_and_check(
    pop: &RankingPopulation,
    book: &RuleBook,
    k: usize,
    cfg: &GuessCheckConfig,
) -> Result<OptimizationResult> {
    let mode = positive_view(book)?;
    check_k(k)?;
    if k > cfg.max_k {
        return Err(Error::KTooLarge {
            k,
            limit: cfg.max_k,
        });
    }
    if !std::sync::Arc::ptr_eq(pop.space(), book.space()) {
        return Err(Error::InvalidArgument(
            "population and rule book use different password spaces".into(),
        ));
    }
    let reduced = reduce_population(pop, book)?;
    let mut hat: Vec<PasswordId> = reduced
        .entries()
        .iter()
        .flat_map(|e| e.list.ids().iter().copied())
        .collect();
    hat.sort_unstable();
    hat.dedup();
    let g_size = k.min(hat.len());

    let witness = match &cfg.witness {
        Some(active) => Some(witness_guess(&reduced, book, active, &hat, g_size)?),
        None => None,
    };

    let guesses = subsets_of_size(&hat, g_size);
    let best = guesses
        .par_iter()
        .map(|g| sweep_guess(&reduced, book, k, g, witness.as_ref()))
        .try_reduce(
            || None,
            |a, b| {
                Ok(match (a, b) {
                    (None, x) | (x, None) => x,
                    (Some(a), Some(b)) => Some(min_candidate(a, b)),
                })
            },
        )?;
    let (eval, best) = best.ok_or(Error::NoFeasiblePolicy)?;
    Ok(OptimizationResult {
        best,
        value: eval.value,
        ratio: eval.ratio,
        value_kind: ValueKind::Exact,
        mode,
        k,
        trace: Vec::new(),
        samples_drawn: 0,
    })
}

fn min_candidate(a: (Eval, RuleSet), b: (Eval, RuleSet)) -> (Eval, RuleSet) {
    if b.0.key < a.0.key || (b.0.key == a.0.key && b.1 < a.1) {
        b
    } else {
        a
    }
}

fn witness_guess(
    pop: &RankingPopulation,
    book: &RuleBook,
    active: &RuleSet,
    hat: &[PasswordId],
    g_size: usize,
) -> Result<Witness> {
    let d = pop.induced_by(|id| book.signature(id).intersects(active))?;
    let mut guess: Vec<PasswordId> = d.top(g_size);
    for &id in hat {
        if guess.len() >= g_size {
            break;
        }
        if !guess.contains(&id) {
            guess.push(id);
        }
    }
    guess.sort_unstable();
    let threshold = d
        .entries()
        .iter()
        .filter(|e| !guess.contains(&e.id))
        .filter_map(|e| e.count)
        .max()
        .unwrap_or(0);
    Ok(Witness {
        active: active.clone(),
        guess,
        threshold,
    })
}

fn sweep_guess(
    pop: &RankingPopulation,
    book: &RuleBook,
    k: usize,
    guess: &[PasswordId],
    witness: Option<&Witness>,
) -> Result<Option<(Eval, RuleSet)>> {
    let watch = witness.filter(|w| w.guess == guess);
    let mut active = book.full_set();
    let mut threshold = pop.total();
    let mut best: Option<(Eval, RuleSet)> = None;
    let outside = |counts: &[(PasswordId, u64)]| {
        counts
            .iter()
            .filter(|(id, _)| guess.binary_search(id).is_err())
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .copied()
    };
    while threshold >= 1 {
        // fixed point for the current threshold
        let mut counts = allowed_counts(pop, book, &active);
        while let Some((w, c)) = outside(&counts) {
            if c <= threshold {
                break;
            }
            active.subtract(book.signature(w));
            if let Some(wt) = watch {
                if threshold >= wt.threshold && !wt.active.is_subset(&active) {
                    return Err(Error::InvariantViolation(format!(
                        "guess {:?} at threshold {threshold} dropped a rule of {}",
                        guess, wt.active
                    )));
                }
            }
            if active.is_empty() {
                return Ok(best);
            }
            counts = allowed_counts(pop, book, &active);
        }
        if let Some(e) = evaluate_ranking(pop, book, &active, k) {
            best = Some(match best {
                None => (e, active.clone()),
                Some(b) => min_candidate(b, (e, active.clone())),
            });
        }
        match outside(&counts) {
            Some((_, c)) if c >= 1 => threshold = c - 1,
            _ => break,
        }
    }
    Ok(best)
}

fn evaluate_ranking(
    pop: &RankingPopulation,
    book: &RuleBook,
    active: &RuleSet,
    k: usize,
) -> Option<Eval> {
    let d = pop
        .induced_by(|id| book.signature(id).intersects(active))
        .ok()?;
    Some(Eval::from_induced(&d, k))
}

/// Exact minimizer of `p(1, ·)` over positive policies: start with every
/// rule active and repeatedly deactivate all rules containing the current
/// most popular password, keeping the best policy seen.
pub fn iterative_elimination(model: &PolicyModel, book: &RuleBook) -> Result<OptimizationResult> {
    let mode = positive_view(book)?;
    let eval = Evaluator::new(model, book)?;
    let mut active = book.full_set();
    let mut trace = Vec::new();
    let mut best: Option<(Eval, RuleSet)> = None;
    while !active.is_empty() {
        let Some((e, top)) = eval.eval_top(mode, &active) else {
            break;
        };
        trace.push(TraceStep {
            active: active.clone(),
            top: Some(top),
            value: e.value,
            counts: None,
        });
        if best.as_ref().is_none_or(|b| e.key < b.0.key) {
            best = Some((e, active.clone()));
        }
        active.subtract(book.signature(top));
    }
    let (e, best) = best.ok_or(Error::NoFeasiblePolicy)?;
    Ok(OptimizationResult {
        best,
        value: e.value,
        ratio: e.ratio,
        value_kind: ValueKind::Exact,
        mode,
        k: 1,
        trace,
        samples_drawn: 0,
    })
}

/// Optimal singleton policy in the normalization model: a suffix of the
/// passwords sorted by descending probability.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuffixPolicy {
    /// All passwords, most probable first, ties by id.
    pub order: Vec<PasswordId>,
    /// Index in `order` of the first allowed password.
    pub start: usize,
    pub value: f64,
    pub k: usize,
}

impl SuffixPolicy {
    pub fn allowed(&self) -> &[PasswordId] {
        &self.order[self.start..]
    }

    pub fn banned(&self) -> &[PasswordId] {
        &self.order[..self.start]
    }

    /// Banned passwords as an active set of singleton rules.
    pub fn banned_set(&self) -> RuleSet {
        RuleSet::from_indices(self.order.len(), self.banned().iter().map(|id| id.index()))
    }
}

pub fn sort_and_optimize(dist: &FrequencyDistribution, k: usize) -> Result<SuffixPolicy> {
    check_k(k)?;
    let probs = dist.probs();
    let mut order: Vec<PasswordId> = dist.space().ids().collect();
    order.sort_by(|a, b| probs[b.index()].total_cmp(&probs[a.index()]));
    let positive = order
        .iter()
        .take_while(|id| probs[id.index()] > 0.0)
        .count();
    if positive == 0 {
        return Err(Error::EmptyDistribution);
    }
    // suffix[i] = mass of order[i..positive]
    let mut suffix = vec![0.0; positive + 1];
    for i in (0..positive).rev() {
        suffix[i] = suffix[i + 1] + probs[order[i].index()];
    }
    let mut best = (f64::INFINITY, 0);
    for i in 0..positive {
        let v = if positive - i <= k {
            1.0
        } else {
            (suffix[i] - suffix[i + k]) / suffix[i]
        };
        if v < best.0 {
            best = (v, i);
        }
    }
    let start = best.1;
    let value = if positive - start <= k {
        1.0
    } else {
        let window: f64 = order[start..start + k]
            .iter()
            .map(|id| probs[id.index()])
            .sum();
        let rest: f64 = order[start + k..positive]
            .iter()
            .rev()
            .map(|id| probs[id.index()])
            .sum();
        window / (window + rest)
    };
    Ok(SuffixPolicy {
        order,
        start,
        value,
        k,
    })
}

/// Exhaustive search over all `2^m` active sets in the book's own mode.
pub fn brute_force_optimal(
    model: &PolicyModel,
    book: &RuleBook,
    k: usize,
) -> Result<OptimizationResult> {
    brute_force_with_mode(model, book, book.mode(), k)
}

/// As [`brute_force_optimal`], reading the rules under `mode`. Ties go to the
/// smallest active set in mask order. Policies under which `p(k, ·)` is
/// undefined are skipped.
pub fn brute_force_with_mode(
    model: &PolicyModel,
    book: &RuleBook,
    mode: Mode,
    k: usize,
) -> Result<OptimizationResult> {
    check_k(k)?;
    let m = book.len();
    if m > BRUTE_FORCE_MAX_RULES {
        return Err(Error::TooManyRules {
            m,
            limit: BRUTE_FORCE_MAX_RULES,
        });
    }
    if mode == Mode::Singleton && book.mode() != Mode::Singleton {
        return Err(Error::InvalidMode {
            expected: "singleton",
            actual: book.mode().name(),
        });
    }
    let eval = Evaluator::new(model, book)?;
    let best = (0..1u64 << m)
        .into_par_iter()
        .filter_map(|mask| {
            let active = RuleSet::from_mask(m, mask);
            eval.eval(mode, &active, k).map(|e| (e, mask))
        })
        .reduce_with(|a, b| {
            if b.0.key < a.0.key || (b.0.key == a.0.key && b.1 < a.1) {
                b
            } else {
                a
            }
        });
    let (e, mask) = best.ok_or(Error::NoFeasiblePolicy)?;
    Ok(OptimizationResult {
        best: RuleSet::from_mask(m, mask),
        value: e.value,
        ratio: e.ratio,
        value_kind: ValueKind::Exact,
        mode,
        k,
        trace: Vec::new(),
        samples_drawn: 0,
    })
}
