//! Optimizers with sample access only.
//!
//! [`sample_and_eliminate`] is the sampled counterpart of iterative
//! elimination; [`sample_constant_k`] is the sampled counterpart of
//! guess-and-check. The two negative-rule heuristics mirror the positive
//! sampler but ban the observed favourite by activating one negative rule.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{positive_view, OptimizationResult, TraceStep, ValueKind, DEFAULT_MAX_K};
use crate::oracle::{SampleCounts, SampleOracle};
use crate::policy::{Mode, Policy, RuleBook};
use crate::ruleset::RuleSet;
use crate::space::PasswordId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
    /// Per-iteration sample size; derived from `epsilon`, `delta` and the
    /// rule count when absent.
    pub sample_size: Option<u64>,
    /// Stop as soon as the estimated top probability is at most `epsilon/2`.
    pub early_exit: bool,
    pub max_iterations: Option<usize>,
    /// Abort with [`Error::OracleExhausted`] rather than exceed this many draws.
    pub draw_budget: Option<u64>,
    /// Keep the full per-iteration sample counts in the trace.
    pub record_counts: bool,
    pub max_k: usize,
    /// Spacing of the probability grid in the constant-k search
    /// (default `epsilon/4`).
    pub grid_step: Option<f64>,
    /// Slack added to every threshold comparison in the constant-k search
    /// (default `epsilon/4`).
    pub padding: Option<f64>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            epsilon: 0.05,
            delta: 0.1,
            k: 1,
            sample_size: None,
            early_exit: true,
            max_iterations: None,
            draw_budget: None,
            record_counts: false,
            max_k: DEFAULT_MAX_K,
            grid_step: None,
            padding: None,
        }
    }
}

/// `ceil(100/ε² · ln(4m/(εδ)))`.
pub fn default_sample_size(epsilon: f64, delta: f64, m: usize) -> u64 {
    let m = m.max(1) as f64;
    (100.0 / (epsilon * epsilon) * (4.0 * m / (epsilon * delta)).ln()).ceil() as u64
}

impl SamplingConfig {
    pub fn new(epsilon: f64, delta: f64) -> Self {
        SamplingConfig {
            epsilon,
            delta,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.epsilon) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in (0,1), got {}",
                self.epsilon
            )));
        }
        if !unit(self.delta) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if self.sample_size == Some(0) {
            return Err(Error::InvalidArgument(
                "sample size must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn sample_size_for(&self, m: usize) -> u64 {
        self.sample_size
            .unwrap_or_else(|| default_sample_size(self.epsilon, self.delta, m))
    }
}

/// Budget-checked batch draw. `Ok(None)` means the policy has no usable
/// password.
fn draw<O: SampleOracle + ?Sized>(
    oracle: &mut O,
    cfg: &SamplingConfig,
    start: u64,
    policy: &Policy<'_>,
    s: u64,
) -> Result<Option<SampleCounts>> {
    if let Some(budget) = cfg.draw_budget {
        if oracle.draws() - start + s > budget {
            return Err(Error::OracleExhausted { budget });
        }
    }
    match oracle.draw_many(policy, s) {
        Ok(c) => Ok(Some(c)),
        Err(Error::NoAllowedPassword | Error::ZeroMassPolicy) => Ok(None),
        Err(e) => Err(e),
    }
}

fn step(active: &RuleSet, counts: &SampleCounts, value: f64, cfg: &SamplingConfig) -> TraceStep {
    TraceStep {
        active: active.clone(),
        top: counts.most_frequent().map(|c| c.0),
        value,
        counts: cfg.record_counts.then(|| counts.as_slice().to_vec()),
    }
}

/// First index of the smallest value; every trace built here is nonempty.
fn trace_argmin(trace: &[TraceStep]) -> usize {
    let mut best = 0;
    for (i, t) in trace.iter().enumerate() {
        if t.value < trace[best].value {
            best = i;
        }
    }
    best
}

fn finish(
    trace: Vec<TraceStep>,
    chosen: usize,
    mode: Mode,
    k: usize,
    samples: u64,
) -> Result<OptimizationResult> {
    let t = trace.get(chosen).ok_or(Error::NoFeasiblePolicy)?;
    Ok(OptimizationResult {
        best: t.active.clone(),
        value: t.value,
        ratio: None,
        value_kind: ValueKind::Estimated,
        mode,
        k,
        samples_drawn: samples,
        trace,
    })
}

/// Sampled iterative elimination over positive rules.
///
/// Each iteration draws `s` samples under the current policy, records the
/// frequency `p̂` of the most common password and deactivates every rule
/// containing it. Returns early once `p̂ ≤ ε/2`; otherwise returns the
/// policy with the smallest `p̂` seen.
pub fn sample_and_eliminate<O: SampleOracle + ?Sized>(
    oracle: &mut O,
    book: &RuleBook,
    cfg: &SamplingConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let mode = positive_view(book)?;
    let s = cfg.sample_size_for(book.len());
    let start = oracle.draws();
    let mut active = book.full_set();
    let mut trace = Vec::new();
    while !active.is_empty() && cfg.max_iterations.is_none_or(|n| trace.len() < n) {
        let policy = Policy::with_mode(book, mode, active.clone())?;
        let Some(counts) = draw(oracle, cfg, start, &policy, s)? else {
            break;
        };
        let (top, c) = counts.most_frequent().ok_or(Error::NoAllowedPassword)?;
        let p_hat = c as f64 / s as f64;
        trace.push(step(&active, &counts, p_hat, cfg));
        if cfg.early_exit && p_hat <= cfg.epsilon / 2.0 {
            let last = trace.len() - 1;
            return finish(trace, last, mode, 1, oracle.draws() - start);
        }
        active.subtract(book.signature(top));
    }
    let best = trace_argmin(&trace);
    finish(trace, best, mode, 1, oracle.draws() - start)
}

/// Per-policy sample cache for the constant-k search.
struct Estimates<'b> {
    book: &'b RuleBook,
    s: u64,
    start: u64,
    cache: BTreeMap<RuleSet, Option<SampleCounts>>,
}

impl Estimates<'_> {
    fn get<O: SampleOracle + ?Sized>(
        &mut self,
        oracle: &mut O,
        cfg: &SamplingConfig,
        active: &RuleSet,
    ) -> Result<Option<&SampleCounts>> {
        if !self.cache.contains_key(active) {
            let policy = Policy::with_mode(self.book, Mode::Positive, active.clone())?;
            let c = draw(oracle, cfg, self.start, &policy, self.s)?;
            self.cache.insert(active.clone(), c);
        }
        Ok(self.cache[active].as_ref())
    }
}

/// Sampled guess-and-check for constant `k`.
///
/// Stage 1 samples each single-rule policy and keeps every password whose
/// frequency exceeds `ε/(2k)` as a candidate. Stage 2 runs the guess loop
/// over guesses drawn from the candidates and thresholds on a grid of
/// multiples of `grid_step`, comparing estimated probabilities against
/// `threshold + padding`, and returns the candidate policy with the
/// smallest estimated `p(k, ·)`.
pub fn sample_constant_k<O: SampleOracle + ?Sized>(
    oracle: &mut O,
    book: &RuleBook,
    cfg: &SamplingConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let mode = positive_view(book)?;
    let k = cfg.k;
    if k > cfg.max_k {
        return Err(Error::KTooLarge {
            k,
            limit: cfg.max_k,
        });
    }
    let m = book.len();
    let s = cfg.sample_size_for(m);
    let eps = cfg.epsilon;
    let start = oracle.draws();
    let mut est = Estimates {
        book,
        s,
        start,
        cache: BTreeMap::new(),
    };
    let full = book.full_set();
    let estimate_pk = |c: &SampleCounts| c.top_k(k) as f64 / s as f64;

    if cfg.early_exit {
        if let Some(c) = est.get(oracle, cfg, &full)? {
            let v = estimate_pk(c);
            if v <= k as f64 * eps / 2.0 {
                let trace = vec![step(&full, c, v, cfg)];
                return finish(trace, 0, mode, k, oracle.draws() - start);
            }
        }
    }

    // Stage 1: candidate reduced space.
    let mut candidates: Vec<PasswordId> = Vec::new();
    for i in 0..m {
        let single = RuleSet::from_indices(m, [i]);
        let policy = Policy::with_mode(book, mode, single)?;
        if let Some(c) = draw(oracle, cfg, start, &policy, s)? {
            candidates.extend(
                c.iter()
                    .filter(|&(_, n)| n as f64 / s as f64 > eps / (2.0 * k as f64))
                    .map(|(id, _)| id),
            );
        }
    }
    candidates.sort_unstable();
    candidates.dedup();

    // Stage 2: guesses over the candidates.
    let step_size = cfg.grid_step.unwrap_or(eps / 4.0);
    let padding = cfg.padding.unwrap_or(eps / 4.0);
    let grid_len = (1.0 / step_size).ceil() as usize;
    let thresholds: Vec<f64> = (1..=grid_len)
        .rev()
        .map(|j| (j as f64 * step_size).min(1.0))
        .collect();
    let g_size = k.min(candidates.len());
    let guesses = combinations(&candidates, g_size);

    let mut best: Option<(f64, RuleSet)> = None;
    let mut trace: Vec<TraceStep> = Vec::new();
    let mut visited: BTreeMap<RuleSet, ()> = BTreeMap::new();
    for guess in &guesses {
        for &p in &thresholds {
            let mut active = full.clone();
            loop {
                if active.is_empty() {
                    break;
                }
                let Some(c) = est.get(oracle, cfg, &active)? else {
                    break;
                };
                let offender = c
                    .iter()
                    .filter(|(id, _)| guess.binary_search(id).is_err())
                    .find(|&(_, n)| n as f64 / s as f64 > p + padding);
                match offender {
                    Some((w, _)) => active.subtract(book.signature(w)),
                    None => break,
                }
            }
            if active.is_empty() {
                continue;
            }
            let Some(c) = est.get(oracle, cfg, &active)? else {
                continue;
            };
            let v = estimate_pk(c);
            if visited.insert(active.clone(), ()).is_none() {
                trace.push(step(&active, c, v, cfg));
            }
            let better = match &best {
                None => true,
                Some((bv, bs)) => v < *bv || (v == *bv && active < *bs),
            };
            if better {
                best = Some((v, active));
            }
        }
    }
    let Some((_, best)) = best else {
        return Err(Error::NoFeasiblePolicy);
    };
    let chosen = trace
        .iter()
        .position(|t| t.active == best)
        .expect("best policy is traced");
    finish(trace, chosen, mode, k, oracle.draws() - start)
}

fn combinations(items: &[PasswordId], size: usize) -> Vec<Vec<PasswordId>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..size).collect();
    if size > items.len() {
        return out;
    }
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let Some(pos) = (0..size).rev().find(|&i| idx[i] != i + items.len() - size) else {
            return out;
        };
        idx[pos] += 1;
        for j in pos + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// How a negative heuristic picks among the inactive rules containing the
/// password it wants to ban.
enum BanChoice<'r, R: ?Sized> {
    Random(&'r mut R),
    Smallest,
}

fn negative_mode(book: &RuleBook) -> Result<Mode> {
    match book.mode() {
        Mode::Negative | Mode::Singleton => Ok(book.mode()),
        Mode::Positive => Err(Error::InvalidMode {
            expected: "negative",
            actual: "positive",
        }),
    }
}

fn negative_sample<O: SampleOracle + ?Sized, R: Rng + ?Sized>(
    oracle: &mut O,
    book: &RuleBook,
    cfg: &SamplingConfig,
    mut choice: BanChoice<'_, R>,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let mode = negative_mode(book)?;
    let s = cfg.sample_size_for(book.len());
    let start = oracle.draws();
    let mut active = book.empty_set();
    let mut trace = Vec::new();
    while cfg.max_iterations.is_none_or(|n| trace.len() < n) {
        let policy = Policy::with_mode(book, mode, active.clone())?;
        let Some(counts) = draw(oracle, cfg, start, &policy, s)? else {
            break;
        };
        let (_, c) = counts.most_frequent().ok_or(Error::NoAllowedPassword)?;
        let p_hat = c as f64 / s as f64;
        trace.push(step(&active, &counts, p_hat, cfg));
        if cfg.early_exit && p_hat <= cfg.epsilon / 2.0 {
            let last = trace.len() - 1;
            return finish(trace, last, mode, 1, oracle.draws() - start);
        }
        // most frequent sampled password that some inactive rule can ban
        let target = counts.iter().find_map(|(w, _)| {
            let options: Vec<usize> = book
                .signature(w)
                .iter()
                .filter(|&i| !active.contains(i))
                .collect();
            (!options.is_empty()).then_some(options)
        });
        let Some(options) = target else {
            break;
        };
        let rule = match &mut choice {
            BanChoice::Random(rng) => options[rng.random_range(0..options.len())],
            BanChoice::Smallest => *options
                .iter()
                .min_by_key(|&&i| {
                    let size: u64 = counts
                        .iter()
                        .filter(|&(w, _)| book.contains(i, w))
                        .map(|(_, n)| n)
                        .sum();
                    (size, i)
                })
                .expect("options nonempty"),
        };
        active.insert(rule);
    }
    let best = trace_argmin(&trace);
    finish(trace, best, mode, 1, oracle.draws() - start)
}

/// Negative-rule heuristic that bans the observed favourite through a
/// uniformly random inactive rule containing it.
pub fn negative_sample_random<O: SampleOracle + ?Sized, R: Rng + ?Sized>(
    oracle: &mut O,
    book: &RuleBook,
    cfg: &SamplingConfig,
    rng: &mut R,
) -> Result<OptimizationResult> {
    negative_sample(oracle, book, cfg, BanChoice::Random(rng))
}

/// Negative-rule heuristic that bans the observed favourite through the
/// inactive rule covering the fewest sampled users (ties by rule id).
pub fn negative_sample_ban_smallest<O: SampleOracle + ?Sized>(
    oracle: &mut O,
    book: &RuleBook,
    cfg: &SamplingConfig,
) -> Result<OptimizationResult> {
    negative_sample::<O, rand_chacha::ChaCha8Rng>(oracle, book, cfg, BanChoice::Smallest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FrequencyDistribution, PolicyModel};
    use crate::oracle::ModelOracle;
    use crate::policy::Rule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sample_size_formula() {
        // 100/0.0025 * ln(4*4/(0.05*0.1)) = 40000 * ln(3200)
        let expected = (40000.0 * 3200f64.ln()).ceil() as u64;
        assert_eq!(default_sample_size(0.05, 0.1, 4), expected);
        assert!(SamplingConfig::new(1.5, 0.1).validate().is_err());
        assert!(SamplingConfig::new(0.1, 0.0).validate().is_err());
    }

    #[test]
    fn combinations_enumerate_in_order() {
        let ids: Vec<PasswordId> = (0..4).map(PasswordId).collect();
        let c = combinations(&ids, 2);
        assert_eq!(c.len(), 6);
        assert_eq!(c[0], vec![PasswordId(0), PasswordId(1)]);
        assert_eq!(c[5], vec![PasswordId(2), PasswordId(3)]);
        assert_eq!(combinations(&ids, 0), vec![Vec::<PasswordId>::new()]);
    }

    fn flat(n: usize) -> FrequencyDistribution {
        FrequencyDistribution::from_pairs((0..n).map(|i| (format!("u{i}"), 1.0 / n as f64)))
            .unwrap()
    }

    #[test]
    fn early_exit_on_flat_model() {
        let d = flat(400);
        let book = RuleBook::new(
            d.space().clone(),
            vec![Rule::explicit(
                1,
                d.space().iter().map(|(_, p)| p.to_string()),
            )],
            Mode::Positive,
        )
        .unwrap();
        let model = PolicyModel::from(d);
        let mut o = ModelOracle::seeded(&model, &book, 1).unwrap();
        let cfg = SamplingConfig {
            sample_size: Some(20000),
            ..SamplingConfig::new(0.1, 0.1)
        };
        let r = sample_and_eliminate(&mut o, &book, &cfg).unwrap();
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.best, book.full_set());
        let r = sample_constant_k(&mut o, &book, &SamplingConfig { k: 2, ..cfg }).unwrap();
        assert_eq!(r.best, book.full_set());
    }

    #[test]
    fn point_mass_single_rule() {
        let d = FrequencyDistribution::from_pairs([("a", 1.0), ("b", 0.0)]).unwrap();
        let book = RuleBook::new(
            d.space().clone(),
            vec![Rule::explicit(1, ["a"])],
            Mode::Positive,
        )
        .unwrap();
        let model = PolicyModel::from(d);
        let mut o = ModelOracle::seeded(&model, &book, 1).unwrap();
        let cfg = SamplingConfig {
            sample_size: Some(50),
            ..Default::default()
        };
        let r = sample_and_eliminate(&mut o, &book, &cfg).unwrap();
        assert_eq!(r.best, book.full_set());
        assert_eq!(r.value, 1.0);
        assert_eq!(r.samples_drawn, 50);
    }

    #[test]
    fn draw_budget_is_enforced() {
        let d = FrequencyDistribution::from_pairs([("a", 0.7), ("b", 0.3)]).unwrap();
        let book = RuleBook::new(
            d.space().clone(),
            vec![Rule::explicit(1, ["a"]), Rule::explicit(2, ["b"])],
            Mode::Positive,
        )
        .unwrap();
        let model = PolicyModel::from(d);
        let mut o = ModelOracle::seeded(&model, &book, 1).unwrap();
        let cfg = SamplingConfig {
            sample_size: Some(100),
            draw_budget: Some(150),
            ..Default::default()
        };
        assert!(matches!(
            sample_and_eliminate(&mut o, &book, &cfg),
            Err(Error::OracleExhausted { budget: 150 })
        ));
    }

    #[test]
    fn negative_heuristics_basic() {
        // nothing bannable: everything stays allowed
        let d = FrequencyDistribution::from_pairs([("a", 0.6), ("b", 0.4)]).unwrap();
        let book = RuleBook::new(
            d.space().clone(),
            vec![Rule::explicit(1, Vec::<String>::new())],
            Mode::Negative,
        )
        .unwrap();
        let model = PolicyModel::from(d.clone());
        let mut o = ModelOracle::seeded(&model, &book, 1).unwrap();
        let cfg = SamplingConfig {
            sample_size: Some(200),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = negative_sample_random(&mut o, &book, &cfg, &mut rng).unwrap();
        assert!(r.best.is_empty());

        // smaller rule wins, then lower id on ties
        let book = RuleBook::new(
            d.space().clone(),
            vec![
                Rule::explicit(1, ["a", "b"]),
                Rule::explicit(2, ["a"]),
                Rule::explicit(3, ["a"]),
            ],
            Mode::Negative,
        )
        .unwrap();
        let model = PolicyModel::from(d);
        let mut o = ModelOracle::seeded(&model, &book, 1).unwrap();
        let r = negative_sample_ban_smallest(&mut o, &book, &cfg).unwrap();
        assert_eq!(r.trace[1].active, RuleSet::from_ids(3, [2]));
    }

    #[test]
    fn positive_heuristics_reject_negative_books() {
        let d = flat(3);
        let book = RuleBook::singletons(d.space().clone())
            .with_mode(Mode::Singleton)
            .unwrap();
        let neg = RuleBook::new(
            d.space().clone(),
            vec![Rule::explicit(1, ["u0"])],
            Mode::Negative,
        )
        .unwrap();
        let model = PolicyModel::from(d);
        let mut o = ModelOracle::seeded(&model, &neg, 1).unwrap();
        assert!(matches!(
            sample_and_eliminate(&mut o, &neg, &SamplingConfig::default()),
            Err(Error::InvalidMode { .. })
        ));
        let mut o = ModelOracle::seeded(&model, &book, 1).unwrap();
        let pos = RuleBook::new(
            book.space().clone(),
            vec![Rule::explicit(1, ["u0"])],
            Mode::Positive,
        )
        .unwrap();
        assert!(negative_sample_ban_smallest(&mut o, &pos, &SamplingConfig::default()).is_err());
    }
}
