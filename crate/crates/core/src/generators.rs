//! Instance generators with known structure.
//!
//! * [`VertexCoverInstance`] turns a graph into singleton-rule rankings where
//!   a policy with `p(g+e-t-1, ·) < 1` exists exactly when the graph has a
//!   vertex cover of size at most `t`.
//! * [`ImpossibilitySampler`] draws rankings from a mixture on which no
//!   single policy is near-optimal for both `k = 1` and `k = L`.
//! * [`gen_random_instance`] produces small random rule sets and models for
//!   oracle tests.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RuleSetConfig;
use crate::error::{Error, Result};
use crate::model::{FrequencyDistribution, PolicyModel, PreferenceList, RankingPopulation};
use crate::oracle::{SampleCounts, SampleOracle};
use crate::policy::{Mode, Policy, Rule, RuleBook};
use crate::space::{PasswordId, PasswordSpace};

/// Graph plus threshold for the vertex-cover construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexCoverInstance {
    /// Number of vertices `g`, labelled `0..g`.
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
    /// Cover size threshold `t`.
    pub threshold: usize,
    /// Seed for the shuffled list tails.
    #[serde(default)]
    pub seed: u64,
}

impl VertexCoverInstance {
    pub fn new(
        vertices: usize,
        edges: Vec<(usize, usize)>,
        threshold: usize,
        seed: u64,
    ) -> Result<Self> {
        let inst = VertexCoverInstance {
            vertices,
            edges,
            threshold,
            seed,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold >= self.vertices {
            return Err(Error::InvalidArgument(format!(
                "threshold {} must be below the vertex count {}",
                self.threshold, self.vertices
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for &(u, v) in &self.edges {
            if u == v || u >= self.vertices || v >= self.vertices {
                return Err(Error::InvalidArgument(format!("bad edge ({u},{v})")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidArgument(format!("repeated edge ({u},{v})")));
            }
        }
        if self.edges.is_empty() {
            return Err(Error::InvalidArgument("graph has no edges".into()));
        }
        // an isolated vertex never tops a list, so the cover no longer
        // translates into a large enough support
        if let Some(u) =
            (0..self.vertices).find(|&u| !self.edges.iter().any(|&(a, b)| a == u || b == u))
        {
            return Err(Error::InvalidArgument(format!(
                "vertex {u} has no edge; drop isolated vertices first"
            )));
        }
        if self.k() == 0 {
            return Err(Error::InvalidArgument(
                "g + e - t - 1 must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `k = g + e - t - 1`.
    pub fn k(&self) -> usize {
        (self.vertices + self.edges.len()).saturating_sub(self.threshold + 1)
    }

    pub fn vertex_password(u: usize) -> String {
        format!("w{u}")
    }

    pub fn edge_password(u: usize, v: usize) -> String {
        format!("w{}_{}", u.min(v), u.max(v))
    }

    /// Two lists per edge `(u,v)`: `(w_u, w_uv, T.., w_v)` and
    /// `(w_v, w_uv, T.., w_u)` with a seeded random tail `T` shared by both.
    pub fn rankings(&self) -> Result<(RankingPopulation, RuleBook)> {
        self.validate()?;
        let mut names: Vec<String> = (0..self.vertices).map(Self::vertex_password).collect();
        names.extend(self.edges.iter().map(|&(u, v)| Self::edge_password(u, v)));
        let space = Arc::new(PasswordSpace::new(names)?);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut lists = Vec::with_capacity(2 * self.edges.len());
        for &(u, v) in &self.edges {
            let wu = space.require(&Self::vertex_password(u))?;
            let wv = space.require(&Self::vertex_password(v))?;
            let wuv = space.require(&Self::edge_password(u, v))?;
            let mut tail: Vec<PasswordId> = space
                .ids()
                .filter(|&id| id != wu && id != wv && id != wuv)
                .collect();
            tail.shuffle(&mut rng);
            for (a, b) in [(wu, wv), (wv, wu)] {
                let mut l = vec![a, wuv];
                l.extend_from_slice(&tail);
                l.push(b);
                lists.push(PreferenceList::new(l)?);
            }
        }
        let book = RuleBook::singletons(space.clone());
        Ok((RankingPopulation::uniform(space, lists)?, book))
    }

    /// Whether some set of at most `t` vertices touches every edge.
    pub fn has_cover(&self) -> bool {
        (0u64..1 << self.vertices).any(|mask| {
            mask.count_ones() as usize <= self.threshold
                && self
                    .edges
                    .iter()
                    .all(|&(u, v)| mask >> u & 1 == 1 || mask >> v & 1 == 1)
        })
    }
}

/// Parameters of the two-component ranking mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpossibilityParams {
    /// Target approximation constant `c`.
    pub c: f64,
    /// Weight of the block-structured component, `1/(2c)` by default.
    pub q: f64,
    /// Size of each block `W_i`.
    pub t: usize,
    /// Size of the tail set `X`.
    pub l: usize,
    /// Number of blocks.
    pub r: usize,
}

impl ImpossibilityParams {
    /// `q = 1/(2c)`, `t = L = ceil(log2 N)`, `r = floor((N - L)/t)`.
    pub fn new(c: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("N must be at least 2".into()));
        }
        let l = (n as f64).log2().ceil() as usize;
        let r = n.saturating_sub(l) / l;
        Self::with_shape(c, l, l, r)
    }

    pub fn with_shape(c: f64, t: usize, l: usize, r: usize) -> Result<Self> {
        let p = ImpossibilityParams {
            c,
            q: 1.0 / (2.0 * c),
            t,
            l,
            r,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "q = {} outside (0,1)",
                self.q
            )));
        }
        if self.r == 0 || self.t == 0 || self.l == 0 {
            return Err(Error::InvalidArgument(
                "need at least one block and nonempty W_i and X".into(),
            ));
        }
        Ok(())
    }

    /// Size of the password space, `r·t + L`.
    pub fn size(&self) -> usize {
        self.r * self.t + self.l
    }

    /// Space `W_1 ∪ ... ∪ W_r ∪ X`: `w{i}_{j}` then `x{j}`, 1-based.
    pub fn space(&self) -> Result<PasswordSpace> {
        let mut names = Vec::with_capacity(self.size());
        for i in 1..=self.r {
            for j in 1..=self.t {
                names.push(format!("w{i}_{j}"));
            }
        }
        for j in 1..=self.l {
            names.push(format!("x{j}"));
        }
        PasswordSpace::new(names)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Blocks in order, then `X`.
    Structured,
    /// Uniform permutation of everything.
    Uniform,
}

/// Sampler for the mixture ranking distribution.
pub struct ImpossibilitySampler {
    params: ImpossibilityParams,
    space: Arc<PasswordSpace>,
    rng: ChaCha8Rng,
    draws: u64,
}

impl ImpossibilitySampler {
    pub fn new(params: ImpossibilityParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let space = Arc::new(params.space()?);
        Ok(ImpossibilitySampler {
            params,
            space,
            rng: ChaCha8Rng::seed_from_u64(seed),
            draws: 0,
        })
    }

    pub fn params(&self) -> &ImpossibilityParams {
        &self.params
    }

    pub fn space(&self) -> &Arc<PasswordSpace> {
        &self.space
    }

    /// Ids of block `W_i` (1-based `i`).
    pub fn block(&self, i: usize) -> Vec<PasswordId> {
        let t = self.params.t;
        ((i - 1) * t..i * t).map(|j| PasswordId(j as u32)).collect()
    }

    pub fn tail_set(&self) -> Vec<PasswordId> {
        let w = self.params.r * self.params.t;
        (w..w + self.params.l)
            .map(|j| PasswordId(j as u32))
            .collect()
    }

    pub fn sample_ranking(&mut self) -> (Branch, PreferenceList) {
        let n = self.space.len();
        let mut ids: Vec<PasswordId> = (0..n as u32).map(PasswordId).collect();
        let branch = if self.rng.random::<f64>() < self.params.q {
            let t = self.params.t;
            for i in 0..self.params.r {
                ids[i * t..(i + 1) * t].shuffle(&mut self.rng);
            }
            let w = self.params.r * t;
            ids[w..].shuffle(&mut self.rng);
            Branch::Structured
        } else {
            ids.shuffle(&mut self.rng);
            Branch::Uniform
        };
        (branch, PreferenceList::new(ids).expect("permutation"))
    }
}

impl SampleOracle for ImpossibilitySampler {
    fn draw_many(&mut self, policy: &Policy<'_>, s: u64) -> Result<SampleCounts> {
        if !Arc::ptr_eq(policy.book().space(), &self.space) {
            return Err(Error::InvalidArgument(
                "policy is not over the sampler's password space".into(),
            ));
        }
        if policy.allowed_ids().is_empty() {
            return Err(Error::NoAllowedPassword);
        }
        let mut picks = Vec::with_capacity(s as usize);
        for _ in 0..s {
            let (_, l) = self.sample_ranking();
            picks.push((l.choose(policy)?, 1));
        }
        self.draws += s;
        Ok(SampleCounts::from_pairs(picks))
    }

    fn draws(&self) -> u64 {
        self.draws
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ranking,
    Normalization,
}

/// A random rule book over `p0..p{N-1}` and a model over the same space.
#[derive(Clone, Debug)]
pub struct RandomInstance {
    pub book: RuleBook,
    pub model: PolicyModel,
}

impl RandomInstance {
    /// Rule set as a config file body.
    pub fn rules_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&RuleSetConfig::from_book(
            &self.book, None,
        ))?)
    }

    /// Model as a ranking population or distribution file body.
    pub fn model_json(&self) -> Result<String> {
        match &self.model {
            PolicyModel::Ranking(p) => p.to_json(),
            PolicyModel::Normalization(d) => d.to_json(),
        }
    }
}

/// Random positive rules (each password joins each rule with probability
/// 1/2; empty rules are redrawn; the whole family is redrawn until it covers
/// the space) and either `n` uniform rankings or a uniform-spacings
/// distribution.
pub fn gen_random_instance(
    n_passwords: usize,
    m: usize,
    n_users: usize,
    kind: ModelKind,
    seed: u64,
) -> Result<RandomInstance> {
    if n_passwords == 0 || m == 0 {
        return Err(Error::InvalidArgument(
            "need at least one password and one rule".into(),
        ));
    }
    if kind == ModelKind::Ranking && n_users == 0 {
        return Err(Error::InvalidArgument("need at least one user".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = Arc::new(PasswordSpace::new(
        (0..n_passwords).map(|i| format!("p{i}")),
    )?);
    let members = loop {
        let family: Vec<Vec<usize>> = (0..m)
            .map(|_| loop {
                let rule: Vec<usize> = (0..n_passwords).filter(|_| rng.random::<bool>()).collect();
                if !rule.is_empty() {
                    break rule;
                }
            })
            .collect();
        let mut covered = vec![false; n_passwords];
        family.iter().flatten().for_each(|&i| covered[i] = true);
        if covered.iter().all(|&c| c) {
            break family;
        }
    };
    let rules = members
        .iter()
        .enumerate()
        .map(|(j, ids)| {
            Rule::explicit(
                j + 1,
                ids.iter()
                    .map(|&i| space.get(PasswordId(i as u32)).to_string()),
            )
        })
        .collect();
    let book = RuleBook::new(space.clone(), rules, Mode::Positive)?;
    let model = match kind {
        ModelKind::Ranking => {
            let lists = (0..n_users)
                .map(|_| {
                    let mut ids: Vec<PasswordId> = space.ids().collect();
                    ids.shuffle(&mut rng);
                    PreferenceList::new(ids)
                })
                .collect::<Result<Vec<_>>>()?;
            PolicyModel::Ranking(RankingPopulation::uniform(space, lists)?)
        }
        ModelKind::Normalization => {
            let mut cuts: Vec<f64> = (1..n_passwords).map(|_| rng.random::<f64>()).collect();
            cuts.sort_by(f64::total_cmp);
            cuts.insert(0, 0.0);
            cuts.push(1.0);
            let probs = cuts.windows(2).map(|w| w[1] - w[0]).collect();
            PolicyModel::Normalization(FrequencyDistribution::new(space, probs)?)
        }
    };
    Ok(RandomInstance { book, model })
}
