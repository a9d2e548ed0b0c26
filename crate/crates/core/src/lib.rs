//! Optimal password composition policies.
//!
//! Given a password space, a list of rules and a model of how users pick
//! passwords, find the set of active rules that minimizes the probability
//! mass an attacker can capture with `k` guesses.

pub mod config;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod generators;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod predicate;
pub mod ruleset;
pub mod sampling;
pub mod signature;
pub mod space;

pub use config::RuleSetConfig;
pub use error::{Error, Result};
pub use exact::{OptimizationResult, ValueKind};
pub use model::{
    FrequencyDistribution, InducedDistribution, PolicyModel, PreferenceList, RankingPopulation,
    WeightedList,
};
pub use oracle::{ModelOracle, SampleCounts, SampleOracle};
pub use policy::{Mode, Policy, Rule, RuleBook};
pub use predicate::{Dictionary, RulePredicate};
pub use ruleset::RuleSet;
pub use sampling::SamplingConfig;
pub use space::{PasswordId, PasswordSpace};
