//! Synthetic leaked-corpus stand-in with a heavy head.
//!
//! A fixed list of very common passwords takes Zipf counts
//! `round(top_count / rank^exponent)`. The remaining `tail_count` users are
//! split between password shapes (digit runs, dictionary words, words with
//! digits, capitalised words, symbol mixes, ...), each with its own mass
//! share and its own Zipf exponent. Most shapes have a popular head; the
//! generated tokens (capitals, digits and symbols, no lowercase) are close to
//! flat, so the policies worth finding are the ones that keep them.

use std::collections::HashSet;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FrequencyDistribution;
use crate::predicate::Dictionary;

use super::dataset::{Dataset, DatasetSummary};

/// The word list shipped with the crate.
pub const BUILTIN_WORDS: &str = include_str!("../../data/words.txt");

/// Most common passwords, in rank order, before the generated tail.
const HEAD: &[&str] = &[
    "123456",
    "12345",
    "123456789",
    "password",
    "iloveyou",
    "princess",
    "1234567",
    "butterfly",
    "12345678",
    "abc123",
    "nicole",
    "daniel",
    "babygirl",
    "monkey",
    "lovely",
    "jessica",
    "654321",
    "michael",
    "ashley",
    "qwerty",
    "111111",
    "iloveu",
    "000000",
    "michelle",
    "tigger",
    "sunshine",
    "chocolate",
    "password1",
    "soccer",
    "anthony",
    "Password1",
    "iloveyou1",
    "P@ssw0rd",
    "Iloveyou1",
    "Monkey123",
    "Password123",
    "Welcome1",
    "Summer2010",
    "Princess1!",
    "Qwerty123!",
    "Password123!",
    "Michael2009!",
    "Jessica#1987",
    "Football#2010",
    "superman_12!",
    "Sunshine2011!!",
    "Dragon@1234567",
    "Chocolate!2012",
    "Butterfly$1990",
    "Basketball#2468",
];

pub fn builtin_dictionary() -> Dictionary {
    Dictionary::new(BUILTIN_WORDS.lines())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    /// Distinct passwords, including the fixed head.
    pub distinct: usize,
    /// Zipf exponent of the fixed head.
    pub exponent: f64,
    /// Count of the most common password.
    pub top_count: u64,
    /// Users spread over the generated shapes.
    pub tail_count: u64,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            distinct: 20_000,
            exponent: 0.8,
            top_count: 300_000,
            tail_count: 10_000_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    pub dictionary: Arc<Dictionary>,
}

/// Tail shapes as (share of distinct passwords, share of tail users, Zipf
/// exponent within the shape).
const SHAPES: [(f64, f64, f64); 11] = [
    (0.14, 0.16, 0.9), // digit run
    (0.05, 0.20, 0.9), // dictionary word
    (0.25, 0.25, 0.8), // word + digits
    (0.03, 0.02, 0.9), // shouted word, maybe with digits
    (0.20, 0.20, 0.7), // random lowercase
    (0.08, 0.05, 0.8), // Capitalised word + digits
    (0.08, 0.04, 0.7), // two words
    (0.06, 0.03, 0.7), // word, symbol, digits
    (0.06, 0.02, 0.8), // letters, symbol, digits, letters
    (0.02, 0.01, 0.5), // random mix of every class
    (0.03, 0.05, 0.1), // generated token: capitals, digits, symbols
];

/// Shape whose short members are ranked ahead of the long ones.
const SHORT_FIRST: usize = 8;

fn digits(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len)
        .map(|_| char::from(b'0' + rng.random_range(0..10u8)))
        .collect()
}

fn letters(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len)
        .map(|_| char::from(b'a' + rng.random_range(0..26u8)))
        .collect()
}

fn capitalise(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn shaped(rng: &mut ChaCha8Rng, shape: usize, words: &[&str]) -> String {
    const SYMBOLS: &[char] = &['!', '@', '#', '$', '*', '.', '_', '?'];
    let word = *words.choose(rng).expect("word list is nonempty");
    let sym = *SYMBOLS.choose(rng).expect("symbols");
    match shape {
        0 => {
            let len = rng.random_range(4..=10);
            digits(rng, len)
        }
        1 => word.to_string(),
        2 => {
            let n = rng.random_range(1..=4);
            format!("{word}{}", digits(rng, n))
        }
        3 => {
            let n = rng.random_range(0..=3);
            format!("{}{}", word.to_uppercase(), digits(rng, n))
        }
        4 => {
            let len = rng.random_range(5..=9);
            letters(rng, len)
        }
        5 => {
            let n = rng.random_range(1..=4);
            format!("{}{}", capitalise(word), digits(rng, n))
        }
        6 => {
            let other = *words.choose(rng).expect("word list is nonempty");
            let mut s = format!("{word}{other}");
            if rng.random_bool(0.3) {
                s = capitalise(&s);
                s.push_str(&digits(rng, 1));
            }
            s
        }
        7 => {
            let n = rng.random_range(1..=3);
            if rng.random_bool(0.5) {
                format!("{}{sym}{}", capitalise(word), digits(rng, n))
            } else {
                format!("{word}{sym}{}", digits(rng, n))
            }
        }
        8 => {
            let (a, b, n) = (
                rng.random_range(3..=7),
                rng.random_range(0..=3),
                rng.random_range(2..=4),
            );
            format!(
                "{}{sym}{}{}",
                letters(rng, a),
                digits(rng, n),
                letters(rng, b)
            )
        }
        9 => {
            const POOL: &[u8] =
                b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789!@#$%^&*";
            let len = rng.random_range(8..=16);
            (0..len)
                .map(|_| char::from(*POOL.choose(rng).expect("pool")))
                .collect()
        }
        _ => {
            const POOL: &[u8] = b"ABCDEFGHJKLMNPQRSTUVWXYZ23456789#@$%";
            let len = rng.random_range(10..=16);
            (0..len)
                .map(|_| char::from(*POOL.choose(rng).expect("pool")))
                .collect()
        }
    }
}

pub fn heavy_head(params: &SyntheticParams) -> Result<SyntheticDataset> {
    if params.distinct < HEAD.len() + SHAPES.len() {
        return Err(Error::InvalidArgument(format!(
            "synthetic dataset needs at least {} distinct passwords",
            HEAD.len() + SHAPES.len()
        )));
    }
    if !(params.exponent > 0.0) || params.top_count == 0 {
        return Err(Error::InvalidArgument(
            "synthetic exponent and top_count must be positive".into(),
        ));
    }
    let words: Vec<&str> = BUILTIN_WORDS.lines().filter(|w| !w.is_empty()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let shape_dist = WeightedIndex::new(SHAPES.map(|s| s.0)).expect("valid weights");
    let mut seen: HashSet<String> = HEAD.iter().map(|s| s.to_string()).collect();
    let mut by_shape: Vec<Vec<String>> = vec![Vec::new(); SHAPES.len()];
    let want = params.distinct - HEAD.len();
    let mut made = 0;
    let mut attempts = 0usize;
    while made < want {
        attempts += 1;
        if attempts > 50 * params.distinct + 1000 {
            return Err(Error::InvalidArgument(
                "could not generate enough distinct synthetic passwords".into(),
            ));
        }
        // every shape gets at least one member
        let shape = if made < SHAPES.len() {
            made
        } else {
            shape_dist.sample(&mut rng)
        };
        let pw = shaped(&mut rng, shape, &words);
        if seen.insert(pw.clone()) {
            by_shape[shape].push(pw);
            made += 1;
        }
    }
    by_shape[SHORT_FIRST].sort_by_key(|p| p.chars().count() >= 10);
    let mut counts: Vec<(String, u64)> = HEAD
        .iter()
        .enumerate()
        .map(|(i, pw)| {
            let c = params.top_count as f64 / ((i + 1) as f64).powf(params.exponent);
            (pw.to_string(), (c.round() as u64).max(1))
        })
        .collect();
    for (members, &(_, share, a)) in by_shape.into_iter().zip(&SHAPES) {
        let norm: f64 = (1..=members.len()).map(|r| (r as f64).powf(-a)).sum();
        let mass = params.tail_count as f64 * share;
        for (r, pw) in members.into_iter().enumerate() {
            let c = mass / norm * ((r + 1) as f64).powf(-a);
            counts.push((pw, (c.round() as u64).max(1)));
        }
    }
    let distribution = FrequencyDistribution::from_counts(counts.iter().map(|(p, c)| (p, *c)))?;
    let summary = DatasetSummary {
        total_count: distribution.total_count().unwrap_or(0),
        distinct: distribution.space().len(),
        skipped_empty: 0,
    };
    Ok(SyntheticDataset {
        dataset: Dataset {
            distribution,
            summary,
        },
        dictionary: Arc::new(builtin_dictionary()),
    })
}
