#![allow(dead_code)]

use std::sync::Arc;

use polopt::{Mode, PasswordSpace, PolicyModel, PreferenceList, RankingPopulation, Rule, RuleBook};

/// Six passwords, four positive rules, five users. The best `p(1, ·)` over
/// all positive policies is 2/5.
pub fn instance_a() -> (PolicyModel, RuleBook) {
    let space = Arc::new(PasswordSpace::new(["a", "b", "c", "d", "e", "f"]).unwrap());
    let book = RuleBook::new(
        space.clone(),
        vec![
            Rule::explicit(1, ["a", "b"]),
            Rule::explicit(2, ["c", "d"]),
            Rule::explicit(3, ["a", "e"]),
            Rule::explicit(4, ["f"]),
        ],
        Mode::Positive,
    )
    .unwrap();
    let lists = [
        ["f", "a", "b", "c", "d", "e"],
        ["f", "a", "c", "b", "d", "e"],
        ["f", "b", "c", "a", "d", "e"],
        ["c", "d", "a", "b", "e", "f"],
        ["d", "e", "a", "b", "c", "f"],
    ]
    .iter()
    .map(|l| PreferenceList::from_names(&space, l).unwrap())
    .collect();
    let pop = RankingPopulation::uniform(space, lists).unwrap();
    (PolicyModel::Ranking(pop), book)
}

pub const INSTANCE_A_P1: f64 = 0.4;

/// Values compare exactly through their fractions when both sides have one.
pub fn same_value(a: (f64, Option<(u64, u64)>), b: (f64, Option<(u64, u64)>)) -> bool {
    match (a.1, b.1) {
        (Some((an, ad)), Some((bn, bd))) => an as u128 * bd as u128 == bn as u128 * ad as u128,
        _ => (a.0 - b.0).abs() <= 1e-12,
    }
}
