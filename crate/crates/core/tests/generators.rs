use polopt::exact::brute_force_optimal;
use polopt::generators::{
    gen_random_instance, ImpossibilityParams, ImpossibilitySampler, ModelKind, VertexCoverInstance,
};
use polopt::{Policy, PolicyModel, RuleBook, RuleSet, SampleOracle};

fn vc_best(g: usize, edges: &[(usize, usize)], t: usize) -> (f64, usize) {
    let inst = VertexCoverInstance::new(g, edges.to_vec(), t, 0).unwrap();
    let (pop, book) = inst.rankings().unwrap();
    let best = brute_force_optimal(&PolicyModel::Ranking(pop), &book, inst.k()).unwrap();
    (best.value, inst.k())
}

#[test]
fn triangle_has_no_small_cover() {
    let (v, k) = vc_best(3, &[(0, 1), (1, 2), (0, 2)], 1);
    assert_eq!(k, 4);
    assert_eq!(v, 1.0);
}

#[test]
fn path_and_star_have_covers() {
    let (v, k) = vc_best(2, &[(0, 1)], 1);
    assert_eq!(k, 1);
    assert!(v < 1.0);

    let star = [(0, 1), (0, 2), (0, 3)];
    let inst = VertexCoverInstance::new(4, star.to_vec(), 1, 0).unwrap();
    let (pop, book) = inst.rankings().unwrap();
    let model = PolicyModel::Ranking(pop);
    let centre = book.space().id_of("w0").unwrap();
    let policy = Policy::new(&book, RuleSet::from_indices(book.len(), [centre.index()])).unwrap();
    let dist = model.induced(&policy).unwrap();
    assert_eq!(dist.support_len(), 6);
    assert!(dist.p_k(5) < 1.0);
}

#[test]
fn random_instances_cover_the_space_and_repeat() {
    for seed in 0..50 {
        for kind in [ModelKind::Ranking, ModelKind::Normalization] {
            let a = gen_random_instance(12, 6, 20, kind, seed).unwrap();
            let b = gen_random_instance(12, 6, 20, kind, seed).unwrap();
            assert_eq!(a.model_json().unwrap(), b.model_json().unwrap());
            assert_eq!(a.rules_json().unwrap(), b.rules_json().unwrap());
            let all = Policy::new(&a.book, a.book.full_set()).unwrap();
            assert_eq!(all.allowed_ids().len(), 12);
            if let PolicyModel::Normalization(d) = &a.model {
                assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}

/// At N = 16 and c = 2 the mixture has q = 1/4 and four blocks of four. The
/// full space is better than allowing only `X` at both k = 1 and k = L, so
/// the separation between the two k values needs larger N.
#[test]
fn mixture_at_sixteen_passwords() {
    let params = ImpossibilityParams::new(2.0, 16).unwrap();
    assert_eq!((params.t, params.l, params.r), (4, 4, 3));
    let mut sampler = ImpossibilitySampler::new(params.clone(), 12).unwrap();
    let book = RuleBook::singletons(sampler.space().clone());
    let w: Vec<usize> = (0..params.r * params.t).collect();
    let full = Policy::new(&book, book.empty_set()).unwrap();
    let only_x = Policy::new(&book, RuleSet::from_indices(16, w)).unwrap();
    let s = 100_000;
    let l = params.l;
    let full_counts = sampler.draw_many(&full, s).unwrap();
    let x_counts = sampler.draw_many(&only_x, s).unwrap();
    let est = |c: &polopt::SampleCounts, k| c.top_k(k) as f64 / s as f64;
    let q = params.q;
    let full_p1 = q / 4.0 + (1.0 - q) / 16.0;
    let full_pl = q + (1.0 - q) * 4.0 / 16.0;
    assert!((est(&full_counts, 1) - full_p1).abs() < 0.01);
    assert!((est(&full_counts, l) - full_pl).abs() < 0.01);
    assert!((est(&x_counts, 1) - 0.25).abs() < 0.01);
    assert_eq!(est(&x_counts, l), 1.0);
    assert!(full_p1 < 0.25 && full_pl < 1.0);
}
