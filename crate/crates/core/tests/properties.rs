mod common;

use dpplocal::dpp::{self, DeterminantalSampler};
use dpplocal::incidence::{build_colorful_complex, build_complete_graph_ust, build_kalai_complex};
use dpplocal::limit::tk_ball_mass;
use dpplocal::rng;
use dpplocal::rootedtrees::{aut_size, canonical_string, is_valid, matching_count, parts};
use dpplocal::spectral::{decompose, decompose_dual, projection_subspace, Subspace};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn random_subspace(m: usize, r: usize, g: &mut ChaCha8Rng) -> Subspace {
    let rows = DMatrix::from_fn(r, m, |_, _| g.random_range(-1.0..1.0));
    Subspace::span_of_rows(&rows)
}

/// Two disjoint random subsets of `0..m`.
fn disjoint_pair(m: usize, g: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(g);
    let a = g.random_range(1..=2.min(m - 1));
    let b = g.random_range(1..=2.min(m - a));
    let mut x = idx[..a].to_vec();
    let mut y = idx[a..a + b].to_vec();
    x.sort_unstable();
    y.sort_unstable();
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn code_is_invariant_under_relabeling(seed in any::<u64>(), n in 1usize..30) {
        let mut g = rng::master(seed);
        let (a, b) = random_tree_pair(n, &mut g);
        prop_assert_eq!(canonical_string(&a), canonical_string(&b));
        prop_assert_eq!(aut_size(&a).unwrap(), aut_size(&b).unwrap());
    }

    #[test]
    fn matching_count_matches_brute_force(seed in any::<u64>(), n in 1usize..15) {
        let mut g = rng::master(seed);
        let (t, _) = random_tree_pair(n, &mut g);
        let (even, _, _) = parts(&t);
        let k: Vec<usize> = even.iter().copied().filter(|_| g.random_bool(0.5)).collect();
        prop_assert_eq!(matching_count(&t, &k).unwrap(), brute_matching_count(&t, &k));
    }

    #[test]
    fn masses_sum_to_one(seed in any::<u64>(), m in 2usize..9) {
        let mut g = rng::master(seed);
        let r = g.random_range(1..m);
        let h = random_subspace(m, r, &mut g);
        let total: f64 = dpp::enumerate_all(&h).unwrap().iter().map(|(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn negative_correlation(seed in any::<u64>(), m in 3usize..12) {
        let mut g = rng::master(seed);
        let r = g.random_range(1..m);
        let h = random_subspace(m, r, &mut g);
        let (a, b) = disjoint_pair(m, &mut g);
        let mut ab = [a.clone(), b.clone()].concat();
        ab.sort_unstable();
        let lhs = dpp::marginal(&h, &ab).unwrap();
        let rhs = dpp::marginal(&h, &a).unwrap() * dpp::marginal(&h, &b).unwrap();
        prop_assert!(lhs <= rhs + 1e-9, "{lhs} > {rhs}");
    }

    #[test]
    fn conditioning_matches_restricted_enumeration(seed in any::<u64>(), m in 3usize..9) {
        let mut g = rng::master(seed);
        let r = g.random_range(1..m);
        let h = random_subspace(m, r, &mut g);
        let (inc, exc) = disjoint_pair(m, &mut g);
        let all = dpp::enumerate_all(&h).unwrap();
        let keep = |t: &[usize]| inc.iter().all(|x| t.contains(x)) && exc.iter().all(|x| !t.contains(x));
        let z: f64 = all.iter().filter(|(t, _)| keep(&t.members)).map(|(_, p)| p).sum();
        match dpp::condition(&h, &inc, &exc) {
            Ok(c) => {
                prop_assert!(z > 1e-12);
                for (t, p) in &all {
                    let want = if keep(&t.members) { p / z } else { 0.0 };
                    prop_assert!((dpp::mass(&c, &t.members).unwrap() - want).abs() < 1e-7);
                }
            }
            Err(_) => prop_assert!(z < 1e-6),
        }
    }

    #[test]
    fn smaller_subspace_has_smaller_marginals(seed in any::<u64>(), m in 3usize..15) {
        let mut g = rng::master(seed);
        let r = g.random_range(2..m);
        let rows = DMatrix::from_fn(r, m, |_, _| g.random_range(-1.0..1.0));
        let big = Subspace::span_of_rows(&rows);
        let small = Subspace::span_of_rows(&rows.rows(0, r - 1).into_owned());
        for u in 0..m {
            let (a, b) = (dpp::marginal(&small, &[u]).unwrap(), dpp::marginal(&big, &[u]).unwrap());
            prop_assert!(a <= b + 1e-9);
        }
    }

    #[test]
    fn samples_are_bases(seed in any::<u64>(), m in 2usize..20) {
        let mut g = rng::master(seed);
        let r = g.random_range(1..m);
        let h = random_subspace(m, r, &mut g);
        let t = dpp::sample(&h, &mut g).unwrap();
        prop_assert_eq!(t.members.len(), r);
        prop_assert!(t.members.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(dpp::mass(&h, &t.members).unwrap() > 0.0);
    }

    #[test]
    fn limit_masses_of_valid_trees_are_probabilities(seed in any::<u64>(), k in 1usize..4) {
        let mut g = rng::master(seed);
        let t = random_valid_tree(k, g.random_range(1..=2), 3, &mut g);
        prop_assume!(is_valid(&t, k));
        let w = tk_ball_mass(&t, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&w));
    }
}

#[test]
fn kernel_and_subspace_marginals_agree() {
    let graphs = [
        build_complete_graph_ust(6).unwrap(),
        build_kalai_complex(6, 2).unwrap(),
        build_colorful_complex(4, 2, 3).unwrap(),
    ];
    let mut g = rng::master(31);
    for graph in &graphs {
        let h = projection_subspace(&decompose(graph).unwrap());
        let kernel = decompose_dual(graph).unwrap().kernel(graph);
        assert_eq!(kernel.rank(), h.dim());
        assert_eq!(kernel.ground_size(), graph.m());
        for _ in 0..50 {
            let (a, b) = disjoint_pair(graph.m(), &mut g);
            let mut e = [a, b].concat();
            e.sort_unstable();
            assert!((kernel.marginal(&e) - dpp::marginal(&h, &e).unwrap()).abs() < 1e-9);
        }
    }
}
