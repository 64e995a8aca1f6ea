mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use tarnet::netfilter::{
    hard_threshold_filter, polya_edge_pvalues, polya_filter, polya_pvalue, retained_count, Edge, WeightedDigraph,
};

fn kept_pairs(g: &WeightedDigraph, kept: &[bool]) -> Vec<(usize, usize)> {
    g.edges()
        .iter()
        .zip(kept)
        .filter(|(_, &k)| k)
        .map(|(e, _)| (e.source, e.target))
        .collect()
}

fn dense_graph(n: usize, weights: Vec<f64>) -> WeightedDigraph {
    WeightedDigraph::from_dense(n, &weights).unwrap()
}

#[test]
fn binomial_limit_on_integer_grid() {
    for s in [10u64, 20, 50] {
        for k in [2usize, 4, 10] {
            let mut prev = f64::INFINITY;
            for w in 0..=s {
                let got = polya_pvalue(w as f64, s as f64, k, 1e-8).unwrap();
                let want = binomial_sf(w, s, 1.0 / k as f64);
                assert!((got - want).abs() < 1e-4, "s={s} k={k} w={w}: {got} vs {want}");
                assert!(got <= prev, "not monotone at s={s} k={k} w={w}");
                prev = got;
            }
        }
    }
}

#[test]
fn binomial_example_s20_k4_w10() {
    let got = polya_pvalue(10.0, 20.0, 4, 1e-8).unwrap();
    assert!((got - binomial_sf(10, 20, 0.25)).abs() < 1e-4);
}

#[test]
fn unit_reinforcement_matches_beta_binomial_sum() {
    for (s, k) in [(12u64, 3usize), (30, 5), (60, 2)] {
        for w in 0..=s {
            let got = polya_pvalue(w as f64, s as f64, k, 1.0).unwrap();
            let want = beta_binomial_sf(w, s, k, 1.0);
            assert!((got - want).abs() < 1e-10, "s={s} k={k} w={w}: {got} vs {want}");
        }
    }
    let got = polya_pvalue(7.0, 25.0, 4, 0.3).unwrap();
    assert!((got - beta_binomial_sf(7, 25, 4, 0.3)).abs() < 1e-10);
}

#[test]
fn continuous_weights_interpolate_between_integers() {
    let lo = polya_pvalue(4.0, 20.0, 4, 1.0).unwrap();
    let mid = polya_pvalue(4.5, 20.0, 4, 1.0).unwrap();
    let hi = polya_pvalue(5.0, 20.0, 4, 1.0).unwrap();
    assert!(lo >= mid && mid >= hi, "{lo} {mid} {hi}");
}

#[test]
fn trivial_cases() {
    assert_eq!(polya_pvalue(0.0, 20.0, 4, 1.0).unwrap(), 1.0);
    for w in [0.5, 3.0, 20.0] {
        assert_eq!(polya_pvalue(w, 20.0, 1, 2.0).unwrap(), 1.0);
    }
}

#[test]
fn star_dominant_edge_has_smallest_pvalue() {
    let mut edges = vec![Edge {
        source: 0,
        target: 1,
        weight: 99.0,
    }];
    for t in 2..=10 {
        edges.push(Edge {
            source: 0,
            target: t,
            weight: 1.0 / 9.0,
        });
    }
    let g = WeightedDigraph::new(11, edges).unwrap();
    let p = polya_edge_pvalues(&g, 1.0).unwrap();
    // Leaves see a single in-edge, so only the hub's perspective matters.
    let want = polya_pvalue(99.0 * 10.0 / 100.0, 10.0, 10, 1.0).unwrap();
    assert!((p[0] - want).abs() < 1e-14);
    assert!(p[1..].iter().all(|&q| q > p[0]));
    let r = polya_filter(&g, 1.0, 0.05).unwrap();
    assert_eq!(kept_pairs(&g, &r.kept), vec![(0, 1)]);
}

#[test]
fn symmetric_complete_digraph_uses_tie_break() {
    let edges = (0..5)
        .flat_map(|i| {
            (0..5).filter(move |&k| k != i).map(move |k| Edge {
                source: i,
                target: k,
                weight: 1.0,
            })
        })
        .collect();
    let g = WeightedDigraph::new(5, edges).unwrap();
    let r = polya_filter(&g, 1.0, 0.1).unwrap();
    assert!(r.p_values.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(kept_pairs(&g, &r.kept), vec![(0, 1), (0, 2)]);
}

#[test]
fn hard_threshold_examples() {
    let edges = (0..10)
        .map(|i| Edge {
            source: i,
            target: (i + 3) % 10,
            weight: (i + 1) as f64,
        })
        .collect();
    let g = WeightedDigraph::new(10, edges).unwrap();
    let r = hard_threshold_filter(&g, 0.3).unwrap();
    let mut kept: Vec<f64> = g
        .edges()
        .iter()
        .zip(&r.kept)
        .filter(|(_, &k)| k)
        .map(|(e, _)| e.weight)
        .collect();
    kept.sort_by(f64::total_cmp);
    assert_eq!(kept, vec![8.0, 9.0, 10.0]);

    let g = dense_graph(4, vec![2.5; 16]);
    let r = hard_threshold_filter(&g, 0.5).unwrap();
    assert_eq!(r.kept_count(), 8);
    assert_eq!(
        kept_pairs(&g, &r.kept),
        (0..2).flat_map(|i| (0..4).map(move |k| (i, k))).collect::<Vec<_>>()
    );
}

#[test]
fn hard_threshold_matches_sort_oracle() {
    let mut r = rng(40);
    for _ in 0..20 {
        let n = r.random_range(3..15);
        let g = dense_graph(n, gaussian_vec(n * n, &mut r));
        let res = hard_threshold_filter(&g, 0.1).unwrap();
        let mut order: Vec<usize> = (0..n * n).collect();
        order.sort_by(|&a, &b| g.edges()[b].weight.abs().total_cmp(&g.edges()[a].weight.abs()));
        let keep = ((0.1 * (n * n) as f64).round() as usize).max(1);
        let mut want = vec![false; n * n];
        for &i in &order[..keep] {
            want[i] = true;
        }
        assert_eq!(res.kept, want);
        for (e, &k) in g.edges().iter().zip(&res.kept) {
            assert_eq!(k, e.weight.abs() >= res.threshold_used);
        }
    }
}

#[test]
fn polya_threshold_bounds_kept_pvalues() {
    let mut r = rng(41);
    let g = dense_graph(12, gaussian_vec(144, &mut r));
    let res = polya_filter(&g, 1.0, 0.2).unwrap();
    for (&p, &k) in res.p_values.iter().zip(&res.kept) {
        if k {
            assert!(p <= res.threshold_used);
        } else {
            assert!(p >= res.threshold_used);
        }
    }
}

#[test]
fn signs_do_not_affect_ranking() {
    let mut r = rng(42);
    let w = gaussian_vec(64, &mut r);
    let flipped: Vec<f64> = w
        .iter()
        .enumerate()
        .map(|(i, v)| if i % 3 == 0 { -v } else { *v })
        .collect();
    let a = polya_filter(&dense_graph(8, w), 1.0, 0.1).unwrap();
    let b = polya_filter(&dense_graph(8, flipped), 1.0, 0.1).unwrap();
    assert_eq!(a.kept, b.kept);
    assert_eq!(a.p_values, b.p_values);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pvalues_are_probabilities(seed in any::<u64>(), n in 2usize..12, a in 0.0f64..5.0) {
        let g = dense_graph(n, gaussian_vec(n * n, &mut rng(seed)));
        for p in polya_edge_pvalues(&g, a).unwrap() {
            prop_assert!((0.0..=1.0).contains(&p), "p = {}", p);
        }
    }

    #[test]
    fn global_rescaling_leaves_pvalues_unchanged(seed in any::<u64>(), n in 2usize..10, c in 1e-3f64..1e3) {
        let w = gaussian_vec(n * n, &mut rng(seed));
        let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
        let p = polya_edge_pvalues(&dense_graph(n, w), 1.0).unwrap();
        let q = polya_edge_pvalues(&dense_graph(n, scaled), 1.0).unwrap();
        for (x, y) in p.iter().zip(&q) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn hub_rescaling_leaves_star_pvalues_unchanged(seed in any::<u64>(), leaves in 2usize..20, c in 1e-3f64..1e3) {
        let mut r = rng(seed);
        let w: Vec<f64> = (0..leaves).map(|_| r.random_range(0.01..5.0)).collect();
        let star = |scale: f64| {
            let edges = w.iter().enumerate().map(|(i, &v)| Edge { source: 0, target: i + 1, weight: v * scale }).collect();
            WeightedDigraph::new(leaves + 1, edges).unwrap()
        };
        let p = polya_edge_pvalues(&star(1.0), 0.7).unwrap();
        let q = polya_edge_pvalues(&star(c), 0.7).unwrap();
        for (x, y) in p.iter().zip(&q) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn retention_within_one_edge(seed in any::<u64>(), n in 1usize..15, f in 0.01f64..=1.0) {
        let g = dense_graph(n, gaussian_vec(n * n, &mut rng(seed)));
        let total = (n * n) as f64;
        for res in [polya_filter(&g, 1.0, f).unwrap(), hard_threshold_filter(&g, f).unwrap()] {
            let kept = res.kept_count();
            prop_assert_eq!(kept, retained_count(n * n, f));
            prop_assert!((kept as f64 / total - f).abs() <= 1.0 / total + 1e-12);
        }
    }

    #[test]
    fn filtering_is_deterministic(seed in any::<u64>(), n in 2usize..10) {
        let g = dense_graph(n, gaussian_vec(n * n, &mut rng(seed)));
        prop_assert_eq!(polya_filter(&g, 1.0, 0.1).unwrap(), polya_filter(&g, 1.0, 0.1).unwrap());
        prop_assert_eq!(hard_threshold_filter(&g, 0.1).unwrap(), hard_threshold_filter(&g, 0.1).unwrap());
    }

    #[test]
    fn pvalue_monotone_in_weight(s in 1.0f64..100.0, k in 2usize..20, a in 0.0f64..3.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let (lo, hi) = if u <= v { (u * s, v * s) } else { (v * s, u * s) };
        prop_assert!(polya_pvalue(lo, s, k, a).unwrap() >= polya_pvalue(hi, s, k, a).unwrap() - 1e-12);
    }
}
