mod common;

use common::*;
use dopgram::corpus::{load_wordgraph, parse_bracketed, tree_yield, WordArc, WordGraph};
use dopgram::decoder::{best_string, parse_string, ALL};
use dopgram::em::{self, backward, build_trellis, expected_counts, forward};
use dopgram::fragments::{count_fragments, extract_fragments, rf_estimate, UNBOUNDED};
use dopgram::harness::{make_splits, wer, ExperimentConfig};
use dopgram::ngram::train_katz;
use dopgram::stsg::{derive, enumerate_derivations, tree_prob, Stsg};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn grammar(seed: u64, n: usize, max_nodes: usize) -> (Vec<dopgram::corpus::ParseTree>, Stsg) {
    let mut r = rng(seed);
    let trees: Vec<_> = (0..n).map(|_| random_tree(&mut r, max_nodes)).collect();
    let depth = [1, 2, 3, UNBOUNDED][r.random_range(0..4)];
    let g = rf_estimate(&count_fragments(&trees, depth).unwrap()).unwrap();
    (trees, g)
}

/// Unbounded fragments rooted at a node: the product over its nonterminal
/// children of (1 + fragments rooted there).
fn rooted_count(t: &dopgram::corpus::ParseTree) -> usize {
    t.children
        .iter()
        .map(|c| match c {
            dopgram::corpus::Child::Tree(s) => 1 + rooted_count(s),
            dopgram::corpus::Child::Word(_) => 1,
        })
        .product()
}

fn total_count(t: &dopgram::corpus::ParseTree) -> usize {
    let mut n = 0;
    t.for_each_node(&mut |v| n += rooted_count(v));
    n
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn unbounded_fragment_count_is_product_formula(seed in any::<u64>()) {
        let t = random_tree(&mut rng(seed), 15);
        prop_assert_eq!(extract_fragments(&t, UNBOUNDED).unwrap().len(), total_count(&t));
    }

    #[test]
    fn fragment_depth_is_bounded_and_monotone(seed in any::<u64>(), d in 1usize..5) {
        let t = random_tree(&mut rng(seed), 15);
        let small = extract_fragments(&t, d).unwrap();
        prop_assert!(small.iter().all(|f| f.depth() <= d && f.depth() >= 1));
        prop_assert!(small.len() <= extract_fragments(&t, d + 1).unwrap().len());
    }

    #[test]
    fn every_derivation_rebuilds_its_tree(seed in any::<u64>()) {
        let (trees, g) = grammar(seed, 3, 9);
        for t in &trees {
            let ds = enumerate_derivations(t, &g);
            prop_assert!(!ds.is_empty());
            let mut sum = 0.0;
            for d in &ds {
                prop_assert_eq!(&derive(&d.steps, g.start()).unwrap(), t);
                sum += d.steps.iter().map(|f| g.get(f.key()).unwrap().prob).product::<f64>();
            }
            prop_assert!((sum - tree_prob(t, &g)).abs() <= 1e-12);
        }
    }

    #[test]
    fn trellis_forward_meets_backward(seed in any::<u64>()) {
        let (trees, g) = grammar(seed, 3, 10);
        for t in &trees {
            let mut tr = build_trellis(t, &g).unwrap();
            forward(&mut tr, &g);
            backward(&mut tr, &g);
            // beta is anchored at the goal's alpha, so the start carries it twice
            let start = &tr.states()[tr.start()];
            prop_assert!((start.beta - 2.0 * tr.goal_logprob()).abs() <= 1e-9);
            for e in tr.edges() {
                prop_assert!(e.from < e.to || tr.states()[e.from].expanded_count() < tr.states()[e.to].expanded_count());
            }
        }
    }

    #[test]
    fn expected_counts_cover_every_tree(seed in any::<u64>()) {
        let (trees, g) = grammar(seed, 3, 10);
        let c = expected_counts(&trees, &g).unwrap();
        // every tree contributes exactly one root fragment
        let roots: f64 = c
            .entries()
            .iter()
            .filter(|(f, _)| g.accepts_root(f.root()) && f.root() == &trees[0].label)
            .map(|(_, x)| x)
            .sum();
        prop_assert!(roots >= trees.len() as f64 - 1e-9);
        prop_assert!(c.entries().iter().all(|(_, x)| *x >= 0.0));
    }

    #[test]
    fn em_never_increases_cross_entropy(seed in any::<u64>()) {
        let (trees, g) = grammar(seed, 4, 10);
        let st = em::train(&trees, &g, 1e-9, 8).unwrap();
        for w in st.history.windows(2) {
            prop_assert!(w[1] <= w[0] + em::SLACK_BITS);
        }
    }

    #[test]
    fn kbest_scores_do_not_increase(seed in any::<u64>()) {
        let (trees, g) = grammar(seed, 3, 9);
        for t in &trees {
            let chart = parse_string(&tree_yield(t), &g);
            let all = chart.nbest(ALL).unwrap();
            for w in all.windows(2) {
                prop_assert!(w[1].logprob <= w[0].logprob);
            }
            let total = log_sum(all.iter().map(|d| d.logprob));
            prop_assert!((total.exp() - chart.goal_logprob().exp()).abs() <= 1e-12);
            let two = chart.nbest(2).unwrap();
            prop_assert!(two.len() <= 2 && two.len() == all.len().min(2));
        }
    }

    #[test]
    fn zero_acoustics_match_zero_weight(seed in any::<u64>()) {
        let (trees, g) = grammar(seed, 3, 9);
        let mut r = rng(seed ^ 1);
        let y = tree_yield(&trees[0]);
        let words: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let lat = confused_lattice(&mut r, &y, &words, 50);
        let flat = WordGraph::new(
            lat.node_count(),
            lat.start(),
            lat.end(),
            lat.arcs().iter().map(|a| WordArc { acoustic: Some(0.0), ..a.clone() }).collect(),
        )
        .unwrap();
        let a = best_string(&flat, &g, 100, 1.0).unwrap();
        let b = best_string(&lat, &g, 100, 0.0).unwrap();
        prop_assert_eq!(a.best_string, b.best_string);
        prop_assert!((a.string_logprob - b.string_logprob).abs() <= 1e-12);
    }

    #[test]
    fn katz_discounts_never_exceed_relative_frequency(seed in any::<u64>()) {
        let mut r = rng(seed);
        let vocab = ["x", "y", "z", "w"];
        let corpus: Vec<Vec<String>> = (0..r.random_range(2..30))
            .map(|_| (0..r.random_range(1..6)).map(|_| vocab[r.random_range(0..4)].to_string()).collect())
            .collect();
        let m = train_katz(&corpus, 2, 5).unwrap();
        for h in vocab {
            let ch: u64 = vocab.iter().map(|w| m.count(&[h, w])).sum::<u64>() + m.count(&[h, "</s>"]);
            for w in vocab {
                let c = m.count(&[h, w]);
                if c > 0 {
                    prop_assert!(m.logprob(&[h], w).exp() <= c as f64 / ch as f64 + 1e-12);
                }
            }
        }
        let doubled: Vec<Vec<String>> = corpus.iter().chain(&corpus).cloned().collect();
        let m2 = train_katz(&doubled, 2, 5).unwrap();
        let s = &corpus[0];
        prop_assert!(m.logprob_sentence(s).is_finite() && m2.logprob_sentence(s).is_finite());
    }

    #[test]
    fn wer_ignores_shared_suffixes(seed in any::<u64>(), k in 0usize..4) {
        let mut r = rng(seed);
        let v = ["a", "b", "c"];
        let mut s = |n: usize| -> Vec<String> { (0..n).map(|_| v[r.random_range(0..3)].to_string()).collect() };
        let (rlen, hlen) = (1 + (seed % 6) as usize, (seed / 7 % 6) as usize);
        let (mut re, mut hy, suffix) = (s(rlen), s(hlen), s(k));
        let e0 = wer(&re, &hy).unwrap() * re.len() as f64;
        re.extend(suffix.iter().cloned());
        hy.extend(suffix);
        let e1 = wer(&re, &hy).unwrap() * re.len() as f64;
        prop_assert!((e0 - e1).abs() < 1e-9);
        prop_assert!(e1 / re.len() as f64 <= (re.len() + hy.len()) as f64 / re.len() as f64);
    }

    #[test]
    fn splits_partition_the_corpus(n in 2usize..300, tf in 0.1f64..0.95, seed in any::<u64>()) {
        let cfg = ExperimentConfig { splits: 3, train_fraction: tf, seed, ..Default::default() };
        for s in make_splits(n, &cfg) {
            prop_assert_eq!(s.test.len(), ((1.0 - tf) * n as f64).round() as usize);
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            all.dedup();
            prop_assert_eq!(all.len(), n);
            prop_assert_eq!(s.train.len() + s.test.len(), n);
        }
    }

    #[test]
    fn text_formats_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = random_tree(&mut r, 15);
        prop_assert_eq!(parse_bracketed(&t.serialize()).unwrap(), t);
        let words: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let lat = random_lattice(&mut r, &words, 100);
        let back = load_wordgraph(&lat.to_text()).unwrap();
        prop_assert_eq!(back.arcs(), lat.arcs());
    }
}
