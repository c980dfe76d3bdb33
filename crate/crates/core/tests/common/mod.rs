//! Random inputs and brute-force oracles shared by the integration tests.
//! Nothing here calls the code paths it is used to check.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use dopgram::corpus::{Child, Label, ParseTree, WordGraph, WordArc};
use dopgram::fragments::Fragment;
use dopgram::stsg::{Derivation, Stsg};
use rand::Rng;

pub fn lbl(s: &str) -> Label {
    s.parse().unwrap()
}

pub fn word_leaf(label: &str, w: &str) -> ParseTree {
    ParseTree::new(lbl(label), vec![Child::Word(w.to_string())])
}

/// A random complete tree with at most `max_nodes` labelled nodes. Internal
/// labels only ever dominate labels later in `A..E`, so grammars read off
/// these trees have no unary cycles.
pub fn random_tree<R: Rng>(rng: &mut R, max_nodes: usize) -> ParseTree {
    fn grow<R: Rng>(rng: &mut R, level: usize, budget: &mut usize) -> ParseTree {
        const INTERNAL: [&str; 5] = ["A", "B", "C", "D", "E"];
        const PRE: [&str; 2] = ["P", "Q"];
        const WORDS: [&str; 4] = ["a", "b", "c", "d"];
        *budget -= 1;
        if level >= INTERNAL.len() || *budget < 2 || (level > 0 && rng.random_bool(0.3)) {
            let p = PRE[rng.random_range(0..PRE.len())];
            return word_leaf(p, WORDS[rng.random_range(0..WORDS.len())]);
        }
        let label = INTERNAL[level];
        let arity = rng.random_range(1..=3usize).min(*budget);
        let mut children = Vec::new();
        for _ in 0..arity {
            if *budget == 0 {
                break;
            }
            let next = rng.random_range(level + 1..=INTERNAL.len());
            children.push(Child::Tree(grow(rng, next, budget)));
        }
        ParseTree::new(lbl(label), children)
    }
    let mut budget = max_nodes;
    grow(rng, 0, &mut budget)
}

fn preorder(t: &ParseTree) -> Vec<&ParseTree> {
    let mut out = Vec::new();
    t.for_each_node(&mut |n| out.push(n));
    out
}

/// Copy of `t` in which the nodes whose preorder index (relative to `t`) is
/// in `cut` become bare sites.
fn cut_copy(t: &ParseTree, cut: &[bool], next: &mut usize) -> ParseTree {
    let me = *next;
    *next += 1;
    if me != 0 && cut[me] {
        skip(t, next);
        return ParseTree::site(t.label.clone());
    }
    let children = t
        .children
        .iter()
        .map(|c| match c {
            Child::Word(w) => Child::Word(w.clone()),
            Child::Tree(s) => Child::Tree(cut_copy(s, cut, next)),
        })
        .collect();
    ParseTree::new(t.label.clone(), children)
}

fn skip(t: &ParseTree, next: &mut usize) {
    for c in &t.children {
        if let Child::Tree(s) = c {
            *next += 1;
            skip(s, next);
        }
    }
}

/// Fragment keys of every fragment of `tree`, one per occurrence, found by
/// trying every subset of cut points below every node. A subset and its
/// effective version (cuts under another cut ignored) give the same
/// fragment, so keys are deduplicated per root node.
pub fn oracle_fragments(tree: &ParseTree, max_depth: usize) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for root in preorder(tree) {
        let n = root.node_count();
        assert!(n <= 20, "oracle limited to small trees");
        let mut keys = std::collections::BTreeSet::new();
        for mask in 0u32..(1 << (n - 1)) {
            let mut cut = vec![false; n];
            for (i, c) in cut.iter_mut().enumerate().skip(1) {
                *c = mask >> (i - 1) & 1 == 1;
            }
            let f = cut_copy(root, &cut, &mut 0);
            if f.depth() <= max_depth {
                keys.insert(Fragment::new(f).unwrap().key().to_string());
            }
        }
        for k in keys {
            *out.entry(k).or_insert(0) += 1;
        }
    }
    out
}

/// Every leftmost derivation of `tree`, as fragment-key lists, from cut
/// subsets whose pieces are all grammar fragments. The root piece must be
/// acceptable to the grammar's start label.
pub fn oracle_derivations(tree: &ParseTree, g: &Stsg) -> Vec<Vec<String>> {
    let nodes = preorder(tree);
    let n = nodes.len();
    assert!(n <= 20, "oracle limited to small trees");
    let mut out = Vec::new();
    if !g.accepts_root(&tree.label) {
        return out;
    }
    for mask in 0u32..(1 << (n - 1)) {
        let mut cut = vec![true; n];
        for (i, c) in cut.iter_mut().enumerate().skip(1) {
            *c = mask >> (i - 1) & 1 == 1;
        }
        // pieces rooted at the root and at every cut node, in preorder, which
        // is exactly leftmost substitution order
        let mut keys = Vec::new();
        let mut ok = true;
        for (i, node) in nodes.iter().enumerate() {
            if !cut[i] {
                continue;
            }
            let sub = preorder(node);
            let mut local = vec![false; sub.len()];
            for (j, c) in local.iter_mut().enumerate().skip(1) {
                *c = cut[i + j];
            }
            let piece = cut_copy(node, &local, &mut 0);
            let key = Fragment::new(piece).unwrap().key().to_string();
            if g.get(&key).is_none() {
                ok = false;
                break;
            }
            keys.push(key);
        }
        if ok {
            out.push(keys);
        }
    }
    out
}

pub fn keys_logprob(keys: &[String], g: &Stsg) -> f64 {
    keys.iter().map(|k| g.get(k).unwrap().logprob).sum()
}

pub fn keys_derivation(keys: &[String], g: &Stsg) -> Derivation {
    Derivation::new(keys.iter().map(|k| g.get(k).unwrap().fragment.clone()).collect::<Vec<Arc<Fragment>>>())
}

enum Item {
    Word(String),
    Site(Label),
}

/// Every leftmost derivation of any tree yielding `words`, found top-down
/// with frontier pruning. Each derivation comes with its log-probability.
pub fn oracle_string_derivations(words: &[String], g: &Stsg) -> Vec<(Vec<String>, f64)> {
    fn expand(
        frontier: Vec<Item>,
        steps: &mut Vec<String>,
        lp: f64,
        words: &[String],
        g: &Stsg,
        out: &mut Vec<(Vec<String>, f64)>,
    ) {
        // every site yields at least one word
        if frontier.len() > words.len() {
            return;
        }
        let site = frontier.iter().position(|i| matches!(i, Item::Site(_)));
        let prefix = site.unwrap_or(frontier.len());
        for (i, it) in frontier[..prefix].iter().enumerate() {
            if let Item::Word(w) = it {
                if *w != words[i] {
                    return;
                }
            }
        }
        let Some(s) = site else {
            if frontier.len() == words.len() {
                out.push((steps.clone(), lp));
            }
            return;
        };
        let Item::Site(label) = &frontier[s] else { unreachable!() };
        for &id in g.rooted(label) {
            let e = &g.entries()[id];
            let mut next: Vec<Item> = frontier[..s]
                .iter()
                .map(|i| match i {
                    Item::Word(w) => Item::Word(w.clone()),
                    Item::Site(l) => Item::Site(l.clone()),
                })
                .collect();
            for f in e.fragment.frontier() {
                next.push(match f {
                    dopgram::corpus::FrontierItem::Word(w) => Item::Word(w.to_string()),
                    dopgram::corpus::FrontierItem::Site(l) => Item::Site(l.clone()),
                });
            }
            for i in &frontier[s + 1..] {
                next.push(match i {
                    Item::Word(w) => Item::Word(w.clone()),
                    Item::Site(l) => Item::Site(l.clone()),
                });
            }
            steps.push(e.fragment.key().to_string());
            expand(next, steps, lp + e.logprob, words, g, out);
            steps.pop();
        }
    }
    let mut out = Vec::new();
    for (root, ids) in g.roots() {
        if !g.accepts_root(root) {
            continue;
        }
        for &id in ids {
            let e = &g.entries()[id];
            let frontier = e
                .fragment
                .frontier()
                .into_iter()
                .map(|f| match f {
                    dopgram::corpus::FrontierItem::Word(w) => Item::Word(w.to_string()),
                    dopgram::corpus::FrontierItem::Site(l) => Item::Site(l.clone()),
                })
                .collect();
            let mut steps = vec![e.fragment.key().to_string()];
            expand(frontier, &mut steps, e.logprob, words, g, &mut out);
        }
    }
    out
}

pub fn log_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// A random acyclic lattice over `words` with node 0 as start and the last
/// node as end, re-drawn until it has between 1 and `max_paths` paths.
pub fn random_lattice<R: Rng>(rng: &mut R, words: &[String], max_paths: usize) -> WordGraph {
    loop {
        let n = rng.random_range(2..=6usize);
        let mut arcs = Vec::new();
        for from in 0..n - 1 {
            let fan = rng.random_range(1..=3usize);
            for _ in 0..fan {
                let to = rng.random_range(from + 1..=(from + 2).min(n - 1));
                arcs.push(WordArc {
                    from,
                    to,
                    word: words[rng.random_range(0..words.len())].clone(),
                    acoustic: Some(-rng.random_range(0.0..3.0)),
                });
            }
        }
        let Ok(g) = WordGraph::new(n, 0, n - 1, arcs) else { continue };
        if let Some(p) = g.paths(max_paths) {
            if !p.is_empty() {
                return g;
            }
        }
    }
}

/// A linear lattice over `reference` with random parallel and skipping
/// arcs, re-drawn until it has at most `max_paths` paths.
pub fn confused_lattice<R: Rng>(rng: &mut R, reference: &[String], words: &[String], max_paths: usize) -> WordGraph {
    let n = reference.len();
    loop {
        let mut arcs = Vec::new();
        for (i, w) in reference.iter().enumerate() {
            arcs.push(WordArc {
                from: i,
                to: i + 1,
                word: w.clone(),
                acoustic: Some(-rng.random_range(0.0..3.0)),
            });
            if rng.random_bool(0.5) {
                let to = (i + rng.random_range(1..=2usize)).min(n);
                arcs.push(WordArc {
                    from: i,
                    to,
                    word: words[rng.random_range(0..words.len())].clone(),
                    acoustic: Some(-rng.random_range(0.0..3.0)),
                });
            }
        }
        let g = WordGraph::new(n + 1, 0, n, arcs).unwrap();
        if g.paths(max_paths).is_some() {
            return g;
        }
    }
}

/// Levenshtein distance by the textbook full-table recurrence.
pub fn edit_distance(r: &[String], h: &[String]) -> usize {
    let mut d = vec![vec![0usize; h.len() + 1]; r.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=h.len() {
        d[0][j] = j;
    }
    for i in 1..=r.len() {
        for j in 1..=h.len() {
            let sub = d[i - 1][j - 1] + usize::from(r[i - 1] != h[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[r.len()][h.len()]
}

/// Per-root probability mass of a grammar.
pub fn root_masses(g: &Stsg) -> HashMap<Label, f64> {
    let mut m = HashMap::new();
    for e in g.entries() {
        *m.entry(e.fragment.root().clone()).or_insert(0.0) += e.prob;
    }
    m
}
