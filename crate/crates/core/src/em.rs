//! Maximum-likelihood reestimation of fragment probabilities (ML-DOP).
//!
//! The leftmost derivations of a training tree form a DAG of partial trees,
//! from the bare root to the full tree. Forward and backward sums over that
//! trellis give each fragment's expected number of uses per tree, which are
//! then renormalized per root label.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::corpus::{Child, Label, ParseTree};
use crate::error::{Error, Result};
use crate::fragments::Fragment;
use crate::logspace::log_sum_exp;
use crate::stsg::{tree_logprob, Stsg, TreeForest};

/// Default stopping threshold on the per-iteration cross-entropy decrease.
pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 30;
/// Cross-entropy regression tolerated from floating-point noise.
pub const SLACK_BITS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct NodeSet(Vec<u64>);

impl NodeSet {
    fn new(n: usize) -> Self {
        NodeSet(vec![0; n.div_ceil(64)])
    }

    fn contains(&self, i: usize) -> bool {
        self.0[i / 64] & (1 << (i % 64)) != 0
    }

    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn len(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }
}

/// A partial tree on the way to the target: the set of target nodes whose
/// children are already present. State 0 is the bare root.
#[derive(Clone, Debug)]
pub struct TrellisState {
    expanded: NodeSet,
    /// Log forward probability.
    pub alpha: f64,
    /// Log backward probability, anchored at `alpha` of the goal state.
    pub beta: f64,
}

impl TrellisState {
    pub fn expanded_count(&self) -> usize {
        self.expanded.len() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrellisEdge {
    pub from: usize,
    pub to: usize,
    /// Index of the consumed fragment in the grammar the trellis was built for.
    pub fragment: usize,
}

#[derive(Clone, Debug)]
pub struct Trellis {
    tree: ParseTree,
    states: Vec<TrellisState>,
    edges: Vec<TrellisEdge>,
    goal: usize,
}

impl Trellis {
    pub fn states(&self) -> &[TrellisState] {
        &self.states
    }

    pub fn edges(&self) -> &[TrellisEdge] {
        &self.edges
    }

    pub fn start(&self) -> usize {
        0
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn tree(&self) -> &ParseTree {
        &self.tree
    }

    /// The partial tree held by state `s`; unexpanded nodes are sites.
    pub fn partial(&self, s: usize) -> ParseTree {
        fn build(t: &ParseTree, next: &mut usize, set: &NodeSet) -> ParseTree {
            let id = *next;
            *next += 1;
            let children = t
                .children
                .iter()
                .map(|c| match c {
                    Child::Word(w) => Child::Word(w.clone()),
                    Child::Tree(sub) => Child::Tree(build(sub, next, set)),
                })
                .collect::<Vec<_>>();
            if set.contains(id) {
                ParseTree::new(t.label.clone(), children)
            } else {
                ParseTree::site(t.label.clone())
            }
        }
        build(&self.tree, &mut 0, &self.states[s].expanded)
    }

    /// Log probability of the target tree, once `forward` has run.
    pub fn goal_logprob(&self) -> f64 {
        self.states[self.goal].alpha
    }
}

/// All partial trees reachable from the bare root by substituting grammar
/// fragments at the leftmost open site. Fails if the full tree is not
/// reachable. Edge `fragment` fields index `g.entries()`.
pub fn build_trellis(tree: &ParseTree, g: &Stsg) -> Result<Trellis> {
    let forest = TreeForest::new(tree, g);
    build_from_forest(tree, &forest).ok_or(Error::Underivable { index: 0 })
}

fn build_from_forest(tree: &ParseTree, forest: &TreeForest) -> Option<Trellis> {
    if !forest.root_ok {
        return None;
    }
    let n = forest.len();
    let mut states = vec![TrellisState {
        expanded: NodeSet::new(n),
        alpha: f64::NEG_INFINITY,
        beta: f64::NEG_INFINITY,
    }];
    let mut memo: HashMap<NodeSet, usize> = HashMap::new();
    memo.insert(states[0].expanded.clone(), 0);
    let mut edges = Vec::new();
    let mut goal = None;
    let mut queue = 0;
    while queue < states.len() {
        let s = queue;
        queue += 1;
        // leftmost open site: first node in preorder that is not expanded
        // but hangs from an expanded parent (or is the root)
        let set = &states[s].expanded;
        let site = (0..n).find(|&i| !set.contains(i) && forest.parent[i].is_none_or(|p| set.contains(p as usize)));
        let Some(site) = site else {
            goal = Some(s);
            continue;
        };
        let base = states[s].expanded.clone();
        for m in &forest.matches[site] {
            let mut next = base.clone();
            for &i in &m.internal {
                next.insert(i as usize);
            }
            let to = match memo.get(&next) {
                Some(&t) => t,
                None => {
                    let t = states.len();
                    memo.insert(next.clone(), t);
                    states.push(TrellisState {
                        expanded: next,
                        alpha: f64::NEG_INFINITY,
                        beta: f64::NEG_INFINITY,
                    });
                    t
                }
            };
            edges.push(TrellisEdge {
                from: s,
                to,
                fragment: m.fragment,
            });
        }
    }
    let goal = goal?;
    // expansion only adds nodes, so sorting by size is a topological order
    let mut order: Vec<usize> = (0..states.len()).collect();
    order.sort_by_key(|&i| (states[i].expanded.len(), i));
    let mut rank = vec![0; states.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let sorted: Vec<TrellisState> = order.iter().map(|&i| states[i].clone()).collect();
    let mut edges: Vec<TrellisEdge> = edges
        .into_iter()
        .map(|e| TrellisEdge {
            from: rank[e.from],
            to: rank[e.to],
            fragment: e.fragment,
        })
        .collect();
    edges.sort_by_key(|e| (e.from, e.to, e.fragment));
    Some(Trellis {
        tree: tree.clone(),
        states: sorted,
        edges,
        goal: rank[goal],
    })
}

fn run_forward(t: &mut Trellis, logprob: &[f64]) {
    for s in &mut t.states {
        s.alpha = f64::NEG_INFINITY;
    }
    t.states[0].alpha = 0.0;
    let mut acc: Vec<Vec<f64>> = vec![Vec::new(); t.states.len()];
    // edges are sorted by source, and sources precede targets
    let mut e = 0;
    for s in 0..t.states.len() {
        if s > 0 {
            t.states[s].alpha = log_sum_exp(acc[s].drain(..));
        }
        while e < t.edges.len() && t.edges[e].from == s {
            let edge = t.edges[e];
            acc[edge.to].push(t.states[s].alpha + logprob[edge.fragment]);
            e += 1;
        }
    }
}

fn run_backward(t: &mut Trellis, logprob: &[f64]) {
    let goal_alpha = t.states[t.goal].alpha;
    for s in &mut t.states {
        s.beta = f64::NEG_INFINITY;
    }
    t.states[t.goal].beta = goal_alpha;
    let mut e = t.edges.len();
    for s in (0..t.states.len()).rev() {
        let mut terms = Vec::new();
        while e > 0 && t.edges[e - 1].from == s {
            let edge = t.edges[e - 1];
            terms.push(t.states[edge.to].beta + logprob[edge.fragment]);
            e -= 1;
        }
        if s != t.goal {
            terms.reverse();
            t.states[s].beta = log_sum_exp(terms);
        }
    }
}

fn logprobs(g: &Stsg) -> Vec<f64> {
    g.entries().iter().map(|e| e.logprob).collect()
}

/// Sets `alpha` on every state; `alpha` of the goal is the tree probability.
pub fn forward(t: &mut Trellis, g: &Stsg) {
    run_forward(t, &logprobs(g));
}

/// Sets `beta` on every state, starting from `beta(goal) = alpha(goal)`.
/// `forward` must have run.
pub fn backward(t: &mut Trellis, g: &Stsg) {
    run_backward(t, &logprobs(g));
}

/// Adds each edge's posterior use count to `counts`. Because `beta` is
/// anchored at the goal's forward value rather than at 1, the tree
/// probability is divided out twice.
fn accumulate(t: &Trellis, logprob: &[f64], counts: &mut [f64]) {
    let z = t.states[t.goal].alpha;
    for e in &t.edges {
        let lp = logprob[e.fragment];
        if lp == f64::NEG_INFINITY {
            continue;
        }
        let term = t.states[e.from].alpha + lp + t.states[e.to].beta - 2.0 * z;
        if term > f64::NEG_INFINITY {
            counts[e.fragment] += term.exp();
        }
    }
}

/// Expected fragment use counts, one per grammar entry.
#[derive(Clone, Debug)]
pub struct ExpectedCounts {
    start: Label,
    entries: Vec<(Arc<Fragment>, f64)>,
}

impl ExpectedCounts {
    pub fn new(start: Label, entries: Vec<(Arc<Fragment>, f64)>) -> Self {
        ExpectedCounts { start, entries }
    }

    pub fn start(&self) -> &Label {
        &self.start
    }

    pub fn entries(&self) -> &[(Arc<Fragment>, f64)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> f64 {
        self.entries
            .iter()
            .find(|(f, _)| f.key() == key)
            .map_or(0.0, |(_, c)| *c)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, c)| c).sum()
    }

    pub fn root_totals(&self) -> BTreeMap<&Label, f64> {
        let mut out = BTreeMap::new();
        for (f, c) in &self.entries {
            *out.entry(f.root()).or_insert(0.0) += c;
        }
        out
    }
}

/// Posterior expected number of uses of every fragment of `g`, summed over
/// the corpus.
pub fn expected_counts(corpus: &[ParseTree], g: &Stsg) -> Result<ExpectedCounts> {
    let lp = logprobs(g);
    let mut counts = vec![0.0; g.len()];
    for (index, tree) in corpus.iter().enumerate() {
        let forest = TreeForest::new(tree, g);
        let mut t = build_from_forest(tree, &forest).ok_or(Error::Underivable { index })?;
        run_forward(&mut t, &lp);
        if t.goal_logprob() == f64::NEG_INFINITY {
            return Err(Error::Underivable { index });
        }
        run_backward(&mut t, &lp);
        accumulate(&t, &lp, &mut counts);
    }
    Ok(with_fragments(g, counts))
}

fn with_fragments(g: &Stsg, counts: Vec<f64>) -> ExpectedCounts {
    ExpectedCounts::new(
        g.start().clone(),
        g.entries().iter().map(|e| e.fragment.clone()).zip(counts).collect(),
    )
}

/// Per-root relative frequencies of `counts`. Fragments with zero count are
/// dropped; a root that is still needed (as a site of a surviving fragment,
/// or as the start) but has no mass is an error.
pub fn reestimate(counts: &ExpectedCounts) -> Result<Stsg> {
    let mut totals: BTreeMap<&Label, f64> = BTreeMap::new();
    for (f, c) in &counts.entries {
        if !(*c >= 0.0) || !c.is_finite() {
            return Err(Error::Grammar(format!("invalid count {c} for {}", f.key())));
        }
        *totals.entry(f.root()).or_insert(0.0) += c;
    }
    // a count so small that its share underflows is treated as zero
    let kept: Vec<&(Arc<Fragment>, f64)> = counts
        .entries
        .iter()
        .filter(|(f, c)| *c > 0.0 && c / totals[f.root()] > 0.0)
        .collect();
    let mut totals: BTreeMap<&Label, f64> = BTreeMap::new();
    for (f, c) in &kept {
        *totals.entry(f.root()).or_insert(0.0) += c;
    }
    for (f, _) in &kept {
        for s in f.sites() {
            if totals.get(s).copied().unwrap_or(0.0) <= 0.0 {
                return Err(Error::ZeroMass(s.to_string()));
            }
        }
    }
    if !kept.iter().any(|(f, _)| crate::stsg::start_accepts(&counts.start, f.root())) {
        return Err(Error::ZeroMass(counts.start.to_string()));
    }
    let probs = kept
        .into_iter()
        .map(|(f, c)| (f.clone(), c / totals[f.root()]))
        .collect();
    Stsg::from_probabilities(counts.start.clone(), probs)
}

/// Mean negative log2 probability of the corpus trees.
pub fn cross_entropy(corpus: &[ParseTree], g: &Stsg) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut sum = 0.0;
    for (index, t) in corpus.iter().enumerate() {
        let lp = tree_logprob(t, g);
        if lp == f64::NEG_INFINITY {
            return Err(Error::Underivable { index });
        }
        sum += lp;
    }
    Ok(-sum / std::f64::consts::LN_2 / corpus.len() as f64)
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub grammar: Stsg,
    /// Number of reestimation steps performed.
    pub iteration: usize,
    pub cross_entropy: f64,
    /// Cross-entropy of the initial grammar followed by one value per
    /// iteration; empty when no iteration was requested.
    pub history: Vec<f64>,
}

/// EM from `g0` until the cross-entropy drops by less than `tol` bits per
/// tree or `max_iter` iterations have run.
pub fn train(corpus: &[ParseTree], g0: &Stsg, tol: f64, max_iter: usize) -> Result<TrainState> {
    train_with(corpus, g0, tol, max_iter, |_, _, _| {})
}

/// Like [`train`], calling `on_iter(k, cross_entropy, grammar)` for the
/// initial grammar (k = 0) and after every iteration.
pub fn train_with(
    corpus: &[ParseTree],
    g0: &Stsg,
    tol: f64,
    max_iter: usize,
    mut on_iter: impl FnMut(usize, f64, &Stsg),
) -> Result<TrainState> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let mut trellises = Vec::with_capacity(corpus.len());
    for (index, tree) in corpus.iter().enumerate() {
        let forest = TreeForest::new(tree, g0);
        trellises.push(build_from_forest(tree, &forest).ok_or(Error::Underivable { index })?);
    }
    // log-probabilities indexed like g0; fragments dropped later get -inf
    let mut lp = logprobs(g0);
    let mut grammar = g0.clone();
    let (mut counts, mut ce) = e_step(&mut trellises, &lp, g0.len())?;
    on_iter(0, ce, &grammar);
    if max_iter == 0 {
        return Ok(TrainState {
            grammar,
            iteration: 0,
            cross_entropy: ce,
            history: Vec::new(),
        });
    }
    let mut history = vec![ce];
    let mut iteration = 0;
    while iteration < max_iter {
        iteration += 1;
        grammar = reestimate(&with_fragments(g0, counts))?;
        for (i, e) in g0.entries().iter().enumerate() {
            lp[i] = grammar.get(e.fragment.key()).map_or(f64::NEG_INFINITY, |n| n.logprob);
        }
        let (next_counts, next_ce) = e_step(&mut trellises, &lp, g0.len())?;
        on_iter(iteration, next_ce, &grammar);
        history.push(next_ce);
        if next_ce > ce + SLACK_BITS {
            return Err(Error::LikelihoodDecrease {
                iteration,
                prev: ce,
                next: next_ce,
            });
        }
        let gain = ce - next_ce;
        counts = next_counts;
        ce = next_ce;
        if gain < tol {
            break;
        }
    }
    Ok(TrainState {
        grammar,
        iteration,
        cross_entropy: ce,
        history,
    })
}

fn e_step(trellises: &mut [Trellis], lp: &[f64], n: usize) -> Result<(Vec<f64>, f64)> {
    let mut counts = vec![0.0; n];
    let mut loglik = 0.0;
    for (index, t) in trellises.iter_mut().enumerate() {
        run_forward(t, lp);
        let z = t.goal_logprob();
        if z == f64::NEG_INFINITY {
            return Err(Error::Underivable { index });
        }
        loglik += z;
        run_backward(t, lp);
        accumulate(t, lp, &mut counts);
    }
    Ok((counts, -loglik / std::f64::consts::LN_2 / trellises.len() as f64))
}
