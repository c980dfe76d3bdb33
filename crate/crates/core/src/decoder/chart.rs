use std::collections::{BTreeMap, HashMap};

use super::kbest::KBest;
use super::{Decoder, Sym};
use crate::corpus::{Label, WordGraph};
use crate::error::{Error, Result};
use crate::logspace::log_sum_exp;
use crate::stsg::{Derivation, Stsg};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Tail {
    Arc(u32),
    Node(u32),
}

#[derive(Clone, Debug)]
pub(crate) struct HEdge {
    pub tails: Vec<Tail>,
    pub weight: f64,
    pub fragment: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum NodeKind {
    Complete(u32),
    Suffix(u32),
    Goal,
}

#[derive(Clone, Debug)]
pub(crate) struct HNode {
    pub kind: NodeKind,
    pub incoming: Vec<u32>,
}

/// A derivation of the goal (or of any chart item) with its log-probability
/// and the lattice arcs it reads, left to right.
#[derive(Clone, Debug)]
pub struct ScoredDerivation {
    pub derivation: Derivation,
    pub logprob: f64,
    /// `logprob` plus the weighted acoustic score of `arcs`; the ranking key.
    pub score: f64,
    pub arcs: Vec<usize>,
}

/// Packed forest of all derivations over a word-graph. Nodes are created
/// after all of their tails, so creation order is a topological order.
#[derive(Debug)]
pub struct Chart<'g> {
    pub(crate) grammar: &'g Stsg,
    pub(crate) graph: WordGraph,
    pub(crate) labels: Vec<Label>,
    pub(crate) nodes: Vec<HNode>,
    pub(crate) edges: Vec<HEdge>,
    /// Complete items per span.
    pub(crate) complete: BTreeMap<(usize, usize), Vec<u32>>,
    pub(crate) goal: Option<u32>,
}

#[derive(Default)]
struct Cell {
    complete: Vec<(u32, u32)>,
    suffix: Vec<(u32, u32)>,
}

impl<'g> Chart<'g> {
    pub(crate) fn build(dec: &Decoder<'g>, graph: &WordGraph) -> Chart<'g> {
        let n = graph.node_count();
        let useful = graph.useful_arcs();
        let mut arcs_between: HashMap<(usize, usize), Vec<(u32, Option<u32>)>> = HashMap::new();
        for &a in &useful {
            let arc = &graph.arcs()[a];
            arcs_between
                .entry((arc.from, arc.to))
                .or_default()
                .push((a as u32, dec.words.get(&arc.word).copied()));
        }
        let topo: Vec<usize> = {
            let fwd = graph.reachable_from_start();
            let bwd = graph.reaches_end();
            graph.topological().iter().copied().filter(|&v| fwd[v] && bwd[v]).collect()
        };
        // reach[i][k]: a non-empty path i -> k exists
        let mut reach = vec![vec![false; n]; n];
        for &i in topo.iter().rev() {
            for &a in &useful {
                let arc = &graph.arcs()[a];
                if arc.from == i {
                    reach[i][arc.to] = true;
                    for k in 0..n {
                        if reach[arc.to][k] {
                            reach[i][k] = true;
                        }
                    }
                }
            }
        }

        let mut chart = Chart {
            grammar: dec.grammar,
            graph: graph.clone(),
            labels: dec.labels.clone(),
            nodes: Vec::new(),
            edges: Vec::new(),
            complete: BTreeMap::new(),
            goal: None,
        };
        let mut cells: HashMap<(usize, usize), Cell> = HashMap::new();

        for (pi, &i) in topo.iter().enumerate().rev() {
            for &k in &topo[pi + 1..] {
                if !reach[i][k] {
                    continue;
                }
                let mut suffix_edges: BTreeMap<u32, Vec<HEdge>> = BTreeMap::new();
                // a single symbol covering the whole span starts a suffix
                if let Some(arcs) = arcs_between.get(&(i, k)) {
                    for &(a, w) in arcs {
                        if let Some(c) = w.and_then(|w| dec.trie[0].children.get(&Sym::Word(w))) {
                            suffix_edges.entry(*c).or_default().push(HEdge {
                                tails: vec![Tail::Arc(a)],
                                weight: 0.0,
                                fragment: None,
                            });
                        }
                    }
                }
                // a symbol over i..j extends a suffix item over j..k
                for &j in &topo[pi + 1..] {
                    if j == k || !reach[i][j] || !reach[j][k] {
                        continue;
                    }
                    let Some(rest) = cells.get(&(j, k)) else { continue };
                    if rest.suffix.is_empty() {
                        continue;
                    }
                    let mut symbols: Vec<(Sym, Tail)> = Vec::new();
                    if let Some(arcs) = arcs_between.get(&(i, j)) {
                        for &(a, w) in arcs {
                            if let Some(w) = w {
                                symbols.push((Sym::Word(w), Tail::Arc(a)));
                            }
                        }
                    }
                    if let Some(left) = cells.get(&(i, j)) {
                        for &(l, node) in &left.complete {
                            symbols.push((Sym::Site(l), Tail::Node(node)));
                        }
                    }
                    for &(tn, rnode) in &rest.suffix {
                        let children = &dec.trie[tn as usize].children;
                        if children.is_empty() {
                            continue;
                        }
                        for &(sym, tail) in &symbols {
                            if let Some(&c) = children.get(&sym) {
                                suffix_edges.entry(c).or_default().push(HEdge {
                                    tails: vec![tail, Tail::Node(rnode)],
                                    weight: 0.0,
                                    fragment: None,
                                });
                            }
                        }
                    }
                }

                let mut cell = Cell::default();
                // (rank, label) -> completing edges
                let mut pending: BTreeMap<(u32, u32), Vec<HEdge>> = BTreeMap::new();
                for (tn, edges) in suffix_edges {
                    let id = chart.add_node(NodeKind::Suffix(tn), edges);
                    cell.suffix.push((tn, id));
                    chart.queue_completions(dec, tn, id, &mut pending);
                }
                while let Some(((_, label), edges)) = pending.pop_first() {
                    let id = chart.add_node(NodeKind::Complete(label), edges);
                    cell.complete.push((label, id));
                    if let Some(&c) = dec.trie[0].children.get(&Sym::Site(label)) {
                        let sid = chart.add_node(
                            NodeKind::Suffix(c),
                            vec![HEdge {
                                tails: vec![Tail::Node(id)],
                                weight: 0.0,
                                fragment: None,
                            }],
                        );
                        cell.suffix.push((c, sid));
                        chart.queue_completions(dec, c, sid, &mut pending);
                    }
                }
                if !cell.complete.is_empty() {
                    chart
                        .complete
                        .insert((i, k), cell.complete.iter().map(|c| c.1).collect());
                }
                if !cell.complete.is_empty() || !cell.suffix.is_empty() {
                    cells.insert((i, k), cell);
                }
            }
        }

        let (s, e) = (graph.start(), graph.end());
        if let Some(cell) = cells.get(&(s, e)) {
            let goal_edges: Vec<HEdge> = cell
                .complete
                .iter()
                .filter(|(l, _)| dec.start_ok[*l as usize])
                .map(|&(_, id)| HEdge {
                    tails: vec![Tail::Node(id)],
                    weight: 0.0,
                    fragment: None,
                })
                .collect();
            if !goal_edges.is_empty() {
                chart.goal = Some(chart.add_node(NodeKind::Goal, goal_edges));
            }
        }
        chart
    }

    fn queue_completions(
        &self,
        dec: &Decoder<'_>,
        trie_node: u32,
        suffix_id: u32,
        pending: &mut BTreeMap<(u32, u32), Vec<HEdge>>,
    ) {
        for &f in &dec.trie[trie_node as usize].complete {
            let root = dec.frag_root[f as usize];
            pending
                .entry((dec.unary_rank[root as usize], root))
                .or_default()
                .push(HEdge {
                    tails: vec![Tail::Node(suffix_id)],
                    weight: dec.frag_logp[f as usize],
                    fragment: Some(f),
                });
        }
    }

    fn add_node(&mut self, kind: NodeKind, edges: Vec<HEdge>) -> u32 {
        let id = self.nodes.len() as u32;
        let mut incoming = Vec::with_capacity(edges.len());
        for e in edges {
            incoming.push(self.edges.len() as u32);
            self.edges.push(e);
        }
        self.nodes.push(HNode { kind, incoming });
        id
    }

    pub fn graph(&self) -> &WordGraph {
        &self.graph
    }

    pub fn grammar(&self) -> &'g Stsg {
        self.grammar
    }

    /// Whether some full start-to-end path is derivable from the start label.
    pub fn has_goal(&self) -> bool {
        self.goal.is_some()
    }

    /// Labels of the complete items over span `from..to`.
    pub fn complete_labels(&self, from: usize, to: usize) -> Vec<&Label> {
        self.complete.get(&(from, to)).map_or_else(Vec::new, |ids| {
            ids.iter()
                .map(|&id| match self.nodes[id as usize].kind {
                    NodeKind::Complete(l) => &self.labels[l as usize],
                    _ => unreachable!(),
                })
                .collect()
        })
    }

    pub fn item_count(&self) -> usize {
        self.nodes.len()
    }

    fn tail_value(values: &[f64], t: Tail, leaf: f64) -> f64 {
        match t {
            Tail::Arc(_) => leaf,
            Tail::Node(n) => values[n as usize],
        }
    }

    /// Log inside value of every item.
    pub(crate) fn inside(&self) -> Vec<f64> {
        let mut inside = vec![f64::NEG_INFINITY; self.nodes.len()];
        for (v, node) in self.nodes.iter().enumerate() {
            inside[v] = log_sum_exp(node.incoming.iter().map(|&e| {
                let edge = &self.edges[e as usize];
                edge.weight + edge.tails.iter().map(|&t| Self::tail_value(&inside, t, 0.0)).sum::<f64>()
            }));
        }
        inside
    }

    /// Log of the summed probability of every goal derivation; `-inf` when
    /// there is none.
    pub fn goal_logprob(&self) -> f64 {
        match self.goal {
            Some(g) => self.inside()[g as usize],
            None => f64::NEG_INFINITY,
        }
    }

    /// Number of distinct goal derivations.
    pub fn derivation_count(&self) -> f64 {
        let Some(goal) = self.goal else { return 0.0 };
        let mut count = vec![0.0f64; self.nodes.len()];
        for (v, node) in self.nodes.iter().enumerate() {
            count[v] = node
                .incoming
                .iter()
                .map(|&e| {
                    self.edges[e as usize]
                        .tails
                        .iter()
                        .map(|&t| Self::tail_value(&count, t, 1.0))
                        .product::<f64>()
                })
                .sum();
        }
        count[goal as usize]
    }

    /// The `n` best goal derivations, best first; exact ties are ordered by
    /// the canonical derivation string.
    pub fn nbest(&self, n: usize) -> Result<Vec<ScoredDerivation>> {
        self.nbest_weighted(n, 0.0)
    }

    /// The `n` best goal derivations ranked by log-probability plus
    /// `acoustic_weight` times the acoustic score of the arcs they read.
    pub fn nbest_weighted(&self, n: usize, acoustic_weight: f64) -> Result<Vec<ScoredDerivation>> {
        let goal = self.goal.ok_or(Error::NoGoal)?;
        let mut kb = KBest::with_acoustics(self, acoustic_weight);
        Ok(kb.nbest_of(goal, n))
    }
}

impl<'g> KBest<'_, 'g> {
    /// Best-first derivations of `node`, at least `n` of them when that many
    /// exist, extended over any exact tie at the cut-off and then truncated
    /// after ordering ties canonically.
    pub(crate) fn nbest_of(&mut self, node: u32, n: usize) -> Vec<ScoredDerivation> {
        if n == 0 {
            return Vec::new();
        }
        let mut k = 0;
        while k < n && self.kth(node, k).is_some() {
            k += 1;
        }
        if k == n {
            let cutoff = self.kth(node, n - 1).expect("present").score;
            while let Some(h) = self.kth(node, k) {
                if h.score < cutoff {
                    break;
                }
                k += 1;
            }
        }
        let mut out: Vec<ScoredDerivation> = (0..k).map(|r| self.derivation(node, r)).collect();
        out.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.derivation.canonical().cmp(&b.derivation.canonical()))
        });
        out.truncate(n);
        out
    }
}
