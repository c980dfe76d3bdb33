//! Lazy k-best extraction over the packed forest: each item keeps its
//! derivations found so far plus a frontier of candidates, and successors of
//! a derivation are generated only when the next rank is requested.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use super::chart::{Chart, ScoredDerivation, Tail};
use crate::stsg::Derivation;

#[derive(Clone, Debug)]
pub(crate) struct Hyp {
    pub score: f64,
    pub edge: u32,
    /// Rank used for each node tail of the edge, in tail order.
    pub ranks: Vec<u32>,
}

impl PartialEq for Hyp {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Hyp {}

impl PartialOrd for Hyp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Hyp {
    // max-heap order: higher score first, then smaller (edge, ranks)
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.edge.cmp(&self.edge))
            .then_with(|| other.ranks.cmp(&self.ranks))
    }
}

#[derive(Default)]
struct NodeState {
    found: Vec<Hyp>,
    cand: BinaryHeap<Hyp>,
    seen: HashSet<(u32, Vec<u32>)>,
}

pub(crate) struct KBest<'c, 'g> {
    chart: &'c Chart<'g>,
    states: Vec<Option<NodeState>>,
    /// Score contributed by reading each lattice arc.
    arc_score: Vec<f64>,
}

impl<'c, 'g> KBest<'c, 'g> {
    pub fn with_acoustics(chart: &'c Chart<'g>, acoustic_weight: f64) -> Self {
        let mut states = Vec::with_capacity(chart.nodes.len());
        states.resize_with(chart.nodes.len(), || None);
        let arc_score = chart
            .graph
            .arcs()
            .iter()
            .map(|a| match a.acoustic {
                Some(ac) if acoustic_weight != 0.0 => acoustic_weight * ac,
                _ => 0.0,
            })
            .collect();
        KBest {
            chart,
            states,
            arc_score,
        }
    }

    fn node_tails(&self, edge: u32) -> impl Iterator<Item = u32> + 'c {
        self.chart.edges[edge as usize].tails.iter().filter_map(|t| match t {
            Tail::Node(n) => Some(*n),
            Tail::Arc(_) => None,
        })
    }

    fn score(&mut self, edge: u32, ranks: &[u32]) -> Option<f64> {
        let e = &self.chart.edges[edge as usize];
        let mut s = e.weight;
        let mut ranks = ranks.iter();
        for &t in &e.tails {
            s += match t {
                Tail::Arc(a) => self.arc_score[a as usize],
                Tail::Node(n) => self.kth(n, *ranks.next()? as usize)?.score,
            };
        }
        Some(s)
    }

    fn init(&mut self, v: u32) -> NodeState {
        let mut st = NodeState::default();
        for &e in &self.chart.nodes[v as usize].incoming {
            let ranks = vec![0u32; self.node_tails(e).count()];
            if let Some(score) = self.score(e, &ranks) {
                st.seen.insert((e, ranks.clone()));
                st.cand.push(Hyp { score, edge: e, ranks });
            }
        }
        st
    }

    /// The `k`-th best (0-based) derivation of item `v`, if there are that many.
    pub fn kth(&mut self, v: u32, k: usize) -> Option<Hyp> {
        if let Some(st) = &self.states[v as usize] {
            if let Some(h) = st.found.get(k) {
                return Some(h.clone());
            }
        }
        // the forest is acyclic, so `v` is never re-entered while taken out
        let mut st = match self.states[v as usize].take() {
            Some(st) => st,
            None => self.init(v),
        };
        while st.found.len() <= k {
            if let Some(last) = st.found.last().cloned() {
                for i in 0..last.ranks.len() {
                    let mut ranks = last.ranks.clone();
                    ranks[i] += 1;
                    if st.seen.contains(&(last.edge, ranks.clone())) {
                        continue;
                    }
                    if let Some(score) = self.score(last.edge, &ranks) {
                        st.seen.insert((last.edge, ranks.clone()));
                        st.cand.push(Hyp {
                            score,
                            edge: last.edge,
                            ranks,
                        });
                    }
                }
            }
            match st.cand.pop() {
                Some(h) => st.found.push(h),
                None => break,
            }
        }
        let out = st.found.get(k).cloned();
        self.states[v as usize] = Some(st);
        out
    }

    /// Rebuilds the `rank`-th derivation of `v`, which must already exist.
    pub fn derivation(&mut self, v: u32, rank: usize) -> ScoredDerivation {
        let mut frags = Vec::new();
        let mut arcs = Vec::new();
        let logprob = self.walk(v, rank, &mut frags, &mut arcs);
        let entries = self.chart.grammar.entries();
        ScoredDerivation {
            derivation: Derivation::new(frags.into_iter().map(|f| entries[f as usize].fragment.clone()).collect()),
            logprob,
            score: self.kth(v, rank).expect("extracted").score,
            arcs,
        }
    }

    /// Collects fragments and arcs; returns the log-probability without
    /// acoustic contributions.
    fn walk(&mut self, v: u32, rank: usize, frags: &mut Vec<u32>, arcs: &mut Vec<usize>) -> f64 {
        let h = self.kth(v, rank).expect("rank already extracted");
        let edge = &self.chart.edges[h.edge as usize];
        if let Some(f) = edge.fragment {
            frags.push(f);
        }
        let mut logprob = edge.weight;
        let mut ranks = h.ranks.iter();
        for t in &edge.tails {
            match *t {
                Tail::Arc(a) => arcs.push(a as usize),
                Tail::Node(n) => {
                    let r = *ranks.next().expect("one rank per node tail");
                    logprob += self.walk(n, r as usize, frags, arcs);
                }
            }
        }
        logprob
    }
}
