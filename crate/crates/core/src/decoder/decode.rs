use std::collections::{BTreeMap, BinaryHeap, HashSet};

use super::chart::Chart;
use super::kbest::KBest;
use super::Decoder;
use crate::corpus::WordGraph;
use crate::error::{Error, Result};
use crate::logspace::log_sum_exp;
use crate::stsg::Stsg;

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    pub best_string: Vec<String>,
    /// Log of the summed probability of the n-best derivations yielding
    /// `best_string`, or of the chosen item sequence after a fallback.
    pub string_logprob: f64,
    /// `string_logprob` plus the weighted acoustic score.
    pub score: f64,
    /// Derivations (or chart items, after a fallback) behind `best_string`.
    pub derivations_used: usize,
    pub fallback_used: bool,
}

/// Acoustic weight used when none is given: 1 if the lattice carries
/// acoustic scores, 0 otherwise.
pub fn default_acoustic_weight(graph: &WordGraph) -> f64 {
    if graph.has_acoustics() {
        1.0
    } else {
        0.0
    }
}

impl Decoder<'_> {
    /// Most probable string of `graph` estimated from the `n` best full-path
    /// derivations, ranked by log-probability plus the weighted acoustic
    /// score of their path. Falls back to partial-path combinations when no
    /// full path is derivable.
    pub fn best_string(&self, graph: &WordGraph, n: usize, acoustic_weight: f64) -> Result<DecodeResult> {
        if graph.arcs().is_empty() {
            return Err(Error::EmptyLattice);
        }
        let chart = self.parse_lattice(graph);
        if !chart.has_goal() {
            return fallback_on_chart(&chart, self, n, acoustic_weight);
        }
        let nbest = chart.nbest_weighted(n.max(1), acoustic_weight)?;
        // the same derivation read along parallel arcs with equal words is
        // one derivation of the string; it is counted once
        let mut groups: BTreeMap<Vec<String>, (BTreeMap<String, f64>, f64)> = BTreeMap::new();
        for d in &nbest {
            let words = graph.path_words(&d.arcs);
            let acoustic = graph.path_acoustic(&d.arcs);
            let g = groups.entry(words).or_insert((BTreeMap::new(), f64::NEG_INFINITY));
            g.0.insert(d.derivation.canonical(), d.logprob);
            g.1 = g.1.max(acoustic);
        }
        let mut best: Option<DecodeResult> = None;
        // BTreeMap order makes the lexicographically smallest string win ties
        for (words, (logps, acoustic)) in groups {
            let lp = log_sum_exp(logps.values().copied());
            let score = if acoustic_weight == 0.0 { lp } else { lp + acoustic_weight * acoustic };
            if best.as_ref().is_none_or(|b| score > b.score) {
                best = Some(DecodeResult {
                    best_string: words,
                    string_logprob: lp,
                    score,
                    derivations_used: logps.len(),
                    fallback_used: false,
                });
            }
        }
        Ok(best.expect("goal has at least one derivation"))
    }

    pub fn fallback_partial(&self, graph: &WordGraph, n: usize) -> Result<DecodeResult> {
        if graph.arcs().is_empty() {
            return Err(Error::EmptyLattice);
        }
        fallback_on_chart(&self.parse_lattice(graph), self, n, 0.0)
    }
}

pub fn best_string(graph: &WordGraph, g: &Stsg, n: usize, acoustic_weight: f64) -> Result<DecodeResult> {
    Decoder::new(g).best_string(graph, n, acoustic_weight)
}

/// Covers the lattice with a sequence of complete chart items. The `n`
/// highest-scoring sequences are kept per lattice node; at the end node the
/// sequence with the fewest items wins, then the higher score.
pub fn fallback_partial(graph: &WordGraph, g: &Stsg, n: usize) -> Result<DecodeResult> {
    Decoder::new(g).fallback_partial(graph, n)
}

#[derive(Clone, Copy, Debug)]
struct Seq {
    score: f64,
    items: u32,
    /// (previous node, index into its list, chart item, rank of its derivation)
    back: Option<(usize, u32, u32, u32)>,
}

fn fallback_on_chart(chart: &Chart<'_>, dec: &Decoder<'_>, n: usize, acoustic_weight: f64) -> Result<DecodeResult> {
    let graph = chart.graph();
    let n = n.max(1);
    let mut kb = KBest::with_acoustics(chart, acoustic_weight);
    // complete items grouped by the node they end at
    let mut ending: BTreeMap<usize, Vec<(usize, u32)>> = BTreeMap::new();
    for (&(i, k), ids) in &chart.complete {
        for &id in ids {
            ending.entry(k).or_default().push((i, id));
        }
    }
    let mut lists: Vec<Vec<Seq>> = vec![Vec::new(); graph.node_count()];
    lists[graph.start()].push(Seq {
        score: 0.0,
        items: 0,
        back: None,
    });
    for &v in graph.topological() {
        let Some(items) = ending.get(&v) else { continue };
        let mut merged: Vec<Seq> = Vec::new();
        for &(u, item) in items {
            if lists[u].is_empty() {
                continue;
            }
            let item_scores: Vec<f64> = (0..n).map_while(|r| kb.kth(item, r).map(|h| h.score)).collect();
            for (a, r, score) in top_sums(&lists[u], &item_scores, n) {
                merged.push(Seq {
                    score,
                    items: lists[u][a].items + 1,
                    back: Some((u, a as u32, item, r as u32)),
                });
            }
        }
        merged.sort_by(|x, y| y.score.total_cmp(&x.score));
        merged.truncate(n);
        lists[v] = merged;
    }

    let end = &lists[graph.end()];
    if end.is_empty() {
        return Err(uncoverable(chart, dec));
    }
    let mut best: Option<(Seq, Vec<String>, f64)> = None;
    for s in end {
        let (words, logprob) = fallback_words(&mut kb, &lists, *s, graph);
        let better = match &best {
            None => true,
            Some((b, bw, _)) => s
                .items
                .cmp(&b.items)
                .then_with(|| b.score.total_cmp(&s.score))
                .then_with(|| words.cmp(bw))
                .is_lt(),
        };
        if better {
            best = Some((*s, words, logprob));
        }
    }
    let (s, words, logprob) = best.expect("non-empty");
    Ok(DecodeResult {
        best_string: words,
        string_logprob: logprob,
        score: s.score,
        derivations_used: s.items as usize,
        fallback_used: true,
    })
}

/// Yield and log-probability (without acoustics) of an item sequence.
fn fallback_words(kb: &mut KBest<'_, '_>, lists: &[Vec<Seq>], mut s: Seq, graph: &WordGraph) -> (Vec<String>, f64) {
    let mut pieces: Vec<Vec<usize>> = Vec::new();
    let mut logprob = 0.0;
    while let Some((u, idx, item, rank)) = s.back {
        let d = kb.derivation(item, rank as usize);
        logprob += d.logprob;
        pieces.push(d.arcs);
        s = lists[u][idx as usize];
    }
    let arcs: Vec<usize> = pieces.into_iter().rev().flatten().collect();
    (graph.path_words(&arcs), logprob)
}

/// The `n` largest sums `a[i].score + b[j]` of two descending lists, as
/// (i, j, sum), best first.
fn top_sums(a: &[Seq], b: &[f64], n: usize) -> Vec<(usize, usize, f64)> {
    #[derive(PartialEq)]
    struct C(f64, usize, usize);
    impl Eq for C {}
    impl PartialOrd for C {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for C {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&o.0).then_with(|| (o.1, o.2).cmp(&(self.1, self.2)))
        }
    }
    let mut out = Vec::new();
    if a.is_empty() || b.is_empty() {
        return out;
    }
    let mut heap = BinaryHeap::new();
    let mut seen = HashSet::new();
    heap.push(C(a[0].score + b[0], 0, 0));
    seen.insert((0, 0));
    while let Some(C(s, i, j)) = heap.pop() {
        out.push((i, j, s));
        if out.len() == n {
            break;
        }
        if i + 1 < a.len() && seen.insert((i + 1, j)) {
            heap.push(C(a[i + 1].score + b[j], i + 1, j));
        }
        if j + 1 < b.len() && seen.insert((i, j + 1)) {
            heap.push(C(a[i].score + b[j + 1], i, j + 1));
        }
    }
    out
}

fn uncoverable(chart: &Chart<'_>, dec: &Decoder<'_>) -> Error {
    let graph = chart.graph();
    let pos: Vec<usize> = {
        let mut p = vec![0; graph.node_count()];
        for (i, &v) in graph.topological().iter().enumerate() {
            p[v] = i;
        }
        p
    };
    let mut useful = graph.useful_arcs();
    useful.sort_by_key(|&a| (pos[graph.arcs()[a].from], a));
    let starts: HashSet<usize> = chart.complete.keys().map(|&(i, _)| i).collect();
    let culprit = useful
        .iter()
        .copied()
        .find(|&a| !dec.knows_word(&graph.arcs()[a].word))
        .or_else(|| useful.iter().copied().find(|&a| !starts.contains(&graph.arcs()[a].from)))
        .or_else(|| useful.first().copied())
        .expect("a valid word-graph has an arc on every start-end path");
    let arc = &graph.arcs()[culprit];
    Error::Uncoverable {
        from: arc.from,
        to: arc.to,
        word: arc.word.clone(),
    }
}
