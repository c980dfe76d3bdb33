//! Chart parsing of strings and word-graphs with an STSG, exact n-best
//! derivation extraction and most-probable-string estimation.
//!
//! Fragments are matched through their frontier sequences, read right to
//! left through a shared trie: an item `(i, k, node)` records that the
//! frontier suffix spelled by `node` covers lattice span `i..k`. A fragment
//! completes when its whole frontier is covered, and its probability is
//! applied exactly once at that point.

mod chart;
mod decode;
mod kbest;

use std::collections::{BTreeMap, HashMap};

pub use chart::{Chart, ScoredDerivation};
pub use decode::{best_string, default_acoustic_weight, fallback_partial, DecodeResult};

use crate::corpus::{FrontierItem, Label, WordGraph};
use crate::stsg::Stsg;

/// Derivation-count sentinel meaning "return every derivation".
pub const ALL: usize = usize::MAX;

/// Default size of the n-best list used to estimate string probabilities.
pub const DEFAULT_NBEST: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Sym {
    Word(u32),
    Site(u32),
}

#[derive(Debug, Default)]
pub(crate) struct TrieNode {
    pub children: HashMap<Sym, u32>,
    /// Fragments whose entire frontier is the path to this node.
    pub complete: Vec<u32>,
}

/// A grammar compiled for chart parsing.
#[derive(Debug)]
pub struct Decoder<'g> {
    pub(crate) grammar: &'g Stsg,
    pub(crate) labels: Vec<Label>,
    pub(crate) words: HashMap<String, u32>,
    pub(crate) trie: Vec<TrieNode>,
    pub(crate) frag_root: Vec<u32>,
    pub(crate) frag_logp: Vec<f64>,
    /// Position of each label in an order where unary sites precede their roots.
    pub(crate) unary_rank: Vec<u32>,
    pub(crate) start_ok: Vec<bool>,
}

impl<'g> Decoder<'g> {
    pub fn new(grammar: &'g Stsg) -> Self {
        let labels: Vec<Label> = grammar.roots().keys().cloned().collect();
        let label_id: HashMap<&Label, u32> = labels.iter().enumerate().map(|(i, l)| (l, i as u32)).collect();
        let mut words: HashMap<String, u32> = HashMap::new();
        let mut trie = vec![TrieNode::default()];
        let mut frag_root = Vec::with_capacity(grammar.len());
        let mut frag_logp = Vec::with_capacity(grammar.len());
        for (fid, e) in grammar.entries().iter().enumerate() {
            frag_root.push(label_id[e.fragment.root()]);
            frag_logp.push(e.logprob);
            let mut node = 0u32;
            for item in e.fragment.frontier().iter().rev() {
                let sym = match item {
                    FrontierItem::Word(w) => {
                        let next = words.len() as u32;
                        Sym::Word(*words.entry(w.to_string()).or_insert(next))
                    }
                    FrontierItem::Site(l) => Sym::Site(label_id[l]),
                };
                node = match trie[node as usize].children.get(&sym) {
                    Some(&c) => c,
                    None => {
                        let c = trie.len() as u32;
                        trie.push(TrieNode::default());
                        trie[node as usize].children.insert(sym, c);
                        c
                    }
                };
            }
            trie[node as usize].complete.push(fid as u32);
        }

        // postorder over root -> unary-site edges puts sites before roots
        let edges = grammar.unary_edges();
        let mut rank = vec![u32::MAX; labels.len()];
        let mut next = 0u32;
        fn visit(
            l: &Label,
            edges: &BTreeMap<&Label, std::collections::BTreeSet<&Label>>,
            label_id: &HashMap<&Label, u32>,
            rank: &mut Vec<u32>,
            next: &mut u32,
        ) {
            let id = label_id[l] as usize;
            if rank[id] != u32::MAX {
                return;
            }
            rank[id] = u32::MAX - 1;
            if let Some(sites) = edges.get(l) {
                for s in sites {
                    visit(s, edges, label_id, rank, next);
                }
            }
            rank[id] = *next;
            *next += 1;
        }
        for l in &labels {
            visit(l, &edges, &label_id, &mut rank, &mut next);
        }
        let start_ok = labels.iter().map(|l| grammar.accepts_root(l)).collect();
        Decoder {
            grammar,
            labels,
            words,
            trie,
            frag_root,
            frag_logp,
            unary_rank: rank,
            start_ok,
        }
    }

    pub fn grammar(&self) -> &'g Stsg {
        self.grammar
    }

    pub fn knows_word(&self, w: &str) -> bool {
        self.words.contains_key(w)
    }

    pub fn parse_lattice(&self, graph: &WordGraph) -> Chart<'g> {
        Chart::build(self, graph)
    }

    pub fn parse_string<S: AsRef<str>>(&self, words: &[S]) -> Chart<'g> {
        let graph = WordGraph::from_words(words).expect("non-empty word sequence");
        self.parse_lattice(&graph)
    }
}

/// Chart over positions `0..len` of a word sequence.
pub fn parse_string<'g, S: AsRef<str>>(words: &[S], g: &'g Stsg) -> Chart<'g> {
    Decoder::new(g).parse_string(words)
}

/// Chart over lattice-node spans; arcs act as terminals.
pub fn parse_lattice<'g>(graph: &WordGraph, g: &'g Stsg) -> Chart<'g> {
    Decoder::new(g).parse_lattice(graph)
}

/// The `n` most probable goal derivations, best first.
pub fn nbest_derivations(chart: &Chart<'_>, n: usize) -> crate::error::Result<Vec<ScoredDerivation>> {
    chart.nbest(n)
}
