//! Synthetic treebanks and word-graphs.
//!
//! A generator is a set of weighted elementary trees per category. A bare
//! category token on an elementary tree's frontier is expanded by sampling
//! one of that category's trees, so a generator with depth-1 trees is a PCFG
//! and one with deeper trees is an STSG with known probabilities.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::label::Label;
use super::tree::{parse_fragment_tree, tree_yield, Child, ParseTree};
use super::wordgraph::{WordArc, WordGraph};
use crate::error::{Error, Result};

/// Nested expansions allowed before sampling gives up.
pub const DEPTH_CAP: usize = 64;

/// A travel-information domain in the style of spoken-dialogue treebanks:
/// every node carries a semantic formula, pre-lexical nodes hold word
/// meanings, and several elementary trees tie together words that are not
/// heads of their constituents ("niet ... maar", "morgen ochtend").
pub const TRAVEL_GENERATOR: &str = "\
start S
S 0.8 (S@d1.d2 PER VP)
S 0.2 (S@d1.d2 (YN@no nee) (S@d1.d2 PER VP))
PER 0.85 (PER@user ik)
PER 0.15 (PER@user wij)
VP 0.35 (VP@wants.d2 (V@wants wil) MP)
VP 0.20 (VP@wants.d2 (V@wants wil) (MP@[#d2;!d4] (ADV@# niet) MP (CON@! maar) MP))
VP 0.15 (VP@wants.d2 (V@wants wil) (MP@d1;d2 MP MP))
VP 0.15 (VP@travels.d2 (V@travels reis) MP)
VP 0.15 (VP@must.d2 (V@must moet) (MP@d1;d3 MP (CON@and en) MP))
MP 0.35 (MP@destination.d2 (P@to naar) PLACE)
MP 0.20 (MP@origin.d2 (P@from van) PLACE)
MP 0.30 (MP@date.d1 DATE)
MP 0.15 (MP@time.d2 (P@at om) TIME)
PLACE 0.25 (PLACE@town.almere almere)
PLACE 0.25 (PLACE@town.amsterdam amsterdam)
PLACE 0.20 (PLACE@town.utrecht utrecht)
PLACE 0.15 (PLACE@town.leiden leiden)
PLACE 0.15 (PLACE@town.haarlem haarlem)
DATE 0.35 (DATE@today vandaag)
DATE 0.35 (DATE@tomorrow morgen)
DATE 0.15 (DATE@d1.d2 (DATE@tomorrow morgen) (TOD@morning ochtend))
DATE 0.15 (DATE@d1.d2 (DATE@today vandaag) (TOD@evening avond))
TIME 0.4 (TIME@hour.d1 (NUM@8 acht) (U@hour uur))
TIME 0.3 (TIME@hour.d1 (NUM@9 negen) (U@hour uur))
TIME 0.3 (TIME@hour.d1 (NUM@10 tien) (U@hour uur))
";

/// Head-percolation rules for [`TRAVEL_GENERATOR`] trees. Connectives and
/// negations in coordinated or contrasted phrases are non-heads.
pub const TRAVEL_HEAD_RULES: &str = "\
S right VP S
VP left V
MP left P DATE TIME MP
DATE left DATE
TIME left NUM
";

#[derive(Clone, Debug)]
pub struct ElementaryTree {
    pub tree: ParseTree,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct Generator {
    start: String,
    rules: BTreeMap<String, Vec<ElementaryTree>>,
}

impl Generator {
    /// Parse `start <CAT>` plus one `<CAT> <weight> <bracketed tree>` line per
    /// elementary tree. Weights of each category must sum to 1.
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let mut start = None;
        let mut raw = Vec::new();
        for (no, line) in &lines {
            let bad = |m: &str| Error::Generator(format!("line {no}: {m}"));
            let mut parts = line.splitn(3, char::is_whitespace);
            let head = parts.next().unwrap_or_default();
            if head == "start" {
                start = Some(parts.next().ok_or_else(|| bad("missing start category"))?.trim().to_string());
                continue;
            }
            let weight: f64 = parts
                .next()
                .and_then(|w| w.parse().ok())
                .ok_or_else(|| bad("missing or bad weight"))?;
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(bad("weights must be positive"));
            }
            let body = parts.next().ok_or_else(|| bad("missing tree"))?.trim();
            raw.push((*no, head.to_string(), weight, body));
        }
        let categories: BTreeSet<String> = raw.iter().map(|r| r.1.clone()).collect();
        let mut rules: BTreeMap<String, Vec<ElementaryTree>> = BTreeMap::new();
        for (no, cat, weight, body) in raw {
            let tree = parse_fragment_tree(body, |l| l.sem().is_none() && categories.contains(l.syn()))
                .map_err(|e| Error::Generator(format!("line {no}: {e}")))?;
            if tree.label.syn() != cat {
                return Err(Error::Generator(format!(
                    "line {no}: tree root `{}` does not match category `{cat}`",
                    tree.label
                )));
            }
            rules.entry(cat).or_default().push(ElementaryTree { tree, weight });
        }
        let start = start.ok_or_else(|| Error::Generator("missing `start` line".into()))?;
        if !rules.contains_key(&start) {
            return Err(Error::Generator(format!("no trees for start category `{start}`")));
        }
        for (cat, trees) in &rules {
            let total: f64 = trees.iter().map(|t| t.weight).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Generator(format!(
                    "weights for `{cat}` sum to {total}, not 1"
                )));
            }
        }
        Ok(Generator { start, rules })
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn rules(&self) -> &BTreeMap<String, Vec<ElementaryTree>> {
        &self.rules
    }

    /// Every word any elementary tree can emit, sorted.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut v = BTreeSet::new();
        for trees in self.rules.values() {
            for t in trees {
                for w in t.tree.words() {
                    v.insert(w.to_string());
                }
            }
        }
        v.into_iter().collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ParseTree> {
        let site = ParseTree::site(Label::category(self.start.clone())?);
        self.expand(&site, rng, 0)
    }

    fn choose<R: Rng + ?Sized>(&self, cat: &str, rng: &mut R) -> Result<&ParseTree> {
        let trees = self
            .rules
            .get(cat)
            .ok_or_else(|| Error::Generator(format!("no trees for category `{cat}`")))?;
        let mut x: f64 = rng.random();
        for t in trees {
            if x < t.weight {
                return Ok(&t.tree);
            }
            x -= t.weight;
        }
        Ok(&trees.last().expect("non-empty").tree)
    }

    fn expand<R: Rng + ?Sized>(&self, site: &ParseTree, rng: &mut R, depth: usize) -> Result<ParseTree> {
        if depth >= DEPTH_CAP {
            return Err(Error::Generator(format!(
                "derivation exceeded the depth cap of {DEPTH_CAP}"
            )));
        }
        let chosen = self.choose(site.label.syn(), rng)?.clone();
        self.fill(chosen, rng, depth)
    }

    fn fill<R: Rng + ?Sized>(&self, mut tree: ParseTree, rng: &mut R, depth: usize) -> Result<ParseTree> {
        for c in tree.children.iter_mut() {
            if let Child::Tree(t) = c {
                let done = if t.is_site() {
                    self.expand(t, rng, depth + 1)?
                } else {
                    self.fill(std::mem::replace(t, ParseTree::site(t.label.clone())), rng, depth)?
                };
                *t = done;
            }
        }
        Ok(tree)
    }
}

/// `n_trees` sampled trees; the same seed always gives the same corpus.
pub fn generate_synthetic_corpus(generator: &Generator, n_trees: usize, seed: u64) -> Result<Vec<ParseTree>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_trees).map(|_| generator.sample(&mut rng)).collect()
}

/// How reference utterances are turned into confusable word-graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionParams {
    /// Competing arcs added in parallel to each reference word.
    pub distractors: usize,
    /// Probability of an extra two-word detour spanning one reference word.
    pub detour_prob: f64,
    pub reference_mean: f64,
    pub distractor_mean: f64,
    pub sigma: f64,
}

impl Default for ConfusionParams {
    fn default() -> Self {
        ConfusionParams {
            distractors: 2,
            detour_prob: 0.1,
            reference_mean: -1.0,
            distractor_mean: -1.4,
            sigma: 0.6,
        }
    }
}

/// A word-graph whose reference path is `reference`, with sampled distractor
/// arcs and noisy acoustic log-scores (always ≤ 0).
pub fn confuse_reference<R: Rng + ?Sized>(
    reference: &[String],
    vocabulary: &[String],
    params: &ConfusionParams,
    rng: &mut R,
) -> Result<WordGraph> {
    if reference.is_empty() {
        return Err(Error::EmptyLattice);
    }
    let ref_noise = Normal::new(params.reference_mean, params.sigma)
        .map_err(|e| Error::Generator(e.to_string()))?;
    let dis_noise = Normal::new(params.distractor_mean, params.sigma)
        .map_err(|e| Error::Generator(e.to_string()))?;
    let mut arcs = Vec::new();
    let mut nodes = reference.len() + 1;
    for (i, w) in reference.iter().enumerate() {
        arcs.push(WordArc {
            from: i,
            to: i + 1,
            word: w.clone(),
            acoustic: Some(ref_noise.sample(rng).min(0.0)),
        });
        let others: Vec<&String> = vocabulary.iter().filter(|v| *v != w).collect();
        let picks: Vec<&&String> = others.choose_multiple(rng, params.distractors).collect();
        for d in picks {
            arcs.push(WordArc {
                from: i,
                to: i + 1,
                word: (*d).clone(),
                acoustic: Some(dis_noise.sample(rng).min(0.0)),
            });
        }
        if rng.random::<f64>() < params.detour_prob && others.len() >= 2 {
            let mid = nodes;
            nodes += 1;
            for (from, to) in [(i, mid), (mid, i + 1)] {
                let d = others.choose(rng).expect("non-empty");
                arcs.push(WordArc {
                    from,
                    to,
                    word: (*d).clone(),
                    acoustic: Some(dis_noise.sample(rng).min(0.0) / 2.0),
                });
            }
        }
    }
    WordGraph::new(nodes, 0, reference.len(), arcs)
}

/// Trees with aligned reference transcripts and word-graphs.
#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub trees: Vec<ParseTree>,
    pub references: Vec<Vec<String>>,
    pub lattices: Vec<WordGraph>,
}

pub fn build_synthetic_corpus(
    generator: &Generator,
    n_trees: usize,
    seed: u64,
    params: &ConfusionParams,
) -> Result<SyntheticCorpus> {
    let trees = generate_synthetic_corpus(generator, n_trees, seed)?;
    let vocabulary = generator.vocabulary();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a77);
    let references: Vec<Vec<String>> = trees.iter().map(tree_yield).collect();
    let lattices = references
        .iter()
        .map(|r| confuse_reference(r, &vocabulary, params, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticCorpus {
        trees,
        references,
        lattices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tree::compose_semantics;

    #[test]
    fn builtin_generator_is_valid() {
        let g = Generator::parse(TRAVEL_GENERATOR).unwrap();
        assert_eq!(g.start(), "S");
        let trees = generate_synthetic_corpus(&g, 200, 3).unwrap();
        for t in &trees {
            assert!(t.is_complete());
            assert_eq!(t.label.to_string(), "S@d1.d2");
            compose_semantics(t).unwrap();
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let g = Generator::parse(TRAVEL_GENERATOR).unwrap();
        let a = generate_synthetic_corpus(&g, 100, 7).unwrap();
        let b = generate_synthetic_corpus(&g, 100, 7).unwrap();
        assert_eq!(a, b);
        assert!(generate_synthetic_corpus(&g, 0, 7).unwrap().is_empty());
    }

    #[test]
    fn degenerate_generator() {
        let g = Generator::parse("start S\nS 1.0 (S (NP a) (VP b))\n").unwrap();
        let trees = generate_synthetic_corpus(&g, 100, 1).unwrap();
        assert_eq!(trees.len(), 100);
        assert!(trees.iter().all(|t| t.serialize() == "(S (NP a) (VP b))"));
    }

    #[test]
    fn rejects_unnormalized_and_runaway() {
        assert!(Generator::parse("start S\nS 0.5 (S a)\nS 0.4 (S b)\n").is_err());
        let g = Generator::parse("start S\nS 1.0 (S a S)\n").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(g.sample(&mut rng), Err(Error::Generator(_))));
    }

    #[test]
    fn confusion_lattice_contains_reference() {
        let g = Generator::parse(TRAVEL_GENERATOR).unwrap();
        let c = build_synthetic_corpus(&g, 20, 11, &ConfusionParams::default()).unwrap();
        for (r, l) in c.references.iter().zip(&c.lattices) {
            let paths = l.paths(1_000_000).unwrap();
            assert!(paths.iter().any(|p| &l.path_words(p) == r));
            assert!(l.arcs().iter().all(|a| a.acoustic.unwrap() <= 0.0));
        }
    }
}
