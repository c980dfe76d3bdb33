//! Stochastic tree-substitution grammars: leftmost node substitution,
//! derivation, tree and string probabilities.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fmt::Write;
use std::sync::Arc;

use crate::corpus::{Child, FrontierItem, Label, ParseTree};
use crate::decoder::Decoder;
use crate::error::{Error, Result};
use crate::fragments::index::{node_shapes, IndexedTree};
use crate::fragments::Fragment;
use crate::logspace::log_sum_exp;

/// Tolerance on per-root probability mass accepted when building a grammar.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct GrammarEntry {
    pub fragment: Arc<Fragment>,
    pub prob: f64,
    pub logprob: f64,
}

/// Fragments with root-conditioned probabilities.
///
/// The start label with no semantic formula accepts any root of the same
/// category, so grammars over semantically annotated trees whose roots carry
/// different formulas still have a single start symbol.
#[derive(Clone, Debug)]
pub struct Stsg {
    entries: Vec<GrammarEntry>,
    index: HashMap<String, usize>,
    roots: BTreeMap<Label, Vec<usize>>,
    start: Label,
    max_depth: usize,
}

/// Whether a fragment or tree rooted at `root` may begin a derivation from `start`.
pub fn start_accepts(start: &Label, root: &Label) -> bool {
    match start.sem() {
        Some(_) => start == root,
        None => start.syn() == root.syn(),
    }
}

impl Stsg {
    /// Build and validate a grammar. Probabilities must lie in (0, 1] and sum
    /// to one per root label; every substitution-site label needs fragments;
    /// wordless unary cycles are refused.
    pub fn from_probabilities(start: Label, fragments: Vec<(Arc<Fragment>, f64)>) -> Result<Self> {
        let mut entries = Vec::with_capacity(fragments.len());
        let mut index = HashMap::with_capacity(fragments.len());
        let mut roots: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
        let mut max_depth = 0;
        for (fragment, prob) in fragments {
            if !(prob > 0.0 && prob <= 1.0 + MASS_TOLERANCE) {
                return Err(Error::Grammar(format!(
                    "probability {prob} of `{}` outside (0, 1]",
                    fragment.key()
                )));
            }
            if fragment.is_unary_self_loop() {
                return Err(Error::Grammar(format!(
                    "unary self-loop fragment `{}`",
                    fragment.key()
                )));
            }
            let id = entries.len();
            if index.insert(fragment.key().to_string(), id).is_some() {
                return Err(Error::Grammar(format!("duplicate fragment `{}`", fragment.key())));
            }
            roots.entry(fragment.root().clone()).or_default().push(id);
            max_depth = max_depth.max(fragment.depth());
            entries.push(GrammarEntry {
                fragment,
                prob,
                logprob: prob.ln(),
            });
        }
        let g = Stsg {
            entries,
            index,
            roots,
            start,
            max_depth,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Grammar("no fragments".into()));
        }
        for (root, ids) in &self.roots {
            let mass: f64 = ids.iter().map(|&i| self.entries[i].prob).sum();
            if (mass - 1.0).abs() > MASS_TOLERANCE {
                return Err(Error::Grammar(format!(
                    "probabilities for root `{root}` sum to {mass}"
                )));
            }
        }
        for e in &self.entries {
            for s in e.fragment.sites() {
                if !self.roots.contains_key(s) {
                    return Err(Error::Grammar(format!(
                        "site `{s}` in `{}` has no fragments",
                        e.fragment.key()
                    )));
                }
            }
        }
        if !self.roots.keys().any(|r| start_accepts(&self.start, r)) {
            return Err(Error::Grammar(format!(
                "no fragment is rooted at start label `{}`",
                self.start
            )));
        }
        if let Some(l) = self.unary_cycle() {
            return Err(Error::Grammar(format!("wordless unary cycle through `{l}`")));
        }
        Ok(())
    }

    /// Edges root → site of fragments whose whole frontier is one site.
    pub(crate) fn unary_edges(&self) -> BTreeMap<&Label, BTreeSet<&Label>> {
        let mut edges: BTreeMap<&Label, BTreeSet<&Label>> = BTreeMap::new();
        for e in &self.entries {
            if let [FrontierItem::Site(l)] = e.fragment.frontier().as_slice() {
                edges.entry(e.fragment.root()).or_default().insert(l);
            }
        }
        edges
    }

    fn unary_cycle(&self) -> Option<Label> {
        let edges = self.unary_edges();
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state: HashMap<&Label, u8> = HashMap::new();
        fn visit<'a>(
            l: &'a Label,
            edges: &BTreeMap<&'a Label, BTreeSet<&'a Label>>,
            state: &mut HashMap<&'a Label, u8>,
        ) -> Option<Label> {
            match state.get(l) {
                Some(1) => return Some(l.clone()),
                Some(_) => return None,
                None => {}
            }
            state.insert(l, 1);
            if let Some(next) = edges.get(l) {
                for n in next {
                    if let Some(c) = visit(n, edges, state) {
                        return Some(c);
                    }
                }
            }
            state.insert(l, 2);
            None
        }
        for l in edges.keys() {
            if let Some(c) = visit(l, &edges, &mut state) {
                return Some(c);
            }
        }
        None
    }

    pub fn start(&self) -> &Label {
        &self.start
    }

    pub fn accepts_root(&self, label: &Label) -> bool {
        start_accepts(&self.start, label)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[GrammarEntry] {
        &self.entries
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn get(&self, key: &str) -> Option<&GrammarEntry> {
        self.index_of(key).map(|i| &self.entries[i])
    }

    /// Probability of a fragment, 0 if absent.
    pub fn prob(&self, key: &str) -> f64 {
        self.get(key).map_or(0.0, |e| e.prob)
    }

    pub fn roots(&self) -> &BTreeMap<Label, Vec<usize>> {
        &self.roots
    }

    pub fn rooted(&self, label: &Label) -> &[usize] {
        self.roots.get(label).map_or(&[], Vec::as_slice)
    }

    /// Depth of the deepest fragment.
    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn root_mass(&self, label: &Label) -> f64 {
        self.rooted(label).iter().map(|&i| self.entries[i].prob).sum()
    }

    /// Grammar file: a `start<TAB>label` header, then `key<TAB>probability`
    /// lines in key order with 17 significant digits.
    pub fn to_tsv(&self) -> String {
        let mut s = format!("start\t{}\n", self.start);
        let mut order: Vec<&GrammarEntry> = self.entries.iter().collect();
        order.sort_by(|a, b| a.fragment.key().cmp(b.fragment.key()));
        for e in order {
            let _ = writeln!(s, "{}\t{:.16e}", e.fragment.key(), e.prob);
        }
        s
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let bad = |line: usize, msg: &str| Error::Grammar(format!("line {}: {msg}", line + 1));
        let (_, header) = lines.next().ok_or_else(|| bad(0, "empty grammar file"))?;
        let start: Label = match header.split_once('\t') {
            Some(("start", l)) => l.trim().parse()?,
            _ => return Err(bad(0, "expected `start<TAB>label` header")),
        };
        let mut rows = Vec::new();
        let mut root_tokens = BTreeSet::new();
        for (i, line) in lines {
            let (key, p) = line.rsplit_once('\t').ok_or_else(|| bad(i, "expected key<TAB>prob"))?;
            let p: f64 = p.trim().parse().map_err(|_| bad(i, "bad probability"))?;
            let root = key
                .strip_prefix('(')
                .and_then(|k| k.split_whitespace().next())
                .ok_or_else(|| bad(i, "fragment must start with `(`"))?;
            root_tokens.insert(root.parse::<Label>()?);
            rows.push((i, key, p));
        }
        let fragments = rows
            .into_iter()
            .map(|(i, key, p)| {
                let f = Fragment::parse(key, |l| root_tokens.contains(l))
                    .map_err(|e| bad(i, &e.to_string()))?;
                if f.key() != key {
                    return Err(bad(i, "fragment key is not in canonical form"));
                }
                Ok((Arc::new(f), p))
            })
            .collect::<Result<Vec<_>>>()?;
        Stsg::from_probabilities(start, fragments)
    }
}

/// An ordered sequence of fragments combined by leftmost substitution.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Derivation {
    pub steps: Vec<Arc<Fragment>>,
}

impl Derivation {
    pub fn new(steps: Vec<Arc<Fragment>>) -> Self {
        Derivation { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Deterministic text form used for tie-breaking.
    pub fn canonical(&self) -> String {
        self.steps.iter().map(|f| f.key()).collect::<Vec<_>>().join(" + ")
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

fn leftmost_site(tree: &mut ParseTree) -> Option<&mut ParseTree> {
    if tree.is_site() {
        return Some(tree);
    }
    for c in tree.children.iter_mut() {
        if let Child::Tree(t) = c {
            if let Some(s) = leftmost_site(t) {
                return Some(s);
            }
        }
    }
    None
}

/// Replace the leftmost substitution site of `partial` by `fragment`.
pub fn substitute(partial: &ParseTree, fragment: &Fragment) -> Result<ParseTree> {
    let mut out = partial.clone();
    let site = leftmost_site(&mut out)
        .ok_or_else(|| Error::Substitution("tree has no open substitution site".into()))?;
    if &site.label != fragment.root() {
        return Err(Error::Substitution(format!(
            "leftmost site is `{}` but fragment root is `{}`",
            site.label,
            fragment.root()
        )));
    }
    *site = fragment.tree().clone();
    Ok(out)
}

/// Left fold of [`substitute`] over `steps`; the result must be complete.
pub fn derive<F: AsRef<Fragment>>(steps: &[F], start: &Label) -> Result<ParseTree> {
    let first = steps
        .first()
        .ok_or_else(|| Error::Substitution("empty derivation".into()))?
        .as_ref();
    if !start_accepts(start, first.root()) {
        return Err(Error::Substitution(format!(
            "first fragment root `{}` does not match start `{start}`",
            first.root()
        )));
    }
    let mut tree = first.tree().clone();
    for f in &steps[1..] {
        tree = substitute(&tree, f.as_ref())?;
    }
    if !tree.is_complete() {
        return Err(Error::Substitution("derivation leaves open substitution sites".into()));
    }
    Ok(tree)
}

pub fn derivation_logprob(d: &Derivation, g: &Stsg) -> Result<f64> {
    d.steps
        .iter()
        .map(|f| {
            g.get(f.key())
                .map(|e| e.logprob)
                .ok_or_else(|| Error::UnknownFragment(f.key().to_string()))
        })
        .sum()
}

/// Product of the step probabilities.
pub fn derivation_prob(d: &Derivation, g: &Stsg) -> Result<f64> {
    derivation_logprob(d, g).map(f64::exp)
}

/// All leftmost derivations of `tree` under `g`, by brute force over every
/// subset of non-root nodes chosen as substitution points. Exponential; for
/// small trees only.
pub fn enumerate_derivations(tree: &ParseTree, g: &Stsg) -> Vec<Derivation> {
    if !g.accepts_root(&tree.label) || !tree.is_complete() {
        return Vec::new();
    }
    let it = IndexedTree::new(tree);
    let inner: Vec<u32> = (1..it.len() as u32).collect();
    assert!(inner.len() < 31, "enumeration oracle is limited to small trees");
    let mut out = Vec::new();
    'subsets: for mask in 0u32..(1u32 << inner.len()) {
        let cuts: Vec<u32> = inner
            .iter()
            .enumerate()
            .filter(|(b, _)| mask & (1 << b) != 0)
            .map(|(_, &n)| n)
            .collect();
        let mut steps = Vec::with_capacity(cuts.len() + 1);
        for &r in std::iter::once(&0u32).chain(cuts.iter()) {
            let frag = it.materialize(r, &cuts);
            match g.get(&frag.serialize()) {
                Some(e) => steps.push(e.fragment.clone()),
                None => continue 'subsets,
            }
        }
        out.push(Derivation::new(steps));
    }
    out
}

/// A fragment of the grammar matching a tree at one node.
#[derive(Clone, Debug)]
pub(crate) struct NodeMatch {
    pub fragment: usize,
    pub sites: Vec<u32>,
    pub internal: Vec<u32>,
}

/// The derivation forest of one complete tree: for each node, the grammar
/// fragments that fit there.
#[derive(Debug)]
pub(crate) struct TreeForest {
    pub parent: Vec<Option<u32>>,
    pub matches: Vec<Vec<NodeMatch>>,
    pub root_ok: bool,
}

impl TreeForest {
    pub fn new(tree: &ParseTree, g: &Stsg) -> Self {
        let it = IndexedTree::new(tree);
        let shapes = node_shapes(&it, g.max_depth().max(1));
        let matches = shapes
            .into_iter()
            .map(|list| {
                list.into_iter()
                    .filter_map(|s| {
                        g.index_of(&s.key).map(|fragment| NodeMatch {
                            fragment,
                            sites: s.sites,
                            internal: s.internal,
                        })
                    })
                    .collect()
            })
            .collect();
        TreeForest {
            parent: it.nodes.iter().map(|n| n.parent).collect(),
            matches,
            root_ok: g.accepts_root(&tree.label) && tree.is_complete(),
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    /// Log inside value of every node under per-fragment log-probabilities.
    pub fn inside(&self, logprob: &[f64]) -> Vec<f64> {
        let mut inside = vec![f64::NEG_INFINITY; self.len()];
        for n in (0..self.len()).rev() {
            let terms = self.matches[n].iter().map(|m| {
                logprob[m.fragment] + m.sites.iter().map(|&s| inside[s as usize]).sum::<f64>()
            });
            inside[n] = log_sum_exp(terms);
        }
        inside
    }

    pub fn tree_logprob(&self, logprob: &[f64]) -> f64 {
        if !self.root_ok {
            return f64::NEG_INFINITY;
        }
        self.inside(logprob)[0]
    }
}

pub fn tree_logprob(tree: &ParseTree, g: &Stsg) -> f64 {
    let lp: Vec<f64> = g.entries().iter().map(|e| e.logprob).collect();
    TreeForest::new(tree, g).tree_logprob(&lp)
}

/// Sum over all derivations of `tree`, by dynamic programming over its
/// nodes; 0 if the tree is not derivable.
pub fn tree_prob(tree: &ParseTree, g: &Stsg) -> f64 {
    tree_logprob(tree, g).exp()
}

pub fn string_logprob<S: AsRef<str>>(words: &[S], g: &Stsg) -> f64 {
    if words.is_empty() {
        return f64::NEG_INFINITY;
    }
    let decoder = Decoder::new(g);
    decoder.parse_string(words).goal_logprob()
}

/// Sum over every tree (equivalently every derivation) yielding `words`.
pub fn string_prob<S: AsRef<str>>(words: &[S], g: &Stsg) -> f64 {
    string_logprob(words, g).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_bracketed;
    use crate::fragments::{count_fragments, rf_estimate, UNBOUNDED};

    const T1: &str = "(S (NP John) (VP (V likes) (NP Mary)))";
    const T2: &str = "(S (NP Peter) (VP (V hates) (NP Susan)))";
    const T_NEW: &str = "(S (NP Mary) (VP (V likes) (NP Susan)))";

    fn two_tree_grammar() -> Stsg {
        let corpus = [parse_bracketed(T1).unwrap(), parse_bracketed(T2).unwrap()];
        rf_estimate(&count_fragments(&corpus, UNBOUNDED).unwrap()).unwrap()
    }

    fn frag(s: &str) -> Fragment {
        let nts = ["S", "NP", "VP", "V"];
        Fragment::parse(s, |l| nts.contains(&l.syn())).unwrap()
    }

    #[test]
    fn substitution_is_leftmost() {
        let partial = frag("(S NP (VP (V likes) NP))");
        let out = substitute(partial.tree(), &frag("(NP Mary)")).unwrap();
        assert_eq!(out.serialize(), "(S (NP Mary) (VP (V likes) NP))");
        let complete = parse_bracketed(T1).unwrap();
        assert!(substitute(&complete, &frag("(NP Mary)")).is_err());
        let sv = frag("(S NP VP)");
        assert!(substitute(sv.tree(), &frag("(VP V NP)")).is_err());
    }

    #[test]
    fn semantic_sites_do_not_mix() {
        let nts = |l: &Label| l.syn() == "NP" || l.syn() == "S";
        let partial = Fragment::parse("(S NP@destination (V x))", nts).unwrap();
        let user = Fragment::parse("(NP@user ik)", nts).unwrap();
        assert!(substitute(partial.tree(), &user).is_err());
        let dest = Fragment::parse("(NP@destination almere)", nts).unwrap();
        assert!(substitute(partial.tree(), &dest).is_ok());
    }

    #[test]
    fn the_two_example_derivations() {
        let s: Label = "S".parse().unwrap();
        let a = derive(
            &[frag("(S NP (VP (V likes) NP))"), frag("(NP Mary)"), frag("(NP Susan)")],
            &s,
        )
        .unwrap();
        let b = derive(&[frag("(S (NP Mary) VP)"), frag("(VP (V likes) NP)"), frag("(NP Susan)")], &s).unwrap();
        assert_eq!(a.serialize(), T_NEW);
        assert_eq!(a, b);
        let whole = derive(&[frag(T1)], &s).unwrap();
        assert_eq!(whole.serialize(), T1);
        assert!(derive(&[frag("(S NP VP)")], &s).is_err());
        assert!(derive::<Fragment>(&[], &s).is_err());
    }

    #[test]
    fn derivation_probability() {
        let g = two_tree_grammar();
        let steps = ["(S NP (VP (V likes) NP))", "(NP Mary)", "(NP Susan)"]
            .iter()
            .map(|k| g.get(k).unwrap().fragment.clone())
            .collect();
        let p = derivation_prob(&Derivation::new(steps), &g).unwrap();
        assert!((p - 1.0 / 320.0).abs() < 1e-15);
        let unknown = Derivation::new(vec![Arc::new(frag("(NP Bob)"))]);
        assert!(matches!(derivation_prob(&unknown, &g), Err(Error::UnknownFragment(_))));
    }

    #[test]
    fn derivations_of_t_new() {
        let g = two_tree_grammar();
        let t = parse_bracketed(T_NEW).unwrap();
        let ds = enumerate_derivations(&t, &g);
        // "Mary" only occurs as an object, so the subject NP is always a site,
        // and the uncut VP "likes Susan" was never observed: 6 of the 16 cut
        // subsets have all their fragments in the grammar.
        assert_eq!(ds.len(), 6);
        let s: Label = "S".parse().unwrap();
        let mut probs = Vec::new();
        for d in &ds {
            assert_eq!(derive(&d.steps, &s).unwrap(), t);
            probs.push(derivation_prob(d, &g).unwrap());
        }
        let total: f64 = probs.iter().sum();
        assert!((tree_prob(&t, &g) - total).abs() < 1e-12);
        // distinct derivations of one tree differ in probability
        let max = probs.iter().cloned().fold(0.0, f64::max);
        let min = probs.iter().cloned().fold(1.0, f64::min);
        assert!(max > min);
    }

    #[test]
    fn underivable_and_trivial_trees() {
        let g = two_tree_grammar();
        let t = parse_bracketed("(S (NP Bob) (VP (V likes) (NP Mary)))").unwrap();
        assert!(enumerate_derivations(&t, &g).is_empty());
        assert_eq!(tree_prob(&t, &g), 0.0);

        let corpus = [parse_bracketed("(X a b)").unwrap()];
        let g1 = rf_estimate(&count_fragments(&corpus, UNBOUNDED).unwrap()).unwrap();
        assert_eq!(enumerate_derivations(&corpus[0], &g1).len(), 1);
    }

    #[test]
    fn full_tree_grammar() {
        let t1 = frag(T1);
        let t2 = frag(T2);
        let g = Stsg::from_probabilities(
            "S".parse().unwrap(),
            vec![(Arc::new(t1.clone()), 0.75), (Arc::new(t2), 0.25)],
        )
        .unwrap();
        assert!((tree_prob(t1.tree(), &g) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn grammar_validation() {
        let s: Label = "S".parse().unwrap();
        let ok = |k: &str, p: f64| (Arc::new(frag(k)), p);
        assert!(Stsg::from_probabilities(s.clone(), vec![ok("(S NP)", 1.0)]).is_err());
        assert!(Stsg::from_probabilities(s.clone(), vec![ok("(S a)", 0.5)]).is_err());
        assert!(Stsg::from_probabilities(s.clone(), vec![ok("(S a)", 1.0), ok("(S (VP S))", 1.0)]).is_err());
        let loops = vec![ok("(S a)", 0.5), ok("(S S)", 0.5)];
        assert!(Stsg::from_probabilities(s.clone(), loops).is_err());
        let cycle = vec![ok("(S a)", 0.5), ok("(S VP)", 0.5), ok("(VP b)", 0.5), ok("(VP S)", 0.5)];
        assert!(Stsg::from_probabilities(s.clone(), cycle).is_err());
        assert!(Stsg::from_probabilities("NP".parse().unwrap(), vec![ok("(S a)", 1.0)]).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let g = two_tree_grammar();
        let text = g.to_tsv();
        assert!(text.starts_with("start\tS\n"));
        let back = Stsg::from_tsv(&text).unwrap();
        assert_eq!(back.len(), g.len());
        for e in g.entries() {
            assert_eq!(back.prob(e.fragment.key()), e.prob);
        }
        assert_eq!(back.to_tsv(), text);
    }

    #[test]
    fn string_probability_matches_tree_probability() {
        let g = two_tree_grammar();
        let t = parse_bracketed(T_NEW).unwrap();
        let p = string_prob(&["Mary", "likes", "Susan"], &g);
        assert!((p - tree_prob(&t, &g)).abs() < 1e-12);
        assert_eq!(string_prob(&["Mary", "Mary"], &g), 0.0);
        assert!(p >= tree_prob(&t, &g) - 1e-15);
    }
}
