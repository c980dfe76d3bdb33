//! Subtree (fragment) extraction, counting and relative-frequency estimation.

mod heads;
pub(crate) mod index;

use std::collections::BTreeMap;
use std::fmt::Write;
use std::sync::Arc;

pub use heads::{count_nonheadwords, headword_filter, HeadDirection, HeadRules};

use crate::corpus::{parse_fragment_tree, FrontierItem, Label, ParseTree};
use crate::error::{Error, Result};
use crate::stsg::Stsg;
use index::{node_shapes, IndexedTree};

/// Depth bound meaning "no bound".
pub const UNBOUNDED: usize = usize::MAX;

/// A connected subtree of some corpus tree. Every included node carries
/// either all of its children or none, in which case it is a substitution
/// site. The key is the bracketed serialization with sites as bare labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Fragment {
    tree: ParseTree,
    key: String,
}

impl Fragment {
    pub fn new(tree: ParseTree) -> Result<Self> {
        if tree.is_site() {
            return Err(Error::Grammar(format!(
                "fragment `{}` has depth 0",
                tree.label
            )));
        }
        let key = tree.serialize();
        Ok(Fragment { tree, key })
    }

    pub(crate) fn from_parts(tree: ParseTree, key: String) -> Self {
        debug_assert_eq!(tree.serialize(), key);
        Fragment { tree, key }
    }

    /// Parse a bracketed fragment where bare tokens accepted by `is_site`
    /// are substitution sites.
    pub fn parse(text: &str, is_site: impl Fn(&Label) -> bool) -> Result<Self> {
        Fragment::new(parse_fragment_tree(text, is_site)?)
    }

    pub fn tree(&self) -> &ParseTree {
        &self.tree
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn root(&self) -> &Label {
        &self.tree.label
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    pub fn frontier(&self) -> Vec<FrontierItem<'_>> {
        self.tree.frontier()
    }

    pub fn sites(&self) -> Vec<&Label> {
        self.tree.sites()
    }

    pub fn words(&self) -> Vec<&str> {
        self.tree.words()
    }

    /// A wordless fragment whose only frontier node is a site with the
    /// fragment's own root label.
    pub fn is_unary_self_loop(&self) -> bool {
        matches!(self.frontier().as_slice(), [FrontierItem::Site(l)] if *l == self.root())
    }
}

impl AsRef<Fragment> for Fragment {
    fn as_ref(&self) -> &Fragment {
        self
    }
}

/// Every fragment rooted at some node of `tree` with depth ≤ `max_depth`,
/// one element per occurrence.
pub fn extract_fragments(tree: &ParseTree, max_depth: usize) -> Result<Vec<Fragment>> {
    if max_depth < 1 {
        return Err(Error::InvalidDepth);
    }
    let it = IndexedTree::new(tree);
    let shapes = node_shapes(&it, max_depth);
    let mut out = Vec::new();
    for (id, list) in shapes.into_iter().enumerate() {
        for s in list {
            let t = it.materialize(id as u32, &s.sites);
            out.push(Fragment::from_parts(t, s.key));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct TableEntry {
    pub fragment: Arc<Fragment>,
    pub count: u64,
}

/// Occurrence counts of fragments over a corpus, keyed canonically.
#[derive(Clone, Debug, Default)]
pub struct FragmentTable {
    entries: BTreeMap<String, TableEntry>,
    root_totals: BTreeMap<Label, u64>,
    tree_roots: BTreeMap<Label, u64>,
}

impl FragmentTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&TableEntry> {
        self.entries.get(key)
    }

    pub fn count(&self, key: &str) -> u64 {
        self.entries.get(key).map_or(0, |e| e.count)
    }

    /// Entries in lexicographic key order.
    pub fn iter(&self) -> impl Iterator<Item = &TableEntry> {
        self.entries.values()
    }

    pub fn root_total(&self, root: &Label) -> u64 {
        self.root_totals.get(root).copied().unwrap_or(0)
    }

    pub fn root_totals(&self) -> &BTreeMap<Label, u64> {
        &self.root_totals
    }

    /// Root labels of the corpus trees the table was counted from.
    pub fn tree_roots(&self) -> &BTreeMap<Label, u64> {
        &self.tree_roots
    }

    pub fn add(&mut self, fragment: Fragment, count: u64) {
        *self.root_totals.entry(fragment.root().clone()).or_insert(0) += count;
        match self.entries.get_mut(fragment.key()) {
            Some(e) => e.count += count,
            None => {
                self.entries.insert(
                    fragment.key().to_string(),
                    TableEntry {
                        fragment: Arc::new(fragment),
                        count,
                    },
                );
            }
        }
    }

    /// Add every fragment occurrence of one tree.
    pub fn add_tree(&mut self, tree: &ParseTree, max_depth: usize) -> Result<()> {
        if max_depth < 1 {
            return Err(Error::InvalidDepth);
        }
        let it = IndexedTree::new(tree);
        for (id, list) in node_shapes(&it, max_depth).into_iter().enumerate() {
            for s in list {
                match self.entries.get_mut(&s.key) {
                    Some(e) => {
                        e.count += 1;
                        *self.root_totals.get_mut(e.fragment.root()).expect("root seen") += 1;
                    }
                    None => {
                        let t = it.materialize(id as u32, &s.sites);
                        self.add(Fragment::from_parts(t, s.key), 1);
                    }
                }
            }
        }
        *self.tree_roots.entry(tree.label.clone()).or_insert(0) += 1;
        Ok(())
    }

    /// Entrywise sum of two tables.
    pub fn merge(&mut self, other: &FragmentTable) {
        for e in other.entries.values() {
            self.add((*e.fragment).clone(), e.count);
        }
        for (r, c) in &other.tree_roots {
            *self.tree_roots.entry(r.clone()).or_insert(0) += c;
        }
    }

    /// A table keeping only entries accepted by `keep`, totals recomputed.
    pub fn filtered(&self, mut keep: impl FnMut(&Fragment) -> bool) -> FragmentTable {
        let mut out = FragmentTable {
            tree_roots: self.tree_roots.clone(),
            ..FragmentTable::default()
        };
        for (k, e) in &self.entries {
            if keep(&e.fragment) {
                *out.root_totals.entry(e.fragment.root().clone()).or_insert(0) += e.count;
                out.entries.insert(k.clone(), e.clone());
            }
        }
        out
    }

    /// `key<TAB>count` lines in lexicographic key order.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (k, e) in &self.entries {
            let _ = writeln!(s, "{k}\t{}", e.count);
        }
        s
    }
}

/// Count all fragments up to `max_depth` over a corpus.
pub fn count_fragments(corpus: &[ParseTree], max_depth: usize) -> Result<FragmentTable> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut table = FragmentTable::new();
    for t in corpus {
        table.add_tree(t, max_depth)?;
    }
    Ok(table)
}

/// The start label implied by the corpus roots: the shared root label, or
/// the bare category when roots differ only in their semantics.
pub fn implied_start(table: &FragmentTable) -> Result<Label> {
    let mut roots = table.tree_roots().iter();
    let (first, _) = roots
        .next()
        .ok_or_else(|| Error::Grammar("table has no corpus roots".into()))?;
    if table.tree_roots().len() == 1 {
        return Ok(first.clone());
    }
    let best = table
        .tree_roots()
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .expect("non-empty");
    Ok(best.0.without_sem())
}

/// Relative-frequency (SimpleDOP) estimate: each fragment's count divided by
/// the total count of fragments sharing its root label.
pub fn rf_estimate(table: &FragmentTable) -> Result<Stsg> {
    let start = implied_start(table)?;
    rf_estimate_with_start(table, start)
}

pub fn rf_estimate_with_start(table: &FragmentTable, start: Label) -> Result<Stsg> {
    let entries = table
        .iter()
        .map(|e| {
            let total = table.root_total(e.fragment.root());
            (e.fragment.clone(), e.count as f64 / total as f64)
        })
        .collect();
    Stsg::from_probabilities(start, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_bracketed;

    const T1: &str = "(S (NP John) (VP (V likes) (NP Mary)))";
    const T2: &str = "(S (NP Peter) (VP (V hates) (NP Susan)))";

    #[test]
    fn t1_fragment_counts() {
        let t = parse_bracketed(T1).unwrap();
        assert_eq!(extract_fragments(&t, UNBOUNDED).unwrap().len(), 17);
        let d1 = extract_fragments(&t, 1).unwrap();
        assert_eq!(d1.len(), 5);
        assert!(d1.iter().all(|f| f.depth() == 1));
        let np = parse_bracketed("(NP John)").unwrap();
        for d in [1, 2, 4, UNBOUNDED] {
            assert_eq!(extract_fragments(&np, d).unwrap().len(), 1);
        }
        assert!(matches!(extract_fragments(&t, 0), Err(Error::InvalidDepth)));
    }

    #[test]
    fn two_tree_table() {
        let corpus = [parse_bracketed(T1).unwrap(), parse_bracketed(T2).unwrap()];
        let table = count_fragments(&corpus, UNBOUNDED).unwrap();
        assert_eq!(table.count("(S NP VP)"), 2);
        assert_eq!(table.root_total(&"S".parse().unwrap()), 20);
        assert_eq!(table.count("(NP John)"), 1);
        assert_eq!(table.root_total(&"NP".parse().unwrap()), 4);
        let g = rf_estimate(&table).unwrap();
        assert!((g.prob("(S NP VP)") - 0.1).abs() < 1e-15);
        assert!((g.prob("(NP John)") - 0.25).abs() < 1e-15);
        assert!((g.prob("(V likes)") - 0.5).abs() < 1e-15);
        assert_eq!(g.start().to_string(), "S");
    }

    #[test]
    fn doubling_corpus_doubles_counts() {
        let t1 = parse_bracketed(T1).unwrap();
        let once = count_fragments(std::slice::from_ref(&t1), UNBOUNDED).unwrap();
        let twice = count_fragments(&[t1.clone(), t1], UNBOUNDED).unwrap();
        assert_eq!(once.len(), twice.len());
        for e in once.iter() {
            assert_eq!(twice.count(e.fragment.key()), 2 * e.count);
        }
    }

    #[test]
    fn single_entry_root_gets_probability_one() {
        let corpus = [parse_bracketed("(X a)").unwrap()];
        let g = rf_estimate(&count_fragments(&corpus, 4).unwrap()).unwrap();
        assert_eq!(g.prob("(X a)"), 1.0);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(count_fragments(&[], 4), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn tsv_is_sorted() {
        let corpus = [parse_bracketed(T1).unwrap()];
        let tsv = count_fragments(&corpus, 1).unwrap().to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        let mut sorted = lines.clone();
        sorted.sort();
        assert_eq!(lines, sorted);
        assert!(lines.contains(&"(VP V NP)\t1"));
    }

    #[test]
    fn mixed_semantic_roots_give_category_start() {
        let corpus = [
            parse_bracketed("(S@a (X x))").unwrap(),
            parse_bracketed("(S@b (X y))").unwrap(),
            parse_bracketed("(S@b (X z))").unwrap(),
        ];
        let table = count_fragments(&corpus, 4).unwrap();
        assert_eq!(implied_start(&table).unwrap().to_string(), "S");
    }
}
