use std::collections::{BTreeMap, BTreeSet};

use super::{Fragment, FragmentTable, UNBOUNDED};
use crate::corpus::{Child, ParseTree};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadDirection {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct HeadRule {
    direction: HeadDirection,
    preferences: Vec<String>,
}

/// Head-percolation table keyed by parent category.
///
/// File format, one rule per line: `<PARENT> <left|right> [CHILD ...]`.
/// The preferred categories are tried in order, each searched from the
/// given side; if none matches, the first child from that side is the head.
/// Parents without a rule take their leftmost child.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HeadRules {
    table: BTreeMap<String, HeadRule>,
}

impl HeadRules {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rules = HeadRules::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::HeadRules {
                line: i + 1,
                msg: msg.to_string(),
            };
            let mut fields = line.split_whitespace();
            let parent = fields.next().ok_or_else(|| bad("missing parent"))?;
            let direction = match fields.next() {
                Some("left") => HeadDirection::Left,
                Some("right") => HeadDirection::Right,
                _ => return Err(bad("direction must be `left` or `right`")),
            };
            if rules.table.contains_key(parent) {
                return Err(bad("duplicate rule"));
            }
            rules.insert(parent, direction, fields.map(str::to_string).collect());
        }
        Ok(rules)
    }

    pub fn insert(&mut self, parent: &str, direction: HeadDirection, preferences: Vec<String>) {
        self.table.insert(
            parent.to_string(),
            HeadRule {
                direction,
                preferences,
            },
        );
    }

    /// Index of the head child of `node`, which must have children.
    pub fn head_child(&self, node: &ParseTree) -> usize {
        let n = node.children.len();
        debug_assert!(n > 0);
        let Some(rule) = self.table.get(node.label.syn()) else {
            return 0;
        };
        let order: Vec<usize> = match rule.direction {
            HeadDirection::Left => (0..n).collect(),
            HeadDirection::Right => (0..n).rev().collect(),
        };
        for pref in &rule.preferences {
            for &i in &order {
                if let Child::Tree(t) = &node.children[i] {
                    if t.label.syn() == pref {
                        return i;
                    }
                }
            }
        }
        order[0]
    }
}

/// Frontier words of `fragment` other than the lexical head of its root.
/// Head children are followed from the root until a word is reached; if the
/// path ends in a substitution site the head lies outside the fragment and
/// every frontier word counts.
pub fn count_nonheadwords(fragment: &Fragment, rules: &HeadRules) -> usize {
    let words = fragment.words().len();
    let mut node = fragment.tree();
    loop {
        match &node.children[rules.head_child(node)] {
            Child::Word(_) => return words - 1,
            Child::Tree(t) if t.is_site() => return words,
            Child::Tree(t) => node = t,
        }
    }
}

/// Drop fragments with more than `max_nonhead` non-headwords (`UNBOUNDED`
/// keeps everything). Fails if a label still used as a substitution site is
/// left without any fragment rooted at it.
pub fn headword_filter(table: &FragmentTable, rules: &HeadRules, max_nonhead: usize) -> Result<FragmentTable> {
    if max_nonhead == UNBOUNDED {
        return Ok(table.clone());
    }
    let out = table.filtered(|f| count_nonheadwords(f, rules) <= max_nonhead);
    let mut needed = BTreeSet::new();
    for e in out.iter() {
        for s in e.fragment.sites() {
            needed.insert(s.clone());
        }
    }
    for l in needed {
        if out.root_total(&l) == 0 {
            return Err(Error::IncompleteGrammar(l.to_string()));
        }
    }
    Ok(out)
}
