use std::fmt;

use super::label::{Label, SEM_DELIMITER};
use crate::error::{Error, Result};

/// A labelled ordered tree.
///
/// Corpus trees are complete: every leaf is a word. Fragments and partial
/// derivation states reuse the same type, where a node with no children is
/// a substitution site on the frontier.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ParseTree {
    pub label: Label,
    pub children: Vec<Child>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Child {
    Tree(ParseTree),
    Word(String),
}

/// One frontier element of a (possibly partial) tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrontierItem<'a> {
    Word(&'a str),
    Site(&'a Label),
}

impl ParseTree {
    pub fn new(label: Label, children: Vec<Child>) -> Self {
        ParseTree { label, children }
    }

    /// A bare nonterminal, i.e. a substitution site.
    pub fn site(label: Label) -> Self {
        ParseTree {
            label,
            children: Vec::new(),
        }
    }

    pub fn is_site(&self) -> bool {
        self.children.is_empty()
    }

    /// True when no substitution site remains anywhere in the tree.
    pub fn is_complete(&self) -> bool {
        !self.is_site()
            && self.children.iter().all(|c| match c {
                Child::Tree(t) => t.is_complete(),
                Child::Word(_) => true,
            })
    }

    /// Edges on the longest root-to-frontier path; a site has depth 0 and
    /// the edge from a pre-terminal to its word counts.
    pub fn depth(&self) -> usize {
        if self.is_site() {
            return 0;
        }
        1 + self
            .children
            .iter()
            .map(|c| match c {
                Child::Tree(t) => t.depth(),
                Child::Word(_) => 0,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn frontier(&self) -> Vec<FrontierItem<'_>> {
        let mut out = Vec::new();
        self.collect_frontier(&mut out);
        out
    }

    fn collect_frontier<'a>(&'a self, out: &mut Vec<FrontierItem<'a>>) {
        if self.is_site() {
            out.push(FrontierItem::Site(&self.label));
            return;
        }
        for c in &self.children {
            match c {
                Child::Tree(t) => t.collect_frontier(out),
                Child::Word(w) => out.push(FrontierItem::Word(w)),
            }
        }
    }

    /// Substitution-site labels in left-to-right order.
    pub fn sites(&self) -> Vec<&Label> {
        self.frontier()
            .into_iter()
            .filter_map(|f| match f {
                FrontierItem::Site(l) => Some(l),
                FrontierItem::Word(_) => None,
            })
            .collect()
    }

    /// Left-to-right frontier words.
    pub fn words(&self) -> Vec<&str> {
        self.frontier()
            .into_iter()
            .filter_map(|f| match f {
                FrontierItem::Word(w) => Some(w),
                FrontierItem::Site(_) => None,
            })
            .collect()
    }

    /// Number of labelled (nonterminal) nodes, sites included.
    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(|c| match c {
                Child::Tree(t) => t.node_count(),
                Child::Word(_) => 0,
            })
            .sum::<usize>()
    }

    /// Visit every labelled node in preorder.
    pub fn for_each_node<'a>(&'a self, f: &mut impl FnMut(&'a ParseTree)) {
        f(self);
        for c in &self.children {
            if let Child::Tree(t) = c {
                t.for_each_node(f);
            }
        }
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        self.write_into(&mut s);
        s
    }

    fn write_into(&self, out: &mut String) {
        use std::fmt::Write;
        if self.is_site() {
            let _ = write!(out, "{}", self.label);
            return;
        }
        let _ = write!(out, "({}", self.label);
        for c in &self.children {
            out.push(' ');
            match c {
                Child::Tree(t) => t.write_into(out),
                Child::Word(w) => out.push_str(w),
            }
        }
        out.push(')');
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(text: &str) -> Vec<(usize, Tok<'_>)> {
    let mut toks = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if let Some(s) = start.take() {
                toks.push((s, Tok::Atom(&text[s..i])));
            }
            if c == '(' {
                toks.push((i, Tok::Open));
            } else if c == ')' {
                toks.push((i, Tok::Close));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        toks.push((s, Tok::Atom(&text[s..])));
    }
    toks
}

struct Parser<'a, F> {
    toks: Vec<(usize, Tok<'a>)>,
    pos: usize,
    len: usize,
    is_site: F,
}

impl<'a, F: Fn(&Label) -> bool> Parser<'a, F> {
    fn err(&self, msg: impl Into<String>) -> Error {
        let at = self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.len);
        Error::Parse {
            pos: at,
            msg: msg.into(),
        }
    }

    fn tree(&mut self) -> Result<ParseTree> {
        match self.toks.get(self.pos) {
            Some((_, Tok::Open)) => self.pos += 1,
            _ => return Err(self.err("expected `(`")),
        }
        let label = match self.toks.get(self.pos) {
            Some((_, Tok::Atom(a))) => {
                let l: Label = a.parse().map_err(|e: crate::error::Error| self.err(e.to_string()))?;
                self.pos += 1;
                l
            }
            Some(_) => return Err(self.err("empty label")),
            None => return Err(self.err("unbalanced brackets")),
        };
        let mut children = Vec::new();
        loop {
            match self.toks.get(self.pos).copied() {
                Some((_, Tok::Close)) => {
                    self.pos += 1;
                    break;
                }
                Some((_, Tok::Open)) => children.push(Child::Tree(self.tree()?)),
                Some((_, Tok::Atom(a))) => {
                    let site = a.parse::<Label>().ok().filter(|l| (self.is_site)(l));
                    match site {
                        Some(l) => children.push(Child::Tree(ParseTree::site(l))),
                        None => {
                            if a.contains(SEM_DELIMITER) {
                                return Err(self.err(format!("`{SEM_DELIMITER}` in word `{a}`")));
                            }
                            children.push(Child::Word(a.to_string()));
                        }
                    }
                    self.pos += 1;
                }
                None => return Err(self.err("unbalanced brackets")),
            }
        }
        if children.is_empty() {
            return Err(self.err(format!("nonterminal `{label}` has no children")));
        }
        Ok(ParseTree { label, children })
    }
}

fn parse_with<F: Fn(&Label) -> bool>(text: &str, is_site: F) -> Result<ParseTree> {
    let mut p = Parser {
        toks: tokenize(text),
        pos: 0,
        len: text.len(),
        is_site,
    };
    let tree = p.tree()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input after tree"));
    }
    Ok(tree)
}

/// Parse one bracketed corpus tree, e.g. `(S (NP John) (VP (V likes) (NP Mary)))`.
/// Every bare token is a word.
pub fn parse_bracketed(text: &str) -> Result<ParseTree> {
    parse_with(text, |_| false)
}

/// Parse a bracketed fragment. A bare token whose label satisfies `is_site`
/// becomes a substitution site; any other bare token is a word.
pub fn parse_fragment_tree(text: &str, is_site: impl Fn(&Label) -> bool) -> Result<ParseTree> {
    parse_with(text, is_site)
}

pub fn serialize_bracketed(tree: &ParseTree) -> String {
    tree.serialize()
}

/// Same shape and words, every label reduced to its syntactic category.
pub fn strip_semantics(tree: &ParseTree) -> ParseTree {
    ParseTree {
        label: tree.label.without_sem(),
        children: tree
            .children
            .iter()
            .map(|c| match c {
                Child::Tree(t) => Child::Tree(strip_semantics(t)),
                Child::Word(w) => Child::Word(w.clone()),
            })
            .collect(),
    }
}

pub fn tree_yield(tree: &ParseTree) -> Vec<String> {
    tree.words().into_iter().map(str::to_string).collect()
}

/// Bottom-up meaning of a fully annotated tree: each daughter's composed
/// formula replaces the variable `dk` in its parent's scheme. Pre-terminals
/// contribute their formula verbatim; a word daughter means itself.
pub fn compose_semantics(tree: &ParseTree) -> Result<String> {
    let scheme = tree
        .label
        .sem()
        .ok_or_else(|| Error::Semantics(format!("node `{}` has no semantic formula", tree.label)))?;
    if tree.children.iter().all(|c| matches!(c, Child::Word(_))) {
        return Ok(scheme.to_string());
    }
    let daughters = tree
        .children
        .iter()
        .map(|c| match c {
            Child::Tree(t) => compose_semantics(t),
            Child::Word(w) => Ok(w.clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    substitute_variables(scheme, &daughters)
}

fn substitute_variables(scheme: &str, daughters: &[String]) -> Result<String> {
    let bytes = scheme.as_bytes();
    let mut out = String::with_capacity(scheme.len());
    let mut i = 0;
    let boundary = |b: u8| !(b.is_ascii_alphanumeric() || b == b'_');
    while i < bytes.len() {
        let is_var = bytes[i] == b'd'
            && i + 1 < bytes.len()
            && (b'1'..=b'9').contains(&bytes[i + 1])
            && (i == 0 || boundary(bytes[i - 1]))
            && (i + 2 >= bytes.len() || boundary(bytes[i + 2]));
        if is_var {
            let k = (bytes[i + 1] - b'0') as usize;
            let d = daughters.get(k - 1).ok_or_else(|| {
                Error::Semantics(format!(
                    "variable d{k} in `{scheme}` but only {} daughters",
                    daughters.len()
                ))
            })?;
            out.push_str(d);
            i += 2;
        } else {
            let ch = scheme[i..].chars().next().expect("in bounds");
            out.push(ch);
            i += ch.len_utf8();
        }
    }
    Ok(out)
}

/// One tree per line; blank lines are skipped.
pub fn read_treebank(text: &str) -> Result<Vec<ParseTree>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let t = parse_bracketed(l.trim()).map_err(|e| Error::Treebank {
                line: i + 1,
                msg: e.to_string(),
            })?;
            Ok(t)
        })
        .collect()
}

pub fn write_treebank(trees: &[ParseTree]) -> String {
    let mut s = String::new();
    for t in trees {
        s.push_str(&t.serialize());
        s.push('\n');
    }
    s
}
