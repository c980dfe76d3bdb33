//! Preorder view of one tree and enumeration of every fragment rooted at
//! each of its nodes, shared by extraction, tree probabilities and EM.

use crate::corpus::{Child, ParseTree};

#[derive(Clone, Copy, Debug)]
pub(crate) enum IChild<'a> {
    Node(u32),
    Word(&'a str),
}

#[derive(Debug)]
pub(crate) struct INode<'a> {
    pub tree: &'a ParseTree,
    pub parent: Option<u32>,
    pub children: Vec<IChild<'a>>,
    pub token: String,
}

/// Labelled nodes of a tree in preorder; node 0 is the root.
#[derive(Debug)]
pub(crate) struct IndexedTree<'a> {
    pub nodes: Vec<INode<'a>>,
}

impl<'a> IndexedTree<'a> {
    pub fn new(tree: &'a ParseTree) -> Self {
        let mut nodes = Vec::new();
        Self::push(tree, None, &mut nodes);
        IndexedTree { nodes }
    }

    fn push(tree: &'a ParseTree, parent: Option<u32>, nodes: &mut Vec<INode<'a>>) -> u32 {
        let id = nodes.len() as u32;
        nodes.push(INode {
            tree,
            parent,
            children: Vec::new(),
            token: tree.label.to_string(),
        });
        let mut children = Vec::with_capacity(tree.children.len());
        for c in &tree.children {
            children.push(match c {
                Child::Tree(t) => IChild::Node(Self::push(t, Some(id), nodes)),
                Child::Word(w) => IChild::Word(w.as_str()),
            });
        }
        nodes[id as usize].children = children;
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Copy of the subtree at `root` with the nodes in `sites` cut to bare labels.
    pub fn materialize(&self, root: u32, sites: &[u32]) -> ParseTree {
        let node = &self.nodes[root as usize];
        let children = node
            .children
            .iter()
            .map(|c| match *c {
                IChild::Word(w) => Child::Word(w.to_string()),
                IChild::Node(n) if sites.contains(&n) => {
                    Child::Tree(ParseTree::site(self.nodes[n as usize].tree.label.clone()))
                }
                IChild::Node(n) => Child::Tree(self.materialize(n, sites)),
            })
            .collect();
        ParseTree::new(node.tree.label.clone(), children)
    }
}

/// One fragment occurrence rooted at some node: its canonical key, depth,
/// the cut nodes that become substitution sites (left to right) and the
/// expanded nodes (root first, preorder).
#[derive(Clone, Debug)]
pub(crate) struct Shape {
    pub key: String,
    pub depth: usize,
    pub sites: Vec<u32>,
    pub internal: Vec<u32>,
}

/// For every node, all fragments rooted there with depth ≤ `max_depth`.
pub(crate) fn node_shapes(it: &IndexedTree, max_depth: usize) -> Vec<Vec<Shape>> {
    let n = it.len();
    let mut shapes: Vec<Vec<Shape>> = vec![Vec::new(); n];
    for id in (0..n).rev() {
        let node = &it.nodes[id];
        if node.children.is_empty() {
            continue;
        }
        let mut partial = vec![Shape {
            key: format!("({}", node.token),
            depth: 0,
            sites: Vec::new(),
            internal: vec![id as u32],
        }];
        for c in &node.children {
            let mut next = Vec::new();
            match *c {
                IChild::Word(w) => {
                    for mut p in partial {
                        p.key.push(' ');
                        p.key.push_str(w);
                        next.push(p);
                    }
                }
                IChild::Node(cid) => {
                    let below = if max_depth > 1 {
                        shapes[cid as usize]
                            .iter()
                            .filter(|s| s.depth < max_depth)
                            .collect::<Vec<_>>()
                    } else {
                        Vec::new()
                    };
                    next.reserve(partial.len() * (1 + below.len()));
                    for p in &partial {
                        let mut cut = p.clone();
                        cut.key.push(' ');
                        cut.key.push_str(&it.nodes[cid as usize].token);
                        cut.sites.push(cid);
                        next.push(cut);
                        for s in &below {
                            let mut e = p.clone();
                            e.key.push(' ');
                            e.key.push_str(&s.key);
                            e.depth = e.depth.max(s.depth);
                            e.sites.extend_from_slice(&s.sites);
                            e.internal.extend_from_slice(&s.internal);
                            next.push(e);
                        }
                    }
                }
            }
            partial = next;
        }
        for p in partial.iter_mut() {
            p.key.push(')');
            p.depth += 1;
        }
        shapes[id] = partial;
    }
    shapes
}
