//! Annotated trees, word-graphs and the synthetic-corpus generator.

mod label;
pub mod synth;
mod tree;
mod wordgraph;

pub use label::{Label, SEM_DELIMITER};
pub use tree::{
    compose_semantics, parse_bracketed, parse_fragment_tree, read_treebank, serialize_bracketed,
    strip_semantics, tree_yield, write_treebank, Child, FrontierItem, ParseTree,
};
pub use wordgraph::{load_wordgraph, load_wordgraphs, write_wordgraphs, WordArc, WordGraph};
