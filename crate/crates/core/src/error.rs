use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("treebank line {line}: {msg}")]
    Treebank { line: usize, msg: String },

    #[error("invalid label `{0}`")]
    InvalidLabel(String),

    #[error("semantic composition failed: {0}")]
    Semantics(String),

    #[error("word-graph line {line}: {msg}")]
    Lattice { line: usize, msg: String },

    #[error("word-graph contains a cycle through node {0}")]
    LatticeCycle(usize),

    #[error("word-graph end node {end} is unreachable from start node {start}")]
    LatticeUnreachable { start: usize, end: usize },

    #[error("generator: {0}")]
    Generator(String),

    #[error("max_depth must be at least 1")]
    InvalidDepth,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("grammar: {0}")]
    Grammar(String),

    #[error("head rules line {line}: {msg}")]
    HeadRules { line: usize, msg: String },

    #[error("filtering left no fragments rooted at `{0}`, which is still used as a substitution site")]
    IncompleteGrammar(String),

    #[error("substitution: {0}")]
    Substitution(String),

    #[error("unknown fragment `{0}`")]
    UnknownFragment(String),

    #[error("tree {index} is not derivable by the grammar")]
    Underivable { index: usize },

    #[error("zero expected count mass for required root `{0}`")]
    ZeroMass(String),

    #[error("cross-entropy increased from {prev} to {next} bits at iteration {iteration}")]
    LikelihoodDecrease { iteration: usize, prev: f64, next: f64 },

    #[error("word-graph has no arcs")]
    EmptyLattice,

    #[error("no chart item covers arc {from}->{to} `{word}`; no partial-path combination spans the word-graph")]
    Uncoverable { from: usize, to: usize, word: String },

    #[error("no derivation reaches the goal item")]
    NoGoal,

    #[error("ARPA line {line}: {msg}")]
    Arpa { line: usize, msg: String },

    #[error("{0}")]
    Config(String),

    #[error("empty reference")]
    EmptyReference,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
