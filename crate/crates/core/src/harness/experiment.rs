use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{CorpusSource, ExperimentConfig};
use super::stats::{paired_t, PairedT, ALPHA};
use super::wer::{align, EditCounts};
use crate::corpus::synth::{build_synthetic_corpus, Generator, SyntheticCorpus, TRAVEL_GENERATOR, TRAVEL_HEAD_RULES};
use crate::corpus::{load_wordgraphs, read_treebank, strip_semantics, tree_yield, ParseTree, WordGraph};
use crate::decoder::{default_acoustic_weight, Decoder};
use crate::em;
use crate::error::{Error, Result};
use crate::fragments::{count_fragments, headword_filter, implied_start, rf_estimate, rf_estimate_with_start, HeadRules};
use crate::ngram::{ngram_best_string, train_katz};
use crate::stsg::Stsg;

pub const TRIGRAM: &str = "3-gram";
pub const SIMPLE_DOP: &str = "SimpleDOP";
pub const ML_DOP: &str = "ML-DOP";
pub const ML_DOP_NONHEAD1: &str = "ML-DOP-nonhead1";
pub const ML_DOP_NOSEM: &str = "ML-DOP-nosem";

/// Trees with aligned reference transcripts and recognizer word-graphs.
#[derive(Clone, Debug)]
pub struct ExperimentCorpus {
    pub trees: Vec<ParseTree>,
    pub references: Vec<Vec<String>>,
    pub lattices: Vec<WordGraph>,
}

impl ExperimentCorpus {
    pub fn new(trees: Vec<ParseTree>, references: Vec<Vec<String>>, lattices: Vec<WordGraph>) -> Result<Self> {
        if trees.len() != references.len() {
            return Err(Error::LengthMismatch(trees.len(), references.len()));
        }
        if trees.len() != lattices.len() {
            return Err(Error::LengthMismatch(trees.len(), lattices.len()));
        }
        if trees.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if references.iter().any(Vec::is_empty) {
            return Err(Error::EmptyReference);
        }
        Ok(ExperimentCorpus {
            trees,
            references,
            lattices,
        })
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Loads or samples the corpus a configuration points at.
    pub fn from_source(source: &CorpusSource) -> Result<Self> {
        match source {
            CorpusSource::Synthetic {
                trees,
                seed,
                confusion,
            } => {
                let generator = Generator::parse(TRAVEL_GENERATOR)?;
                build_synthetic_corpus(&generator, *trees, *seed, confusion)?.try_into()
            }
            CorpusSource::Files {
                treebank,
                lattices,
                references,
            } => {
                let trees = read_treebank(&std::fs::read_to_string(treebank)?)?;
                let lattices = load_wordgraphs(&std::fs::read_to_string(lattices)?)?
                    .into_iter()
                    .map(|(_, g)| g)
                    .collect();
                let references = match references {
                    Some(p) => std::fs::read_to_string(p)?
                        .lines()
                        .map(|l| l.split_whitespace().map(str::to_string).collect())
                        .collect(),
                    None => trees.iter().map(tree_yield).collect(),
                };
                ExperimentCorpus::new(trees, references, lattices)
            }
        }
    }
}

impl TryFrom<SyntheticCorpus> for ExperimentCorpus {
    type Error = Error;

    fn try_from(c: SyntheticCorpus) -> Result<Self> {
        ExperimentCorpus::new(c.trees, c.references, c.lattices)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// `config.splits` random train/test partitions of `n` items. Split `k` is a
/// shuffle seeded with `config.seed + k`; its first round((1 − f)·n) indices
/// form the test set.
pub fn make_splits(n: usize, config: &ExperimentConfig) -> Vec<Split> {
    let test_len = ((1.0 - config.train_fraction) * n as f64).round() as usize;
    (0..config.splits)
        .map(|k| {
            let seed = config.seed.wrapping_add(k as u64);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let mut test = idx[..test_len].to_vec();
            let mut train = idx[test_len..].to_vec();
            test.sort_unstable();
            train.sort_unstable();
            Split { seed, train, test }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelRow {
    pub name: String,
    /// Word-weighted WER of each split.
    pub wers: Vec<f64>,
    /// Test lattices per split decoded through partial-path combinations.
    pub fallbacks: Vec<usize>,
    /// Test lattices per split the model could not cover at all; these are
    /// scored with the acoustically best path.
    pub failures: Vec<usize>,
    /// EM iterations per split (empty for models without EM).
    pub em_iterations: Vec<usize>,
}

impl ModelRow {
    fn new(name: &str) -> Self {
        ModelRow {
            name: name.to_string(),
            wers: Vec::new(),
            fallbacks: Vec::new(),
            failures: Vec::new(),
            em_iterations: Vec::new(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.wers.iter().sum::<f64>() / self.wers.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub test: PairedT,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub seeds: Vec<u64>,
    pub rows: Vec<ModelRow>,
    pub comparisons: Vec<Comparison>,
}

impl ResultTable {
    pub fn row(&self, name: &str) -> Option<&ModelRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn comparison(&self, a: &str, b: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.a == a && c.b == b)
    }

    /// Tab-separated table: one row per model with per-split WER and mean,
    /// then the pairwise significance block. Lines starting with `#` carry
    /// split seeds and decoding diagnostics.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "# split seeds\t{}", seeds.join("\t"));
        s.push_str("model");
        for k in 1..=self.seeds.len() {
            let _ = write!(s, "\tsplit{k}");
        }
        s.push_str("\tmean\n");
        for r in &self.rows {
            s.push_str(&r.name);
            for w in &r.wers {
                let _ = write!(s, "\t{w:.6}");
            }
            let _ = writeln!(s, "\t{:.6}", r.mean());
        }
        s.push('\n');
        let _ = writeln!(s, "# paired t-test, two-tailed, alpha {ALPHA}");
        s.push_str("model_a\tmodel_b\tt\tdf\tcritical\tsignificant\n");
        for c in &self.comparisons {
            let _ = writeln!(
                s,
                "{}\t{}\t{:.4}\t{}\t{:.4}\t{}",
                c.a,
                c.b,
                c.test.t,
                c.test.df,
                c.test.critical,
                if c.test.significant { "yes" } else { "no" }
            );
        }
        s.push('\n');
        for r in &self.rows {
            let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join("\t");
            let _ = writeln!(s, "# fallbacks\t{}\t{}", r.name, join(&r.fallbacks));
            let _ = writeln!(s, "# failures\t{}\t{}", r.name, join(&r.failures));
            if !r.em_iterations.is_empty() {
                let _ = writeln!(s, "# em_iterations\t{}\t{}", r.name, join(&r.em_iterations));
            }
        }
        s
    }
}

/// Word sequence of the path with the highest summed acoustic score.
fn acoustic_best_path(g: &WordGraph) -> Vec<String> {
    let mut best: Vec<Option<(f64, usize)>> = vec![None; g.node_count()];
    best[g.start()] = Some((0.0, usize::MAX));
    let useful = g.useful_arcs();
    for &v in g.topological() {
        let Some((score, _)) = best[v] else { continue };
        for &a in &useful {
            let arc = &g.arcs()[a];
            if arc.from != v {
                continue;
            }
            let s = score + arc.acoustic.unwrap_or(0.0);
            if best[arc.to].is_none_or(|(b, _)| s > b) {
                best[arc.to] = Some((s, a));
            }
        }
    }
    let mut arcs = Vec::new();
    let mut v = g.end();
    while v != g.start() {
        let (_, a) = best[v].expect("end reachable");
        arcs.push(a);
        v = g.arcs()[a].from;
    }
    arcs.reverse();
    g.path_words(&arcs)
}

struct Scored {
    edits: EditCounts,
    fallbacks: usize,
    failures: usize,
}

fn score_dop(g: &Stsg, corpus: &ExperimentCorpus, test: &[usize], config: &ExperimentConfig) -> Result<Scored> {
    let decoder = Decoder::new(g);
    let mut out = Scored {
        edits: EditCounts::default(),
        fallbacks: 0,
        failures: 0,
    };
    for &i in test {
        let lattice = &corpus.lattices[i];
        let aw = config.acoustic_weight.unwrap_or_else(|| default_acoustic_weight(lattice));
        let hyp = match decoder.best_string(lattice, config.nbest, aw) {
            Ok(r) => {
                out.fallbacks += usize::from(r.fallback_used);
                r.best_string
            }
            Err(Error::Uncoverable { .. }) => {
                out.failures += 1;
                acoustic_best_path(lattice)
            }
            Err(e) => return Err(e),
        };
        out.edits.add(align(&corpus.references[i], &hyp));
    }
    Ok(out)
}

fn rate(e: &EditCounts) -> f64 {
    e.errors() as f64 / e.reference_len as f64
}

/// The full comparison: for every split, train the 3-gram on the training
/// tree yields, SimpleDOP by relative frequency and ML-DOP by EM from it
/// (plus enabled ablations), decode each test lattice with every model and
/// record word-weighted WER; then paired t-tests between all models.
pub fn run_experiment(corpus: &ExperimentCorpus, config: &ExperimentConfig) -> Result<ResultTable> {
    run_experiment_with(corpus, config, |_| {})
}

/// [`run_experiment`] reporting progress lines through `log`.
pub fn run_experiment_with(
    corpus: &ExperimentCorpus,
    config: &ExperimentConfig,
    mut log: impl FnMut(&str),
) -> Result<ResultTable> {
    config.validate()?;
    let rules = if config.drop_multi_nonheadword {
        Some(match &config.head_rules_path {
            Some(p) => HeadRules::parse(&std::fs::read_to_string(p)?)?,
            None => HeadRules::parse(TRAVEL_HEAD_RULES)?,
        })
    } else {
        None
    };
    let mut names = vec![TRIGRAM, SIMPLE_DOP, ML_DOP];
    if rules.is_some() {
        names.push(ML_DOP_NONHEAD1);
    }
    if config.strip_semantics {
        names.push(ML_DOP_NOSEM);
    }
    let mut rows: Vec<ModelRow> = names.iter().map(|n| ModelRow::new(n)).collect();
    let splits = make_splits(corpus.len(), config);
    for (k, split) in splits.iter().enumerate() {
        if split.test.is_empty() || split.train.is_empty() {
            return Err(Error::Config("a split has an empty training or test set".into()));
        }
        let train: Vec<ParseTree> = split.train.iter().map(|&i| corpus.trees[i].clone()).collect();
        let mut row = 0;
        let mut record = |rows: &mut Vec<ModelRow>, s: Scored, iters: Option<usize>| {
            let r = &mut rows[row];
            r.wers.push(rate(&s.edits));
            r.fallbacks.push(s.fallbacks);
            r.failures.push(s.failures);
            if let Some(it) = iters {
                r.em_iterations.push(it);
            }
            log(&format!(
                "split {} seed {} {} wer {:.6} fallbacks {} failures {}",
                k + 1,
                split.seed,
                r.name,
                rate(&s.edits),
                s.fallbacks,
                s.failures
            ));
            row += 1;
        };

        let yields: Vec<Vec<String>> = train.iter().map(tree_yield).collect();
        let lm = train_katz(&yields, config.ngram_order, config.katz_k)?;
        let mut edits = EditCounts::default();
        for &i in &split.test {
            let lattice = &corpus.lattices[i];
            let aw = config.acoustic_weight.unwrap_or_else(|| default_acoustic_weight(lattice));
            edits.add(align(&corpus.references[i], &ngram_best_string(lattice, &lm, aw).best_string));
        }
        record(
            &mut rows,
            Scored {
                edits,
                fallbacks: 0,
                failures: 0,
            },
            None,
        );

        let table = count_fragments(&train, config.max_depth)?;
        let simple = rf_estimate(&table)?;
        record(&mut rows, score_dop(&simple, corpus, &split.test, config)?, None);

        let ml = em::train(&train, &simple, config.em_tol, config.em_max_iter)?;
        record(
            &mut rows,
            score_dop(&ml.grammar, corpus, &split.test, config)?,
            Some(ml.iteration),
        );

        if let Some(rules) = &rules {
            let kept = headword_filter(&table, rules, 1)?;
            let g0 = rf_estimate_with_start(&kept, implied_start(&table)?)?;
            let st = em::train(&train, &g0, config.em_tol, config.em_max_iter)?;
            record(
                &mut rows,
                score_dop(&st.grammar, corpus, &split.test, config)?,
                Some(st.iteration),
            );
        }
        if config.strip_semantics {
            let plain: Vec<ParseTree> = train.iter().map(strip_semantics).collect();
            let g0 = rf_estimate(&count_fragments(&plain, config.max_depth)?)?;
            let st = em::train(&plain, &g0, config.em_tol, config.em_max_iter)?;
            record(
                &mut rows,
                score_dop(&st.grammar, corpus, &split.test, config)?,
                Some(st.iteration),
            );
        }
    }

    let mut comparisons = Vec::new();
    if splits.len() >= 2 {
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                comparisons.push(Comparison {
                    a: rows[i].name.clone(),
                    b: rows[j].name.clone(),
                    test: paired_t(&rows[i].wers, &rows[j].wers)?,
                });
            }
        }
    }
    Ok(ResultTable {
        seeds: splits.iter().map(|s| s.seed).collect(),
        rows,
        comparisons,
    })
}
