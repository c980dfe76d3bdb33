use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::corpus::synth::ConfusionParams;
use crate::decoder::DEFAULT_NBEST;
use crate::em::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::ngram::{DEFAULT_K_GT, DEFAULT_ORDER};

/// Where the experiment's trees, lattices and references come from.
#[derive(Clone, Debug, PartialEq)]
pub enum CorpusSource {
    /// Sampled from the built-in travel-domain generator.
    Synthetic { trees: usize, seed: u64, confusion: ConfusionParams },
    /// A treebank and an aligned lattice file; references default to the
    /// tree yields.
    Files {
        treebank: PathBuf,
        lattices: PathBuf,
        references: Option<PathBuf>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub splits: usize,
    pub train_fraction: f64,
    pub max_depth: usize,
    pub nbest: usize,
    pub em_tol: f64,
    pub em_max_iter: usize,
    pub seed: u64,
    /// Adds the ML-DOP variant trained without fragments that have more
    /// than one non-headword.
    pub drop_multi_nonheadword: bool,
    /// Adds the ML-DOP variant trained on trees without semantic labels.
    pub strip_semantics: bool,
    /// Head-percolation table; the built-in travel-domain rules if absent.
    pub head_rules_path: Option<PathBuf>,
    /// Fixed acoustic weight; by default 1 for lattices with acoustic scores
    /// and 0 otherwise.
    pub acoustic_weight: Option<f64>,
    pub ngram_order: usize,
    pub katz_k: u64,
    pub corpus: CorpusSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            splits: 10,
            train_fraction: 0.9,
            max_depth: 4,
            nbest: DEFAULT_NBEST,
            em_tol: DEFAULT_TOL,
            em_max_iter: DEFAULT_MAX_ITER,
            seed: 1,
            drop_multi_nonheadword: false,
            strip_semantics: false,
            head_rules_path: None,
            acoustic_weight: None,
            ngram_order: DEFAULT_ORDER,
            katz_k: DEFAULT_K_GT,
            corpus: CorpusSource::Synthetic {
                trees: 500,
                seed: 1,
                confusion: ConfusionParams::default(),
            },
        }
    }
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad value `{v}` for `{key}`"))),
    }
}

impl ExperimentConfig {
    /// `key = value` lines; `#` starts a comment. Relative paths are taken
    /// relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        let mut synth_trees = 500;
        let mut synth_seed = 1;
        let mut confusion = ConfusionParams::default();
        let mut treebank = None;
        let mut lattices = None;
        let mut references = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let (k, v) = (k.trim(), v.trim().trim_matches('"'));
            let path = || base.join(v);
            match k {
                "splits" => c.splits = value(k, v)?,
                "train_fraction" => c.train_fraction = value(k, v)?,
                "max_depth" => c.max_depth = value(k, v)?,
                "nbest" => c.nbest = value(k, v)?,
                "em_tol" => c.em_tol = value(k, v)?,
                "em_max_iter" => c.em_max_iter = value(k, v)?,
                "seed" => c.seed = value(k, v)?,
                "drop_multi_nonheadword" => c.drop_multi_nonheadword = flag(k, v)?,
                "strip_semantics" => c.strip_semantics = flag(k, v)?,
                "head_rules" => c.head_rules_path = Some(path()),
                "acoustic_weight" => c.acoustic_weight = Some(value(k, v)?),
                "ngram_order" => c.ngram_order = value(k, v)?,
                "katz_k" => c.katz_k = value(k, v)?,
                "synthetic_trees" => synth_trees = value(k, v)?,
                "synthetic_seed" => synth_seed = value(k, v)?,
                "distractors" => confusion.distractors = value(k, v)?,
                "detour_prob" => confusion.detour_prob = value(k, v)?,
                "reference_mean" => confusion.reference_mean = value(k, v)?,
                "distractor_mean" => confusion.distractor_mean = value(k, v)?,
                "acoustic_sigma" => confusion.sigma = value(k, v)?,
                "treebank" => treebank = Some(path()),
                "lattices" => lattices = Some(path()),
                "references" => references = Some(path()),
                _ => return Err(Error::Config(format!("line {}: unknown key `{k}`", i + 1))),
            }
        }
        c.corpus = match (treebank, lattices) {
            (Some(treebank), Some(lattices)) => CorpusSource::Files {
                treebank,
                lattices,
                references,
            },
            (None, None) if references.is_none() => CorpusSource::Synthetic {
                trees: synth_trees,
                seed: synth_seed,
                confusion,
            },
            _ => return Err(Error::Config("`treebank` and `lattices` must be given together".into())),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        for (name, v) in [
            ("splits", self.splits),
            ("max_depth", self.max_depth),
            ("nbest", self.nbest),
            ("em_max_iter", self.em_max_iter),
            ("ngram_order", self.ngram_order),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.em_tol > 0.0) {
            return Err(Error::Config("em_tol must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let c = ExperimentConfig::parse(
            "splits = 2\nseed=7 # comment\nstrip_semantics = true\nsynthetic_trees = 60\nacoustic_weight = 0.5\n",
            Path::new("/tmp"),
        )
        .unwrap();
        assert_eq!(c.splits, 2);
        assert_eq!(c.seed, 7);
        assert!(c.strip_semantics && !c.drop_multi_nonheadword);
        assert_eq!(c.acoustic_weight, Some(0.5));
        assert!(matches!(c.corpus, CorpusSource::Synthetic { trees: 60, .. }));

        let c = ExperimentConfig::parse("treebank = t.txt\nlattices = l.txt\n", Path::new("/data")).unwrap();
        assert_eq!(
            c.corpus,
            CorpusSource::Files {
                treebank: "/data/t.txt".into(),
                lattices: "/data/l.txt".into(),
                references: None
            }
        );
        assert!(ExperimentConfig::parse("train_fraction = 1.0", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("splits = 0", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("colour = blue", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("treebank = t", Path::new(".")).is_err());
    }
}
