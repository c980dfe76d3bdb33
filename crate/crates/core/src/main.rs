use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dopgram::corpus::synth::{build_synthetic_corpus, ConfusionParams, Generator, TRAVEL_GENERATOR};
use dopgram::corpus::{load_wordgraphs, read_treebank, strip_semantics, write_treebank, write_wordgraphs, ParseTree};
use dopgram::decoder::Decoder;
use dopgram::em;
use dopgram::fragments::{count_fragments, headword_filter, implied_start, rf_estimate_with_start, HeadRules, UNBOUNDED};
use dopgram::harness::{run_experiment_with, ExperimentConfig, ExperimentCorpus};
use dopgram::stsg::Stsg;
use dopgram::{Error, Result};

#[derive(Parser)]
#[command(name = "dopgram", version, about = "DOP language models over recognizer word-graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract fragments from a treebank and write the relative-frequency grammar.
    Extract {
        #[arg(long)]
        treebank: PathBuf,
        /// Maximum fragment depth; 0 means unbounded.
        #[arg(long, default_value_t = 4)]
        max_depth: usize,
        #[arg(long)]
        out: PathBuf,
        /// Remove semantic labels before extraction.
        #[arg(long)]
        strip_semantics: bool,
        /// Head-percolation table used with --max-nonhead.
        #[arg(long, requires = "max_nonhead")]
        head_rules: Option<PathBuf>,
        /// Drop fragments with more than this many non-headwords.
        #[arg(long, requires = "head_rules")]
        max_nonhead: Option<usize>,
        /// Also write the raw fragment counts here.
        #[arg(long)]
        counts: Option<PathBuf>,
    },
    /// Reestimate a grammar by EM over the treebank's derivation trellises.
    TrainEm {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        treebank: PathBuf,
        #[arg(long, default_value_t = em::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = em::DEFAULT_MAX_ITER)]
        max_iter: usize,
        /// Output grammar; defaults to overwriting --grammar.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the most probable string of every lattice in a file.
    Decode {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        lattices: PathBuf,
        #[arg(long, default_value_t = dopgram::decoder::DEFAULT_NBEST)]
        nbest: usize,
        /// Defaults to 1 for lattices with acoustic scores, 0 otherwise.
        #[arg(long)]
        acoustic_weight: Option<f64>,
    },
    /// Run the split/train/decode/score comparison described by a config file.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a synthetic treebank with references and confusion lattices.
    Synth {
        #[arg(long, default_value_t = 500)]
        trees: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory receiving treebank.txt, lattices.txt and references.txt.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn read_trees(path: &Path) -> Result<Vec<ParseTree>> {
    read_treebank(&fs::read_to_string(path)?)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Extract {
            treebank,
            max_depth,
            out,
            strip_semantics: strip,
            head_rules,
            max_nonhead,
            counts,
        } => {
            let mut trees = read_trees(&treebank)?;
            if strip {
                trees = trees.iter().map(strip_semantics).collect();
            }
            let depth = if max_depth == 0 { UNBOUNDED } else { max_depth };
            let table = count_fragments(&trees, depth)?;
            let start = implied_start(&table)?;
            let table = match (head_rules, max_nonhead) {
                (Some(p), Some(k)) => headword_filter(&table, &HeadRules::parse(&fs::read_to_string(p)?)?, k)?,
                _ => table,
            };
            if let Some(p) = counts {
                fs::write(p, table.to_tsv())?;
            }
            let g = rf_estimate_with_start(&table, start)?;
            fs::write(&out, g.to_tsv())?;
            eprintln!("{} fragments from {} trees", g.len(), trees.len());
        }
        Command::TrainEm {
            grammar,
            treebank,
            tol,
            max_iter,
            out,
        } => {
            let g0 = Stsg::from_tsv(&fs::read_to_string(&grammar)?)?;
            let trees = read_trees(&treebank)?;
            let st = em::train_with(&trees, &g0, tol, max_iter, |k, ce, _| {
                eprintln!("iter {k} cross_entropy_bits {ce:.9}");
            })?;
            fs::write(out.as_ref().unwrap_or(&grammar), st.grammar.to_tsv())?;
        }
        Command::Decode {
            grammar,
            lattices,
            nbest,
            acoustic_weight,
        } => {
            let g = Stsg::from_tsv(&fs::read_to_string(&grammar)?)?;
            let decoder = Decoder::new(&g);
            let mut ok = true;
            for (id, lattice) in load_wordgraphs(&fs::read_to_string(&lattices)?)? {
                let aw = acoustic_weight.unwrap_or_else(|| dopgram::decoder::default_acoustic_weight(&lattice));
                match decoder.best_string(&lattice, nbest, aw) {
                    Ok(r) => println!(
                        "{id} {} {} {}",
                        r.best_string.join(" "),
                        r.string_logprob,
                        u8::from(r.fallback_used)
                    ),
                    Err(e) => {
                        eprintln!("lattice {id}: {e}");
                        ok = false;
                    }
                }
            }
            return Ok(ok);
        }
        Command::Eval { config, out } => {
            let base = config.parent().unwrap_or(Path::new("."));
            let cfg = ExperimentConfig::parse(&fs::read_to_string(&config)?, base)?;
            let corpus = ExperimentCorpus::from_source(&cfg.corpus)?;
            let table = run_experiment_with(&corpus, &cfg, |line| eprintln!("{line}"))?;
            fs::write(out, table.to_tsv())?;
        }
        Command::Synth { trees, seed, out_dir } => {
            let generator = Generator::parse(TRAVEL_GENERATOR)?;
            let c = build_synthetic_corpus(&generator, trees, seed, &ConfusionParams::default())?;
            fs::create_dir_all(&out_dir)?;
            fs::write(out_dir.join("treebank.txt"), write_treebank(&c.trees))?;
            let ids: Vec<String> = (1..=c.lattices.len()).map(|i| i.to_string()).collect();
            fs::write(
                out_dir.join("lattices.txt"),
                write_wordgraphs(ids.iter().map(String::as_str).zip(&c.lattices)),
            )?;
            let refs: String = c.references.iter().map(|r| r.join(" ") + "\n").collect();
            fs::write(out_dir.join("references.txt"), refs)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Io(_) = e {
                return ExitCode::from(2);
            }
            ExitCode::FAILURE
        }
    }
}
