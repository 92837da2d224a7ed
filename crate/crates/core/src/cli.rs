//! The `codeanon` command line.
//!
//! Every subcommand writes its outputs atomically and prints one JSON
//! summary line on stdout. Exit status is 0 on success, 1 for data errors
//! and 2 for usage errors.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::builder::TypedValueParser;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::anonymizer::{
    apply_regime, deanonymize, AnonymizationMap, AnonymizedSnippet, Regime, Sampling,
    COMPLETION_BUDGET, DEFAULT_BUDGET,
};
use crate::corpus::{read_corpus, write_corpus, Corpus, Format, OnError, ReadOptions};
use crate::error::Error;
use crate::formats::{
    read_jsonl, to_line, write_jsonl, AnonymizedLine, ChunkLine, CompletionPredictionLine,
    PointerLine, VarMisuseLine, VarMisusePredictionLine,
};
use crate::io::write_atomic;
use crate::metrics::{self, MetricsReport, RankedPrediction, VarMisusePrediction, DEFAULT_K};
use crate::prep::{self, ExtractConfig, VarMisuseExample};
use crate::reserved::unescape;
use crate::vocab::{build_vocabulary, count_values, coverage, IdLayout, Vocabulary};

#[derive(Debug, Parser)]
#[command(name = "codeanon", version, about = "OOV identifier anonymization for AST token corpora")]
pub struct Cli {
    /// Global seed; per-item seeds are derived from it.
    #[arg(long, global = true, env = "CODEANON_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Worker threads. Output does not depend on this.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,

    /// Input corpus format.
    #[arg(long, global = true, default_value = "token-jsonl")]
    pub format: Format,

    /// Skip and log unparsable corpus lines instead of failing.
    #[arg(long, global = true)]
    pub skip_bad_lines: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Oov,
    Full,
    Unk,
    None,
}

impl RegimeArg {
    fn regime(self) -> Option<Regime> {
        match self {
            RegimeArg::Oov => Some(Regime::OovAnon),
            RegimeArg::Full => Some(Regime::FullAnon),
            RegimeArg::Unk => Some(Regime::Unk),
            RegimeArg::None => None,
        }
    }

    fn name(self) -> &'static str {
        self.regime().map_or("none", Regime::as_str)
    }

    fn needs_vocab(self) -> bool {
        matches!(self, RegimeArg::Oov | RegimeArg::Unk)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalTask {
    Completion,
    Varmisuse,
    Aggregate,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input corpus file.
    #[arg(short, long)]
    pub input: PathBuf,

    /// py150-style file list giving the source path of each ast-json line.
    #[arg(long)]
    pub paths: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RegimeArgs {
    #[arg(long, value_enum, default_value = "none")]
    pub regime: RegimeArg,

    /// Vocabulary file (required for the oov and unk regimes).
    #[arg(long)]
    pub vocab: Option<PathBuf>,

    /// Placeholder budget M (default 1000; 500 for `chunk`).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub placeholders: Option<u32>,

    /// Assign placeholders in first-occurrence order instead of sampling.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count values and write the top-N vocabulary.
    Vocab {
        #[command(flatten)]
        input: InputArgs,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 50_000)]
        vocab_size: usize,
    },
    /// Rewrite values under an identifier regime (or undo it with --restore).
    Anonymize {
        #[command(flatten)]
        input: InputArgs,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        regime: RegimeArgs,
        /// Read anonymized lines and write the original corpus back.
        #[arg(long)]
        restore: bool,
    },
    /// Drop snippets whose (type, value) sequence repeats an earlier one.
    Dedup {
        #[command(flatten)]
        input: InputArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Split by repository into train and test corpora.
    Split {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value_t = 0.33)]
        test_fraction: f64,
    },
    /// Cut snippets into overlapping completion chunks.
    Chunk {
        #[command(flatten)]
        input: InputArgs,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = prep::DEFAULT_MAX_LEN, value_parser = clap::value_parser!(u32).range(1..).map(|v| v as usize))]
        max_len: usize,
        #[arg(long, default_value_t = prep::DEFAULT_STRIDE, value_parser = clap::value_parser!(u32).range(1..).map(|v| v as usize))]
        stride: usize,
        #[command(flatten)]
        regime: RegimeArgs,
    },
    /// Build the variable-misuse dataset from top-level functions.
    Varmisuse {
        #[command(flatten)]
        input: InputArgs,
        #[arg(short, long)]
        output: PathBuf,
        /// Node types whose values are user-defined variables.
        #[arg(long, value_delimiter = ',', default_value = "NameLoad,NameStore,NameParam")]
        variable_types: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "FunctionDef,AsyncFunctionDef")]
        function_types: Vec<String>,
        #[arg(long, default_value_t = 250)]
        max_nodes: usize,
        #[arg(long, default_value_t = 3)]
        buggy_copies: usize,
        #[arg(long, default_value_t = 3)]
        clean_copies: usize,
        #[command(flatten)]
        regime: RegimeArgs,
    },
    /// Pointer supervision (vocabulary id and copy positions) for chunks.
    PointerTargets {
        /// Completion chunk file.
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, default_value_t = COMPLETION_BUDGET, value_parser = clap::value_parser!(u32).range(1..))]
        placeholders: u32,
    },
    /// Score prediction files, or aggregate report files.
    Eval {
        #[arg(long, value_enum)]
        task: EvalTask,
        /// Chunk file (completion) or variable-misuse file.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Report files to aggregate.
        #[arg(long, num_args = 1..)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_K, value_parser = clap::value_parser!(u32).range(1..).map(|v| v as usize))]
        k: usize,
        /// Score UNK truths as zero (UNK-replacement baseline).
        #[arg(long)]
        unk_zero: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Corpus statistics, with vocabulary coverage if a vocabulary is given.
    Stats {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<Value> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs as usize)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", cli.jobs)))?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> CliResult<Value> {
    match &cli.command {
        Command::Vocab {
            input,
            output,
            vocab_size,
        } => {
            let corpus = load(cli, input)?;
            let freq = count_values(&corpus);
            let vocab = build_vocabulary(&freq, *vocab_size);
            vocab.write(output)?;
            Ok(json!({
                "command": "vocab",
                "output": output.display().to_string(),
                "snippets": corpus.len(),
                "unique_values": freq.len(),
                "entries": vocab.len(),
                "coverage": coverage(&vocab, &corpus),
            }))
        }
        Command::Anonymize {
            input,
            output,
            regime,
            restore,
        } => {
            if *restore {
                restore_corpus(&input.input, output)
            } else {
                anonymize_corpus(cli, input, output, regime)
            }
        }
        Command::Dedup { input, output } => {
            let corpus = load(cli, input)?;
            let (kept, report) = prep::dedup(&corpus);
            write_corpus(&kept, output)?;
            Ok(json!({
                "command": "dedup",
                "output": output.display().to_string(),
                "kept": report.kept,
                "removed": report.removed,
            }))
        }
        Command::Split {
            input,
            train,
            test,
            test_fraction,
        } => {
            if !(*test_fraction > 0.0 && *test_fraction < 1.0) {
                return Err(CliError::Usage(format!(
                    "--test-fraction must lie in (0, 1), got {test_fraction}"
                )));
            }
            let corpus = load(cli, input)?;
            let (train_corpus, test_corpus) =
                prep::split_by_repository(&corpus, *test_fraction, cli.seed)?;
            write_corpus(&train_corpus, train)?;
            write_corpus(&test_corpus, test)?;
            Ok(json!({
                "command": "split",
                "train": train_corpus.len(),
                "test": test_corpus.len(),
                "test_repositories": test_corpus.snippets.iter().map(|s| s.repository.as_str()).collect::<BTreeSet<_>>().len(),
            }))
        }
        Command::Chunk {
            input,
            output,
            max_len,
            stride,
            regime,
        } => {
            if stride > max_len {
                return Err(CliError::Usage(format!(
                    "--stride {stride} exceeds --max-len {max_len}"
                )));
            }
            let corpus = load(cli, input)?;
            let (vocab, budget, sampling) = regime_setup(cli, regime, COMPLETION_BUDGET)?;
            let lines: Vec<Vec<String>> = corpus
                .snippets
                .par_iter()
                .map(|s| {
                    prep::chunk(s, *max_len, *stride)
                        .into_iter()
                        .map(|mut c| {
                            let key = format!("{}@{}", c.snippet_id, c.start_offset);
                            let view = crate::corpus::Snippet::new(key, c.nodes);
                            let (rewritten, _) =
                                apply_regime(&view, regime.regime.regime(), &vocab, budget, sampling)
                                    .map_err(|e| e.in_snippet(&view.id))?;
                            c.nodes = rewritten.nodes;
                            Ok(to_line(&ChunkLine::from(&c)))
                        })
                        .collect::<Result<Vec<_>, Error>>()
                })
                .collect::<Result<_, Error>>()?;
            let chunks: usize = lines.iter().map(Vec::len).sum();
            crate::corpus::write_lines(output, lines.into_iter().flatten())?;
            Ok(json!({
                "command": "chunk",
                "output": output.display().to_string(),
                "snippets": corpus.len(),
                "chunks": chunks,
                "regime": regime.regime.name(),
                "placeholders": budget,
            }))
        }
        Command::Varmisuse {
            input,
            output,
            variable_types,
            function_types,
            max_nodes,
            buggy_copies,
            clean_copies,
            regime,
        } => {
            let corpus = load(cli, input)?;
            let config = ExtractConfig {
                function_types: function_types.iter().cloned().collect(),
                variable_types: variable_types.iter().cloned().collect(),
                max_nodes: *max_nodes,
                ..ExtractConfig::default()
            };
            let (vocab, budget, sampling) = regime_setup(cli, regime, DEFAULT_BUDGET)?;
            let functions = prep::extract_functions(&corpus, &config);
            let examples = prep::make_varmisuse_dataset(
                &functions,
                *buggy_copies,
                *clean_copies,
                &config.variable_types,
                cli.seed,
            );
            let rendered: Vec<VarMisuseLine> = examples
                .par_iter()
                .map(|e| {
                    e.with_regime(regime.regime.regime(), &vocab, budget, sampling)
                        .map(|e| VarMisuseLine::from(&e))
                        .map_err(|err| err.in_snippet(&e.example_id))
                })
                .collect::<Result<_, Error>>()?;
            write_jsonl(output, &rendered)?;
            let with_bug = examples
                .iter()
                .filter(|e| e.is_buggy)
                .map(|e| e.function_id.as_str())
                .collect::<std::collections::HashSet<_>>()
                .len();
            Ok(json!({
                "command": "varmisuse",
                "output": output.display().to_string(),
                "functions": functions.len(),
                "examples": rendered.len(),
                "buggy": examples.iter().filter(|e| e.is_buggy).count(),
                "clean_only_functions": functions.len() - with_bug,
                "regime": regime.regime.name(),
            }))
        }
        Command::PointerTargets {
            input,
            output,
            vocab,
            placeholders,
        } => {
            let vocab = Vocabulary::read(vocab)?;
            let layout = IdLayout::new(*placeholders);
            let chunks = read_chunks(input)?;
            let lines: Vec<PointerLine> = chunks
                .par_iter()
                .map(|c| PointerLine::new(c, &prep::pointer_targets(c, &vocab, layout)))
                .collect();
            write_jsonl(output, &lines)?;
            Ok(json!({
                "command": "pointer-targets",
                "output": output.display().to_string(),
                "chunks": lines.len(),
                "targets": lines.iter().map(|l| l.targets.len()).sum::<usize>(),
                "id_space": layout.size(&vocab),
            }))
        }
        Command::Eval {
            task,
            truth,
            predictions,
            reports,
            k,
            unk_zero,
            output,
        } => {
            let (report, table) = match task {
                EvalTask::Aggregate => {
                    if reports.is_empty() {
                        return Err(CliError::Usage("--reports is required for aggregate".into()));
                    }
                    let parsed = reports
                        .iter()
                        .map(|p| read_report(p))
                        .collect::<Result<Vec<_>, Error>>()?;
                    let agg = metrics::aggregate(&parsed);
                    (serde_json::to_value(&agg).expect("report serializes"), agg.to_string())
                }
                _ => {
                    let (Some(truth), Some(predictions)) = (truth, predictions) else {
                        return Err(CliError::Usage("--truth and --predictions are required".into()));
                    };
                    let report = if *task == EvalTask::Completion {
                        eval_completion(truth, predictions, *k, *unk_zero)?
                    } else {
                        eval_varmisuse(truth, predictions)?
                    };
                    (serde_json::to_value(&report).expect("report serializes"), report.to_string())
                }
            };
            eprintln!("{table}");
            if let Some(out) = output {
                let text = serde_json::to_string_pretty(&report).expect("report serializes");
                write_atomic(out, |f| std::io::Write::write_all(f, format!("{text}\n").as_bytes()))?;
            }
            Ok(json!({ "command": "eval", "report": report }))
        }
        Command::Stats { input, vocab } => {
            let corpus = load(cli, input)?;
            let freq = count_values(&corpus);
            let max_unique = corpus
                .snippets
                .iter()
                .map(|s| s.values().collect::<HashSet<_>>().len())
                .max()
                .unwrap_or(0);
            let mut summary = json!({
                "command": "stats",
                "snippets": corpus.len(),
                "nodes": corpus.snippets.iter().map(|s| s.len()).sum::<usize>(),
                "values": freq.values().sum::<u64>(),
                "unique_values": freq.len(),
                "max_unique_values_per_snippet": max_unique,
                "repositories": corpus.snippets.iter().map(|s| s.repository.as_str()).collect::<BTreeSet<_>>().len(),
            });
            if let Some(path) = vocab {
                let v = Vocabulary::read(path)?;
                summary["vocab_entries"] = json!(v.len());
                summary["coverage"] = json!(coverage(&v, &corpus));
            }
            Ok(summary)
        }
    }
}

fn load(cli: &Cli, input: &InputArgs) -> CliResult<Corpus> {
    let source_paths = match &input.paths {
        Some(p) => Some(
            fs::read_to_string(p)
                .map_err(|e| Error::io(p, e))?
                .lines()
                .map(str::to_string)
                .collect(),
        ),
        None => None,
    };
    let options = ReadOptions {
        format: cli.format,
        on_error: if cli.skip_bad_lines {
            OnError::SkipAndLog
        } else {
            OnError::FailFast
        },
        source_paths,
    };
    Ok(read_corpus(&input.input, &options)?.corpus)
}

fn regime_setup(cli: &Cli, args: &RegimeArgs, default_budget: u32) -> CliResult<(Vocabulary, u32, Sampling)> {
    let vocab = match (&args.vocab, args.regime.needs_vocab()) {
        (Some(path), _) => Vocabulary::read(path)?,
        (None, true) => {
            return Err(CliError::Usage(format!(
                "--regime {} needs --vocab",
                args.regime.name()
            )))
        }
        (None, false) => Vocabulary::empty(),
    };
    let sampling = if args.deterministic {
        Sampling::Deterministic
    } else {
        Sampling::Seeded(cli.seed)
    };
    Ok((vocab, args.placeholders.unwrap_or(default_budget), sampling))
}

fn anonymize_corpus(cli: &Cli, input: &InputArgs, output: &Path, args: &RegimeArgs) -> CliResult<Value> {
    let corpus = load(cli, input)?;
    let (vocab, budget, sampling) = regime_setup(cli, args, DEFAULT_BUDGET)?;
    let regime = args.regime.regime();
    let lines: Vec<String> = corpus
        .snippets
        .par_iter()
        .map(|s| {
            let (rewritten, map) = apply_regime(s, regime, &vocab, budget, sampling)
                .map_err(|e| e.in_snippet(&s.id))?;
            Ok(to_line(&AnonymizedLine::new(&rewritten, &map, args.regime.name())))
        })
        .collect::<Result<_, Error>>()?;
    crate::corpus::write_lines(output, lines)?;
    Ok(json!({
        "command": "anonymize",
        "output": output.display().to_string(),
        "snippets": corpus.len(),
        "regime": args.regime.name(),
        "placeholders": budget,
    }))
}

fn restore_corpus(input: &Path, output: &Path) -> CliResult<Value> {
    let lines: Vec<(usize, AnonymizedLine)> = read_jsonl(input)?;
    let at_line = |line: usize, e: Error| Error::Parse {
        path: input.display().to_string(),
        line,
        message: e.to_string(),
    };
    let snippets = lines
        .par_iter()
        .map(|(line, l)| {
            let snippet = l.snippet();
            if l.regime == "none" {
                let mut out = snippet;
                for v in out.nodes.iter_mut().filter_map(|n| n.value.as_mut()) {
                    *v = unescape(v).into_owned();
                }
                return Ok(out);
            }
            let regime: Regime = l
                .regime
                .parse()
                .map_err(|m: String| at_line(*line, Error::Record(m)))?;
            let budget = l.map.iter().map(|(_, k)| *k).max().unwrap_or(1);
            let map = AnonymizationMap::new(l.map.clone(), budget).map_err(|e| at_line(*line, e))?;
            deanonymize(&AnonymizedSnippet {
                snippet,
                map,
                regime,
            })
            .map_err(|e| at_line(*line, e))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let corpus = Corpus::new(snippets, input.display().to_string());
    write_corpus(&corpus, output)?;
    Ok(json!({
        "command": "anonymize",
        "restore": true,
        "output": output.display().to_string(),
        "snippets": corpus.len(),
    }))
}

fn read_chunks(path: &Path) -> Result<Vec<prep::CompletionChunk>, Error> {
    read_jsonl::<ChunkLine>(path)?
        .into_iter()
        .map(|(line, c)| {
            c.chunk().map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

fn read_report(path: &Path) -> Result<MetricsReport, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    // Accept both bare reports and `eval` summary lines.
    let report = value.get("report").cloned().unwrap_or(value);
    serde_json::from_value(report).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 1,
        message: e.to_string(),
    })
}

fn eval_completion(truth: &Path, predictions: &Path, k: usize, unk_zero: bool) -> Result<MetricsReport, Error> {
    let mut truths: HashMap<(String, u32), String> = HashMap::new();
    for chunk in read_chunks(truth)? {
        for (i, node) in chunk.nodes.iter().enumerate().skip(chunk.loss_start) {
            if let Some(v) = node.value() {
                let pos = (chunk.start_offset + i + 1) as u32;
                truths.insert((chunk.snippet_id.clone(), pos), v.to_string());
            }
        }
    }
    let mut ranked = Vec::new();
    let mut gold = Vec::new();
    for (line, p) in read_jsonl::<CompletionPredictionLine>(predictions)? {
        let at_line = |message: String| Error::Parse {
            path: predictions.display().to_string(),
            line,
            message,
        };
        let value = truths
            .get(&(p.sid.clone(), p.pos))
            .ok_or_else(|| at_line(format!("no scored value at {}:{}", p.sid, p.pos)))?;
        ranked.push(RankedPrediction::new(p.pos, p.cands).map_err(|e| at_line(e.to_string()))?);
        gold.push(value.clone());
    }
    let mrr = metrics::mrr_at_k(&ranked, &gold, k, unk_zero)?;
    Ok(MetricsReport::completion(mrr, ranked.len()))
}

fn eval_varmisuse(truth: &Path, predictions: &Path) -> Result<MetricsReport, Error> {
    let examples: Vec<VarMisuseExample> = read_jsonl::<VarMisuseLine>(truth)?
        .into_iter()
        .map(|(_, l)| l.into())
        .collect();
    let preds: Vec<VarMisusePrediction> = read_jsonl::<VarMisusePredictionLine>(predictions)?
        .into_iter()
        .map(|(_, l)| l.into())
        .collect();
    metrics::varmisuse_scores(&preds, &examples)
}
