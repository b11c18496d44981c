//! The `coref` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::compression::{dequantize, eval_compressed, prune, quantize, sparsity};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluation::{benchmark, evaluate_parallel, render_table, run_ablations, AblationDelta, AblationSpec};
use crate::model::{ModelConfig, ModelParams};
use crate::resolver::{resolve_all, MentionMode, ResolveConfig};
use crate::textmodel::{generate_synthetic_corpus, read_documents, render_documents, split_corpus, write_documents, Document};
use crate::training::{train, train_from, TrainOutcome};

#[derive(Debug, Parser)]
#[command(name = "coref", version, about = "Desk-scale neural coreference resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus as JSON lines.
    GenCorpus {
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        vocab_size: usize,
        #[arg(long, default_value_t = 64)]
        max_len: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Shuffle a corpus into train.jsonl, dev.jsonl and test.jsonl (80/10/10).
    Split {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train a model and write its checkpoint.
    Train {
        /// Whole corpus; split with the run seed. Used when --train is absent.
        #[arg(long, default_value = "corpus.jsonl")]
        corpus: PathBuf,
        #[arg(long, requires = "dev")]
        train: Option<PathBuf>,
        #[arg(long, requires = "train")]
        dev: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
        #[arg(long, default_value = "model.bin")]
        out: PathBuf,
        /// Per-epoch log as JSON.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Resolve documents and write them with predicted clusters.
    Predict {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-document stage timings as JSON lines.
        #[arg(long)]
        timings: Option<PathBuf>,
        #[arg(long)]
        include_singletons: bool,
        #[command(flatten)]
        dims: Dims,
    },
    /// Score a model on gold documents.
    Evaluate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        input: PathBuf,
        /// Report file; the report is also printed.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add tokens/second (makes the report timing-dependent).
        #[arg(long)]
        throughput: bool,
    },
    /// Time repeated inference passes.
    Bench {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the base configuration and ablated variants on one split.
    Ablate {
        #[arg(long, default_value = "corpus.jsonl")]
        corpus: PathBuf,
        #[command(flatten)]
        settings: Settings,
        /// Comma-separated variants; all when omitted.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        #[arg(long, default_value = "synthetic")]
        dataset: String,
        /// Run variants concurrently (timings are then not comparable).
        #[arg(long)]
        parallel: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Global magnitude pruning, optionally followed by masked fine-tuning.
    Prune {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        sparsity: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        finetune_epochs: usize,
        #[arg(long, requires = "dev")]
        train: Option<PathBuf>,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Symmetric per-tensor int8 quantization.
    Quantize {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: PathBuf,
        /// Compare against the full model on these documents.
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long = "model")]
    path: PathBuf,
    #[arg(long, default_value_t = MentionMode::Gold)]
    mention_mode: MentionMode,
    #[arg(long, default_value_t = 3)]
    max_span_width: usize,
    /// Resolve this many documents concurrently.
    #[arg(long, default_value_t = 1)]
    parallel_docs: usize,
}

impl ModelArgs {
    fn resolve_config(&self) -> ResolveConfig {
        ResolveConfig {
            mode: self.mention_mode,
            max_span_width: self.max_span_width,
            include_singletons: false,
        }
    }
}

/// Config file plus flag overrides.
#[derive(Debug, Args)]
struct Settings {
    /// `key = value` file, or `default`.
    #[arg(long, default_value = "default")]
    config: String,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    /// Any other `key=value` override; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Settings {
    fn load(&self) -> Result<RunConfig> {
        let mut overrides: Vec<(String, String)> = Vec::new();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        let flags = [
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("batch_size", self.batch_size.map(|v| v.to_string())),
            ("learning_rate", self.learning_rate.map(|v| format!("{v:e}"))),
            ("seed", self.seed.map(|v| v.to_string())),
            ("dim", self.dim.map(|v| v.to_string())),
            ("depth", self.depth.map(|v| v.to_string())),
        ];
        overrides.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
        let cfg = RunConfig::load(Some(&self.config), &overrides)?;
        info!("effective config:\n{}", cfg.render().trim_end());
        Ok(cfg)
    }
}

/// Dimensions the caller expects the checkpoint to have.
#[derive(Debug, Args)]
struct Dims {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    att_dim: Option<usize>,
    #[arg(long)]
    aff_dim: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    no_attention: bool,
}

impl Dims {
    fn check(&self, model: &ModelParams) -> Result<()> {
        let have = model.config;
        let want = ModelConfig {
            dim: self.dim.unwrap_or(have.dim),
            att_dim: self.att_dim.unwrap_or(have.att_dim),
            aff_dim: self.aff_dim.unwrap_or(have.aff_dim),
            depth: self.depth.unwrap_or(have.depth),
            attention: have.attention && !self.no_attention,
        };
        let (expected, found) = (want.fingerprint(model.vocab()), model.fingerprint());
        if expected != found {
            return Err(Error::Fingerprint { expected, found });
        }
        Ok(())
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize") + "\n";
    print!("{text}");
    match path {
        Some(p) => write_text(p, &text),
        None => Ok(()),
    }
}

fn ensure_exists(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.exists() {
            return Err(Error::io(*p, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")));
        }
    }
    Ok(())
}

fn load_split(corpus: &Path, seed: u64) -> Result<(Vec<Document>, Vec<Document>)> {
    let docs = read_documents(corpus)?;
    let split = split_corpus(&docs, seed)?;
    let (train_docs, dev_docs, _) = split.select(&docs);
    Ok((train_docs.into_iter().cloned().collect(), dev_docs.into_iter().cloned().collect()))
}

fn log_outcome(outcome: &TrainOutcome, path: Option<&Path>) -> Result<()> {
    info!("best epoch {}", outcome.best_epoch);
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(&outcome.log).expect("log serializes") + "\n";
        write_text(p, &text)?;
    }
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenCorpus {
            n,
            seed,
            vocab_size,
            max_len,
            out,
        } => {
            let docs = generate_synthetic_corpus(n, seed, vocab_size, max_len)?;
            write_documents(&docs, &out)?;
            info!("wrote {} documents to {}", docs.len(), out.display());
        }
        Command::Split { corpus, seed, out_dir } => {
            let docs = read_documents(&corpus)?;
            let split = split_corpus(&docs, seed)?;
            let (tr, dv, te) = split.select(&docs);
            fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            for (name, part) in [("train", tr), ("dev", dv), ("test", te)] {
                let owned: Vec<Document> = part.into_iter().cloned().collect();
                write_text(&out_dir.join(format!("{name}.jsonl")), &render_documents(&owned))?;
                info!("{name}: {} documents", owned.len());
            }
        }
        Command::Train {
            corpus,
            train: train_path,
            dev,
            settings,
            out,
            log,
        } => {
            let cfg = settings.load()?;
            let (train_docs, dev_docs) = match (train_path, dev) {
                (Some(t), Some(d)) => {
                    ensure_exists(&[&t, &d])?;
                    (read_documents(&t)?, read_documents(&d)?)
                }
                _ => {
                    ensure_exists(&[&corpus])?;
                    load_split(&corpus, cfg.train.seed)?
                }
            };
            let outcome = train(&train_docs, &dev_docs, cfg.model, &cfg.train)?;
            log_outcome(&outcome, log.as_deref())?;
            outcome.model.save(&out)?;
            info!("checkpoint written to {}", out.display());
        }
        Command::Predict {
            model,
            input,
            out,
            timings,
            include_singletons,
            dims,
        } => {
            ensure_exists(&[&model.path, &input])?;
            let params = ModelParams::load(&model.path)?;
            dims.check(&params)?;
            let docs = read_documents(&input)?;
            let rc = ResolveConfig {
                include_singletons,
                ..model.resolve_config()
            };
            let resolutions = resolve_all(&docs, &params, &rc, model.parallel_docs)?;
            let predicted: Vec<Document> = docs.iter().zip(&resolutions).map(|(d, r)| r.to_document(d)).collect();
            write_documents(&predicted, &out)?;
            if let Some(p) = timings {
                let mut text = String::new();
                for (d, r) in docs.iter().zip(&resolutions) {
                    let line = serde_json::json!({ "id": d.id, "timings": r.timings });
                    text.push_str(&line.to_string());
                    text.push('\n');
                }
                write_text(&p, &text)?;
            }
        }
        Command::Evaluate {
            model,
            input,
            out,
            throughput,
        } => {
            ensure_exists(&[&model.path, &input])?;
            let params = ModelParams::load(&model.path)?;
            let docs = read_documents(&input)?;
            let start = web_time::Instant::now();
            let mut report = evaluate_parallel(&params, &docs, &model.resolve_config(), model.parallel_docs)?;
            if throughput {
                let tokens: usize = docs.iter().map(Document::len).sum();
                report.tokens_per_second = Some(tokens as f64 / start.elapsed().as_secs_f64().max(1e-9));
            }
            write_json(out.as_deref(), &report)?;
        }
        Command::Bench {
            model,
            input,
            repetitions,
            out,
        } => {
            ensure_exists(&[&model.path, &input])?;
            let params = ModelParams::load(&model.path)?;
            let docs = read_documents(&input)?;
            let report = benchmark(&params, &docs, repetitions, &model.resolve_config(), model.parallel_docs)?;
            write_json(out.as_deref(), &report)?;
        }
        Command::Ablate {
            corpus,
            settings,
            variants,
            dataset,
            parallel,
            out,
            table,
        } => {
            ensure_exists(&[&corpus])?;
            let cfg = settings.load()?;
            let specs: Vec<AblationSpec> = if variants.is_empty() {
                AblationDelta::ALL.into_iter().map(AblationSpec::from).collect()
            } else {
                variants
                    .iter()
                    .map(|v| v.parse::<AblationDelta>().map(AblationSpec::from))
                    .collect::<Result<_>>()?
            };
            let docs = read_documents(&corpus)?;
            let result = run_ablations(cfg.model, &cfg.train, &specs, &docs, cfg.train.seed, &dataset, parallel)?;
            let text = render_table(&result);
            eprint!("{text}");
            if let Some(p) = table {
                write_text(&p, &text)?;
            }
            write_json(out.as_deref(), &result)?;
        }
        Command::Prune {
            model,
            sparsity: target,
            out,
            finetune_epochs,
            train: train_path,
            dev,
            mut settings,
            report,
        } => {
            ensure_exists(&[&model.path])?;
            settings.epochs = Some(finetune_epochs.max(1));
            let full = ModelParams::load(&model.path)?;
            let (mut pruned, mask) = prune(&full, target)?;
            if finetune_epochs > 0 {
                let (Some(t), Some(d)) = (&train_path, &dev) else {
                    return Err(Error::Config("fine-tuning needs --train and --dev".into()));
                };
                ensure_exists(&[t, d])?;
                let cfg = settings.load()?;
                let outcome = train_from(pruned, &read_documents(t)?, &read_documents(d)?, &cfg.train, Some(&mask))?;
                pruned = outcome.model;
            }
            info!("achieved sparsity {:.4} (target {target})", sparsity(&pruned));
            pruned.save(&out)?;
            if let Some(d) = &dev {
                let cmp = eval_compressed(&full, &pruned, &read_documents(d)?, &model.resolve_config())?;
                write_json(report.as_deref(), &cmp)?;
            }
        }
        Command::Quantize { model, out, dev, report } => {
            ensure_exists(&[&model.path])?;
            let full = ModelParams::load(&model.path)?;
            let q = quantize(&full)?;
            let bytes = q.to_container().to_bytes();
            fs::write(&out, bytes).map_err(|e| Error::io(&out, e))?;
            if let Some(d) = &dev {
                ensure_exists(&[d])?;
                let cmp = eval_compressed(&full, &dequantize(&q), &read_documents(d)?, &model.resolve_config())?;
                write_json(report.as_deref(), &cmp)?;
            }
        }
    }
    Ok(())
}

/// Exit code for an error: 3 for a numerical abort, 2 for everything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonFinite(_) => 3,
        _ => 2,
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            exit_code(&e)
        }
    }
}
