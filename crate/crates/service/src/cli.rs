use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use toxishield_core::curation::{
    build_parallel_corpus, lexicon_filter, read_jsonl_file, split, stratified_sample, write_jsonl, BinSpec,
    CorpusOptions, DatasetRecord, SplitSpec, StratifyKey, DEFAULT_QUOTA,
};
use toxishield_core::filter::Lexicon;
use toxishield_core::llm::{HttpChatClient, HttpClientConfig, ReframeConfig};
use toxishield_core::metrics::{
    binary_report, binary_table, multilabel_report, multilabel_table, tst_report, tst_table, DetoxMode,
    ReportOptions, ScoreRecord,
};
use toxishield_core::tokenizer::{tokenize, Vocab};
use toxishield_core::{BinaryLabel, LabelSet, TextSample, ToxicityScore};

use crate::config::ServiceConfig;
use crate::pipeline::Engine;
use crate::server;

#[derive(Debug, Parser)]
#[command(name = "toxishield", version, about = "Toxicity moderation for code-review comments")]
pub struct Cli {
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
    /// Filter, then Coach and Reframer for toxic input.
    Analyze(TextArg),
    Classify(TextArg),
    Detoxify(TextArg),
    #[command(subcommand)]
    Evaluate(Evaluate),
    #[command(subcommand)]
    Curate(Curate),
    /// Print WordPiece ids for a text.
    Tokenize {
        text: String,
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct TextArg {
    /// Literal text, or a path to a file holding it.
    pub input: String,
}

impl TextArg {
    fn sample(&self) -> Result<TextSample> {
        let path = Path::new(&self.input);
        let (id, body) = if path.is_file() {
            (path.display().to_string(), std::fs::read_to_string(path)?)
        } else {
            ("cli".to_string(), self.input.clone())
        };
        Ok(TextSample::new(id, body))
    }
}

#[derive(Debug, Subcommand)]
pub enum Evaluate {
    /// DETOX / FL / PRESERVE / J-Score from a JSONL score file.
    Tst {
        scorefile: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::NetReduction)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Binary or multi-label report from JSONL `{id, gold, pred}` lines.
    Cls {
        scorefile: PathBuf,
        #[arg(long)]
        skip_empty: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    NetReduction,
    StyleAccuracy,
}

impl From<ModeArg> for DetoxMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::NetReduction => DetoxMode::NetReduction,
            ModeArg::StyleAccuracy => DetoxMode::StyleAccuracy,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Curate {
    /// Score a JSONL corpus and sample up to `quota` per probability bin.
    Bin {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_QUOTA)]
        quota: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drop samples with any lexicon hit; writes the clean remainder.
    Filter {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Teacher rewrites for each toxic sample.
    Pair {
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded split into parts, e.g. `80/10/10`.
    Split {
        input: PathBuf,
        #[arg(long, default_value = "80/20")]
        ratios: String,
        #[arg(long)]
        stratify: bool,
        /// Directory for `<part>.jsonl` files.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ClsRecord {
    Binary { gold: BinaryLabel, pred: BinaryLabel },
    Multi { gold: LabelSet, pred: LabelSet },
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(value)?);
    } else {
        print!("{}", text());
    }
    Ok(())
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn read_samples(path: &Path) -> Result<Vec<TextSample>> {
    let records: Vec<DatasetRecord> = read_jsonl_file(path)?;
    Ok(records.iter().map(DatasetRecord::sample).collect())
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = ServiceConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Serve { bind } => {
            let engine = Arc::new(Engine::from_config(&cfg)?);
            let bind = bind.clone().unwrap_or_else(|| cfg.server.bind.clone());
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&bind).await?;
                tracing::info!(%bind, backend = %engine.classifier().kind(), "listening");
                server::serve(listener, server::router(engine, &cfg.server.cors_allow)).await
            })?;
        }
        Command::Analyze(t) | Command::Classify(t) | Command::Detoxify(t) => {
            let engine = Engine::from_config(&cfg)?;
            let sample = t.sample()?;
            let rt = tokio::runtime::Runtime::new()?;
            let value = rt.block_on(async {
                Ok::<_, anyhow::Error>(match &cli.command {
                    Command::Analyze(_) => serde_json::to_value(engine.analyze(&sample).await?)?,
                    Command::Classify(_) => serde_json::to_value(engine.classify(&sample).await?)?,
                    _ => serde_json::to_value(engine.detoxify(&sample).await?)?,
                })
            })?;
            let pretty = if cli.json { serde_json::to_string_pretty(&value)? } else { value.to_string() };
            println!("{pretty}");
        }
        Command::Evaluate(Evaluate::Tst { scorefile, mode, threshold }) => {
            let records: Vec<ScoreRecord> = read_jsonl_file(scorefile)?;
            let report = tst_report(records, (*mode).into(), *threshold)?;
            emit(cli.json, &report, || tst_table(&[("scores", &report)]))?;
        }
        Command::Evaluate(Evaluate::Cls { scorefile, skip_empty }) => {
            let records: Vec<ClsRecord> = read_jsonl_file(scorefile)?;
            let (mut bg, mut bp, mut mg, mut mp) = (vec![], vec![], vec![], vec![]);
            for r in records {
                match r {
                    ClsRecord::Binary { gold, pred } => {
                        bg.push(gold);
                        bp.push(pred);
                    }
                    ClsRecord::Multi { gold, pred } => {
                        mg.push(gold);
                        mp.push(pred);
                    }
                }
            }
            if !bg.is_empty() && !mg.is_empty() {
                bail!("score file mixes binary and multi-label records");
            }
            if !bg.is_empty() {
                let report = binary_report(&bp, &bg)?;
                emit(cli.json, &report, || binary_table(&[("scores", &report)]))?;
            } else {
                let report = multilabel_report(&mp, &mg, ReportOptions { skip_empty: *skip_empty })?;
                emit(cli.json, &report, || multilabel_table(&report))?;
            }
        }
        Command::Curate(Curate::Bin { input, quota, out }) => {
            let engine = Engine::from_config(&cfg)?;
            let samples = read_samples(input)?;
            let scored: Vec<(TextSample, ToxicityScore)> = samples
                .into_iter()
                .map(|s| engine.classifier().score(&s).map(|p| (s, p)))
                .collect::<Result<_, _>>()?;
            let outcome = stratified_sample(&scored, *quota, cli.seed, &BinSpec::default());
            for s in &outcome.shortfalls {
                eprintln!("bin {}: {} of {} available", s.bin, s.available, s.quota);
            }
            write_jsonl(sink(out)?, &outcome.candidates)?;
        }
        Command::Curate(Curate::Filter { input, out }) => {
            let lexicon = match &cfg.filter.lexicon_path {
                Some(p) => Lexicon::load(p, cfg.filter.anger_path.as_deref())?,
                None => Lexicon::default(),
            };
            let (kept, removed) = lexicon_filter(read_samples(input)?, &lexicon);
            eprintln!("kept {} removed {}", kept.len(), removed.len());
            write_jsonl(sink(out)?, &kept)?;
        }
        Command::Curate(Curate::Pair { input, concurrency, out }) => {
            let Some(endpoint) = cfg.llm.endpoint.clone() else {
                bail!("curate pair needs an LLM endpoint (llm.endpoint or LLM_ENDPOINT)");
            };
            let client = HttpChatClient::new(HttpClientConfig {
                endpoint,
                model: cfg.llm.model.clone(),
                api_key: cfg.api_key(),
            })?;
            let reframe = match &cfg.prompt.reframe_path {
                Some(p) => ReframeConfig::load(p)?,
                None => ReframeConfig::default(),
            };
            let opts = CorpusOptions { concurrency: *concurrency, reframe };
            let outcome = build_parallel_corpus(&read_samples(input)?, &client, &cfg.llm.gen, &opts);
            for f in &outcome.failures {
                eprintln!("{}: {}", f.id, f.error);
            }
            write_jsonl(sink(out)?, &outcome.pairs)?;
        }
        Command::Curate(Curate::Split { input, ratios, stratify, out_dir }) => {
            let key = if *stratify { StratifyKey::BinaryLabel } else { StratifyKey::None };
            let spec = SplitSpec::parse_ratios(ratios, cli.seed, key)?;
            let records: Vec<DatasetRecord> = read_jsonl_file(input)?;
            let parts = split(&records, &spec)?;
            for (name, items) in &parts {
                eprintln!("{name}: {}", items.len());
                if let Some(dir) = out_dir {
                    std::fs::create_dir_all(dir)?;
                    write_jsonl(std::fs::File::create(dir.join(format!("{name}.jsonl")))?, items)?;
                }
            }
            if out_dir.is_none() {
                let sizes: Vec<(&str, usize)> = parts.iter().map(|(n, v)| (n.as_str(), v.len())).collect();
                println!("{}", serde_json::to_string(&sizes)?);
            }
        }
        Command::Tokenize { text, vocab } => {
            let Some(path) = vocab.as_ref().or(cfg.filter.vocab_path.as_ref()) else {
                bail!("tokenize needs --vocab or filter.vocab_path");
            };
            let vocab = Vocab::load(path)?;
            let seq = tokenize(text, &vocab, cfg.tokenizer.max_len)?;
            emit(cli.json, &seq.ids, || {
                let pieces: Vec<&str> =
                    seq.content_ids().iter().map(|&id| vocab.token(id).unwrap_or("?")).collect();
                format!("{}\n{:?}\n", pieces.join(" "), &seq.ids[..seq.length])
            })?;
        }
    }
    Ok(())
}
