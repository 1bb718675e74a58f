//! `slu` — command-line front end for the contextual SLU toolkit:
//! corpus simulation and recombination, vocabulary building, training,
//! evaluation, attention inspection, and the full experiment grid.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use slu_core::config::ExperimentConfig;
use slu_core::corpus::{read_jsonl, write_jsonl, Dialogue};
use slu_core::encoders::EncoderKind;
use slu_core::eval::{evaluate_model, format_report};
use slu_core::model::Model;
use slu_core::pipeline::{build_recombined_dataset, LabelSpace, RecombinationSpec, Vocabulary};
use slu_core::sim::{generate_corpus, CorpusCounts};
use slu_core::train::train;

#[derive(Parser)]
#[command(name = "slu", version, about = "Contextual spoken language understanding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Line-oriented key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured corpus directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Scale preset: `full` (published recipe) or `desk` (single CPU).
    #[arg(long)]
    preset: Option<String>,
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.preset {
            cfg.apply_preset(p)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(d) = &self.data {
            cfg.data_dir = d.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the six simulated corpus files.
    Simulate {
        #[command(flatten)]
        common: ConfigArgs,
        /// Divide every split size by this factor (1 = published counts).
        #[arg(long, default_value_t = 1)]
        scale: usize,
    },
    /// Splice single-domain dialogues into a recombined multi-domain corpus.
    Recombine {
        #[command(flatten)]
        common: ConfigArgs,
        /// Recombinations per ordered domain pair.
        #[arg(long, default_value_t = 10_000)]
        per_pair: usize,
    },
    /// Build the token vocabulary from the training splits.
    BuildVocab {
        #[command(flatten)]
        common: ConfigArgs,
        /// Admit tokens seen strictly more often than this.
        #[arg(long)]
        min_count: Option<usize>,
    },
    /// Train a model.
    Train {
        #[command(flatten)]
        common: ConfigArgs,
        /// Context encoder: ed, mn, or sden.
        #[arg(long)]
        encoder: Option<String>,
        /// Add the recombined corpus to the training set.
        #[arg(long)]
        use_recombined: bool,
    },
    /// Evaluate a checkpoint and dump per-turn predictions.
    Evaluate {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Corpus file to evaluate, relative to the data directory.
        #[arg(long, default_value = "multi_test.jsonl")]
        split: String,
    },
    /// Print per-history-utterance context scores for one user turn.
    AttentionTrace {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Corpus file holding the dialogue, relative to the data directory.
        #[arg(long, default_value = "multi_test.jsonl")]
        split: String,
        #[arg(long)]
        dialogue: String,
        /// 1-based turn index of the user turn to inspect.
        #[arg(long)]
        turn: usize,
    },
    /// Train and evaluate the full {ed,mn,sden} x {±recombined} grid.
    Reproduce {
        #[command(flatten)]
        common: ConfigArgs,
        /// Seeds per configuration; reported as mean ± stddev.
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        /// Cap on organic multi-domain training dialogues (0 = all).
        #[arg(long, default_value_t = 50)]
        limit_multi: usize,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = dispatch(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(2);
    }
}

const TRAIN_SPLITS: [&str; 4] = [
    "movies_train.jsonl",
    "find_restaurants_train.jsonl",
    "reserve_restaurant_train.jsonl",
    "multi_train.jsonl",
];
const RECOMBINED_FILE: &str = "recombined_train.jsonl";

fn load_split(data_dir: &Path, name: &str) -> Result<Vec<Dialogue>> {
    let path = data_dir.join(name);
    read_jsonl(&path).with_context(|| format!("reading corpus {}", path.display()))
}

/// `limit_multi` caps the organic multi-domain training dialogues
/// (0 = no cap). The context encoders are most interesting when
/// multi-domain supervision is scarce, so the reproduction grid trains
/// with a small cap while `train` defaults to the full split.
fn load_training_set(
    cfg: &ExperimentConfig,
    use_recombined: bool,
    limit_multi: usize,
) -> Result<Vec<Dialogue>> {
    let mut all = Vec::new();
    for name in TRAIN_SPLITS {
        let mut split = load_split(&cfg.data_dir, name)?;
        if name == "multi_train.jsonl" && limit_multi > 0 {
            split.truncate(limit_multi);
        }
        all.extend(split);
    }
    if use_recombined {
        all.extend(load_split(&cfg.data_dir, RECOMBINED_FILE)?);
    }
    Ok(all)
}

fn load_vocab(cfg: &ExperimentConfig) -> Result<Vocabulary> {
    let path = cfg.vocab_path();
    Vocabulary::load(&path).with_context(|| {
        format!(
            "reading vocabulary {} (run `slu build-vocab` first)",
            path.display()
        )
    })
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { common, scale } => {
            let cfg = common.build()?;
            let counts = CorpusCounts::default().scaled(scale);
            let out = common.out.unwrap_or(cfg.data_dir);
            generate_corpus(cfg.seed, &counts, &out)?;
            println!("wrote {} corpus files to {}", 6, out.display());
            Ok(())
        }
        Command::Recombine { common, per_pair } => {
            let cfg = common.build()?;
            let singles: Vec<(&str, Vec<Dialogue>)> = [
                ("movies", "movies_train.jsonl"),
                ("find", "find_restaurants_train.jsonl"),
                ("reserve", "reserve_restaurant_train.jsonl"),
            ]
            .into_iter()
            .map(|(tag, file)| Ok((tag, load_split(&cfg.data_dir, file)?)))
            .collect::<Result<_>>()?;
            let datasets: Vec<(&str, &[Dialogue])> = singles
                .iter()
                .map(|(tag, d)| (*tag, d.as_slice()))
                .collect();
            let spec = RecombinationSpec { per_pair };
            let recombined = build_recombined_dataset(&spec, &datasets, cfg.seed)?;
            let out = cfg.data_dir.join(RECOMBINED_FILE);
            write_jsonl(&out, &recombined)?;
            println!("wrote {} recombined dialogues to {}", recombined.len(), out.display());
            Ok(())
        }
        Command::BuildVocab { common, min_count } => {
            let cfg = common.build()?;
            let splits: Vec<Vec<Dialogue>> = TRAIN_SPLITS
                .iter()
                .map(|name| load_split(&cfg.data_dir, name))
                .collect::<Result<_>>()?;
            let refs: Vec<&[Dialogue]> = splits.iter().map(|s| s.as_slice()).collect();
            let vocab = Vocabulary::build(&refs, min_count.unwrap_or(cfg.min_count))?;
            let out = cfg.vocab_path();
            vocab.save(&out)?;
            println!("wrote {} tokens to {}", vocab.len(), out.display());
            Ok(())
        }
        Command::Train {
            common,
            encoder,
            use_recombined,
        } => {
            let mut cfg = common.build()?;
            if let Some(e) = &encoder {
                cfg.set("encoder", e)?;
            }
            if use_recombined {
                cfg.use_recombined = true;
            }
            let (_, result) = run_training(&cfg)?;
            println!(
                "trained {} steps; final loss {:.4}; checkpoint {}",
                result.steps_run,
                result.final_loss,
                result.checkpoint.display()
            );
            if let Some(f) = result.best_dev_fer {
                println!("best dev frame error rate: {f:.2}%");
            }
            Ok(())
        }
        Command::Evaluate {
            common,
            checkpoint,
            split,
        } => {
            let cfg = common.build()?;
            let model = Model::<f32>::load(&checkpoint)
                .with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
            let vocab = load_vocab(&cfg)?;
            let labels = LabelSpace::new();
            let dialogues = load_split(&cfg.data_dir, &split)?;
            let (report, records) =
                evaluate_model(&model, &dialogues, &vocab, &labels, cfg.batch)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            let report_path = cfg.out_dir.join("eval_report.json");
            std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
            let dump_path = cfg.out_dir.join("predictions.jsonl");
            let mut dump = String::new();
            for r in &records {
                dump.push_str(&serde_json::to_string(r)?);
                dump.push('\n');
            }
            std::fs::write(&dump_path, dump)?;
            print!("{}", format_report(model.spec.encoder.as_str(), &report));
            println!(
                "report: {}; predictions: {}",
                report_path.display(),
                dump_path.display()
            );
            Ok(())
        }
        Command::AttentionTrace {
            common,
            checkpoint,
            split,
            dialogue,
            turn,
        } => {
            let cfg = common.build()?;
            let model = Model::<f32>::load(&checkpoint)
                .with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
            let vocab = load_vocab(&cfg)?;
            let labels = LabelSpace::new();
            let dialogues = load_split(&cfg.data_dir, &split)?;
            let d = dialogues
                .iter()
                .find(|d| d.id == dialogue)
                .ok_or_else(|| anyhow!("no dialogue '{dialogue}' in {split}"))?;
            let trace = model.attention_trace(d, turn, &vocab, &labels)?;
            let mut rows = Vec::new();
            for (slot, score) in trace.iter().enumerate() {
                // Slot i holds the utterance `history_len - i` turns back.
                let distance = trace.len() - slot;
                let text = turn
                    .checked_sub(distance + 1)
                    .and_then(|idx| d.turns.get(idx))
                    .map(|t| t.text.clone());
                if text.is_some() || *score > 0.0 {
                    rows.push(serde_json::json!({
                        "slot": slot,
                        "distance": distance,
                        "score": score,
                        "text": text,
                    }));
                }
            }
            println!("{}", serde_json::to_string_pretty(&serde_json::json!({
                "dialogue": dialogue,
                "turn": turn,
                "encoder": model.spec.encoder,
                "trace": rows,
            }))?);
            Ok(())
        }
        Command::Reproduce {
            common,
            seeds,
            limit_multi,
        } => {
            let cfg = common.build()?;
            reproduce(&cfg, seeds, limit_multi)
        }
    }
}

fn run_training(cfg: &ExperimentConfig) -> Result<(Model<f32>, slu_core::train::TrainResult)> {
    let vocab = load_vocab(cfg)?;
    let labels = LabelSpace::new();
    let mut train_set = load_training_set(cfg, cfg.use_recombined, 0)?;
    if cfg.limit_train > 0 {
        train_set.truncate(cfg.limit_train);
    }
    let dev = load_split(&cfg.data_dir, "multi_dev.jsonl")?;
    Ok(train::<f32>(cfg, &train_set, Some(&dev), &vocab, &labels)?)
}

/// Train and evaluate every {encoder} x {±recombined} configuration over
/// several seeds and print a comparison table of test-set metrics.
fn reproduce(base: &ExperimentConfig, seeds: u64, limit_multi: usize) -> Result<()> {
    if seeds == 0 {
        bail!("need at least one seed");
    }
    let vocab = load_vocab(base)?;
    let labels = LabelSpace::new();
    let dev = load_split(&base.data_dir, "multi_dev.jsonl")?;
    let test = load_split(&base.data_dir, "multi_test.jsonl")?;

    let grid = [
        (EncoderKind::Ed, false),
        (EncoderKind::Ed, true),
        (EncoderKind::Mn, false),
        (EncoderKind::Mn, true),
        (EncoderKind::Sden, false),
        (EncoderKind::Sden, true),
    ];

    println!(
        "{:<12} {:>9} {:>9} {:>8} {:>17}",
        "config", "domain_f1", "intent_f1", "slot_f1", "frame_error_rate"
    );
    let mut summary = BTreeMap::new();
    for (kind, use_recombined) in grid {
        let name = format!(
            "{}{}",
            kind.name(),
            if use_recombined { "+dr" } else { "" }
        );
        let train_set = load_training_set(base, use_recombined, limit_multi)?;
        let mut metrics: Vec<[f64; 4]> = Vec::new();
        for s in 0..seeds {
            let mut cfg = base.clone();
            cfg.encoder = kind;
            cfg.use_recombined = use_recombined;
            cfg.seed = base.seed + s;
            cfg.out_dir = base.out_dir.join(format!("{name}-seed{}", cfg.seed));
            let (_, result) = train::<f32>(&cfg, &train_set, Some(&dev), &vocab, &labels)?;
            let best = Model::<f32>::load(&result.checkpoint)?;
            let (report, _) = evaluate_model(&best, &test, &vocab, &labels, cfg.batch)?;
            metrics.push([
                report.domain_f1,
                report.intent_f1,
                report.slot_f1,
                report.frame_error_rate,
            ]);
        }
        let mean: Vec<f64> = (0..4)
            .map(|j| metrics.iter().map(|m| m[j]).sum::<f64>() / metrics.len() as f64)
            .collect();
        let std: Vec<f64> = (0..4)
            .map(|j| {
                let var = metrics
                    .iter()
                    .map(|m| (m[j] - mean[j]).powi(2))
                    .sum::<f64>()
                    / metrics.len() as f64;
                var.sqrt()
            })
            .collect();
        println!(
            "{:<12} {:>9.4} {:>9.4} {:>8.4} {:>9.2} ± {:.2}%",
            name, mean[0], mean[1], mean[2], mean[3], std[3]
        );
        summary.insert(name, (mean, std));
    }

    std::fs::create_dir_all(&base.out_dir)?;
    let json: BTreeMap<&String, serde_json::Value> = summary
        .iter()
        .map(|(name, (mean, std))| {
            (
                name,
                serde_json::json!({
                    "domain_f1": mean[0],
                    "intent_f1": mean[1],
                    "slot_f1": mean[2],
                    "frame_error_rate": mean[3],
                    "frame_error_rate_std": std[3],
                }),
            )
        })
        .collect();
    let path = base.out_dir.join("reproduce_summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&json)?)?;
    println!("summary: {}", path.display());
    Ok(())
}
