use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use gridee::event_model::{
    gen_synthetic, load_jsonl, load_jsonl_with_schema, save_jsonl, DataConfig, Schema,
};
use gridee::grid_codec::{decode, RoleStrategy, ScoreGrid};
use gridee::metrics::{bench_many, evaluate, predict_corpus};
use gridee::model::Model;
use gridee::neural::Checkpoint;
use gridee::trainer::{
    default_k_range, format_k_table, k_sweep, log_to_jsonl, train_with, TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "gridee",
    version,
    about = "Grid-tagging event extraction toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic JSONL corpus.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Decode a JSON score grid and print the events as JSON.
    Decode {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value = "tw-aw")]
        strategy: RoleStrategy,
    },
    /// Train on <data>/train.jsonl, selecting on <data>/dev.jsonl if present.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch JSONL log; defaults to <out>.log.jsonl.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Evaluate a checkpoint and write the report as JSON.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Measure inference throughput for each batch size.
    Bench {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,8")]
        batch: Vec<usize>,
    },
    /// Train once per K and print the TC-F1-vs-K table.
    SweepK {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated K values; defaults to 2..=min(8, M+4).
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenData { config, out, seed } => gen_data(&config, &out, seed),
        Command::Decode { grid, strategy } => decode_grid(&grid, strategy),
        Command::Train {
            config,
            data,
            out,
            log,
        } => run_train(config.as_deref(), &data, &out, log),
        Command::Eval { ckpt, data, report } => run_eval(&ckpt, &data, report.as_deref()),
        Command::Bench { ckpt, data, batch } => run_bench(&ckpt, &data, &batch),
        Command::SweepK { config, data, k } => run_sweep(config.as_deref(), &data, k),
    }
}

fn gen_data(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let text =
        fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let (schema, mut gen) = DataConfig::from_toml_str(&text)?;
    if let Some(s) = seed {
        gen.seed = s;
    }
    let corpus = gen_synthetic(&gen, &schema)?;
    save_jsonl(&corpus, out)?;
    let overlapped = corpus
        .sentences
        .iter()
        .filter(|s| s.is_overlapped())
        .count();
    let nested = corpus.sentences.iter().filter(|s| s.is_nested()).count();
    eprintln!(
        "wrote {} sentences ({overlapped} overlapped, {nested} nested) to {}",
        corpus.len(),
        out.display()
    );
    Ok(())
}

fn decode_grid(path: &Path, strategy: RoleStrategy) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let grid = ScoreGrid::from_json(&text)?;
    let schema = Schema::numbered(grid.event_type + 1, grid.channels - 2)?;
    let events = decode(&grid, strategy, &schema);
    println!("{}", serde_json::to_string_pretty(&events)?);
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    Ok(match path {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    })
}

fn run_train(config: Option<&Path>, data: &Path, out: &Path, log: Option<PathBuf>) -> Result<()> {
    let config = load_config(config)?;
    let train_set = load_jsonl(data.join("train.jsonl"))?;
    let dev_path = data.join("dev.jsonl");
    let dev = if dev_path.exists() {
        Some(load_jsonl_with_schema(&dev_path, &train_set.schema)?)
    } else {
        None
    };
    let outcome = train_with(&train_set, dev.as_ref(), &config, |e, _| {
        match &e.dev {
            Some(d) => eprintln!(
                "epoch {:>3}  loss {:.5}  dev TI {:.3} TC {:.3} AI {:.3} AC {:.3}",
                e.epoch, e.loss, d.ti_f1, d.tc_f1, d.ai_f1, d.ac_f1
            ),
            None => eprintln!("epoch {:>3}  loss {:.5}", e.epoch, e.loss),
        }
        std::ops::ControlFlow::Continue(())
    })?;
    outcome.model.to_checkpoint().save(out)?;
    let log_path = log.unwrap_or_else(|| {
        let mut p = out.as_os_str().to_owned();
        p.push(".log.jsonl");
        PathBuf::from(p)
    });
    fs::write(&log_path, log_to_jsonl(&outcome.log))
        .with_context(|| format!("writing {}", log_path.display()))?;
    if let Some(epoch) = outcome.best_epoch {
        eprintln!("kept epoch {epoch} (best dev TC F1)");
    }
    eprintln!("checkpoint: {}\nlog: {}", out.display(), log_path.display());
    Ok(())
}

fn load_model(ckpt: &Path) -> Result<Model> {
    Ok(Model::from_checkpoint(&Checkpoint::load(ckpt)?)?)
}

fn run_eval(ckpt: &Path, data: &Path, report: Option<&Path>) -> Result<()> {
    let model = load_model(ckpt)?;
    let corpus = load_jsonl_with_schema(data, &model.schema)?;
    let predicted = predict_corpus(&model, &corpus.sentences, 8)?;
    let r = evaluate(&predicted, &corpus.sentences);
    let json = serde_json::to_string_pretty(&r)?;
    match report {
        Some(p) => fs::write(p, &json).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{json}"),
    }
    for (name, m) in [("TI", r.ti), ("TC", r.tc), ("AI", r.ai), ("AC", r.ac)] {
        eprintln!(
            "{name}  P {:.4}  R {:.4}  F1 {:.4}",
            m.precision, m.recall, m.f1
        );
    }
    Ok(())
}

fn run_bench(ckpt: &Path, data: &Path, batches: &[usize]) -> Result<()> {
    if batches.is_empty() || batches.contains(&0) {
        bail!("batch sizes must be positive");
    }
    let model = load_model(ckpt)?;
    let corpus = load_jsonl_with_schema(data, &model.schema)?;
    let results = bench_many(&model, &corpus.sentences, batches)?;
    let base = results[0].median;
    for r in &results {
        println!(
            "batch {:>3}: {:>9.1} sent/s  (x{:.2})",
            r.batch_size,
            r.median,
            r.median / base
        );
    }
    Ok(())
}

fn run_sweep(config: Option<&Path>, data: &Path, ks: Vec<usize>) -> Result<()> {
    let config = load_config(config)?;
    let train_set = load_jsonl(data.join("train.jsonl"))?;
    let test_path = data.join("dev.jsonl");
    if !test_path.exists() {
        bail!("{} is required for the sweep", test_path.display());
    }
    let test = load_jsonl_with_schema(&test_path, &train_set.schema)?;
    let ks = if ks.is_empty() {
        default_k_range(train_set.schema.num_event_types())
    } else {
        ks
    };
    let rows = k_sweep(&train_set, &test, &config, &ks)?;
    print!("{}", format_k_table(&rows));
    Ok(())
}
