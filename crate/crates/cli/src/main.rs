mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tard::datagen::{
    apply_shift, generate_domain, read_dataset, write_dataset, write_json, DatasetMeta, DomainSpec,
};
use tard::eval::{
    config_fingerprint, emit_report, run_ablation, run_sensitivity, write_line_chart,
    MetricsReport, ReportFormat, ReportRow, SweepParam,
};
use tard::pipeline::{
    evaluate, load_checkpoint, prepare, save_checkpoint, train_phase, AdaptationMode, Sample,
    TrainConfig,
};
use tard::rng::derive_seed;

use config::{ExperimentConfig, Overrides};

const VAL_SEED_TAG: u64 = 5;

#[derive(Parser)]
#[command(
    name = "tard",
    version,
    about = "Test-time adaptive propagation-graph classification"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config; defaults apply to anything it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    alpha1: Option<f64>,
    #[arg(long, global = true)]
    alpha2: Option<f64>,
    #[arg(long = "ttt-steps", global = true)]
    ttt_steps: Option<usize>,
    #[arg(long = "ttt-lr", global = true)]
    ttt_lr: Option<f64>,
    /// episodic or online
    #[arg(long, global = true)]
    mode: Option<AdaptationMode>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate source train/val and shifted target test datasets.
    Gen,
    /// Train on the source split and write a checkpoint.
    Train {
        #[arg(long, default_value = "data")]
        data: PathBuf,
    },
    /// Adapt and predict on the target split with a trained checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "data")]
        data: PathBuf,
        /// Which split to evaluate: test or val.
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Compare TARD, TARD-constraint and TARD-ttt for every configured seed.
    Ablate {
        #[arg(long, default_value = "data")]
        data: PathBuf,
    },
    /// Sweep alpha1 or alpha2 over the nine-point grid.
    Sweep {
        which: SweepParam,
        #[arg(long, default_value = "data")]
        data: PathBuf,
    },
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            ttt_steps: self.ttt_steps,
            ttt_lr: self.ttt_lr,
            mode: self.mode,
        }
    }

    fn out_dir(&self, default: &str) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from(default));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }
}

/// Loads, overrides, validates and echoes the config. Returns it with its hash.
fn resolve(common: &Common) -> Result<(ExperimentConfig, String)> {
    let mut config = ExperimentConfig::load(common.config.as_deref())?;
    config.apply(&common.overrides());
    config.validate()?;
    let hash = config_fingerprint(&config);
    eprintln!("# resolved config\n{}", config.to_toml());
    eprintln!("config_hash = {hash}");
    Ok((config, hash))
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("TARD_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("TARD_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            bail!("TARD_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DataManifest {
    config_hash: String,
    datasets: Vec<DatasetMeta>,
}

fn cmd_gen(config: &ExperimentConfig, hash: &str, out: &Path) -> Result<()> {
    let source = &config.source;
    let val = DomainSpec {
        num_events: config.val_events,
        seed: derive_seed(source.seed, &[VAL_SEED_TAG]),
        ..source.clone()
    };
    let target = apply_shift(
        &DomainSpec {
            num_events: config.test_events,
            ..source.clone()
        },
        &config.shift,
    );
    let mut datasets = Vec::new();
    for (file, spec, prefix, shift) in [
        ("train.jsonl", source, "src-train-", None),
        ("val.jsonl", &val, "src-val-", None),
        (
            "test.jsonl",
            &target,
            "tgt-test-",
            Some(config.shift.clone()),
        ),
    ] {
        let events = generate_domain(spec, prefix)?;
        write_dataset(&events, &out.join(file))?;
        eprintln!(
            "wrote {} events to {}",
            events.len(),
            out.join(file).display()
        );
        datasets.push(DatasetMeta {
            file: file.into(),
            num_events: events.len(),
            feature_dim: spec.feature_dim,
            num_classes: 2,
            domain: spec.clone(),
            shift,
        });
    }
    write_json(
        &DataManifest {
            config_hash: hash.into(),
            datasets,
        },
        &out.join("meta.json"),
    )?;
    Ok(())
}

fn load_split(data: &Path, file: &str, train: &TrainConfig) -> Result<Vec<Sample>> {
    let path = data.join(file);
    let events = read_dataset(&path)?;
    if events.is_empty() {
        bail!("{} contains no events", path.display());
    }
    for e in &events {
        e.validate(train.classes)?;
    }
    Ok(prepare(&events, train.adjacency)?)
}

fn cmd_train(config: &ExperimentConfig, data: &Path, out: &Path) -> Result<()> {
    let train = load_split(data, "train.jsonl", &config.train)?;
    eprintln!("training on {} events", train.len());
    let model = train_phase(&train, &config.train)?;
    let path = out.join("checkpoint.json");
    save_checkpoint(&model, &path)?;
    load_checkpoint(&path).context("re-validating written checkpoint")?;
    let last = model.log.epochs.last().expect("at least one epoch");
    eprintln!(
        "wrote {} after {} epochs{}",
        path.display(),
        model.log.epochs.len(),
        if model.log.stopped_early {
            " (early stop)"
        } else {
            ""
        }
    );
    println!("L_m\t{:.6}\tL_s\t{:.6}", last.main_loss, last.ssl_loss);
    Ok(())
}

fn stamp(mut m: MetricsReport, hash: &str, seed: u64) -> MetricsReport {
    m.config_hash = Some(hash.into());
    m.seed = Some(seed);
    m
}

fn cmd_eval(
    config: &ExperimentConfig,
    hash: &str,
    checkpoint: &Path,
    data: &Path,
    split: &str,
    out: &Path,
) -> Result<()> {
    let file = match split {
        "test" => "test.jsonl",
        "val" => "val.jsonl",
        other => bail!("unknown split {other:?} (expected test or val)"),
    };
    let model = load_checkpoint(checkpoint)?;
    let test = load_split(data, file, &model.config)?;
    let settings = config.train.adapt_settings();
    let eval = evaluate(&test, &model, &settings)?;

    let mut events = fs::File::create(out.join("events.jsonl"))?;
    for r in &eval.records {
        serde_json::to_writer(&mut events, r)?;
        events.write_all(b"\n")?;
    }
    let metrics = stamp(eval.metrics, hash, settings.seed);
    write_json(&metrics, &out.join("metrics.json"))?;
    emit_report(
        &[ReportRow {
            variant: "TARD".into(),
            seed: settings.seed,
            metrics: metrics.clone(),
        }],
        hash,
        &out.join("metrics.csv"),
        ReportFormat::Csv,
    )?;
    eprintln!("{}", metrics.table_header());
    println!("{}", metrics.table_row());
    Ok(())
}

fn cmd_ablate(config: &ExperimentConfig, hash: &str, data: &Path, out: &Path) -> Result<()> {
    let train = load_split(data, "train.jsonl", &config.train)?;
    let test = load_split(data, "test.jsonl", &config.train)?;
    let mut rows = Vec::new();
    for seed in config.run_seeds() {
        eprintln!("seed {seed}");
        let train_config = TrainConfig {
            seed,
            ..config.train.clone()
        };
        let ablation = run_ablation(&train, &test, &train_config)?;
        for (variant, eval) in &ablation.runs {
            rows.push(ReportRow {
                variant: variant.name().into(),
                seed,
                metrics: stamp(eval.metrics.clone(), hash, seed),
            });
        }
    }
    emit_report(&rows, hash, &out.join("ablation.csv"), ReportFormat::Csv)?;
    emit_report(&rows, hash, &out.join("ablation.json"), ReportFormat::Json)?;
    emit_report(&rows, hash, &out.join("ablation.svg"), ReportFormat::Svg)?;
    eprintln!("variant\tseed\t{}", rows[0].metrics.table_header());
    for r in &rows {
        println!("{}\t{}\t{}", r.variant, r.seed, r.metrics.table_row());
    }
    Ok(())
}

fn cmd_sweep(
    config: &ExperimentConfig,
    hash: &str,
    which: SweepParam,
    data: &Path,
    out: &Path,
) -> Result<()> {
    let train = load_split(data, "train.jsonl", &config.train)?;
    let test = load_split(data, "test.jsonl", &config.train)?;
    let seeds = config.run_seeds();
    let mut rows = Vec::new();
    let mut per_value: Vec<(f64, f64, f64)> = Vec::new();
    for &seed in &seeds {
        eprintln!("seed {seed}");
        let base = TrainConfig {
            seed,
            ..config.train.clone()
        };
        for (k, row) in run_sensitivity(&train, &test, &base, which)?
            .into_iter()
            .enumerate()
        {
            if per_value.len() <= k {
                per_value.push((row.value, 0.0, 0.0));
            }
            per_value[k].1 += row.metrics.accuracy / seeds.len() as f64;
            per_value[k].2 += row.metrics.macro_f1 / seeds.len() as f64;
            rows.push(ReportRow {
                variant: format!("{}={}", which.name(), row.value),
                seed,
                metrics: stamp(row.metrics, hash, seed),
            });
        }
    }
    let stem = format!("sweep_{}", which.name());
    emit_report(
        &rows,
        hash,
        &out.join(format!("{stem}.csv")),
        ReportFormat::Csv,
    )?;
    emit_report(
        &rows,
        hash,
        &out.join(format!("{stem}.json")),
        ReportFormat::Json,
    )?;
    write_line_chart(
        &out.join(format!("{stem}.svg")),
        which.name(),
        &per_value,
        hash,
    )?;
    eprintln!("{}\tseed\t{}", which.name(), rows[0].metrics.table_header());
    for r in &rows {
        println!("{}\t{}\t{}", r.variant, r.seed, r.metrics.table_row());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let common = cli.common;
    configure_threads()?;
    let (config, hash) = resolve(&common)?;
    match cli.command {
        Command::Gen => cmd_gen(&config, &hash, &common.out_dir("data")?),
        Command::Train { data } => cmd_train(&config, &data, &common.out_dir("runs")?),
        Command::Eval {
            checkpoint,
            data,
            split,
        } => cmd_eval(
            &config,
            &hash,
            &checkpoint,
            &data,
            &split,
            &common.out_dir("runs")?,
        ),
        Command::Ablate { data } => cmd_ablate(&config, &hash, &data, &common.out_dir("runs")?),
        Command::Sweep { which, data } => {
            cmd_sweep(&config, &hash, which, &data, &common.out_dir("runs")?)
        }
    }
}
