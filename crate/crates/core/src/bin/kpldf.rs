//! `kpldf`: generate → solve → train → evaluate → predict, plus grid search.

use std::fs::{self, File};
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use knapsack_ldf::eval::{self, EvalReport};
use knapsack_ldf::instance::{self, LabeledInstance, SplitKind};
use knapsack_ldf::ldf::{self, EpochEvent};
use knapsack_ldf::nn::{load_checkpoint, save_checkpoint};
use knapsack_ldf::{label_dataset, read_dataset, write_dataset, Regime, TrainConfig};

#[derive(Parser)]
#[command(name = "kpldf", version, about = "Lagrangian dual training of knapsack solution predictors")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an unlabeled dataset with graded capacities.
    Generate {
        #[arg(long, default_value_t = 500)]
        n_items: usize,
        #[arg(long, default_value_t = 30000)]
        n_instances: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label every instance with its exact optimum.
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model; writes checkpoints and the epoch log to --out.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Report metrics per capacity quintile.
    Evaluate {
        #[arg(long, required_unless_present = "oracle")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        /// Score the stored optimal labels instead of a network.
        #[arg(long)]
        oracle: bool,
    },
    /// Read instance JSON lines on stdin, write predictions on stdout.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train one child run per hyperparameter combination.
    Grid {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Child runs executed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Val,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Fc,
    Ldf,
    LdfPretrained,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Fc => Regime::Fc,
            RegimeArg::Ldf => Regime::Ldf,
            RegimeArg::LdfPretrained => Regime::LdfPretrained,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(clap::Args, Default)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    regime: Option<RegimeArg>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    lagrangian_step: Option<f64>,
    #[arg(long)]
    max_grad_norm: Option<f64>,
    #[arg(long)]
    lambda_init: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// Comma-separated hidden widths, e.g. 2048,1024.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
}

/// Train config file: every `TrainConfig` field, all optional.
fn load_config(path: Option<&Path>) -> anyhow::Result<(TrainConfig, bool)> {
    let Some(path) = path else {
        return Ok((TrainConfig::default(), false));
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let has_seed = toml::from_str::<toml::Table>(&text)
        .with_context(|| format!("parsing {}", path.display()))?
        .contains_key("seed");
    let config: TrainConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok((config, has_seed))
}

impl Overrides {
    fn apply(&self, c: &mut TrainConfig) {
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {$(
                if let Some(v) = self.$field.clone() { c.$target = v.into(); }
            )*};
        }
        set!(seed => seed, regime => regime, learning_rate => learning_rate,
             lagrangian_step => lagrangian_step, max_grad_norm => max_grad_norm,
             lambda_init => lambda_init, k => k, batch_size => batch_size,
             epochs => n_epochs, pretrain_epochs => pretrain_epochs,
             patience => early_stop_patience, hidden => hidden);
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    epoch: usize,
    lambda: f64,
    config_hash: &'a str,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct RunSummary {
    regime: Regime,
    epochs_run: usize,
    best_epoch: usize,
    best_selection_metric: f64,
    unfreeze_epoch: usize,
    epochs_to_convergence: Option<usize>,
    wall_clock_s: f64,
    config_hash: String,
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn cmd_generate(n_items: usize, n_instances: usize, seed: u64, out: &Path) -> anyhow::Result<()> {
    let dataset = instance::generate_dataset(n_items, n_instances, seed)?;
    write_dataset(&dataset, out)?;
    println!(
        "generated S={} n={} (train {}, val {}, test {}) -> {}",
        dataset.items.len(),
        n_items,
        dataset.split.train.len(),
        dataset.split.val.len(),
        dataset.split.test.len(),
        out.display()
    );
    Ok(())
}

fn cmd_solve(input: &Path, out: &Path) -> anyhow::Result<()> {
    let dataset = read_dataset(input)?;
    let pending = dataset.items.iter().filter(|i| i.label.is_none()).count();
    if pending == 0 {
        println!("all {} instances already labeled; nothing to solve", dataset.items.len());
        if input != out {
            write_dataset(&dataset, out)?;
        }
        return Ok(());
    }
    let started = Instant::now();
    let labeled = label_dataset(dataset)?;
    let elapsed = started.elapsed().as_secs_f64();
    write_dataset(&labeled, out)?;
    println!(
        "solved {pending} instances, mean {:.3} ms/instance -> {}",
        1e3 * elapsed / pending as f64,
        out.display()
    );
    Ok(())
}

fn cmd_train(dataset: &Path, config: Option<&Path>, out: &Path, overrides: &Overrides) -> anyhow::Result<()> {
    let (mut cfg, file_seed) = load_config(config)?;
    overrides.apply(&mut cfg);
    if overrides.seed.is_none() && !file_seed {
        return Err(UsageError("a seed is required (--seed or `seed` in the config file)".into()).into());
    }
    let data = read_dataset(dataset)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.toml"), toml::to_string(&cfg)?)?;
    let hash = cfg.hash();
    let mut log = BufWriter::new(File::create(out.join("epochs.jsonl"))?);

    let outcome = ldf::train_with(&data, &cfg, |event: &EpochEvent<'_>| {
        writeln!(log, "{}", event.log.to_json()).map_err(|e| knapsack_ldf::Error::Io {
            path: out.join("epochs.jsonl"),
            source: e,
        })?;
        if event.is_best {
            save_checkpoint(event.params, out.join("best.ldfm"))?;
        }
        Ok(())
    })?;
    log.flush()?;
    let sidecar = |epoch, lambda| Sidecar {
        epoch,
        lambda,
        config_hash: &hash,
        seed: cfg.seed,
    };
    write_json(&out.join("best.json"), &sidecar(outcome.best_epoch, outcome.best_lambda))?;
    save_checkpoint(&outcome.final_params, out.join("final.ldfm"))?;
    let last = outcome.logs.last().expect("at least one epoch");
    write_json(&out.join("final.json"), &sidecar(last.epoch, outcome.multipliers.lambda))?;
    let criterion = cfg.regime.selection_criterion(cfg.selection_mu);
    let summary = RunSummary {
        regime: cfg.regime,
        epochs_run: outcome.logs.len(),
        best_epoch: outcome.best_epoch,
        best_selection_metric: criterion.value(&outcome.logs[outcome.best_epoch])?,
        unfreeze_epoch: outcome.unfreeze_epoch,
        epochs_to_convergence: outcome.epochs_to_convergence,
        wall_clock_s: outcome.wall_clock_s,
        config_hash: hash.clone(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    let convergence = match outcome.epochs_to_convergence {
        Some(e) => format!("{} epochs", e + outcome.unfreeze_epoch),
        None => format!("not converged within {} epochs", outcome.logs.len()),
    };
    println!(
        "regime {:?}: {} epochs in {:.1}s; converged: {}; best epoch {} ({:?} = {:.6}); final lambda {}",
        cfg.regime,
        outcome.logs.len(),
        outcome.wall_clock_s,
        convergence,
        outcome.best_epoch,
        criterion,
        summary.best_selection_metric,
        outcome.multipliers.lambda
    );
    Ok(())
}

fn cmd_evaluate(
    checkpoint: Option<&Path>,
    dataset: &Path,
    split: SplitArg,
    format: Format,
    oracle: bool,
) -> anyhow::Result<()> {
    let data = read_dataset(dataset)?;
    let kind = match split {
        SplitArg::Val => SplitKind::Val,
        SplitArg::Test => SplitKind::Test,
    };
    let items = data.split_items(kind);
    if items.is_empty() {
        bail!("split is empty");
    }
    let report = if oracle {
        let predictions = items
            .iter()
            .map(|i| i.label.as_ref().map(|l| l.selection.clone()))
            .collect::<Option<Vec<_>>>()
            .context("oracle evaluation needs a labeled dataset")?;
        EvalReport::from_predictions(&predictions, &items)?
    } else {
        let params = load_checkpoint(checkpoint.expect("clap enforces --checkpoint"))?;
        eval::evaluate(&params, &items)?
    };
    match format {
        Format::Table => print!("{report}"),
        Format::Json => println!("{}", report.to_json()),
    }
    Ok(())
}

#[derive(Serialize)]
struct PredictionLine {
    id: u64,
    x: Vec<u8>,
    objective: f64,
    violation: f64,
    latency_ms: f64,
}

fn cmd_predict(checkpoint: &Path) -> anyhow::Result<()> {
    let params = load_checkpoint(checkpoint)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let (mut count, mut total_ms) = (0usize, 0.0);
    for (idx, line) in io::stdin().lock().lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).with_context(|| format!("stdin line {}", idx + 1))?;
        let LabeledInstance { instance, .. } = instance::parse_record(&value, idx + 1)?;
        instance.validate()?;
        if instance.n_items() != params.n_items {
            bail!(
                "instance {} has {} items, model expects {}",
                instance.id,
                instance.n_items(),
                params.n_items
            );
        }
        let started = Instant::now();
        let selection = eval::predict(&params, &[&instance])?.selections().remove(0);
        let latency_ms = 1e3 * started.elapsed().as_secs_f64();
        let line = PredictionLine {
            id: instance.id,
            x: selection.iter().map(|&b| b as u8).collect(),
            objective: instance.selection_value(&selection),
            violation: ldf::constraint_violation(&selection, &instance)?,
            latency_ms,
        };
        writeln!(out, "{}", serde_json::to_string(&line)?)?;
        count += 1;
        total_ms += latency_ms;
    }
    out.flush()?;
    if count > 0 {
        eprintln!("predicted {count} instances, mean latency {:.3} ms", total_ms / count as f64);
    }
    Ok(())
}

/// Grid file: a `[base]` train config plus `[grid]` value lists.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    #[serde(default)]
    base: TrainConfig,
    grid: GridAxes,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridAxes {
    learning_rate: Vec<f64>,
    #[serde(default)]
    lagrangian_step: Vec<f64>,
    max_grad_norm: Vec<f64>,
}

fn expand_grid(file: &GridFile) -> Vec<(String, TrainConfig)> {
    let steps = if file.grid.lagrangian_step.is_empty() || file.base.regime == Regime::Fc {
        vec![file.base.lagrangian_step]
    } else {
        file.grid.lagrangian_step.clone()
    };
    let mut runs = Vec::new();
    for &lr in &file.grid.learning_rate {
        for &s in &steps {
            for &g in &file.grid.max_grad_norm {
                let config = TrainConfig {
                    learning_rate: lr,
                    lagrangian_step: s,
                    max_grad_norm: g,
                    ..file.base.clone()
                };
                let name = format!("run{:03}_lr{lr:e}_s{s:e}_g{g}", runs.len());
                runs.push((name, config));
            }
        }
    }
    runs
}

fn cmd_grid(dataset: &Path, config: &Path, out: &Path, seed: Option<u64>, jobs: usize) -> anyhow::Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut file: GridFile = toml::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
    if let Some(seed) = seed {
        file.base.seed = seed;
    }
    let runs = expand_grid(&file);
    fs::create_dir_all(out)?;
    let exe = std::env::current_exe()?;
    let mut pending = runs.iter();
    let mut active = Vec::new();
    let mut failures = 0;
    loop {
        while active.len() < jobs.max(1) {
            let Some((name, cfg)) = pending.next() else { break };
            let dir = out.join(name);
            fs::create_dir_all(&dir)?;
            let cfg_path = dir.join("run.toml");
            fs::write(&cfg_path, toml::to_string(cfg)?)?;
            let child = Command::new(&exe)
                .args(["train", "--dataset"])
                .arg(dataset)
                .arg("--config")
                .arg(&cfg_path)
                .arg("--out")
                .arg(&dir)
                .spawn()
                .with_context(|| format!("spawning run {name}"))?;
            active.push((name.clone(), child));
        }
        if active.is_empty() {
            break;
        }
        let (name, mut child) = active.remove(0);
        if !child.wait()?.success() {
            eprintln!("run {name} failed");
            failures += 1;
        }
    }

    let mut best: Option<(String, f64)> = None;
    for (name, _) in &runs {
        let Ok(text) = fs::read_to_string(out.join(name).join("summary.json")) else {
            continue;
        };
        let summary: RunSummary = serde_json::from_str(&text)?;
        println!(
            "{name}: best epoch {} metric {:.6} ({:.1}s)",
            summary.best_epoch, summary.best_selection_metric, summary.wall_clock_s
        );
        if best.as_ref().is_none_or(|(_, m)| summary.best_selection_metric < *m) {
            best = Some((name.clone(), summary.best_selection_metric));
        }
    }
    if let Some((name, metric)) = best {
        println!("selected {name} (validation metric {metric:.6})");
    }
    if failures > 0 {
        bail!("{failures} of {} runs failed", runs.len());
    }
    Ok(())
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Cmd::Generate {
            n_items,
            n_instances,
            seed,
            out,
        } => cmd_generate(n_items, n_instances, seed, &out),
        Cmd::Solve { input, out } => cmd_solve(&input, &out),
        Cmd::Train {
            dataset,
            config,
            out,
            overrides,
        } => cmd_train(&dataset, config.as_deref(), &out, &overrides),
        Cmd::Evaluate {
            checkpoint,
            dataset,
            split,
            format,
            oracle,
        } => cmd_evaluate(checkpoint.as_deref(), &dataset, split, format, oracle),
        Cmd::Predict { checkpoint } => cmd_predict(&checkpoint),
        Cmd::Grid {
            dataset,
            config,
            out,
            seed,
            jobs,
        } => cmd_grid(&dataset, &config, &out, seed, jobs),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
