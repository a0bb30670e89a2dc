mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_value, ConfigError};

/// One-shot subgraph link prediction on knowledge graphs.
#[derive(Parser, Debug)]
#[command(name = "oneshot", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to built-in defaults.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Dataset directory holding train.txt, valid.txt and test.txt [config: dataset]
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// TOML run configuration; unknown keys are rejected
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for the sampler, predictor, training and search [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores, 1 for sequential execution [config: threads, default: 0]
    #[arg(long)]
    threads: Option<usize>,
    /// Override any config key, e.g. --set train.epochs=5 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug, Clone)]
struct Ratios {
    /// Entity sampling ratio r_V [config: sampler.entity_ratio, default: 0.1]
    #[arg(long)]
    entity_ratio: Option<f64>,
    /// Edge sampling ratio r_E [config: sampler.edge_ratio, default: 0.1]
    #[arg(long)]
    edge_ratio: Option<f64>,
    /// Entity scoring heuristic: ppr, bfs, rw, pr, rand [config: sampler.heuristic, default: ppr]
    #[arg(long)]
    heuristic: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load, augment and validate a dataset and print its statistics
    Prepare {
        #[command(flatten)]
        common: Common,
    },
    /// Extract one subgraph for a query and summarize it
    Sample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ratios: Ratios,
        /// Anchor entity name [config: sample.entity]
        #[arg(long)]
        entity: Option<String>,
        /// Query relation name [config: sample.relation]
        #[arg(long)]
        relation: Option<String>,
    },
    /// Coverage-ratio table for heuristics and entity ratios
    Coverage {
        #[command(flatten)]
        common: Common,
        /// Comma-separated heuristics [config: coverage.heuristics, default: ppr,bfs,rw,pr,rand]
        #[arg(long)]
        heuristics: Option<String>,
        /// Comma-separated entity ratios [config: coverage.ratios, default: 0.1,0.2,0.5]
        #[arg(long)]
        ratios: Option<String>,
        /// Split whose queries are covered [config: coverage.split, default: test]
        #[arg(long)]
        split: Option<String>,
        /// PPR transition orientation: row or column [config: sampler.orientation, default: row]
        #[arg(long)]
        orientation: Option<String>,
    },
    /// Train a predictor and keep the best validation checkpoint
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ratios: Ratios,
        /// Training epochs [config: train.epochs, default: 10]
        #[arg(long)]
        epochs: Option<usize>,
        /// Learning rate [config: train.learning_rate, default: 0.001]
        #[arg(long)]
        lr: Option<f64>,
        /// Queries per optimizer step [config: train.batch_size, default: 16]
        #[arg(long)]
        batch_size: Option<usize>,
        /// Message-passing layers [config: predictor.layers, default: 4]
        #[arg(long)]
        layers: Option<usize>,
        /// Hidden width [config: predictor.hidden_dim, default: 32]
        #[arg(long)]
        hidden_dim: Option<usize>,
        /// Message function: drum, nbfnet, redgnn [config: predictor.mess, default: redgnn]
        #[arg(long)]
        mess: Option<String>,
    },
    /// Filtered MRR and Hits@k of a checkpoint on a split
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ratios: Ratios,
        /// Checkpoint file; a freshly initialized predictor when absent [config: checkpoint]
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// valid or test [config: eval.split, default: test]
        #[arg(long)]
        split: Option<String>,
        /// Evaluate only the first N queries [config: eval.max_queries]
        #[arg(long)]
        max_queries: Option<usize>,
    },
    /// Validation MRR over a grid of entity and edge ratios
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Checkpoint file [config: checkpoint]
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Comma-separated entity ratios [config: sweep.entity_ratios, default: 0.05,0.1,0.2,0.5,1]
        #[arg(long)]
        entity_ratios: Option<String>,
        /// Comma-separated edge ratios [config: sweep.edge_ratios, default: 0.05,0.1,0.2,0.5,1]
        #[arg(long)]
        edge_ratios: Option<String>,
    },
    /// Two-stage search: predictor hyperparameters, then sampler ratios
    Search {
        #[command(flatten)]
        common: Common,
        /// Predictor-stage trials [config: search.predictor_budget, default: 10]
        #[arg(long)]
        predictor_budget: Option<usize>,
        /// Sampler-stage trials [config: search.sampler_budget, default: 10]
        #[arg(long)]
        sampler_budget: Option<usize>,
        /// Epochs per predictor trial [config: search.trial_epochs, default: 3]
        #[arg(long)]
        trial_epochs: Option<usize>,
        /// Search one ratio pair per query relation [config: search.per_relation]
        #[arg(long)]
        per_relation: bool,
        /// Continue from the audit log already in the output directory
        #[arg(long)]
        resume: bool,
    },
}

type Overrides = Vec<(String, toml::Value)>;

fn push<T: Into<toml::Value>>(o: &mut Overrides, key: &str, v: Option<T>) {
    if let Some(v) = v {
        o.push((key.to_string(), v.into()));
    }
}

fn push_str(o: &mut Overrides, key: &str, v: &Option<String>) {
    push(o, key, v.clone());
}

fn push_list(o: &mut Overrides, key: &str, v: &Option<String>, numeric: bool) {
    if let Some(v) = v {
        let items = v
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| if numeric { parse_value(s) } else { toml::Value::String(s.to_string()) })
            .collect();
        o.push((key.to_string(), toml::Value::Array(items)));
    }
}

fn push_path(o: &mut Overrides, key: &str, v: &Option<PathBuf>) {
    push(o, key, v.as_ref().map(|p| p.display().to_string()));
}

impl Common {
    /// Named-flag overrides and `--set` overrides, kept apart so `--set`
    /// can be applied last.
    fn overrides(&self) -> anyhow::Result<(Overrides, Overrides)> {
        let mut o = Overrides::new();
        push_path(&mut o, "dataset", &self.dataset);
        push(&mut o, "threads", self.threads.map(|t| t as i64));
        if let Some(s) = self.seed {
            let s = s as i64;
            for key in ["sampler.seed", "predictor.seed", "train.seed", "search.seed"] {
                o.push((key.into(), s.into()));
            }
        }
        let mut sets = Overrides::new();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| config::config_error(kv.as_str(), "expected KEY=VALUE"))?;
            sets.push((k.trim().to_string(), parse_value(v.trim())));
        }
        Ok((o, sets))
    }
}

impl Ratios {
    fn push(&self, o: &mut Overrides) {
        push(o, "sampler.entity_ratio", self.entity_ratio);
        push(o, "sampler.edge_ratio", self.edge_ratio);
        push_str(o, "sampler.heuristic", &self.heuristic);
    }
}

fn usize_value(v: Option<usize>) -> Option<i64> {
    v.map(|x| x as i64)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    use commands::Kind;
    let (common, kind, flags) = match cli.command {
        Command::Prepare { common } => (common, Kind::Prepare, Overrides::new()),
        Command::Sample { common, ratios, entity, relation } => {
            let mut o = Overrides::new();
            ratios.push(&mut o);
            push_str(&mut o, "sample.entity", &entity);
            push_str(&mut o, "sample.relation", &relation);
            (common, Kind::Sample, o)
        }
        Command::Coverage { common, heuristics, ratios, split, orientation } => {
            let mut o = Overrides::new();
            push_list(&mut o, "coverage.heuristics", &heuristics, false);
            push_list(&mut o, "coverage.ratios", &ratios, true);
            push_str(&mut o, "coverage.split", &split);
            push_str(&mut o, "sampler.orientation", &orientation);
            (common, Kind::Coverage, o)
        }
        Command::Train { common, ratios, epochs, lr, batch_size, layers, hidden_dim, mess } => {
            let mut o = Overrides::new();
            ratios.push(&mut o);
            push(&mut o, "train.epochs", usize_value(epochs));
            push(&mut o, "train.learning_rate", lr);
            push(&mut o, "train.batch_size", usize_value(batch_size));
            push(&mut o, "predictor.layers", usize_value(layers));
            push(&mut o, "predictor.hidden_dim", usize_value(hidden_dim));
            push_str(&mut o, "predictor.mess", &mess);
            (common, Kind::Train, o)
        }
        Command::Eval { common, ratios, checkpoint, split, max_queries } => {
            let mut o = Overrides::new();
            ratios.push(&mut o);
            push_path(&mut o, "checkpoint", &checkpoint);
            push_str(&mut o, "eval.split", &split);
            push(&mut o, "eval.max_queries", usize_value(max_queries));
            (common, Kind::Eval, o)
        }
        Command::Sweep { common, checkpoint, entity_ratios, edge_ratios } => {
            let mut o = Overrides::new();
            push_path(&mut o, "checkpoint", &checkpoint);
            push_list(&mut o, "sweep.entity_ratios", &entity_ratios, true);
            push_list(&mut o, "sweep.edge_ratios", &edge_ratios, true);
            (common, Kind::Sweep, o)
        }
        Command::Search { common, predictor_budget, sampler_budget, trial_epochs, per_relation, resume } => {
            let mut o = Overrides::new();
            push(&mut o, "search.predictor_budget", usize_value(predictor_budget));
            push(&mut o, "search.sampler_budget", usize_value(sampler_budget));
            push(&mut o, "search.trial_epochs", usize_value(trial_epochs));
            if per_relation {
                o.push(("search.per_relation".into(), true.into()));
            }
            (common, Kind::Search { resume }, o)
        }
    };
    let (mut all, sets) = common.overrides()?;
    all.extend(flags);
    all.extend(sets);
    let cfg = config::RunConfig::resolve(common.config.as_deref(), &all)?;
    commands::execute(kind, cfg, &common.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(c) = e.downcast_ref::<ConfigError>() {
                eprintln!("error: {c}");
            } else if let Some(oneshot_core::Error::Config { key, message }) = e.downcast_ref::<oneshot_core::Error>() {
                eprintln!("error: config error at `{key}`: {message}");
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::FAILURE
        }
    }
}
