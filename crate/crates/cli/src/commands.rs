//! Subcommand bodies. Every run writes `config.toml` into the output
//! directory before doing any work.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context};
use oneshot_core::eval::{coverage_ratio, evaluate, extrapolation_sweep, EvalOptions};
use oneshot_core::kg::{load_dataset, KnowledgeGraph};
use oneshot_core::parallel::ExecMode;
use oneshot_core::predictor::{Checkpoint, Predictor};
use oneshot_core::sampler::Sampler;
use oneshot_core::search::{bilevel_search, parse_trials};
use oneshot_core::training::fit_with;
use serde_json::json;

use crate::config::{config_error, RunConfig};

pub enum Kind {
    Prepare,
    Sample,
    Coverage,
    Train,
    Eval,
    Sweep,
    Search { resume: bool },
}

pub const CONFIG_FILE: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRIALS_FILE: &str = "trials.jsonl";

fn exec_mode(cfg: &mut RunConfig) -> ExecMode {
    if cfg.threads == 1 {
        cfg.train.exec = ExecMode::Sequential;
    }
    #[cfg(feature = "parallel")]
    if cfg.threads > 1 {
        // Fails only when a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    cfg.train.exec
}

fn load(cfg: &RunConfig) -> anyhow::Result<KnowledgeGraph> {
    let dir = cfg.dataset.as_ref().ok_or_else(|| config_error("dataset", "no dataset directory given"))?;
    Ok(load_dataset(dir)?)
}

fn write(out: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    let path = out.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_predictor(cfg: &RunConfig, kg: &KnowledgeGraph, required: bool) -> anyhow::Result<Predictor> {
    match &cfg.checkpoint {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            ck.check_compatible(kg.num_entities(), kg.num_relations())?;
            Ok(Predictor::from_checkpoint(&ck)?)
        }
        None if required => Err(config_error("checkpoint", "no checkpoint given")),
        None => {
            eprintln!("no checkpoint given; using a freshly initialized predictor");
            Ok(Predictor::new(cfg.predictor.clone(), kg.num_relations())?)
        }
    }
}

fn histogram(values: impl IntoIterator<Item = String>) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for v in values {
        *h.entry(v).or_insert(0) += 1;
    }
    h
}

pub fn execute(kind: Kind, mut cfg: RunConfig, out: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let exec = exec_mode(&mut cfg);
    let resolved = cfg.to_toml()?;
    eprint!("{resolved}");
    write(out, CONFIG_FILE, &resolved)?;
    match kind {
        Kind::Prepare => prepare(&cfg, out),
        Kind::Sample => sample(&cfg, out),
        Kind::Coverage => coverage(&cfg, out, exec),
        Kind::Train => train(&cfg, out),
        Kind::Eval => eval(&cfg, out, exec),
        Kind::Sweep => sweep(&cfg, out, exec),
        Kind::Search { resume } => search(&cfg, out, resume),
    }
}

fn prepare(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let base = load(cfg)?;
    let s = base.stats();
    let kg = base.augment_inverse()?;
    println!("|V|={}  |R|={}  train={}  valid={}  test={}", s.entities, s.relations, s.train, s.valid, s.test);
    println!(
        "with inverses: |R|={}  train triples={}  valid queries={}  test queries={}",
        kg.num_relations(),
        kg.train().len(),
        kg.valid().len(),
        kg.test().len()
    );
    let record = json!({
        "entities": s.entities,
        "relations": s.relations,
        "train": s.train,
        "valid": s.valid,
        "test": s.test,
        "augmented_relations": kg.num_relations(),
    });
    write(out, "stats.json", &(serde_json::to_string_pretty(&record)? + "\n"))
}

fn sample(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let kg = load(cfg)?.augment_inverse()?;
    let name = cfg.sample.entity.as_deref().ok_or_else(|| config_error("sample.entity", "no anchor entity given"))?;
    let u = kg.entities().get(name).ok_or_else(|| config_error("sample.entity", format!("unknown entity `{name}`")))?;
    let rname =
        cfg.sample.relation.as_deref().ok_or_else(|| config_error("sample.relation", "no query relation given"))?;
    let q = kg
        .relations()
        .get(rname)
        .ok_or_else(|| config_error("sample.relation", format!("unknown relation `{rname}`")))?;
    let sampler = Sampler::new(kg.adjacency(), cfg.sampler.clone())?;
    let sub = sampler.extract_with_provenance(u, q)?;
    sub.save(out.join("subgraph.json"))?;

    let degrees = histogram(sub.local_degrees().into_iter().map(|d| format!("{d:>4}")));
    let distances = histogram(
        sub.anchor_distances()
            .into_iter()
            .map(|d| d.map_or_else(|| "   -".to_string(), |d| format!("{d:>4}"))),
    );
    let mut text = format!(
        "query ({name}, {rname}, ?)\nheuristic {}  r_V {}  r_E {}\n|V_s| = {}  |E_s| = {}  (observed |V| = {}, |E| = {})\n",
        sub.provenance.heuristic,
        sub.provenance.entity_ratio,
        sub.provenance.edge_ratio,
        sub.num_entities(),
        sub.num_edges(),
        kg.num_entities(),
        kg.adjacency().num_edges()
    );
    text.push_str("\ndegree  count\n");
    for (d, c) in &degrees {
        text.push_str(&format!("{d}  {c}\n"));
    }
    text.push_str("\ndistance  count\n");
    for (d, c) in &distances {
        text.push_str(&format!("    {d}  {c}\n"));
    }
    print!("{text}");
    write(out, "summary.txt", &text)
}

fn coverage(cfg: &RunConfig, out: &Path, exec: ExecMode) -> anyhow::Result<()> {
    let kg = load(cfg)?.augment_inverse()?;
    let table = coverage_ratio(
        &kg,
        cfg.coverage_split()?,
        &cfg.heuristics()?,
        &cfg.coverage.ratios,
        &cfg.sampler,
        exec,
    )?;
    let text = table.to_text();
    print!("{text}");
    println!("({} queries)", table.n_queries);
    write(out, "coverage.txt", &text)?;
    let mut lines = String::new();
    for r in table.records() {
        lines.push_str(&serde_json::to_string(&r)?);
        lines.push('\n');
    }
    write(out, "coverage.jsonl", &lines)
}

fn train(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let kg = load(cfg)?.augment_inverse()?;
    let mut timing = String::new();
    let res = fit_with(&kg, &cfg.sampler, &cfg.predictor, &cfg.train, |r| {
        println!(
            "epoch {:>3}  loss {:.4}  missed {}/{}  valid {}",
            r.stats.epoch, r.stats.mean_loss, r.stats.missed, r.stats.queries, r.valid
        );
        timing.push_str(&format!("epoch {} {:.3}s\n", r.stats.epoch, r.stats.seconds));
    })?;
    res.checkpoint.save(out.join(CHECKPOINT_FILE))?;
    write(out, "train_report.jsonl", &res.report.to_jsonl()?)?;
    write(out, "logs/train.log", &timing)?;
    if let Some(best) = res.report.best() {
        println!("best epoch {}: {}", res.report.best_epoch, best.valid);
    }
    Ok(())
}

fn eval(cfg: &RunConfig, out: &Path, exec: ExecMode) -> anyhow::Result<()> {
    let kg = load(cfg)?.augment_inverse()?;
    let predictor = load_predictor(cfg, &kg, false)?;
    let opts = EvalOptions { exec, max_queries: cfg.eval.max_queries };
    let report = evaluate(&kg, cfg.eval_split()?, &cfg.sampler, &predictor, &opts)?;
    println!("{report}");
    write(out, "metrics.json", &(serde_json::to_string_pretty(&report)? + "\n"))
}

fn sweep(cfg: &RunConfig, out: &Path, exec: ExecMode) -> anyhow::Result<()> {
    let kg = load(cfg)?.augment_inverse()?;
    let predictor = load_predictor(cfg, &kg, true)?;
    let opts = EvalOptions { exec, max_queries: cfg.eval.max_queries };
    let m = extrapolation_sweep(&kg, &predictor, &cfg.sampler, &cfg.sweep.entity_ratios, &cfg.sweep.edge_ratios, &opts)?;
    let grid = m.to_grid();
    print!("{grid}");
    write(out, "sweep.tsv", &grid)?;
    let mut lines = String::new();
    for (rv, row) in m.entity_ratios.iter().zip(&m.mrr) {
        for (re, mrr) in m.edge_ratios.iter().zip(row) {
            lines.push_str(&serde_json::to_string(&json!({ "entity_ratio": rv, "edge_ratio": re, "mrr": mrr }))?);
            lines.push('\n');
        }
    }
    write(out, "sweep.jsonl", &lines)
}

fn search(cfg: &RunConfig, out: &Path, resume: bool) -> anyhow::Result<()> {
    let kg = load(cfg)?.augment_inverse()?;
    let log_path = out.join(TRIALS_FILE);
    let prior = if resume && log_path.exists() {
        parse_trials(&fs::read_to_string(&log_path)?)?
    } else {
        if log_path.exists() && !resume {
            return Err(anyhow!("{} exists; pass --resume or choose another --out", log_path.display()));
        }
        File::create(&log_path)?;
        Vec::new()
    };
    if !prior.is_empty() {
        println!("resuming after {} logged trials", prior.len());
    }
    let mut log = OpenOptions::new().append(true).open(&log_path)?;
    let bilevel = cfg.bilevel();
    let res = bilevel_search(&kg, &bilevel, prior, |t| {
        println!(
            "{:?} trial {:>3}  {:?}  measurement {:.4}  {:.1}s",
            t.stage, t.index, t.status, t.measurement, t.cost
        );
        log.write_all(t.to_json_line()?.as_bytes())?;
        log.flush()?;
        Ok(())
    })?;
    res.checkpoint.save(out.join(CHECKPOINT_FILE))?;
    let mut best = cfg.clone();
    best.sampler = res.sampler.clone();
    best.predictor = res.predictor.clone();
    best.checkpoint = Some(out.join(CHECKPOINT_FILE));
    write(out, "best.toml", &best.to_toml()?)?;
    let summary = json!({
        "stage1_measurement": res.stage1_measurement,
        "stage2_measurement": res.stage2_measurement,
        "trials": res.trials.len(),
    });
    write(out, "result.json", &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    println!(
        "stage 1 valid MRR {:.4}; stage 2 valid MRR {:.4} at r_V {:.3}, r_E {:.3}",
        res.stage1_measurement, res.stage2_measurement, res.sampler.entity_ratio, res.sampler.edge_ratio
    );
    if !res.sampler.entity_ratio_by_relation.is_empty() {
        println!("per-relation ratios are in best.toml");
    }
    Ok(())
}
