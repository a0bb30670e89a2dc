use std::collections::HashSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::optim::{Optimizer, OptimizerConfig, OptimizerKind};
use crate::autograd::Matrix;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalOptions, MetricReport};
use crate::kg::{split_train_edges, KnowledgeGraph, ObservedGraph, Split, Triple, DEFAULT_OBSERVED_FRACTION};
use crate::parallel::{self, ExecMode};
use crate::predictor::{Checkpoint, Mode, Predictor, PredictorConfig};
use crate::sampler::{Sampler, SamplerConfig, Subgraph};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Queries per optimizer step.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub grad_clip: Option<f64>,
    /// Observed share of the train facts in each epoch's re-split.
    pub split_fraction: f64,
    pub seed: u64,
    pub exec: ExecMode,
    /// Sum per-query gradients in query order; otherwise the reduction
    /// order follows the thread pool.
    pub deterministic: bool,
    /// Cap on validation queries evaluated after each epoch.
    pub valid_max_queries: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 16,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            grad_clip: None,
            split_fraction: DEFAULT_OBSERVED_FRACTION,
            seed: 0,
            exec: ExecMode::Parallel,
            deterministic: true,
            valid_max_queries: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::config("learning_rate", "must be a finite non-negative number"));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::config("weight_decay", "must be non-negative"));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::config("split_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            kind: self.optimizer,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            grad_clip: self.grad_clip,
        }
    }
}

/// Statistics of one training epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean summed-BCE over queries whose answer was sampled.
    pub mean_loss: f64,
    pub steps: usize,
    /// Query facts drawn by the split (an inverse pair counts once).
    pub query_facts: usize,
    /// Query triples processed (both directions on an augmented graph).
    pub queries: usize,
    /// Queries skipped because the answer was not sampled.
    pub missed: usize,
    /// Wall-clock time; left out of serialized reports so they stay
    /// reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

/// One line of the training report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    #[serde(flatten)]
    pub stats: EpochStats,
    pub valid: MetricReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch with the best validation MRR (earliest on ties).
    pub best_epoch: usize,
}

impl TrainReport {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.get(self.best_epoch.checked_sub(1)?)
    }

    /// One JSON record per epoch.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.epochs {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// One supervised query: subgraph, query relation and the answer's local id.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub sub: Subgraph,
    pub relation: u32,
    pub answer: u32,
    /// Dropout stream for this item.
    pub seed: u64,
}

/// Summed loss and gradient over `items`, plus how many contributed.
pub fn batch_gradients(
    predictor: &Predictor,
    items: &[TrainItem],
    train_mode: bool,
    exec: ExecMode,
    deterministic: bool,
) -> Result<(Vec<f64>, Vec<Matrix>)> {
    let per_item = |it: &TrainItem| -> Result<(f64, Vec<Matrix>)> {
        let mut rng = seed::rng(it.seed, &[]);
        let mode = if train_mode { Mode::Train(&mut rng) } else { Mode::Eval };
        predictor.loss_and_grad(&it.sub, it.relation, it.answer, mode)
    };
    let mut total = predictor.params().zeros_like();
    let mut losses = Vec::with_capacity(items.len());
    let add = |acc: &mut Vec<Matrix>, g: &[Matrix]| {
        for (a, b) in acc.iter_mut().zip(g) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
    };
    #[cfg(feature = "parallel")]
    if !deterministic && exec.is_parallel() {
        use rayon::prelude::*;
        let results: Vec<Result<(f64, Vec<Matrix>)>> = items.par_iter().map(per_item).collect();
        let mut grads = Vec::with_capacity(results.len());
        for r in results {
            let (l, g) = r?;
            losses.push(l);
            grads.push(g);
        }
        let zero = predictor.params().zeros_like();
        total = grads
            .into_par_iter()
            .reduce(|| zero.clone(), |mut a, b| {
                add(&mut a, &b);
                a
            });
        return Ok((losses, total));
    }
    let _ = deterministic;
    for r in parallel::map(exec, items, per_item) {
        let (l, g) = r?;
        losses.push(l);
        add(&mut total, &g);
    }
    Ok((losses, total))
}

/// Observation graph for an epoch: observed train triples minus any copy
/// of a query fact or of its inverse.
pub fn epoch_observation_graph(kg: &KnowledgeGraph, observed: &[u32], queries: &[Triple]) -> ObservedGraph {
    let mut blocked: HashSet<Triple> = queries.iter().copied().collect();
    blocked.extend(queries.iter().filter_map(|&t| kg.inverse_triple(t)));
    let triples = observed
        .iter()
        .map(|&i| kg.train()[i as usize])
        .filter(|t| !blocked.contains(t))
        .collect();
    ObservedGraph::new(kg.num_entities(), triples)
}

/// Re-splits the train facts with the epoch's seed and takes one optimizer
/// step per batch of query facts.
pub fn train_epoch(
    kg: &KnowledgeGraph,
    sampler_cfg: &SamplerConfig,
    predictor: &mut Predictor,
    optimizer: &mut Optimizer,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochStats> {
    cfg.validate()?;
    let start = Instant::now();
    let epoch_seed = seed::derive(cfg.seed, &[epoch as u64]);
    let split = split_train_edges(kg, cfg.split_fraction, epoch_seed)?;
    let mut queries: Vec<(usize, Triple)> = split
        .queries
        .iter()
        .map(|&i| (i as usize, kg.train()[i as usize]))
        .collect();
    let query_triples: Vec<Triple> = queries.iter().map(|q| q.1).collect();
    let graph = epoch_observation_graph(kg, &split.observed, &query_triples);
    queries.shuffle(&mut seed::rng(epoch_seed, &[0x5348]));
    let sampler = Sampler::new(&graph, sampler_cfg.clone())?;

    let query_facts = if kg.is_augmented() {
        queries.len() / 2
    } else {
        queries.len()
    };
    let mut loss_sum = 0.0;
    let mut counted = 0usize;
    let mut missed = 0usize;
    let mut steps = 0usize;
    for (step, batch) in queries.chunks(cfg.batch_size).enumerate() {
        let sampled: Vec<Result<Option<TrainItem>>> = parallel::map(cfg.exec, batch, |&(id, t)| {
            let sub = sampler.extract(t.head, t.rel)?;
            let inverse = kg.inverse_triple(t);
            for &e in &sub.edge_ids {
                let edge = graph.triple(e);
                if edge == t || Some(edge) == inverse {
                    return Err(Error::Logic(format!(
                        "query fact {t:?} leaked into its own subgraph"
                    )));
                }
            }
            Ok(sub.local_id(t.tail).map(|answer| TrainItem {
                sub,
                relation: t.rel,
                answer,
                seed: seed::derive(epoch_seed, &[id as u64]),
            }))
        });
        let mut items = Vec::with_capacity(batch.len());
        let mut ids = Vec::with_capacity(batch.len());
        for (r, &(id, _)) in sampled.into_iter().zip(batch) {
            match r? {
                Some(item) => {
                    items.push(item);
                    ids.push(id);
                }
                None => missed += 1,
            }
        }
        if items.is_empty() {
            continue;
        }
        let (losses, mut grads) = batch_gradients(predictor, &items, true, cfg.exec, cfg.deterministic)?;
        if let Some(pos) = losses.iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFiniteLoss { step, query: ids[pos] });
        }
        let scale = 1.0 / items.len() as f64;
        for g in &mut grads {
            g.data.iter_mut().for_each(|x| *x *= scale);
        }
        optimizer.step(&mut predictor.params_mut().tensors, &grads);
        loss_sum += losses.iter().sum::<f64>();
        counted += items.len();
        steps += 1;
    }
    Ok(EpochStats {
        epoch,
        mean_loss: if counted == 0 { 0.0 } else { loss_sum / counted as f64 },
        steps,
        query_facts,
        queries: queries.len(),
        missed,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Best-by-validation predictor together with the full report.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub predictor: Predictor,
    pub checkpoint: Checkpoint,
    pub report: TrainReport,
}

/// Trains for `cfg.epochs`, evaluating on the valid split after each
/// epoch and keeping the parameters with the highest validation MRR.
pub fn fit(
    kg: &KnowledgeGraph,
    sampler_cfg: &SamplerConfig,
    predictor_cfg: &PredictorConfig,
    cfg: &TrainConfig,
) -> Result<FitResult> {
    fit_with(kg, sampler_cfg, predictor_cfg, cfg, |_| {})
}

pub fn fit_with(
    kg: &KnowledgeGraph,
    sampler_cfg: &SamplerConfig,
    predictor_cfg: &PredictorConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<FitResult> {
    cfg.validate()?;
    sampler_cfg.validate()?;
    if kg.valid().is_empty() {
        return Err(Error::InvalidInput("model selection needs a non-empty valid split".into()));
    }
    let mut predictor = Predictor::new(predictor_cfg.clone(), kg.num_relations())?;
    let mut optimizer = Optimizer::new(cfg.optimizer_config(), &predictor.params().tensors);
    let eval_opts = EvalOptions {
        exec: cfg.exec,
        max_queries: cfg.valid_max_queries,
    };
    let mut report = TrainReport::default();
    let mut best: Option<(f64, Predictor)> = None;
    for epoch in 1..=cfg.epochs {
        let stats = train_epoch(kg, sampler_cfg, &mut predictor, &mut optimizer, cfg, epoch)?;
        let valid = evaluate(kg, Split::Valid, sampler_cfg, &predictor, &eval_opts)?;
        let record = EpochRecord { stats, valid };
        on_epoch(&record);
        report.epochs.push(record);
        if best.as_ref().is_none_or(|(m, _)| valid.mrr > *m) {
            best = Some((valid.mrr, predictor.clone()));
            report.best_epoch = epoch;
        }
    }
    let (_, predictor) = best.expect("at least one epoch");
    Ok(FitResult {
        checkpoint: predictor.checkpoint(kg.num_entities()),
        predictor,
        report,
    })
}
