use serde::{Deserialize, Serialize};

use super::bo::{incumbent, BoConfig, Search, Trial};
use super::space::{apply_predictor, apply_sampler, Point, SearchSpace, Stage};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalOptions};
use crate::kg::{KnowledgeGraph, RelationId, Split};
use crate::predictor::{Checkpoint, Predictor, PredictorConfig};
use crate::sampler::SamplerConfig;
use crate::training::{fit, TrainConfig};

/// Outcome of the predictor stage.
#[derive(Debug, Clone)]
pub struct PredictorSearch {
    pub trials: Vec<Trial>,
    pub config: PredictorConfig,
    pub measurement: f64,
    pub checkpoint: Checkpoint,
}

/// Searches predictor hyperparameters with the sampler frozen. Every trial
/// trains with `train` and is scored by its best validation MRR.
pub fn search_predictor(
    kg: &KnowledgeGraph,
    sampler: &SamplerConfig,
    base: &PredictorConfig,
    train: &TrainConfig,
    bo: &BoConfig,
    prior: Vec<Trial>,
    mut on_trial: impl FnMut(&Trial) -> Result<()>,
) -> Result<PredictorSearch> {
    train.validate()?;
    let mut search = Search::new(SearchSpace::predictor(), bo.clone())?;
    search.resume(prior)?;
    let mut kept: Option<(usize, f64, Checkpoint)> = None;
    let mut objective = |index: usize, p: &Point| -> Result<f64> {
        let cfg = apply_predictor(base, p)?;
        let res = fit(kg, sampler, &cfg, train)?;
        let m = res.report.best().map_or(0.0, |r| r.valid.mrr);
        if kept.as_ref().is_none_or(|(_, b, _)| m > *b) {
            kept = Some((index, m, res.checkpoint));
        }
        Ok(m)
    };
    search.run(&mut objective, &mut on_trial)?;
    let best = incumbent(search.trials())
        .ok_or_else(|| Error::Search("every predictor trial failed".into()))?
        .clone();
    let config = apply_predictor(base, &best.config)?;
    let checkpoint = match kept {
        Some((i, _, ck)) if i == best.index => ck,
        // The incumbent came from a resumed log; training is seeded, so
        // refitting reproduces its checkpoint.
        _ => fit(kg, sampler, &config, train)?.checkpoint,
    };
    Ok(PredictorSearch { trials: search.trials().to_vec(), config, measurement: best.measurement, checkpoint })
}

/// Outcome of the sampler stage.
#[derive(Debug, Clone)]
pub struct SamplerSearch {
    pub trials: Vec<Trial>,
    pub config: SamplerConfig,
    pub measurement: f64,
}

/// Sampler search against an arbitrary measurement. `base` is always the
/// first trial, so the result is never worse than it.
pub fn search_sampler_with(
    space: SearchSpace,
    base: &SamplerConfig,
    bo: &BoConfig,
    mut measure: impl FnMut(&SamplerConfig) -> Result<f64>,
    prior: Vec<Trial>,
    mut on_trial: impl FnMut(&Trial) -> Result<()>,
) -> Result<SamplerSearch> {
    if space.stage != Stage::Sampler {
        return Err(Error::Search("sampler search needs a sampler-stage space".into()));
    }
    let start = space.project_sampler(base)?;
    let mut search = Search::new(space, bo.clone())?.with_initial(vec![start]);
    search.resume(prior)?;
    let mut objective = |_: usize, p: &Point| measure(&apply_sampler(base, p)?);
    search.run(&mut objective, &mut on_trial)?;
    let best = incumbent(search.trials())
        .ok_or_else(|| Error::Search("every sampler trial failed".into()))?
        .clone();
    Ok(SamplerSearch {
        config: apply_sampler(base, &best.config)?,
        measurement: best.measurement,
        trials: search.trials().to_vec(),
    })
}

/// Query relations of the valid split, in id order.
pub fn valid_query_relations(kg: &KnowledgeGraph) -> Vec<RelationId> {
    let mut r: Vec<RelationId> = kg.valid().iter().map(|t| t.rel).collect();
    r.sort_unstable();
    r.dedup();
    r
}

/// Re-evaluates the frozen predictor on the valid split under candidate
/// sampling ratios; no training happens.
#[allow(clippy::too_many_arguments)]
pub fn search_sampler(
    kg: &KnowledgeGraph,
    predictor: &Predictor,
    base: &SamplerConfig,
    bo: &BoConfig,
    per_relation: bool,
    opts: &EvalOptions,
    prior: Vec<Trial>,
    on_trial: impl FnMut(&Trial) -> Result<()>,
) -> Result<SamplerSearch> {
    let space = if per_relation {
        SearchSpace::sampler_per_relation(&valid_query_relations(kg))
    } else {
        SearchSpace::sampler()
    };
    let measure = |cfg: &SamplerConfig| Ok(evaluate(kg, Split::Valid, cfg, predictor, opts)?.mrr);
    search_sampler_with(space, base, bo, measure, prior, on_trial)
}

/// Validation MRR of the frozen predictor at each `(entity, edge)` ratio pair.
pub fn sampler_grid(
    kg: &KnowledgeGraph,
    predictor: &Predictor,
    base: &SamplerConfig,
    pairs: &[(f64, f64)],
    opts: &EvalOptions,
) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|&(v, e)| Ok(evaluate(kg, Split::Valid, &base.clone().with_ratios(v, e), predictor, opts)?.mrr))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BilevelConfig {
    /// Frozen sampler of the predictor stage and start of the sampler stage.
    pub sampler: SamplerConfig,
    /// Fields the predictor space does not vary come from here.
    pub predictor: PredictorConfig,
    /// Schedule of each predictor trial.
    pub trial: TrainConfig,
    /// When set, the winning predictor is retrained for this many epochs
    /// before the sampler stage.
    pub final_epochs: Option<usize>,
    pub predictor_bo: BoConfig,
    pub sampler_bo: BoConfig,
    pub per_relation: bool,
}

impl Default for BilevelConfig {
    fn default() -> Self {
        BilevelConfig {
            sampler: SamplerConfig::default(),
            predictor: PredictorConfig::default(),
            trial: TrainConfig { epochs: 3, ..Default::default() },
            final_epochs: None,
            predictor_bo: BoConfig { budget: 10, ..Default::default() },
            sampler_bo: BoConfig { budget: 10, ..Default::default() },
            per_relation: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BilevelResult {
    pub sampler: SamplerConfig,
    pub predictor: PredictorConfig,
    pub checkpoint: Checkpoint,
    /// Validation MRR of the stage-1 incumbent under the frozen sampler.
    pub stage1_measurement: f64,
    /// Validation MRR of the final pair.
    pub stage2_measurement: f64,
    /// Every trial of both stages, in order.
    pub trials: Vec<Trial>,
}

/// Predictor search with the sampler frozen, then sampler search with the
/// winning predictor frozen. `prior` holds trials from an earlier run's log.
pub fn bilevel_search(
    kg: &KnowledgeGraph,
    cfg: &BilevelConfig,
    prior: Vec<Trial>,
    mut on_trial: impl FnMut(&Trial) -> Result<()>,
) -> Result<BilevelResult> {
    let (p1, p2): (Vec<Trial>, Vec<Trial>) = prior.into_iter().partition(|t| t.stage == Stage::Predictor);
    let stage1 = search_predictor(
        kg,
        &cfg.sampler,
        &cfg.predictor,
        &cfg.trial,
        &cfg.predictor_bo,
        p1,
        &mut on_trial,
    )?;
    let checkpoint = match cfg.final_epochs {
        Some(epochs) => {
            let full = TrainConfig { epochs, ..cfg.trial.clone() };
            fit(kg, &cfg.sampler, &stage1.config, &full)?.checkpoint
        }
        None => stage1.checkpoint,
    };
    let predictor = Predictor::from_checkpoint(&checkpoint)?;
    let opts = EvalOptions { exec: cfg.trial.exec, max_queries: cfg.trial.valid_max_queries };
    let stage2 = search_sampler(
        kg,
        &predictor,
        &cfg.sampler,
        &cfg.sampler_bo,
        cfg.per_relation,
        &opts,
        p2,
        &mut on_trial,
    )?;
    let mut trials = stage1.trials;
    trials.extend(stage2.trials);
    Ok(BilevelResult {
        sampler: stage2.config,
        predictor: stage1.config,
        checkpoint,
        stage1_measurement: stage1.measurement,
        stage2_measurement: stage2.measurement,
        trials,
    })
}
