use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::forest::{ForestConfig, RandomForest};
use super::space::{Point, SearchSpace, Stage};
use crate::error::{Error, Result};
use crate::parallel::ExecMode;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Failed,
    Pruned,
}

/// One evaluated configuration; a line of the audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub stage: Stage,
    pub config: Point,
    /// Validation measurement; 0 for failed trials.
    pub measurement: f64,
    /// Wall-clock seconds.
    pub cost: f64,
    pub status: TrialStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trial {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)? + "\n")
    }
}

/// Parses an audit log, skipping blank lines.
pub fn parse_trials(text: &str) -> Result<Vec<Trial>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoConfig {
    /// Total trials, including warm start.
    pub budget: usize,
    /// Random trials before the surrogate takes over.
    pub warm_start: usize,
    /// Random draws scored by the acquisition per suggestion.
    pub candidates: usize,
    pub forest: ForestConfig,
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            budget: 30,
            warm_start: 5,
            candidates: 1000,
            forest: ForestConfig::default(),
            seed: 0,
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::config("budget", "must be at least 1"));
        }
        if self.candidates == 0 {
            return Err(Error::config("candidates", "must be at least 1"));
        }
        Ok(())
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected improvement over `best` for a maximization problem.
pub fn expected_improvement(mean: f64, variance: f64, best: f64) -> f64 {
    let gain = mean - best;
    let sd = variance.max(0.0).sqrt();
    if sd < 1e-12 {
        return gain.max(0.0);
    }
    let z = gain / sd;
    (gain * normal_cdf(z) + sd * normal_pdf(z)).max(0.0)
}

/// Fits the surrogate on encoded trial configs. Failed trials enter with
/// their zero measurement.
pub fn rf_surrogate_fit(space: &SearchSpace, trials: &[Trial], cfg: &ForestConfig) -> Result<RandomForest> {
    let ok = trials.iter().filter(|t| t.status == TrialStatus::Ok).count();
    if ok == 0 {
        return Err(Error::Search("every trial failed".into()));
    }
    if ok < 2 {
        return Err(Error::Search("surrogate needs at least two successful trials".into()));
    }
    let used: Vec<&Trial> = trials.iter().filter(|t| t.status != TrialStatus::Pruned).collect();
    let x: Vec<Vec<f64>> = used.iter().map(|t| space.encode(&t.config)).collect();
    let y: Vec<f64> = used.iter().map(|t| t.measurement).collect();
    RandomForest::fit(&x, &y, cfg, ExecMode::Sequential)
}

/// Draws `n_candidates` points and returns the one with the highest
/// expected improvement, the earliest draw on ties.
pub fn suggest_next(
    surrogate: &RandomForest,
    space: &SearchSpace,
    n_candidates: usize,
    incumbent: f64,
    rng: &mut impl Rng,
) -> Point {
    let mut best: Option<(f64, Point)> = None;
    for _ in 0..n_candidates.max(1) {
        let p = space.sample(rng);
        let (m, v) = surrogate.predict(&space.encode(&p));
        let ei = expected_improvement(m, v, incumbent);
        if best.as_ref().is_none_or(|(b, _)| ei > *b) {
            best = Some((ei, p));
        }
    }
    best.expect("at least one candidate").1
}

/// Best successful trial, the earliest on ties.
pub fn incumbent(trials: &[Trial]) -> Option<&Trial> {
    trials
        .iter()
        .filter(|t| t.status == TrialStatus::Ok)
        .fold(None, |b: Option<&Trial>, t| match b {
            Some(b) if b.measurement >= t.measurement => Some(b),
            _ => Some(t),
        })
}

/// Evaluates a configuration and returns its measurement.
pub trait Objective {
    fn evaluate(&mut self, index: usize, point: &Point) -> Result<f64>;
}

impl<F: FnMut(usize, &Point) -> Result<f64>> Objective for F {
    fn evaluate(&mut self, index: usize, point: &Point) -> Result<f64> {
        self(index, point)
    }
}

/// Sequential model-based search. Each trial's randomness is derived from
/// the seed and the trial index, so a search resumed from its log follows
/// the same trajectory as an uninterrupted one.
#[derive(Debug, Clone)]
pub struct Search {
    space: SearchSpace,
    cfg: BoConfig,
    initial: Vec<Point>,
    trials: Vec<Trial>,
}

impl Search {
    pub fn new(space: SearchSpace, cfg: BoConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Search { space, cfg, initial: Vec::new(), trials: Vec::new() })
    }

    /// Points evaluated first, ahead of the random warm start.
    pub fn with_initial(mut self, points: Vec<Point>) -> Self {
        self.initial = points;
        self
    }

    /// Adopts previously logged trials of this stage.
    pub fn resume(&mut self, trials: Vec<Trial>) -> Result<()> {
        for (i, t) in trials.iter().enumerate() {
            if t.index != self.trials.len() + i || t.stage != self.space.stage {
                return Err(Error::Search(format!("log entry {i} does not continue this search")));
            }
        }
        if self.trials.len() + trials.len() > self.cfg.budget {
            return Err(Error::Search("log holds more trials than the budget".into()));
        }
        self.trials.extend(trials);
        Ok(())
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn config(&self) -> &BoConfig {
        &self.cfg
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn is_done(&self) -> bool {
        self.trials.len() >= self.cfg.budget
    }

    /// Best successful trial, the earliest on ties.
    pub fn incumbent(&self) -> Option<&Trial> {
        incumbent(&self.trials)
    }

    /// The configuration trial `index` will evaluate.
    pub fn propose(&self, index: usize) -> Point {
        if let Some(p) = self.initial.get(index) {
            return p.clone();
        }
        let mut rng = seed::rng(self.cfg.seed, &[index as u64]);
        let history = &self.trials[..index.min(self.trials.len())];
        if index < self.cfg.warm_start.max(self.initial.len()) {
            return self.space.sample(&mut rng);
        }
        let forest_cfg = ForestConfig {
            seed: seed::derive(self.cfg.forest.seed, &[self.cfg.seed, index as u64]),
            ..self.cfg.forest.clone()
        };
        match (rf_surrogate_fit(&self.space, history, &forest_cfg), incumbent(history)) {
            (Ok(forest), Some(best)) => {
                suggest_next(&forest, &self.space, self.cfg.candidates, best.measurement, &mut rng)
            }
            _ => self.space.sample(&mut rng),
        }
    }

    /// Runs the remaining trials, passing each to `on_trial` as it finishes.
    pub fn run(
        &mut self,
        objective: &mut impl Objective,
        mut on_trial: impl FnMut(&Trial) -> Result<()>,
    ) -> Result<()> {
        while !self.is_done() {
            let index = self.trials.len();
            let config = self.propose(index);
            let start = Instant::now();
            let outcome = objective.evaluate(index, &config);
            let cost = start.elapsed().as_secs_f64();
            let (measurement, status, error) = match outcome {
                Ok(m) if m.is_finite() => (m, TrialStatus::Ok, None),
                Ok(m) => (0.0, TrialStatus::Failed, Some(format!("non-finite measurement {m}"))),
                Err(e @ Error::NonFiniteLoss { .. }) => (0.0, TrialStatus::Failed, Some(e.to_string())),
                Err(e) => return Err(e),
            };
            let trial = Trial { index, stage: self.space.stage, config, measurement, cost, status, error };
            on_trial(&trial)?;
            self.trials.push(trial);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::space::{Dimension, Domain, ParamValue};

    fn unit() -> SearchSpace {
        SearchSpace::new(
            Stage::Sampler,
            vec![Dimension { name: "x".into(), domain: Domain::Continuous { low: 0.0, high: 1.0, closed: true } }],
        )
        .unwrap()
    }

    fn x(p: &Point) -> f64 {
        p["x"].as_f64().unwrap()
    }

    #[test]
    fn ei_basics() {
        assert_eq!(expected_improvement(0.5, 0.0, 0.7), 0.0);
        assert_eq!(expected_improvement(0.9, 0.0, 0.7), 0.9 - 0.7);
        let a = expected_improvement(0.5, 0.04, 0.5);
        assert!((a - 0.2 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_candidate_is_returned() {
        let s = unit();
        let trials: Vec<Trial> = (0..4)
            .map(|i| Trial {
                index: i,
                stage: Stage::Sampler,
                config: [("x".to_string(), ParamValue::Float(i as f64 / 4.0))].into(),
                measurement: i as f64,
                cost: 0.0,
                status: TrialStatus::Ok,
                error: None,
            })
            .collect();
        let f = rf_surrogate_fit(&s, &trials, &ForestConfig::default()).unwrap();
        let mut r1 = seed::rng(5, &[]);
        let mut r2 = seed::rng(5, &[]);
        assert_eq!(suggest_next(&f, &s, 1, 100.0, &mut r1), s.sample(&mut r2));
    }

    #[test]
    fn flat_surrogate_ties_go_to_first_draw() {
        let s = unit();
        let trials: Vec<Trial> = (0..3)
            .map(|i| Trial {
                index: i,
                stage: Stage::Sampler,
                config: [("x".to_string(), ParamValue::Float(0.7))].into(),
                measurement: 1.0,
                cost: 0.0,
                status: TrialStatus::Ok,
                error: None,
            })
            .collect();
        let f = rf_surrogate_fit(&s, &trials, &ForestConfig::default()).unwrap();
        let mut r1 = seed::rng(8, &[]);
        let mut r2 = seed::rng(8, &[]);
        assert_eq!(suggest_next(&f, &s, 50, 1.0, &mut r1), s.sample(&mut r2));
    }

    #[test]
    fn all_failed_is_an_error() {
        let t = Trial {
            index: 0,
            stage: Stage::Sampler,
            config: [("x".to_string(), ParamValue::Float(0.1))].into(),
            measurement: 0.0,
            cost: 0.0,
            status: TrialStatus::Failed,
            error: None,
        };
        assert!(rf_surrogate_fit(&unit(), &[t.clone(), t], &ForestConfig::default()).is_err());
    }

    #[test]
    fn resumed_search_matches_uninterrupted() {
        let cfg = BoConfig { budget: 12, candidates: 200, seed: 4, ..Default::default() };
        let mut f = |_: usize, p: &Point| Ok(-(x(p) - 0.3).powi(2));
        let mut full = Search::new(unit(), cfg.clone()).unwrap();
        let mut log = String::new();
        full.run(&mut f, |t| {
            log.push_str(&t.to_json_line()?);
            Ok(())
        })
        .unwrap();

        let head: Vec<Trial> = parse_trials(&log).unwrap().into_iter().take(7).collect();
        let mut resumed = Search::new(unit(), cfg).unwrap();
        resumed.resume(head).unwrap();
        resumed.run(&mut f, |_| Ok(())).unwrap();
        let strip = |ts: &[Trial]| ts.iter().map(|t| (t.config.clone(), t.measurement)).collect::<Vec<_>>();
        assert_eq!(strip(full.trials()), strip(resumed.trials()));
    }

    #[test]
    fn failures_score_zero_and_equal_ties_keep_earliest() {
        let cfg = BoConfig { budget: 6, ..Default::default() };
        let mut s = Search::new(unit(), cfg).unwrap();
        let mut f = |i: usize, _: &Point| {
            if i == 1 {
                Err(Error::NonFiniteLoss { step: 0, query: 0 })
            } else {
                Ok(0.5)
            }
        };
        s.run(&mut f, |_| Ok(())).unwrap();
        assert_eq!(s.trials()[1].status, TrialStatus::Failed);
        assert_eq!(s.trials()[1].measurement, 0.0);
        assert_eq!(s.incumbent().unwrap().index, 0);
    }
}
