use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Filtered rank of `answer` under mean-rank tie handling.
///
/// Entities listed in `known_true` are removed before ranking; `answer`
/// itself must not be among them. NaN scores act as the minimal sentinel.
pub fn rank_filtered(scores: &[f64], answer: u32, known_true: &[u32]) -> Result<f64> {
    let v = answer as usize;
    if v >= scores.len() {
        return Err(Error::InvalidInput(format!("answer {answer} outside score vector")));
    }
    if known_true.contains(&answer) {
        return Err(Error::Logic(format!("answer {answer} is in its own filter set")));
    }
    let key = |x: f64| if x.is_nan() { f64::NEG_INFINITY } else { x };
    let target = key(scores[v]);
    let mut greater = 0usize;
    let mut ties = 0usize;
    for (i, &s) in scores.iter().enumerate() {
        if i == v {
            continue;
        }
        let s = key(s);
        if s > target {
            greater += 1;
        } else if s == target {
            ties += 1;
        }
    }
    for &t in known_true {
        let s = key(scores[t as usize]);
        if s > target {
            greater -= 1;
        } else if s == target {
            ties -= 1;
        }
    }
    Ok(1.0 + greater as f64 + ties as f64 / 2.0)
}

/// Aggregate ranking quality over a query set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub n_queries: usize,
    /// Queries whose answer was not sampled into the subgraph.
    pub missed: usize,
}

impl MetricReport {
    pub fn from_ranks(ranks: &[f64], missed: usize) -> Self {
        let mut acc = MetricAccumulator::default();
        for &r in ranks {
            acc.push(r, false);
        }
        acc.missed = missed;
        acc.finish()
    }
}

impl std::fmt::Display for MetricReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "MRR {:.4}  H@1 {:.1}  H@3 {:.1}  H@10 {:.1}  (n = {}, missed = {})",
            self.mrr,
            100.0 * self.hits1,
            100.0 * self.hits3,
            100.0 * self.hits10,
            self.n_queries,
            self.missed
        )
    }
}

/// Streaming sums behind a [`MetricReport`]; merging is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricAccumulator {
    pub reciprocal_sum: f64,
    pub hits1: usize,
    pub hits3: usize,
    pub hits10: usize,
    pub n: usize,
    pub missed: usize,
}

impl MetricAccumulator {
    pub fn push(&mut self, rank: f64, missed: bool) {
        self.reciprocal_sum += 1.0 / rank;
        self.hits1 += usize::from(rank <= 1.0);
        self.hits3 += usize::from(rank <= 3.0);
        self.hits10 += usize::from(rank <= 10.0);
        self.n += 1;
        self.missed += usize::from(missed);
    }

    pub fn merge(mut self, other: &MetricAccumulator) -> Self {
        self.reciprocal_sum += other.reciprocal_sum;
        self.hits1 += other.hits1;
        self.hits3 += other.hits3;
        self.hits10 += other.hits10;
        self.n += other.n;
        self.missed += other.missed;
        self
    }

    pub fn finish(&self) -> MetricReport {
        let n = self.n.max(1) as f64;
        MetricReport {
            mrr: self.reciprocal_sum / n,
            hits1: self.hits1 as f64 / n,
            hits3: self.hits3 as f64 / n,
            hits10: self.hits10 as f64 / n,
            n_queries: self.n,
            missed: self.missed,
        }
    }
}

/// `H_n / n`: expected MRR of a uniformly random total order over `n`
/// candidates.
pub fn random_scorer_mrr(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum::<f64>() / n as f64
}
