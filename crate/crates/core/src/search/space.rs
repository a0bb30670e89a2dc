use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::RelationId;
use crate::predictor::{PredictorConfig, DROPOUT_RANGE, HIDDEN_CHOICES, LAYER_CHOICES};
use crate::sampler::SamplerConfig;

/// A single coordinate of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Float(x) => Some(x),
            _ => None,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain values serialize")
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Str(s) => f.write_str(s),
        }
    }
}

/// A configuration point, keyed by dimension name.
pub type Point = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Categorical(Vec<ParamValue>),
    IntegerSet(Vec<i64>),
    /// `[low, high)`, or `[low, high]` when `closed`.
    Continuous { low: f64, high: f64, closed: bool },
}

impl Domain {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            Domain::Categorical(v) => !v.is_empty(),
            Domain::IntegerSet(v) => !v.is_empty(),
            Domain::Continuous { low, high, .. } => low.is_finite() && high.is_finite() && low < high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(name, "empty search domain"))
        }
    }

    pub fn contains(&self, v: &ParamValue) -> bool {
        match (self, v) {
            (Domain::Categorical(c), v) => c.contains(v),
            (Domain::IntegerSet(s), ParamValue::Int(i)) => s.contains(i),
            (Domain::Continuous { low, high, closed }, ParamValue::Float(x)) => {
                *x >= *low && (*x < *high || (*closed && *x == *high))
            }
            _ => false,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> ParamValue {
        match self {
            Domain::Categorical(c) => c[rng.gen_range(0..c.len())].clone(),
            Domain::IntegerSet(s) => ParamValue::Int(s[rng.gen_range(0..s.len())]),
            Domain::Continuous { low, high, closed } => {
                let x = if *closed {
                    rng.gen_range(*low..=*high)
                } else {
                    rng.gen_range(*low..*high)
                };
                ParamValue::Float(x)
            }
        }
    }

    fn width(&self) -> usize {
        match self {
            Domain::Categorical(c) => c.len(),
            _ => 1,
        }
    }

    fn encode_into(&self, v: &ParamValue, out: &mut Vec<f64>) {
        match self {
            Domain::Categorical(c) => out.extend(c.iter().map(|x| f64::from(u8::from(x == v)))),
            Domain::IntegerSet(s) => {
                let lo = *s.iter().min().unwrap() as f64;
                let hi = *s.iter().max().unwrap() as f64;
                let x = v.as_f64().unwrap_or(lo);
                out.push(if hi > lo { (x - lo) / (hi - lo) } else { 0.0 });
            }
            Domain::Continuous { low, high, .. } => {
                out.push((v.as_f64().unwrap_or(*low) - low) / (high - low));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub domain: Domain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Predictor,
    Sampler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub stage: Stage,
    pub dimensions: Vec<Dimension>,
}

fn cat<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> Domain {
    Domain::Categorical(items.into_iter().map(|s| ParamValue::Str(s.to_string())).collect())
}

fn bools() -> Domain {
    Domain::Categorical(vec![ParamValue::Bool(false), ParamValue::Bool(true)])
}

/// Ratios are searched over `[RATIO_FLOOR, 1]`.
pub const RATIO_FLOOR: f64 = 0.01;

impl SearchSpace {
    pub fn new(stage: Stage, dimensions: Vec<Dimension>) -> Result<Self> {
        for (i, d) in dimensions.iter().enumerate() {
            d.domain.validate(&d.name)?;
            if dimensions[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::config(&d.name, "duplicate dimension"));
            }
        }
        Ok(SearchSpace { stage, dimensions })
    }

    /// The predictor design space.
    pub fn predictor() -> Self {
        let dim = |name: &str, domain| Dimension { name: name.into(), domain };
        let ints = |v: &[usize]| Domain::IntegerSet(v.iter().map(|&x| x as i64).collect());
        SearchSpace {
            stage: Stage::Predictor,
            dimensions: vec![
                dim("layers", ints(&LAYER_CHOICES)),
                dim("hidden_dim", ints(&HIDDEN_CHOICES)),
                dim(
                    "dropout",
                    Domain::Continuous { low: DROPOUT_RANGE.0, high: DROPOUT_RANGE.1, closed: false },
                ),
                dim("act", cat(["identity", "relu", "tanh"])),
                dim("agg", cat(["max", "mean", "sum"])),
                dim("mess", cat(["drum", "nbfnet", "redgnn"])),
                dim("init", cat(["binary", "relational"])),
                dim("shortcut", bools()),
                dim("concat", bools()),
                dim("readout", cat(["linear", "dot"])),
            ],
        }
    }

    /// Global entity and edge ratios.
    pub fn sampler() -> Self {
        let ratio = Domain::Continuous { low: RATIO_FLOOR, high: 1.0, closed: true };
        SearchSpace {
            stage: Stage::Sampler,
            dimensions: vec![
                Dimension { name: "entity_ratio".into(), domain: ratio.clone() },
                Dimension { name: "edge_ratio".into(), domain: ratio },
            ],
        }
    }

    /// One entity and one edge ratio per listed query relation.
    pub fn sampler_per_relation(relations: &[RelationId]) -> Self {
        let ratio = Domain::Continuous { low: RATIO_FLOOR, high: 1.0, closed: true };
        let mut dimensions = Vec::with_capacity(2 * relations.len());
        for r in relations {
            for key in ["entity_ratio", "edge_ratio"] {
                dimensions.push(Dimension { name: format!("{key}.{r}"), domain: ratio.clone() });
            }
        }
        SearchSpace { stage: Stage::Sampler, dimensions }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Point {
        self.dimensions
            .iter()
            .map(|d| (d.name.clone(), d.domain.sample(rng)))
            .collect()
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.len() == self.dimensions.len()
            && self
                .dimensions
                .iter()
                .all(|d| p.get(&d.name).is_some_and(|v| d.domain.contains(v)))
    }

    /// Width of the encoded feature vector.
    pub fn encoded_len(&self) -> usize {
        self.dimensions.iter().map(|d| d.domain.width()).sum()
    }

    /// One-hot categoricals, min-max scaled numbers.
    pub fn encode(&self, p: &Point) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.encoded_len());
        for d in &self.dimensions {
            let v = p.get(&d.name).cloned().unwrap_or(ParamValue::Bool(false));
            d.domain.encode_into(&v, &mut out);
        }
        out
    }

    /// The point of `base` that this space varies.
    pub fn project_predictor(&self, base: &PredictorConfig) -> Result<Point> {
        let json = serde_json::to_value(base)?;
        let mut p = Point::new();
        for d in &self.dimensions {
            let v = json
                .get(&d.name)
                .ok_or_else(|| Error::config(&d.name, "not a predictor key"))?;
            p.insert(d.name.clone(), serde_json::from_value(v.clone())?);
        }
        if let Some(ParamValue::Int(_)) = p.get("dropout") {
            let x = base.dropout;
            p.insert("dropout".into(), ParamValue::Float(x));
        }
        Ok(p)
    }

    pub fn project_sampler(&self, base: &SamplerConfig) -> Result<Point> {
        let mut p = Point::new();
        for d in &self.dimensions {
            let (key, rel) = split_key(&d.name)?;
            let v = match rel {
                None if key == "entity_ratio" => base.entity_ratio,
                None => base.edge_ratio,
                Some(q) => {
                    let (e, r) = base.ratios_for(q);
                    if key == "entity_ratio" {
                        e
                    } else {
                        r
                    }
                }
            };
            p.insert(d.name.clone(), ParamValue::Float(v));
        }
        Ok(p)
    }
}

fn split_key(name: &str) -> Result<(&str, Option<RelationId>)> {
    let (key, rel) = match name.split_once('.') {
        Some((k, r)) => (
            k,
            Some(r.parse::<RelationId>().map_err(|_| Error::config(name, "bad relation id"))?),
        ),
        None => (name, None),
    };
    if key != "entity_ratio" && key != "edge_ratio" {
        return Err(Error::config(name, "not a sampler ratio"));
    }
    Ok((key, rel))
}

/// Overlays `p` on `base`.
pub fn apply_predictor(base: &PredictorConfig, p: &Point) -> Result<PredictorConfig> {
    let mut json = serde_json::to_value(base)?;
    let obj = json.as_object_mut().expect("config serializes to an object");
    for (k, v) in p {
        if !obj.contains_key(k) {
            return Err(Error::config(k, "not a predictor key"));
        }
        obj.insert(k.clone(), v.to_json());
    }
    let cfg: PredictorConfig = serde_json::from_value(json)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Overlays `p` on `base`; `entity_ratio.<q>` keys go to the per-relation maps.
pub fn apply_sampler(base: &SamplerConfig, p: &Point) -> Result<SamplerConfig> {
    let mut cfg = base.clone();
    for (k, v) in p {
        let x = v.as_f64().ok_or_else(|| Error::config(k, "expected a number"))?;
        match split_key(k)? {
            ("entity_ratio", None) => cfg.entity_ratio = x,
            (_, None) => cfg.edge_ratio = x,
            ("entity_ratio", Some(q)) => {
                cfg.entity_ratio_by_relation.insert(q, x);
            }
            (_, Some(q)) => {
                cfg.edge_ratio_by_relation.insert(q, x);
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
