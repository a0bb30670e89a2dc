use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{MessageKind, PredictorConfig, Readout};
use crate::autograd::Matrix;
use crate::error::{Error, Result};
use crate::seed;

/// Indices of each layer's tensors inside [`PredictorParams`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSlots {
    pub rel_emb: usize,
    pub weight: Option<usize>,
    pub att_in: Option<usize>,
    pub att_out: Option<usize>,
}

/// Where every tensor lives; fully determined by the config and `|R|`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub query_emb: usize,
    pub layers: Vec<LayerSlots>,
    pub readout_proj: Option<usize>,
    pub readout_weight: Option<usize>,
    pub readout_bias: Option<usize>,
    pub shapes: Vec<(String, usize, usize)>,
}

impl Layout {
    pub fn new(cfg: &PredictorConfig, num_relations: usize) -> Self {
        let d = cfg.hidden_dim;
        let mut shapes = Vec::new();
        let mut add = |name: String, r: usize, c: usize| {
            shapes.push((name, r, c));
            shapes.len() - 1
        };
        let query_emb = add("query_emb".into(), num_relations, d);
        let layers = (0..cfg.layers)
            .map(|l| LayerSlots {
                rel_emb: add(format!("layer{l}.rel_emb"), num_relations, d),
                weight: (cfg.mess == MessageKind::Nbfnet).then(|| add(format!("layer{l}.weight"), d, d)),
                att_in: (cfg.mess == MessageKind::Redgnn).then(|| add(format!("layer{l}.att_in"), 3 * d, d)),
                att_out: (cfg.mess == MessageKind::Redgnn).then(|| add(format!("layer{l}.att_out"), d, 1)),
            })
            .collect();
        let width = cfg.readout_width();
        let readout_proj =
            (cfg.concat && cfg.readout == Readout::Dot).then(|| add("readout.proj".into(), width, d));
        let (readout_weight, readout_bias) = if cfg.readout == Readout::Linear {
            (
                Some(add("readout.weight".into(), 2 * width, 1)),
                Some(add("readout.bias".into(), 1, 1)),
            )
        } else {
            (None, None)
        };
        Layout {
            query_emb,
            layers,
            readout_proj,
            readout_weight,
            readout_bias,
            shapes,
        }
    }
}

/// Learnable tensors of the predictor. There are no per-entity tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams {
    pub names: Vec<String>,
    pub tensors: Vec<Matrix>,
}

impl PredictorParams {
    /// Uniform initialisation in `±1/sqrt(hidden_dim)`; biases start at zero.
    pub fn init(cfg: &PredictorConfig, layout: &Layout) -> Self {
        let bound = 1.0 / (cfg.hidden_dim as f64).sqrt();
        let mut rng = seed::rng(cfg.seed, &[0x494e4954]);
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (i, (name, r, c)) in layout.shapes.iter().enumerate() {
            let data = if Some(i) == layout.readout_bias {
                vec![0.0; r * c]
            } else {
                (0..r * c).map(|_| rng.gen_range(-bound..bound)).collect()
            };
            names.push(name.clone());
            tensors.push(Matrix::from_vec(*r, *c, data));
        }
        PredictorParams { names, tensors }
    }

    pub fn zeros_like(&self) -> Vec<Matrix> {
        self.tensors
            .iter()
            .map(|m| Matrix::zeros(m.rows, m.cols))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Matrix::len).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(move |i| &mut self.tensors[i])
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Matrix::is_finite)
    }
}

pub const CHECKPOINT_FORMAT: &str = "oneshot-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Serialised predictor: config, vocabulary sizes and named tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: PredictorConfig,
    pub num_entities: usize,
    pub num_relations: usize,
    pub params: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new(
        config: &PredictorConfig,
        num_entities: usize,
        num_relations: usize,
        params: &PredictorParams,
    ) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: config.clone(),
            num_entities,
            num_relations,
            params: params
                .names
                .iter()
                .zip(&params.tensors)
                .map(|(n, m)| NamedTensor {
                    name: n.clone(),
                    rows: m.rows,
                    cols: m.cols,
                    data: m.data.clone(),
                })
                .collect(),
        }
    }

    /// Rebuilds parameters, checking every tensor against the layout the
    /// config implies.
    pub fn params(&self) -> Result<PredictorParams> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        self.config.validate()?;
        let layout = Layout::new(&self.config, self.num_relations);
        if layout.shapes.len() != self.params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                layout.shapes.len(),
                self.params.len()
            )));
        }
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for ((name, r, c), t) in layout.shapes.iter().zip(&self.params) {
            if &t.name != name || t.rows != *r || t.cols != *c || t.data.len() != r * c {
                return Err(Error::Checkpoint(format!(
                    "tensor `{}` {}x{} does not match expected `{name}` {r}x{c}",
                    t.name, t.rows, t.cols
                )));
            }
            names.push(t.name.clone());
            tensors.push(Matrix::from_vec(t.rows, t.cols, t.data.clone()));
        }
        Ok(PredictorParams { names, tensors })
    }

    /// Refuses to pair the checkpoint with a graph of a different size.
    pub fn check_compatible(&self, num_entities: usize, num_relations: usize) -> Result<()> {
        if self.num_relations != num_relations {
            return Err(Error::Checkpoint(format!(
                "checkpoint has |R| = {}, graph has {num_relations}",
                self.num_relations
            )));
        }
        if self.num_entities != num_entities {
            return Err(Error::Checkpoint(format!(
                "checkpoint has |V| = {}, graph has {num_entities}",
                self.num_entities
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}
