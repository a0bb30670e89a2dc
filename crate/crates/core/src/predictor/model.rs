use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::{Activation, Aggregation, Combine, InitKind, MessageKind, PredictorConfig, Readout};
use super::params::{Checkpoint, Layout, PredictorParams};
use crate::autograd::{sigmoid, Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::kg::RelationId;
use crate::sampler::Subgraph;

/// Forward mode; training applies inverted dropout drawn from the RNG.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

/// Recorded forward pass over one subgraph.
pub struct Forward {
    pub tape: Tape,
    /// `|V_s| × 1` logits.
    pub logits: Var,
    /// `H^(0) … H^(L)`.
    pub states: Vec<Var>,
    /// Parameter leaves, aligned with [`PredictorParams::tensors`].
    pub param_vars: Vec<Var>,
}

impl Forward {
    pub fn logits(&self) -> &[f64] {
        &self.tape.value(self.logits).data
    }

    pub fn state(&self, layer: usize) -> &Matrix {
        self.tape.value(self.states[layer])
    }
}

/// Message for one edge given plain vectors.
///
/// `layer` supplies the NBFNet transform (`d × d`, applied as `x · W`) or
/// the attention pair (`3d × d`, `d × 1`).
pub fn message(
    h_x: &[f64],
    h_r: &[f64],
    h_q: &[f64],
    kind: MessageKind,
    combine: Combine,
    weight: Option<&Matrix>,
    attention: Option<(&Matrix, &Matrix)>,
) -> Result<Vec<f64>> {
    let d = h_x.len();
    if h_r.len() != d || h_q.len() != d {
        return Err(Error::Shape(format!(
            "message inputs have lengths {}, {}, {}",
            d,
            h_r.len(),
            h_q.len()
        )));
    }
    match kind {
        MessageKind::Drum => Ok(h_x.iter().zip(h_r).map(|(a, b)| a * b).collect()),
        MessageKind::Nbfnet => {
            let w = weight.ok_or_else(|| Error::Shape("NBFNet message needs a weight".into()))?;
            if (w.rows, w.cols) != (d, d) {
                return Err(Error::Shape(format!("weight is {}x{}, need {d}x{d}", w.rows, w.cols)));
            }
            let c: Vec<f64> = (0..d)
                .map(|i| {
                    let wq = h_r[i] * h_q[i];
                    match combine {
                        Combine::Sum => h_x[i] + wq,
                        Combine::Product => h_x[i] * wq,
                    }
                })
                .collect();
            Ok(Matrix::from_vec(1, d, c).matmul(w).data)
        }
        MessageKind::Redgnn => {
            let (w_in, w_out) =
                attention.ok_or_else(|| Error::Shape("RED-GNN message needs attention weights".into()))?;
            if w_in.rows != 3 * d || w_out.rows != w_in.cols || w_out.cols != 1 {
                return Err(Error::Shape("attention weight shapes".into()));
            }
            let cat: Vec<f64> = h_x.iter().chain(h_r).chain(h_q).copied().collect();
            let hidden = Matrix::from_vec(1, 3 * d, cat).matmul(w_in);
            let hidden = Matrix::from_vec(1, hidden.cols, hidden.data.iter().map(|x| x.max(0.0)).collect());
            let alpha = sigmoid(hidden.matmul(w_out).data[0]);
            Ok(h_x.iter().zip(h_r).map(|(a, b)| alpha * (a + b)).collect())
        }
    }
}

/// Query-conditioned message-passing predictor.
#[derive(Debug, Clone)]
pub struct Predictor {
    cfg: PredictorConfig,
    num_relations: usize,
    layout: Layout,
    params: PredictorParams,
}

impl Predictor {
    /// Fresh predictor with seeded uniform initialisation.
    pub fn new(cfg: PredictorConfig, num_relations: usize) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg, num_relations);
        let params = PredictorParams::init(&cfg, &layout);
        Ok(Predictor {
            cfg,
            num_relations,
            layout,
            params,
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let params = ckpt.params()?;
        Ok(Predictor {
            layout: Layout::new(&ckpt.config, ckpt.num_relations),
            cfg: ckpt.config.clone(),
            num_relations: ckpt.num_relations,
            params,
        })
    }

    pub fn checkpoint(&self, num_entities: usize) -> Checkpoint {
        Checkpoint::new(&self.cfg, num_entities, self.num_relations, &self.params)
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.cfg
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &PredictorParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut PredictorParams {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.count()
    }

    /// `H^(0)`: the anchor row is all ones (binary) or the query
    /// relation's embedding (relational); every other row is zero.
    pub fn init_representations(&self, sub: &Subgraph, q: RelationId) -> Matrix {
        let mut tape = Tape::new();
        let params: Vec<Var> = self
            .params
            .tensors
            .iter()
            .enumerate()
            .map(|(i, m)| tape.param(i, m))
            .collect();
        let h0 = self.init_var(&mut tape, &params, sub, q);
        tape.value(h0).clone()
    }

    fn init_var(&self, tape: &mut Tape, params: &[Var], sub: &Subgraph, q: RelationId) -> Var {
        let n = sub.num_entities();
        let d = self.cfg.hidden_dim;
        match self.cfg.init {
            InitKind::Binary => {
                let mut h = Matrix::zeros(n, d);
                h.row_mut(sub.anchor as usize).fill(1.0);
                tape.constant(h)
            }
            InitKind::Relational => {
                let e_q = tape.gather_rows(params[self.layout.query_emb], vec![q]);
                tape.scatter_sum(e_q, vec![sub.anchor], n)
            }
        }
    }

    /// Runs indicator initialisation, `L` propagation layers and the readout.
    pub fn forward(&self, sub: &Subgraph, q: RelationId, mut mode: Mode<'_>) -> Result<Forward> {
        let n = sub.num_entities();
        if sub.anchor as usize >= n {
            return Err(Error::InvalidInput(format!(
                "anchor {} outside subgraph of {n} entities",
                sub.anchor
            )));
        }
        if q as usize >= self.num_relations {
            return Err(Error::InvalidInput(format!(
                "query relation {q} outside |R| = {}",
                self.num_relations
            )));
        }
        let cfg = &self.cfg;
        let mut tape = Tape::new();
        let param_vars: Vec<Var> = self
            .params
            .tensors
            .iter()
            .enumerate()
            .map(|(i, m)| tape.param(i, m))
            .collect();

        // Layer l only carries messages out of entities within l hops of
        // the anchor, so entities beyond reach keep zero rows.
        let hops = sub.anchor_reach();
        let needs_query = matches!(cfg.mess, MessageKind::Nbfnet | MessageKind::Redgnn);

        let mut h = self.init_var(&mut tape, &param_vars, sub, q);
        let mut states = vec![h];
        for (l, slots) in self.layout.layers.iter().enumerate() {
            let active: Vec<&crate::sampler::LocalEdge> = sub
                .edges
                .iter()
                .filter(|e| hops[e.head as usize].is_some_and(|d| d as usize <= l))
                .collect();
            let heads: Vec<u32> = active.iter().map(|e| e.head).collect();
            let tails: Vec<u32> = active.iter().map(|e| e.tail).collect();
            let rels: Vec<u32> = active.iter().map(|e| e.rel).collect();
            let h_q = needs_query
                .then(|| tape.gather_rows(param_vars[self.layout.query_emb], vec![q; heads.len()]));
            let h_x = tape.gather_rows(h, heads);
            let h_r = tape.gather_rows(param_vars[slots.rel_emb], rels);
            let msg = match cfg.mess {
                MessageKind::Drum => tape.mul(h_x, h_r),
                MessageKind::Nbfnet => {
                    let w_q = tape.mul(h_r, h_q.expect("query rows"));
                    let c = match cfg.combine {
                        Combine::Sum => tape.add(h_x, w_q),
                        Combine::Product => tape.mul(h_x, w_q),
                    };
                    tape.matmul(c, param_vars[slots.weight.expect("nbfnet weight")])
                }
                MessageKind::Redgnn => {
                    let cat = tape.concat_cols(&[h_x, h_r, h_q.expect("query rows")]);
                    let hidden = tape.matmul(cat, param_vars[slots.att_in.expect("attention")]);
                    let hidden = tape.relu(hidden);
                    let score = tape.matmul(hidden, param_vars[slots.att_out.expect("attention")]);
                    let alpha = tape.sigmoid(score);
                    let sum = tape.add(h_x, h_r);
                    tape.mul_col(sum, alpha)
                }
            };
            let agg = match cfg.agg {
                Aggregation::Sum => tape.scatter_sum(msg, tails, n),
                Aggregation::Mean => tape.scatter_mean(msg, tails, n),
                Aggregation::Max => tape.scatter_max(msg, &tails, n),
            };
            let mut next = match cfg.act {
                Activation::Identity => agg,
                Activation::Relu => tape.relu(agg),
                Activation::Tanh => tape.tanh(agg),
            };
            if let Mode::Train(rng) = &mut mode {
                if cfg.dropout > 0.0 {
                    let keep = 1.0 - cfg.dropout;
                    let v = tape.value(next);
                    let mask = Matrix::from_vec(
                        v.rows,
                        v.cols,
                        (0..v.len())
                            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect(),
                    );
                    next = tape.mul_const(next, mask);
                }
            }
            if cfg.shortcut {
                next = tape.add(next, h);
            }
            h = next;
            states.push(h);
        }

        let mut rep = if cfg.concat {
            tape.concat_cols(&states[1..])
        } else {
            h
        };
        if let Some(p) = self.layout.readout_proj {
            rep = tape.matmul(rep, param_vars[p]);
        }
        let rep_u = tape.gather_rows(rep, vec![sub.anchor; n]);
        let logits = match cfg.readout {
            Readout::Dot => {
                let prod = tape.mul(rep, rep_u);
                tape.row_sum(prod)
            }
            Readout::Linear => {
                let pair = tape.concat_cols(&[rep, rep_u]);
                let lin = tape.matmul(pair, param_vars[self.layout.readout_weight.expect("readout")]);
                let bias = tape.gather_rows(param_vars[self.layout.readout_bias.expect("bias")], vec![0; n]);
                tape.add(lin, bias)
            }
        };
        Ok(Forward {
            tape,
            logits,
            states,
            param_vars,
        })
    }

    /// Evaluation-mode logits, one per subgraph entity.
    pub fn logits(&self, sub: &Subgraph, q: RelationId) -> Result<Vec<f64>> {
        Ok(self.forward(sub, q, Mode::Eval)?.logits().to_vec())
    }

    /// Summed BCE over the subgraph against `answer` (a local id) and its
    /// gradient with respect to every parameter tensor.
    pub fn loss_and_grad(
        &self,
        sub: &Subgraph,
        q: RelationId,
        answer: u32,
        mode: Mode<'_>,
    ) -> Result<(f64, Vec<Matrix>)> {
        if answer as usize >= sub.num_entities() {
            return Err(Error::InvalidInput(format!("answer {answer} outside subgraph")));
        }
        let mut fwd = self.forward(sub, q, mode)?;
        let loss = fwd.tape.bce_with_logits_sum(fwd.logits, answer as usize);
        let value = fwd.tape.value(loss).data[0];
        let grads = fwd.tape.backward(loss);
        let mut out = self.params.zeros_like();
        for (i, g) in grads.params() {
            out[i] = g.clone();
        }
        Ok((value, out))
    }
}
