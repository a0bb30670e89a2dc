//! Message-passing predictor that scores every entity of a one-shot
//! subgraph for a query `(u, q, ?)`.

mod config;
mod model;
mod params;

pub use config::{
    Activation, Aggregation, Combine, InitKind, MessageKind, PredictorConfig, Readout,
    DROPOUT_RANGE, HIDDEN_CHOICES, LAYER_CHOICES,
};
pub use model::{message, Forward, Mode, Predictor};
pub use params::{
    Checkpoint, Layout, LayerSlots, NamedTensor, PredictorParams, CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION,
};
