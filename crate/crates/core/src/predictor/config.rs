use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Max,
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Drum,
    Nbfnet,
    Redgnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Binary,
    Relational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    Linear,
    Dot,
}

/// How NBFNet-style messages combine the source state with the
/// query-modulated relation vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    #[default]
    Sum,
    Product,
}

macro_rules! parse_enum {
    ($ty:ty, $key:literal, { $($name:literal => $val:expr),+ $(,)? }) => {
        impl std::str::FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($val),)+
                    other => Err(Error::config($key, format!("unknown value `{other}`"))),
                }
            }
        }
    };
}

parse_enum!(Activation, "act", { "identity" => Activation::Identity, "relu" => Activation::Relu, "tanh" => Activation::Tanh });
parse_enum!(Aggregation, "agg", { "max" => Aggregation::Max, "mean" => Aggregation::Mean, "sum" => Aggregation::Sum });
parse_enum!(MessageKind, "mess", { "drum" => MessageKind::Drum, "nbfnet" => MessageKind::Nbfnet, "redgnn" => MessageKind::Redgnn });
parse_enum!(InitKind, "init", { "binary" => InitKind::Binary, "relational" => InitKind::Relational });
parse_enum!(Readout, "readout", { "linear" => Readout::Linear, "dot" => Readout::Dot });

/// Architecture of the message-passing predictor.
///
/// The searchable design space restricts `layers` to {4, 6, 8, 10} and
/// `hidden_dim` to {16, 32, 64, 128}; the model itself accepts any
/// positive value so shallow fixtures can be checked exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    pub layers: usize,
    pub hidden_dim: usize,
    /// Drop probability; zero disables dropout.
    pub dropout: f64,
    pub act: Activation,
    pub agg: Aggregation,
    pub mess: MessageKind,
    pub init: InitKind,
    pub shortcut: bool,
    pub concat: bool,
    pub readout: Readout,
    pub combine: Combine,
    /// Seed for weight initialisation.
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            layers: 4,
            hidden_dim: 32,
            dropout: 0.1,
            act: Activation::Relu,
            agg: Aggregation::Sum,
            mess: MessageKind::Redgnn,
            init: InitKind::Relational,
            shortcut: true,
            concat: false,
            readout: Readout::Linear,
            combine: Combine::Sum,
            seed: 0,
        }
    }
}

pub const LAYER_CHOICES: [usize; 4] = [4, 6, 8, 10];
pub const HIDDEN_CHOICES: [usize; 4] = [16, 32, 64, 128];
pub const DROPOUT_RANGE: (f64, f64) = (0.0, 0.5);

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::config("layers", "must be at least 1"));
        }
        if self.hidden_dim == 0 {
            return Err(Error::config("hidden_dim", "must be at least 1"));
        }
        if !(self.dropout >= DROPOUT_RANGE.0 && self.dropout < DROPOUT_RANGE.1) {
            return Err(Error::config(
                "dropout",
                format!("must lie in [0, 0.5), got {}", self.dropout),
            ));
        }
        Ok(())
    }

    /// True when every field lies in the searchable design space.
    pub fn in_design_space(&self) -> bool {
        LAYER_CHOICES.contains(&self.layers)
            && HIDDEN_CHOICES.contains(&self.hidden_dim)
            && self.dropout > DROPOUT_RANGE.0
            && self.dropout < DROPOUT_RANGE.1
    }

    /// Width of the per-entity representation fed to the readout.
    pub fn readout_width(&self) -> usize {
        if self.concat {
            self.layers * self.hidden_dim
        } else {
            self.hidden_dim
        }
    }
}
