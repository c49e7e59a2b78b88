use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderVariant {
    /// Relational convolution with a general residual; self-loops are ordinary relations.
    Hge,
    /// Relational convolution with a learned self-transform and no residual.
    Rgcn,
    /// Single-relation convolution on the homogenized, bidirected graph.
    Gcn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropoutPlacement {
    EveryLayer,
    FinalOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub variant: EncoderVariant,
    pub layer_sizes: Vec<usize>,
    pub dropout_p: f64,
    pub use_residual: bool,
    /// Collapse all node types and relations into one before convolving.
    /// Always on for [`EncoderVariant::Gcn`].
    pub homogenize: bool,
    pub dropout_placement: DropoutPlacement,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            variant: EncoderVariant::Hge,
            layer_sizes: vec![256, 256, 256],
            dropout_p: 0.2,
            use_residual: true,
            homogenize: false,
            dropout_placement: DropoutPlacement::EveryLayer,
        }
    }
}

impl EncoderConfig {
    pub fn hge(layer_sizes: Vec<usize>) -> Self {
        Self {
            layer_sizes,
            ..Self::default()
        }
    }

    pub fn rgcn(layer_sizes: Vec<usize>) -> Self {
        Self {
            variant: EncoderVariant::Rgcn,
            use_residual: false,
            layer_sizes,
            ..Self::default()
        }
    }

    pub fn gcn(layer_sizes: Vec<usize>) -> Self {
        Self {
            variant: EncoderVariant::Gcn,
            use_residual: false,
            homogenize: true,
            layer_sizes,
            ..Self::default()
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogenize || self.variant == EncoderVariant::Gcn
    }

    pub fn residual(&self) -> bool {
        self.variant == EncoderVariant::Hge && self.use_residual
    }

    pub fn self_weight(&self) -> bool {
        self.variant == EncoderVariant::Rgcn
    }

    /// Input width of conv layer `l`; layer 0 consumes the projected features.
    pub fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.layer_sizes[0]
        } else {
            self.layer_sizes[l - 1]
        }
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap_or(&0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.is_empty() {
            return Err(Error::Config("encoder needs at least one layer".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout_p)));
        }
        if self.residual() {
            for l in 0..self.layer_sizes.len() {
                if self.layer_input(l) != self.layer_sizes[l] {
                    return Err(Error::Config(format!(
                        "residual layer {l} maps {} to {}; widths must match",
                        self.layer_input(l),
                        self.layer_sizes[l]
                    )));
                }
            }
        }
        Ok(())
    }
}
