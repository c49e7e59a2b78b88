//! Encoders (HGE, RGCN, GCN), the bilinear decoder and the joint
//! reconstruction loss.

mod config;
mod encoder;
mod loss;
mod params;

pub use config::{DropoutPlacement, EncoderConfig, EncoderVariant};
pub use encoder::{encode, hge_layer, rgcn_layer, NodeRepresentations, PreparedGraph, Target, HOMOGENEOUS_RELATION};
pub use loss::{decode, decode_pairs, joint_loss, score_target, LinkBatch, LossOutput};
pub use params::{glorot_bound, init_params, LayerParams, ModelParams, ModelSchema};
