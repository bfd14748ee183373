//! Graph convolutional network with hand-derived gradients.
//!
//! Each hidden layer computes `relu(groupnorm(L E W))` where `L` is the
//! augmented operator of the correspondence graph. The model input is
//! concatenated back onto the running activation before selected layers
//! (6 and 12 by default). The last layer is linear and its rows are
//! normalized to unit length, so `E E^T` holds cosine similarities.

mod adam;
mod checkpoint;
mod layer;
mod model;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use layer::{group_norm, GcnLayer, GroupNorm, LayerCache, LayerGrad, GN_EPS};
pub use model::{
    normalize_rows, xavier_bound, ForwardCache, GcnModel, Gradients, Init, ModelDims,
    DEFAULT_GROUPS, DEFAULT_HIDDEN, DEFAULT_LAYERS,
};
