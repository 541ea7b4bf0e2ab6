//! Small CNN training toolkit: tensors, 2-D/3-D convolutions (im2col + GEMM),
//! ReLU, global average pooling, fully connected layers, explicit backprop,
//! ADAM and binary checkpoints.

mod checkpoint;
mod gradcheck;
mod layers;
mod loss;
mod model;
mod tensor;

pub use gradcheck::{check_model_gradients, relative_error, GradCheck};
pub use checkpoint::{load_model, model_from_bytes, model_to_bytes, save_model};
pub use layers::{conv, Layer, LayerSpec};
pub use loss::{cross_entropy, softmax, softmax_rows};
pub use model::{AdamConfig, Gradients, Model};
pub use tensor::{Scalar, Tensor};
