//! Dense `f64` tensors with reverse-mode automatic differentiation and the
//! layers the difficulty model is built from.

mod attention;
mod conv;
pub mod gradcheck;
mod graph;
mod layout;
mod ops;
mod tensor;

pub use attention::{
    patch_merging, patch_merging_param_shapes, shifted_region_labels, window_attention,
    window_attention_param_shapes, window_mask, AttentionOutput, WindowSpec, LAYER_NORM_EPS,
    MASKED_LOGIT,
};
pub use gradcheck::{check_gradients, check_param_gradients, GradCheckReport};
pub use graph::{Graph, Var};
pub use ops::sigmoid;
pub use tensor::{ParamStore, Tensor};
