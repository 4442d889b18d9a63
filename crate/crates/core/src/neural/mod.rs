//! Dense arrays, the parameter registry, the toy word encoder, checkpoints
//! and a finite-difference gradient checker.

mod checkpoint;
mod encoder;
mod gradcheck;
mod params;
mod tensor;

pub use checkpoint::{Checkpoint, TensorRecord, CHECKPOINT_VERSION};
pub use encoder::{Encoder, EncoderCache, EncoderConfig, Vocab, DEFAULT_SUFFIX_BUCKETS, UNK};
pub use gradcheck::{
    grad_check, relative_error, roundoff_floor, CoordCheck, GradCheckOptions, GradCheckReport,
};
pub use params::{init_uniform, init_weight, Gradients, ParamGroup, ParamId, ParamRegistry};
pub use tensor::{
    dot, gemm, linear, linear_backward, sigmoid, softmax_rows, softmax_rows_backward, Tensor,
};
