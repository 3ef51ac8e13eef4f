//! Dense tensors, pooling and normalization primitives, the part
//! classifier head, and the tensor file format.

pub mod io;
pub mod part_classifier;
pub mod pool;
pub mod tensor;
pub mod vec_ops;

pub use io::{tensor_read, tensor_write};
pub use part_classifier::{
    part_classifier_backward, part_classifier_backward_cached, part_classifier_forward,
    PartClassifierGrads, PartClassifierParams,
};
pub use pool::{global_avg_pool, masked_avg_pool};
pub use tensor::{HardMask, SoftMask, Tensor};
pub use vec_ops::{l2_normalize, l2_normalize_in_place};
