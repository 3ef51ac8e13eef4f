//! Classifier heads over the current clusters, refined pseudo labels, and
//! the classification term of the training objective.

pub mod head;
pub mod losses;
pub mod refine;

pub use head::{
    head_backward, head_backward_from_logits, head_forward, head_logits, HeadGrads,
    LinearHeadParams,
};
pub use losses::{id_loss, total_loss};
pub use refine::{distill_global_label, part_agreement_weights, refine_part_label};
