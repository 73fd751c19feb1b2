//! Y-shaped model: a shared GCN extractor feeding a classification head and
//! a contrastive self-supervised head.

mod forward;
mod loss;
mod params;
mod stats;

pub use forward::{
    forward_main, forward_shared, forward_ssl, forward_ssl_with_perm, predict_proba, MainForward,
    SharedForward, SslForward,
};
pub use loss::{
    adaptation_loss, joint_loss, main_loss, ssl_loss, ssl_loss_with_perm, AdaptationLoss,
    JointLoss, LossGrads,
};
pub use params::{Gradients, Group, ModelDims, ParamSnapshot, TardParams};
pub use stats::{
    compute_embedding_stats, constraint_loss, stats_distance, ConstraintLoss, EmbeddingStats,
};
