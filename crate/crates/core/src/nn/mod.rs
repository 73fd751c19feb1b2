//! Dense numeric kernel: matrices, graph convolution, readout, losses,
//! optimizer and gradient checking.

mod gcn;
mod gradcheck;
mod loss;
mod matrix;
mod optim;
mod readout;

pub use gcn::{gcn_backward, gcn_forward, Activation, GcnCache};
pub use gradcheck::{
    finite_difference_check, relative_error, GradCheckReport, ParamCheck, FD_STEP, RELATIVE_FLOOR,
};
pub use loss::{
    contrastive_loss, softmax_cross_entropy, softmax_rows, ContrastiveLoss, CrossEntropy, LOG_FLOOR,
};
pub use matrix::{dot, Matrix};
pub use optim::{Adam, AdamConfig, Parameter};
pub use readout::{discriminator, mean_readout, mean_readout_backward, sigmoid};
