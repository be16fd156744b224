//! Dense network pieces with hand-written gradients.

pub mod adam;
pub mod gradcheck;
pub mod loss;
pub mod mlp;
pub mod train;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{grad_check, relative_error};
pub use loss::{ce_loss, kl_loss, log_softmax, softmax};
pub use mlp::{Linear, MlpCache, MlpModel};
