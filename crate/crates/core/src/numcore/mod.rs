//! Dense networks with reverse-mode gradients and the Adam optimizer.
//!
//! Everything runs in `f64` on the CPU. The networks are small enough that a
//! hand-written backward pass over [`ndarray`] GEMMs is all the autodiff the
//! GAN code needs.

mod adam;
pub mod checkpoint;
mod mlp;

pub use adam::{linear_lr_decay, AdamConfig, AdamState};
pub use mlp::{sigmoid, Activation, Dense, DenseGrad, Gradients, Mlp, Tape, PROB_CLAMP};
