//! Linear algebra, seeded randomness, the PReLU embedding network with its
//! reverse pass, Adam, and the stepwise learning-rate schedule.

mod adam;
mod checkpoint;
mod matrix;
mod mlp;
mod rng;
mod schedule;

pub use adam::{adam_step, AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS};
pub use checkpoint::{parse_checkpoint, serialize_checkpoint, CHECKPOINT_MAGIC};
pub use matrix::Matrix;
pub use mlp::{mlp_backward, mlp_forward, prelu, Dense, MlpParams, Tape, DEFAULT_HIDDEN, DEFAULT_SLOPE};
pub use rng::{derive_seed, Rng};
pub use schedule::{lr_at_epoch, LrSchedule};
