//! The dehazing network, its trainer and checkpoints.

mod checkpoint;
mod net;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use net::{evaluate_clean, ConvLayer, ModelParams, ParamVars, TeacherModel, ARCHITECTURE, IMAGE_CHANNELS};
pub use train::{train, TrainConfig, TrainOutcome};
pub(crate) use train::{batch, epoch_order, layer_grads};
