//! The recurrent restoration network, its training and inference.

pub mod adam;
pub mod checkpoint;
pub mod discriminator;
pub mod loss;
pub mod restore;
pub mod rnn;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, ModelMeta, TrainedModel};
pub use loss::LossKind;
pub use restore::{bicubic_baseline, restore, restore_luminance};
pub use rnn::{RnnCell, RnnModel};
pub use train::{train_one_shot, Sampling, TrainConfig, TrainOutcome};
