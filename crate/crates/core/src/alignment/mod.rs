//! Contrastive objective and multi-pair training.

mod config;
mod loss;
mod model;
mod train;

pub use config::{AlignmentConfig, Schedule};
pub use loss::{info_nce, info_nce_scaled, info_nce_value, symmetric_loss, symmetric_loss_scaled, NORM_TOLERANCE};
pub use model::{lookup, pretrain_vocabulary, JointModel, ModalityInput, ModelConfig, Tower, MIN_KERNEL_SIGMA};
pub use train::{
    batch_loss, check_training_data, pretrain_pairs, train, train_step, validation_batch_size, validation_recall,
    MetricRecord, TrainOutcome, TypedPair, BEST_CHECKPOINT, LAST_CHECKPOINT, METRICS_FILE,
};
