//! LSTM forecaster: embeddings, cell, loss, optimizer, training stages and
//! checkpoints. Parameters live in one flat vector addressed by [`Layout`].

mod checkpoint;
mod config;
mod data;
mod layers;
pub mod linalg;
mod loss;
mod model;
mod optim;
mod params;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, NamedTensor, CHECKPOINT_FORMAT};
pub use config::{ModelConfig, TrainConfig};
pub use data::{BasinData, Dataset, Sample, N_DYNAMIC};
pub use layers::{lstm_step, mlp_forward, Dense, LstmWeights};
pub use loss::{norm_mse_loss, sequence_loss};
pub use model::{Network, SequenceInput, Trace};
pub use optim::{
    adam_step, add_target_noise, clip_gradients, lr_at, lr_schedule, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS,
};
pub use params::{DenseSlot, Layout, TensorSpec};
pub use train::{evaluate_loss, finetune, predict_series, pretrain, EpochLog, ModelState, StageReport};
