//! The student scorer, its objectives, and training.

mod gradcheck;
mod loss;
mod model;
mod ovr;
mod pipeline;
mod train;
mod unbiased;

pub use gradcheck::{finite_difference_check, FiniteDifferenceReport, GradientMutation, FD_STEP};
pub use loss::{pairwise_loss_grad, pointwise_loss_grad, preference_probability, PairExample, PointExample, LOG_CLAMP};
pub use model::{Architecture, StudentModel};
pub use ovr::{one_vs_rest_predict, one_vs_rest_train, OneVsRestConfig};
pub use pipeline::{
    accuracy, pair_examples, pipeline, pipeline_with_segments, split_dialogues, Arm, PipelineConfig, PipelineOutcome,
    Split,
};
pub use train::{loss_trace_csv, train, LossKind, TrainConfig, TrainData, TrainOutcome};
pub use unbiased::{gradient_bias_check, unbiased_gradient_check, UnbiasedReport, MIN_DRAWS};
