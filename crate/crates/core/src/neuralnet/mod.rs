//! From-scratch neural network for beam-pair prediction: 3-D convolutions,
//! a dense trunk, dual softmax heads, cross-entropy loss, RMSProp, and exact
//! backpropagation verified against finite differences.

pub mod checkpoint;
pub mod conv;
pub mod dense;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod rmsprop;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use conv::{conv3d_backward, conv3d_forward, Conv3dLayer, Conv3dSpec};
pub use dense::{relu_backward, relu_forward, DenseLayer};
pub use loss::{dual_head_loss, softmax};
pub use model::{
    predict_top_m, BeamSelectionNet, ModelConfig, ModelGrads, TrainSchedule, TrainingSet,
    VecTrainingSet,
};
pub use rmsprop::{rmsprop_step, RmspropParams};
