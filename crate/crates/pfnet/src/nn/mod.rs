//! From-scratch differentiable layers, loss, optimizer, and the model that
//! ties a front end to the classification head.

pub mod act;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod norm;
pub mod optimizer;
pub mod pool;

pub use act::{leaky_relu, LeakyRelu};
pub use conv::Conv1d;
pub use dense::Dense;
pub use gradcheck::{gradient_check_suite, GradCheckConfig, GradCheckEntry, GradCheckReport};
pub use loss::{softmax, softmax_cross_entropy};
pub use model::{FrontEnd, FrontEndConfig, FrontEndKind, HeadConfig, SpeakerNet};
pub use norm::{BatchNorm, LayerNorm};
pub use optimizer::{rmsprop_step, rmsprop_update, OptimizerConfig};
pub use pool::MaxPool1d;
