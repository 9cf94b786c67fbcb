//! From-scratch recurrent sequence classifier: two stacked LSTM layers with
//! dropout, a fully connected readout on the last step, softmax, and
//! cross-entropy, trained by backpropagation through time with Adam-style
//! updates. Everything runs in f64 so gradients can be checked against
//! central finite differences.

pub mod cell;
pub mod linalg;
pub mod model;
pub mod train;

pub use cell::{dropout_forward, lstm_cell_forward, LstmLayerParams};
pub use linalg::Mat;
pub use model::{
    forward, loss_and_gradients, numeric_gradient_check, predict, Dropout, ModelParams, Sample,
};
pub use train::{accuracy_pct, train, EpochStats, TrainConfig, TrainingTrace};
