//! Dense-tensor neural network engine: layers with explicit backward
//! passes, softmax cross-entropy, Adam, and finite-difference checking.
//! Everything is `f64` and channels-last.

pub mod adam;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod sequential;
pub mod tensor;

pub use adam::Adam;
pub use gradcheck::{grad_check, Checkable, GradCheckReport, LayerProbe, FD_STEP};
pub use layers::{AdaptiveMaxPool, Conv2d, Dense, Layer, Param, Relu, SeGate};
pub use loss::{batch_cross_entropy, one_hot, softmax, softmax_cross_entropy, BatchLoss, CrossEntropy};
pub use sequential::{check_finite, LayerSpec, Sequential};
pub use tensor::Tensor;
