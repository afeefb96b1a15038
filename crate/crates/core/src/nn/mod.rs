//! From-scratch differentiable core: dense tensors, a named parameter store
//! with Adam, linear/embedding/LSTM layers with hand-derived backward passes,
//! softmax cross-entropy, cosine dissimilarity, and finite-difference
//! gradient checking. Everything is 64-bit and deterministic.

pub mod gradcheck;
pub mod lstm;
pub mod ops;
pub mod store;
pub mod tensor;

pub use gradcheck::grad_check;
pub use lstm::{LstmStack, LstmState, LstmTrace};
pub use ops::{cosine_loss, softmax, softmax_cross_entropy, xavier, Embedding, Linear};
pub use store::{ParamRef, ParamStore, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use tensor::Tensor;
