//! A desk-scale embodied question answering laboratory.
//!
//! Procedurally generated gridworld houses, an exact shortest-path oracle for
//! imitation supervision, a from-scratch differentiable core (LSTM policies
//! trained with backpropagation through time and Adam), a frame-attention
//! answerer, and a marker-based calibration protocol that adapts a trained
//! navigation policy to a new environment under a hidden-state distillation
//! anchor. An evaluation harness reports navigation progress and QA accuracy
//! at graded spawn distances.

pub mod calib;
pub mod ckpt;
pub mod eval;
pub mod gen;
pub mod grid;
pub mod nav;
pub mod nn;
pub mod oracle;
pub mod parallel;
pub mod persist;
pub mod qa;
pub mod rng;
pub mod train;
