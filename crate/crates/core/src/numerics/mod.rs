//! Dense numeric kernel: matrices, activations, the LSTM cell, a gradient
//! tape, SGD, and finite-difference gradient checking.

mod activation;
mod gradcheck;
mod lstm;
mod matrix;
mod optim;
pub mod rng;
mod tape;

pub use activation::{activate, Activation};
pub(crate) use activation::log_sum_exp;
pub use gradcheck::{check_tape_gradients, finite_diff_check, relative_error, CoordCheck, GradCheckReport};
pub use lstm::{lstm_cell, lstm_step, lstm_step_projected, LstmCellParams, LstmIds, LstmVars};
pub use matrix::{matmul, Matrix};
pub use optim::{sgd_step, DEFAULT_CLIP_NORM};
pub use tape::{CustomOp, Param, ParamId, ParamSet, Tape, Var};
