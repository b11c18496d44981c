//! Dense linear algebra, parameters with gradients, the AdamW step, a seeded
//! generator and the finite-difference gradient checker. Everything runs in
//! `f64`; the int8 path in [`crate::compression`] is the only exception.

mod container;
mod gradcheck;
mod matrix;
mod optim;
mod rng;

pub use container::{Container, Payload, StoredTensor, FORMAT_F64, FORMAT_QUANTIZED};
pub use gradcheck::{finite_diff_check, GradCheckReport, TensorCheck};
pub use matrix::{dot as dot_product, relu, relu_grad, softmax_row, Matrix};
pub use optim::{AdamW, ParamTensor, Parameters};
pub use rng::Rng;
