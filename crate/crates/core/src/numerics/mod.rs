//! Matrix kernel, seeded randomness, and gradient checking.

mod grad_check;
mod matrix;
mod rng;

pub use grad_check::grad_check;
pub use matrix::Matrix;
pub use rng::Rng;
