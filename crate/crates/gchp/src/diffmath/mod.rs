//! Dense linear algebra with reverse-mode gradients, an Adam optimizer,
//! quadrature, and the special functions the loss zoo needs.

pub mod adam;
pub mod quad;
pub mod special;
pub mod tape;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use quad::adaptive_simpson;
pub use special::{
    chi2_cdf, chi2_quantile, digamma, log_gamma, normal_cdf, reg_lower_gamma, reg_upper_gamma,
    SpecialError,
};
pub use tape::{Gradients, Tape, TapeError, ValueId};
pub use tensor::{Tensor, TensorError};
