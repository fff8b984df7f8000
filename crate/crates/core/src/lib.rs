//! HiPPO and UnHiPPO state space initializations.
//!
//! HiPPO compresses a signal's history online into Legendre coefficients.
//! UnHiPPO reads the same recurrence as a Kalman filter over a latent
//! polynomial with noisy observations, which yields dynamics that
//! suppress observation noise. The crate builds both families of
//! transition matrices, evaluates linear state space layers initialized
//! from them, and exchanges the results through a small binary container.

pub mod denoise;
pub mod error;
pub mod exchange;
pub mod hippo;
pub mod kalman;
pub mod legendre;
pub mod matfun;
pub mod signals;
pub mod ssm;
pub mod unhippo_dyn;

pub use error::{Error, Result};
pub use matfun::Matrix;
