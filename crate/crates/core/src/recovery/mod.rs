//! Secret recovery from a predictor: direct probing with scaled unit vectors,
//! the column-shift distinguisher, and residual-based verification. Nothing
//! here depends on how the predictor was obtained.

mod binarize;
mod config;
mod direct;
mod distinguish;
mod verify;

pub use binarize::{binarize, Method, SecretGuess};
pub use config::{KExpr, RecoveryConfig, SampleCount};
pub use direct::{direct_recover, k_schedule, DirectScores};
pub use distinguish::{distinguisher_recover, distinguisher_samples};
pub use verify::{verify_secret, verify_threshold, VerificationReport, MIN_VERIFY_SAMPLES};
