//! Secret recovery against LWE with sparse binary secrets, driven by a
//! sequence model trained to predict `b` from `a`.

pub mod codec;
pub mod data;
pub mod error;
pub mod harness;
pub mod model;
pub mod modq;
pub mod recovery;

pub use codec::{DecodeError, Side, Symbol, TokenId, TokenSequence, Vocab};
pub use data::{
    combination_capacity, combine_samples, gen_samples, gen_secret, load_samples, save_samples,
    Layout, LweParams, Provenance, SampleSet, SecretDist, SecretKey,
};
pub use error::{Error, Result};
pub use modq::{centered_lift, mod_dot, wrap_distance, ErrorSampler, Modulus, Residue, ZqVector};
pub use model::{
    acc_tau, ExactOracle, ModelConfig, NoisyOracle, Predictor, TrainedModel, UniformPredictor,
};
pub use recovery::{
    binarize, direct_recover, distinguisher_recover, verify_secret, Method, RecoveryConfig,
    SampleCount, SecretGuess, VerificationReport,
};
pub use harness::{
    run_attack, run_attack_with, run_sweep, run_task, AttackReport, ExperimentConfig, Frozen,
    Learner, Outcome, TaskKind,
};
