//! The predictor abstraction and a compact encoder-decoder transformer that
//! learns `a -> b` from digit sequences.

mod config;
mod ops;
mod params;
mod predictor;
mod trained;
mod transformer;

pub use config::ModelConfig;
pub(crate) use predictor::check_tau;
pub use predictor::{
    acc_tau, exact_accuracy, tolerance, ExactOracle, NoisyOracle, Predictor, UniformPredictor,
};
pub use trained::{read_curve_csv, write_curve_csv, CurvePoint, EpochStats, TrainedModel};
