use serde::{Deserialize, Serialize};

use crate::data::SampleSet;
use crate::error::{Error, Result};
use crate::modq::Modulus;

/// Fewer rows than this make the residual spread too noisy to trust.
pub const MIN_VERIFY_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub stddev: f64,
    pub accepted: bool,
    /// Largest standard deviation that is accepted.
    pub threshold: f64,
    pub samples: usize,
}

/// Acceptance bound: below `q / (4 sqrt 12)` (a quarter of the uniform
/// spread) and at most `10 sigma`.
pub fn verify_threshold(q: Modulus, sigma: f64) -> f64 {
    (q.q() as f64 / (4.0 * 12f64.sqrt())).min(10.0 * sigma)
}

/// Standard deviation of the centered residuals `b - a.s` under a candidate
/// binary secret.
pub fn verify_secret(bits: &[u8], samples: &SampleSet, sigma: f64) -> Result<VerificationReport> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    if samples.len() < MIN_VERIFY_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_VERIFY_SAMPLES,
            available: samples.len(),
        });
    }
    if let Some(&b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::InvalidParameter(format!(
            "candidate entries must be 0 or 1, got {b}"
        )));
    }
    let s: Vec<u64> = bits.iter().map(|&b| b as u64).collect();
    let r = samples.residuals(&s)?;
    let n = r.len() as f64;
    let mean = r.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = r.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
    let stddev = var.sqrt();
    let q = samples.modulus();
    let quarter_uniform = q.q() as f64 / (4.0 * 12f64.sqrt());
    Ok(VerificationReport {
        stddev,
        accepted: stddev < quarter_uniform && stddev <= 10.0 * sigma,
        threshold: verify_threshold(q, sigma),
        samples: samples.len(),
    })
}
