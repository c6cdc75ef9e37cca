use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::modq::{Modulus, Residue};

/// Which rule produced a candidate secret.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mean01,
    Mean10,
    SoftmaxMean01,
    SoftmaxMean10,
    Mode01,
    Mode10,
    Distinguisher,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Mean01 => "mean-01",
            Method::Mean10 => "mean-10",
            Method::SoftmaxMean01 => "softmax-mean-01",
            Method::SoftmaxMean10 => "softmax-mean-10",
            Method::Mode01 => "mode-01",
            Method::Mode10 => "mode-10",
            Method::Distinguisher => "distinguisher",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretGuess {
    pub bits: Vec<u8>,
    pub method: Method,
    /// Probe scale for direct guesses.
    pub k: Option<u64>,
}

impl SecretGuess {
    pub fn hamming(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }
}

/// Relative slack under which a score counts as equal to the threshold.
const TIE_EPS: f64 = 1e-9;

/// `(f01, f10)`: f01 sets scores below the threshold to 1, f10 sets scores
/// above it to 1. Scores equal to the threshold become 0 in both.
fn split(values: &[f64], threshold: f64) -> (Vec<u8>, Vec<u8>) {
    let slack = TIE_EPS * threshold.abs().max(f64::MIN_POSITIVE);
    let f01 = values.iter().map(|&v| (v < threshold - slack) as u8).collect();
    let f10 = values.iter().map(|&v| (v > threshold + slack) as u8).collect();
    (f01, f10)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// The unique most common value, if there is one.
fn unique_mode(v: &[i64]) -> Option<i64> {
    let mut counts: HashMap<i64, usize> = HashMap::new();
    for &x in v {
        *counts.entry(x).or_default() += 1;
    }
    let best = counts.values().copied().max()?;
    let mut modes = counts.iter().filter(|(_, &c)| c == best);
    let (&m, _) = modes.next()?;
    modes.next().is_none().then_some(m)
}

/// Six candidate secrets from direct-recovery scores.
///
/// Scores are lifted to `(-q/2, q/2]`. The mean and mode rules compare the
/// magnitudes of the lifted scores; the softmax rule applies a softmax to the
/// signed lifted scores and then compares against their mean. When the
/// magnitudes have no unique mode the mode rule uses the mean instead.
pub fn binarize(scores: &[Residue], q: Modulus, k: Option<u64>) -> Vec<SecretGuess> {
    let lifted: Vec<i64> = scores.iter().map(|&p| q.lift_unchecked(q.reduce(p))).collect();
    let mags: Vec<i64> = lifted.iter().map(|x| x.abs()).collect();
    let magf: Vec<f64> = mags.iter().map(|&x| x as f64).collect();

    let (mean01, mean10) = split(&magf, mean(&magf));
    let soft = softmax(&lifted.iter().map(|&x| x as f64).collect::<Vec<_>>());
    let (soft01, soft10) = split(&soft, mean(&soft));
    let mode_threshold = unique_mode(&mags).map_or_else(|| mean(&magf), |m| m as f64);
    let (mode01, mode10) = split(&magf, mode_threshold);

    [
        (mean01, Method::Mean01),
        (mean10, Method::Mean10),
        (soft01, Method::SoftmaxMean01),
        (soft10, Method::SoftmaxMean10),
        (mode01, Method::Mode01),
        (mode10, Method::Mode10),
    ]
    .into_iter()
    .map(|(bits, method)| SecretGuess { bits, method, k })
    .collect()
}
