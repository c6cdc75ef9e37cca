use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::RecoveryConfig;
use crate::error::{Error, Result};
use crate::model::Predictor;
use crate::modq::{Modulus, Residue};

/// Raw predictions for the probes `K * e_i`. A `None` entry is a failed
/// prediction; it scores as 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectScores {
    pub k: u64,
    pub scores: Vec<Option<Residue>>,
}

impl DirectScores {
    pub fn values(&self) -> Vec<Residue> {
        self.scores.iter().map(|s| s.unwrap_or(0)).collect()
    }

    pub fn missing(&self) -> usize {
        self.scores.iter().filter(|s| s.is_none()).count()
    }
}

/// Queries the predictor on `K * e_i` for every coordinate `i`.
pub fn direct_recover<P: Predictor + ?Sized>(m: &P, k: u64, n: usize) -> Result<DirectScores> {
    let q = m.modulus();
    let kr = q.reduce(k);
    if kr == 0 {
        return Err(Error::InvalidParameter(format!(
            "K = {k} is 0 mod {q}"
        )));
    }
    let probes: Vec<Vec<Residue>> = (0..n)
        .map(|i| {
            let mut a = vec![0; n];
            a[i] = kr;
            a
        })
        .collect();
    let rows: Vec<&[Residue]> = probes.iter().map(Vec::as_slice).collect();
    let scores = m.predict_batch(&rows);
    Ok(DirectScores { k: kr, scores })
}

fn reduce_k(k: u64, q: Modulus) -> u64 {
    match q.reduce(k) {
        0 => q.q() - 1,
        r => r,
    }
}

/// The fixed probe scales followed by the random ones, each reduced mod `q`
/// (a reduction to 0 is replaced by `q - 1`).
pub fn k_schedule<R: Rng + ?Sized>(cfg: &RecoveryConfig, q: Modulus, rng: &mut R) -> Result<Vec<u64>> {
    let mut ks = Vec::with_capacity(cfg.fixed_k.len() + cfg.random_k_count);
    for k in &cfg.fixed_k {
        ks.push(reduce_k(k.eval(q.q())?, q));
    }
    let (lo, hi) = cfg.random_k_range;
    for _ in 0..cfg.random_k_count {
        let k = rng.gen_range(lo * q.q() + 1..hi * q.q());
        ks.push(reduce_k(k, q));
    }
    Ok(ks)
}
