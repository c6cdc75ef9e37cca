use rand::Rng;

use super::binarize::{Method, SecretGuess};
use super::config::SampleCount;
use crate::data::SampleSet;
use crate::error::{Error, Result};
use crate::model::{check_tau, tolerance, Predictor};
use crate::modq::{Modulus, Residue};

/// Rows per coordinate for a given advantage.
pub fn distinguisher_samples(advantage: f64, policy: SampleCount) -> usize {
    match policy {
        SampleCount::Formula => ((2.0 / (advantage * advantage)).ceil() as usize).min(50),
        SampleCount::Fixed(t) => t,
    }
}

fn count_close(preds: &[Option<Residue>], truth: &[Residue], bound: u64, q: Modulus) -> usize {
    preds
        .iter()
        .zip(truth)
        .filter(|(p, &b)| p.is_some_and(|v| q.contains(v) && q.distance_unchecked(v, b) < bound))
        .count()
}

/// Recovers a binary secret bit by bit.
///
/// For coordinate `i`, column `i` of the first `t` rows of `lwe` is shifted
/// by fresh uniform values. If `s_i = 0` the shifted rows are still LWE
/// samples and the predictor stays close to `b`; if `s_i = 1` they are
/// uniform. The number of predictions within `floor(tau * q)` is compared
/// with that on fresh uniform pairs, and `s_i = 1` is declared when the gap is
/// at most `advantage * t / 2`.
#[allow(clippy::too_many_arguments)]
pub fn distinguisher_recover<P: Predictor + ?Sized, R: Rng + ?Sized>(
    m: &P,
    n: usize,
    acc: f64,
    tau: f64,
    lwe: &SampleSet,
    policy: SampleCount,
    rng: &mut R,
) -> Result<SecretGuess> {
    check_tau(tau)?;
    let advantage = acc - 2.0 * tau;
    if !(advantage > 0.0) {
        return Err(Error::NonPositiveAdvantage { acc, tau });
    }
    if lwe.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: lwe.n(),
        });
    }
    let q = lwe.modulus();
    let t = distinguisher_samples(advantage, policy);
    if t == 0 {
        return Err(Error::InvalidParameter("distinguisher needs t >= 1".into()));
    }
    if lwe.len() < t {
        return Err(Error::InsufficientSamples {
            needed: t,
            available: lwe.len(),
        });
    }
    let bound = tolerance(tau, q.q());
    let b_lwe: Vec<Residue> = (0..t).map(|j| lwe.b(j)).collect();
    let mut bits = vec![0u8; n];
    let mut shifted = vec![0; t * n];
    let mut unif = vec![0; t * n];
    for (i, bit) in bits.iter_mut().enumerate() {
        for v in unif.iter_mut() {
            *v = rng.gen_range(0..q.q());
        }
        let b_unif: Vec<Residue> = (0..t).map(|_| rng.gen_range(0..q.q())).collect();
        for j in 0..t {
            let c = rng.gen_range(0..q.q());
            let row = &mut shifted[j * n..(j + 1) * n];
            row.copy_from_slice(lwe.a(j));
            row[i] = q.add(row[i], c);
        }
        let rows: Vec<&[Residue]> = shifted.chunks_exact(n).chain(unif.chunks_exact(n)).collect();
        let preds = m.predict_batch(&rows);
        let c_lwe = count_close(&preds[..t], &b_lwe, bound, q);
        let c_unif = count_close(&preds[t..], &b_unif, bound, q);
        if (c_lwe as f64 - c_unif as f64) <= advantage * t as f64 / 2.0 {
            *bit = 1;
        }
    }
    Ok(SecretGuess {
        bits,
        method: Method::Distinguisher,
        k: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_samples, gen_secret, LweParams, SecretDist};
    use crate::model::{ExactOracle, NoisyOracle};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sample_count_rounding() {
        assert_eq!(distinguisher_samples(0.3, SampleCount::Formula), 23);
        assert_eq!(distinguisher_samples(0.1, SampleCount::Formula), 50);
        assert_eq!(distinguisher_samples(0.8, SampleCount::Formula), 4);
        assert_eq!(distinguisher_samples(0.8, SampleCount::Fixed(50)), 50);
    }

    fn instance(seed: u64) -> (crate::data::SecretKey, SampleSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = LweParams::new(30, 251, 3.0, SecretDist::Binary { hamming: 3 }).unwrap();
        let s = gen_secret(&p, &mut rng).unwrap();
        let set = gen_samples(&p, &s, 100, &mut rng).unwrap();
        (s, set)
    }

    #[test]
    fn exact_oracle_recovers_secret() {
        let (s, set) = instance(1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let o = ExactOracle::new(s.clone());
        let g = distinguisher_recover(&o, 30, 1.0, 0.1, &set, SampleCount::Fixed(50), &mut rng).unwrap();
        assert_eq!(Some(g.bits), s.bits());
        assert_eq!(g.method, Method::Distinguisher);
    }

    #[test]
    fn refuses_without_advantage() {
        let (s, set) = instance(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let o = NoisyOracle::new(s, 0.0, 0.1, 0).unwrap();
        for acc in [0.2, 0.1] {
            assert!(matches!(
                distinguisher_recover(&o, 30, acc, 0.1, &set, SampleCount::Formula, &mut rng),
                Err(Error::NonPositiveAdvantage { .. })
            ));
        }
    }

    #[test]
    fn needs_enough_rows() {
        let (s, set) = instance(5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let o = ExactOracle::new(s);
        assert!(matches!(
            distinguisher_recover(&o, 30, 0.5, 0.1, &set.take(10), SampleCount::Formula, &mut rng),
            Err(Error::InsufficientSamples { needed: 23, available: 10 })
        ));
    }
}
