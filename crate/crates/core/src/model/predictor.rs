use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{SampleSet, SecretKey};
use crate::error::{Error, Result};
use crate::modq::{dot_slices, Modulus, Residue};

/// Anything that maps `a` to a guess of `b`. `None` is a failed prediction
/// (for a model, an undecodable output) and always counts as a miss.
///
/// Implementations must be deterministic: the same input gives the same
/// output for the lifetime of the predictor.
pub trait Predictor {
    fn modulus(&self) -> Modulus;

    fn predict(&self, a: &[Residue]) -> Option<Residue>;

    fn predict_batch(&self, rows: &[&[Residue]]) -> Vec<Option<Residue>> {
        rows.iter().map(|a| self.predict(a)).collect()
    }

    fn predict_set(&self, set: &SampleSet) -> Vec<Option<Residue>> {
        const CHUNK: usize = 256;
        let rows: Vec<&[Residue]> = set.rows().map(|(a, _)| a).collect();
        rows.chunks(CHUNK)
            .flat_map(|c| self.predict_batch(c))
            .collect()
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn modulus(&self) -> Modulus {
        (**self).modulus()
    }
    fn predict(&self, a: &[Residue]) -> Option<Residue> {
        (**self).predict(a)
    }
    fn predict_batch(&self, rows: &[&[Residue]]) -> Vec<Option<Residue>> {
        (**self).predict_batch(rows)
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn modulus(&self) -> Modulus {
        (**self).modulus()
    }
    fn predict(&self, a: &[Residue]) -> Option<Residue> {
        (**self).predict(a)
    }
    fn predict_batch(&self, rows: &[&[Residue]]) -> Vec<Option<Residue>> {
        (**self).predict_batch(rows)
    }
}

/// Returns `a . s mod q` exactly. Inputs of the wrong length fail.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    secret: SecretKey,
}

impl ExactOracle {
    pub fn new(secret: SecretKey) -> Self {
        Self { secret }
    }

    pub fn secret(&self) -> &SecretKey {
        &self.secret
    }
}

impl Predictor for ExactOracle {
    fn modulus(&self) -> Modulus {
        self.secret.modulus()
    }

    fn predict(&self, a: &[Residue]) -> Option<Residue> {
        (a.len() == self.secret.n()).then(|| dot_slices(a, self.secret.coords(), self.modulus()))
    }
}

fn input_seed(seed: u64, a: &[Residue]) -> u64 {
    // FNV-1a over the seed and coordinates
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in std::iter::once(seed).chain(a.iter().copied()) {
        for byte in x.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Stand-in for a partly trained model: with probability `hit_rate` the
/// answer is uniform within `floor(tau * q)` of the true `b`, otherwise
/// uniform on Z_q. Randomness is derived from the input, so repeated queries
/// agree.
#[derive(Debug, Clone)]
pub struct NoisyOracle {
    secret: SecretKey,
    hit_rate: f64,
    tau: f64,
    seed: u64,
}

impl NoisyOracle {
    pub fn new(secret: SecretKey, hit_rate: f64, tau: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&hit_rate) {
            return Err(Error::InvalidParameter(format!(
                "hit rate must lie in [0, 1], got {hit_rate}"
            )));
        }
        check_tau(tau)?;
        Ok(Self {
            secret,
            hit_rate,
            tau,
            seed,
        })
    }

    /// Expected `acc_tau` at this oracle's own tolerance.
    pub fn expected_accuracy(&self) -> f64 {
        let q = self.modulus().q();
        let band = 2 * tolerance(self.tau, q) + 1;
        self.hit_rate + (1.0 - self.hit_rate) * band.min(q) as f64 / q as f64
    }
}

impl Predictor for NoisyOracle {
    fn modulus(&self) -> Modulus {
        self.secret.modulus()
    }

    fn predict(&self, a: &[Residue]) -> Option<Residue> {
        let q = self.modulus();
        if a.len() != self.secret.n() {
            return None;
        }
        let b = dot_slices(a, self.secret.coords(), q);
        let mut rng = ChaCha8Rng::seed_from_u64(input_seed(self.seed, a));
        if rng.gen_bool(self.hit_rate) {
            let w = tolerance(self.tau, q.q()) as i64;
            Some(q.add(b, q.reduce_signed(rng.gen_range(-w..=w))))
        } else {
            Some(rng.gen_range(0..q.q()))
        }
    }
}

/// Ignores its input and answers uniformly on Z_q (deterministically per input).
#[derive(Debug, Clone, Copy)]
pub struct UniformPredictor {
    modulus: Modulus,
    seed: u64,
}

impl UniformPredictor {
    pub fn new(modulus: Modulus, seed: u64) -> Self {
        Self { modulus, seed }
    }
}

impl Predictor for UniformPredictor {
    fn modulus(&self) -> Modulus {
        self.modulus
    }

    fn predict(&self, a: &[Residue]) -> Option<Residue> {
        let mut rng = ChaCha8Rng::seed_from_u64(input_seed(self.seed, a));
        Some(rng.gen_range(0..self.modulus.q()))
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "tau must lie in (0, 0.5), got {tau}"
        )))
    }
}

/// Largest wrap distance counted as a hit: `floor(tau * q)`.
pub fn tolerance(tau: f64, q: u64) -> u64 {
    (tau * q as f64).floor() as u64
}

/// Fraction of rows whose prediction lies within wrap distance `tau * q` of `b`.
pub fn acc_tau<P: Predictor + ?Sized>(p: &P, test: &SampleSet, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if test.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let q = test.modulus();
    let bound = tolerance(tau, q.q());
    let preds = p.predict_set(test);
    let hits = preds
        .iter()
        .zip(test.b_values())
        .filter(|(p, &b)| p.is_some_and(|v| q.contains(v) && q.distance_unchecked(v, b) <= bound))
        .count();
    Ok(hits as f64 / test.len() as f64)
}

/// Fraction of rows predicted exactly.
pub fn exact_accuracy<P: Predictor + ?Sized>(p: &P, test: &SampleSet) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let preds = p.predict_set(test);
    let hits = preds
        .iter()
        .zip(test.b_values())
        .filter(|(p, &b)| **p == Some(b))
        .count();
    Ok(hits as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_samples, gen_secret, LweParams, SecretDist};

    fn setup(n: usize, sigma: f64, rows: usize, seed: u64) -> (SecretKey, SampleSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = LweParams::new(n, 251, sigma, SecretDist::Binary { hamming: 3 }).unwrap();
        let s = gen_secret(&p, &mut rng).unwrap();
        let set = gen_samples(&p, &s, rows, &mut rng).unwrap();
        (s, set)
    }

    #[test]
    fn exact_oracle_on_noiseless_data() {
        let (s, set) = setup(10, 0.0, 500, 0);
        let o = ExactOracle::new(s);
        for tau in [0.01, 0.1, 0.49] {
            assert_eq!(acc_tau(&o, &set, tau).unwrap(), 1.0);
        }
        assert_eq!(exact_accuracy(&o, &set).unwrap(), 1.0);
        assert_eq!(o.predict(&[1, 2]), None);
    }

    #[test]
    fn exact_oracle_on_noisy_data_covers_error_mass() {
        let (s, set) = setup(10, 3.0, 5000, 1);
        let o = ExactOracle::new(s.clone());
        let tau = 0.01; // bound 2
        let inside = set
            .residuals(s.coords())
            .unwrap()
            .iter()
            .filter(|r| r.abs() <= 2)
            .count() as f64
            / set.len() as f64;
        assert!(acc_tau(&o, &set, tau).unwrap() >= inside);
    }

    #[test]
    fn tau_and_empty_set_errors() {
        let (s, set) = setup(4, 0.0, 10, 2);
        let o = ExactOracle::new(s);
        assert!(acc_tau(&o, &set, 0.0).is_err());
        assert!(acc_tau(&o, &set, 0.5).is_err());
        assert!(matches!(
            acc_tau(&o, &set.take(0), 0.1),
            Err(Error::EmptySampleSet)
        ));
    }

    #[test]
    fn noisy_oracle_is_deterministic_and_matches_mixture() {
        let (s, set) = setup(10, 0.0, 20_000, 3);
        let o = NoisyOracle::new(s, 0.5, 0.1, 7).unwrap();
        assert_eq!(o.predict(set.a(0)), o.predict(set.a(0)));
        let acc = acc_tau(&o, &set, 0.1).unwrap();
        assert!((acc - o.expected_accuracy()).abs() < 0.015, "{acc}");
        assert!((o.expected_accuracy() - 0.6016).abs() < 1e-3);
    }

    #[test]
    fn acc_is_monotone_in_tau() {
        let (s, set) = setup(10, 3.0, 2000, 4);
        let o = NoisyOracle::new(s, 0.3, 0.05, 1).unwrap();
        let mut last = 0.0;
        for tau in [0.001, 0.01, 0.05, 0.1, 0.2, 0.3, 0.49] {
            let a = acc_tau(&o, &set, tau).unwrap();
            assert!(a >= last);
            last = a;
        }
    }

    #[test]
    fn rejects_bad_hit_rate() {
        let (s, _) = setup(4, 0.0, 1, 5);
        assert!(NoisyOracle::new(s.clone(), 1.5, 0.1, 0).is_err());
        assert!(NoisyOracle::new(s, 0.5, 0.7, 0).is_err());
    }
}
