use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{LweParams, SecretDist};
use crate::error::{Error, Result};
use crate::modq::{Modulus, ZqVector};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretKey {
    s: ZqVector,
    hamming: usize,
}

impl SecretKey {
    pub fn new(s: ZqVector) -> Self {
        let hamming = s.coords().iter().filter(|&&c| c != 0).count();
        Self { s, hamming }
    }

    pub fn from_bits(bits: &[u8], modulus: Modulus) -> Result<Self> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidParameter(format!(
                "binary secret entries must be 0 or 1, got {b}"
            )));
        }
        Ok(Self::new(ZqVector::from_reduced(
            bits.iter().map(|&b| b as u64),
            modulus,
        )))
    }

    pub fn vector(&self) -> &ZqVector {
        &self.s
    }

    pub fn coords(&self) -> &[u64] {
        self.s.coords()
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    pub fn modulus(&self) -> Modulus {
        self.s.modulus()
    }

    pub fn hamming(&self) -> usize {
        self.hamming
    }

    pub fn is_binary(&self) -> bool {
        self.s.coords().iter().all(|&c| c <= 1)
    }

    /// The secret as 0/1 bits, if it is binary.
    pub fn bits(&self) -> Option<Vec<u8>> {
        self.is_binary()
            .then(|| self.s.coords().iter().map(|&c| c as u8).collect())
    }
}

/// Draws a secret. Binary secrets have exactly `h` ones at uniformly random
/// positions.
pub fn gen_secret<R: Rng + ?Sized>(params: &LweParams, rng: &mut R) -> Result<SecretKey> {
    let n = params.n;
    let q = params.modulus;
    match params.secret {
        SecretDist::Uniform => Ok(SecretKey::new(ZqVector::uniform(n, q, rng))),
        SecretDist::Binary { .. } | SecretDist::BinaryDensity { .. } => {
            let h = params.hamming().expect("binary secret has a weight");
            if h > n {
                return Err(Error::HammingTooLarge { h, n });
            }
            let mut bits = vec![0u64; n];
            for i in index::sample(rng, n, h) {
                bits[i] = 1;
            }
            Ok(SecretKey {
                s: ZqVector::from_reduced(bits, q),
                hamming: h,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn binary(n: usize, h: usize) -> LweParams {
        LweParams::new(n, 251, 3.0, SecretDist::Binary { hamming: h }).unwrap()
    }

    #[test]
    fn zero_weight_gives_zero_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = gen_secret(&binary(10, 0), &mut rng).unwrap();
        assert_eq!(s.coords(), &[0; 10]);
        assert_eq!(s.hamming(), 0);
    }

    #[test]
    fn density_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (n, d) in [(30, 0.1), (50, 0.06)] {
            let p = LweParams::new(n, 251, 3.0, SecretDist::BinaryDensity { density: d }).unwrap();
            let s = gen_secret(&p, &mut rng).unwrap();
            assert_eq!(s.hamming(), 3);
            assert_eq!(s.coords().iter().filter(|&&c| c == 1).count(), 3);
            assert!(s.is_binary());
        }
    }

    #[test]
    fn weight_above_dimension_is_rejected() {
        let mut p = binary(4, 4);
        p.secret = SecretDist::Binary { hamming: 5 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            gen_secret(&p, &mut rng),
            Err(Error::HammingTooLarge { h: 5, n: 4 })
        ));
    }

    #[test]
    fn uniform_secret_in_range() {
        let p = LweParams::new(64, 251, 3.0, SecretDist::Uniform).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = gen_secret(&p, &mut rng).unwrap();
        assert!(s.coords().iter().all(|&c| c < 251));
        assert!(s.coords().iter().any(|&c| c > 1));
    }

    #[test]
    fn positions_are_uniform() {
        // Each position is selected with probability h/n; check every position
        // against a 4.5-sigma binomial band over 10^4 draws.
        let (n, h, draws) = (20usize, 3usize, 10_000usize);
        let p = binary(n, h);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            let s = gen_secret(&p, &mut rng).unwrap();
            assert_eq!(s.hamming(), h);
            for (i, &c) in s.coords().iter().enumerate() {
                counts[i] += c as usize;
            }
        }
        let pr = h as f64 / n as f64;
        let mean = draws as f64 * pr;
        let sd = (draws as f64 * pr * (1.0 - pr)).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - mean).abs() < 4.5 * sd,
                "position {i}: {c} vs {mean}"
            );
        }
    }

    #[test]
    fn from_bits() {
        let q = Modulus::new(251).unwrap();
        let s = SecretKey::from_bits(&[1, 0, 1], q).unwrap();
        assert_eq!(s.hamming(), 2);
        assert_eq!(s.bits(), Some(vec![1, 0, 1]));
        assert!(SecretKey::from_bits(&[2], q).is_err());
    }
}
