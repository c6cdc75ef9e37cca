//! Arithmetic over Z_q: residues, centered representatives, circular distance
//! and the discrete Gaussian error sampler.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A residue in `[0, q)`.
pub type Residue = u64;

/// Largest modulus accepted. Residues then fit in 30 bits and a dot product of
/// up to 2^10 terms never overflows the 128-bit accumulator.
pub const MAX_MODULUS: u64 = 1 << 30;

/// The modulus `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct Modulus(u64);

impl Modulus {
    pub fn new(q: u64) -> Result<Self> {
        if !(2..=MAX_MODULUS).contains(&q) {
            return Err(Error::InvalidModulus(q));
        }
        Ok(Self(q))
    }

    #[inline]
    pub fn q(self) -> u64 {
        self.0
    }

    /// `ceil(log2 q)`.
    pub fn bit_size(self) -> u32 {
        64 - (self.0 - 1).leading_zeros()
    }

    #[inline]
    pub fn reduce(self, x: u64) -> Residue {
        x % self.0
    }

    /// Reduces a signed integer into `[0, q)`.
    #[inline]
    pub fn reduce_signed(self, x: i64) -> Residue {
        x.rem_euclid(self.0 as i64) as u64
    }

    #[inline]
    pub fn add(self, x: Residue, y: Residue) -> Residue {
        let s = x + y;
        if s >= self.0 {
            s - self.0
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(self, x: Residue, y: Residue) -> Residue {
        if x >= y {
            x - y
        } else {
            x + self.0 - y
        }
    }

    #[inline]
    pub fn neg(self, x: Residue) -> Residue {
        if x == 0 {
            0
        } else {
            self.0 - x
        }
    }

    #[inline]
    pub fn mul(self, x: Residue, y: Residue) -> Residue {
        ((x as u128 * y as u128) % self.0 as u128) as u64
    }

    #[inline]
    pub fn contains(self, x: u64) -> bool {
        x < self.0
    }

    fn check(self, x: u64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::ResidueOutOfRange { value: x, q: self.0 })
        }
    }

    /// Representative of `x` in `(-q/2, q/2]`.
    pub fn centered_lift(self, x: Residue) -> Result<i64> {
        self.check(x)?;
        Ok(self.lift_unchecked(x))
    }

    #[inline]
    pub(crate) fn lift_unchecked(self, x: Residue) -> i64 {
        if x <= self.0 / 2 {
            x as i64
        } else {
            x as i64 - self.0 as i64
        }
    }

    /// Circular distance `min(|x-y|, q-|x-y|)`, a value in `[0, floor(q/2)]`.
    pub fn wrap_distance(self, x: Residue, y: Residue) -> Result<u64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.distance_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn distance_unchecked(self, x: Residue, y: Residue) -> u64 {
        let d = x.abs_diff(y);
        d.min(self.0 - d)
    }
}

impl TryFrom<u64> for Modulus {
    type Error = Error;

    fn try_from(q: u64) -> Result<Self> {
        Modulus::new(q)
    }
}

impl From<Modulus> for u64 {
    fn from(m: Modulus) -> u64 {
        m.0
    }
}

impl std::fmt::Display for Modulus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Free-function form of [`Modulus::centered_lift`].
pub fn centered_lift(x: Residue, q: Modulus) -> Result<i64> {
    q.centered_lift(x)
}

/// Free-function form of [`Modulus::wrap_distance`].
pub fn wrap_distance(x: Residue, y: Residue, q: Modulus) -> Result<u64> {
    q.wrap_distance(x, y)
}

/// A vector over Z_q.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZqVector {
    coords: Vec<Residue>,
    modulus: Modulus,
}

impl ZqVector {
    pub fn new(coords: Vec<Residue>, modulus: Modulus) -> Result<Self> {
        for &c in &coords {
            modulus.check(c)?;
        }
        Ok(Self { coords, modulus })
    }

    /// Reduces arbitrary integers into range instead of rejecting them.
    pub fn from_reduced(coords: impl IntoIterator<Item = u64>, modulus: Modulus) -> Self {
        Self {
            coords: coords.into_iter().map(|c| modulus.reduce(c)).collect(),
            modulus,
        }
    }

    pub fn zeros(n: usize, modulus: Modulus) -> Self {
        Self {
            coords: vec![0; n],
            modulus,
        }
    }

    pub fn uniform<R: Rng + ?Sized>(n: usize, modulus: Modulus, rng: &mut R) -> Self {
        Self {
            coords: (0..n).map(|_| rng.gen_range(0..modulus.q())).collect(),
            modulus,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn coords(&self) -> &[Residue] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<Residue> {
        self.coords
    }

    pub fn dot(&self, other: &ZqVector) -> Result<Residue> {
        mod_dot(self, other)
    }
}

impl std::ops::Index<usize> for ZqVector {
    type Output = Residue;

    fn index(&self, i: usize) -> &Residue {
        &self.coords[i]
    }
}

/// `(sum a_i s_i) mod q`.
pub fn mod_dot(a: &ZqVector, s: &ZqVector) -> Result<Residue> {
    if a.modulus != s.modulus {
        return Err(Error::ModulusMismatch {
            left: a.modulus.q(),
            right: s.modulus.q(),
        });
    }
    if a.len() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: s.len(),
        });
    }
    Ok(dot_slices(&a.coords, &s.coords, a.modulus))
}

/// Dot product on raw residue slices of equal length.
///
/// Each product is below 2^60, so a u128 accumulator holds any realistic sum.
#[inline]
pub fn dot_slices(a: &[Residue], s: &[Residue], q: Modulus) -> Residue {
    debug_assert_eq!(a.len(), s.len());
    let acc: u128 = a
        .iter()
        .zip(s)
        .map(|(&x, &y)| x as u128 * y as u128)
        .sum();
    (acc % q.q() as u128) as u64
}

/// Centered discrete Gaussian over the integers, truncated at six standard
/// deviations and sampled by inversion of a precomputed CDF table.
#[derive(Debug, Clone)]
pub struct ErrorSampler {
    sigma: f64,
    bound: i64,
    cdf: Vec<f64>,
}

impl ErrorSampler {
    pub const TAIL_CUT: f64 = 6.0;

    pub fn new(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "error width sigma must be finite and non-negative, got {sigma}"
            )));
        }
        if sigma == 0.0 {
            return Ok(Self {
                sigma,
                bound: 0,
                cdf: vec![1.0],
            });
        }
        let bound = (Self::TAIL_CUT * sigma).ceil() as i64;
        let weights: Vec<f64> = (-bound..=bound)
            .map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Self { sigma, bound, cdf })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Largest magnitude the sampler can return.
    pub fn bound(&self) -> i64 {
        self.bound
    }

    /// Probability of `x` under the truncated distribution.
    pub fn pmf(&self, x: i64) -> f64 {
        if x.abs() > self.bound {
            return 0.0;
        }
        let i = (x + self.bound) as usize;
        if i == 0 {
            self.cdf[0]
        } else {
            self.cdf[i] - self.cdf[i - 1]
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        if self.bound == 0 {
            return 0;
        }
        let u: f64 = rng.gen();
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.cdf.len() - 1) as i64 - self.bound
    }
}

/// Draws one error term.
pub fn sample_error<R: Rng + ?Sized>(sampler: &ErrorSampler, rng: &mut R) -> i64 {
    sampler.sample(rng)
}
